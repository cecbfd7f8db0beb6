#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stereoeval/epipolar_attention.hpp"
#include "stereoeval/eval_harness.hpp"
#include "stereoeval/feature_match.hpp"
#include "stereoeval/media_io.hpp"
#include "stereoeval/quality_metrics.hpp"
#include "stereoeval/stereo_disparity.hpp"
#include "stereoeval/synthetic_scene.hpp"
#include "stereoeval/temporal_flow.hpp"
#include "stereoeval/warp_synth.hpp"

namespace se = stereoeval;
using nlohmann::json;

namespace {

// Thrown with the name of the metric that failed; main() maps it to exit 2.
struct MetricFailure {
  std::string metric;
  std::string message;
};

void require_same_length(const se::VideoClip& a, const se::VideoClip& b, const char* what) {
  if (a.size() != b.size()) {
    throw se::ShapeError(std::string(what) + ": clips have " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()) + " frames");
  }
}

std::vector<se::DisparityMap> load_disparities_for(const se::fs::path& dir, int frames) {
  auto maps = se::load_disparity_sequence(dir);
  if (static_cast<int>(maps.size()) != frames) {
    throw se::ShapeError("disparity directory holds " + std::to_string(maps.size()) +
                         " maps for " + std::to_string(frames) + " frames");
  }
  return maps;
}

std::string scale_label(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", s);
  return buf;
}

// --- convert / augment / anaglyph ---

struct ConvertArgs {
  std::string left, disparity, out, mask_out;
  double scale = 1.0;
};

void run_convert(const ConvertArgs& a) {
  const se::VideoClip left = se::load_clip(a.left);
  const auto disp = load_disparities_for(a.disparity, left.size());
  se::VideoClip out;
  out.fps = left.fps;
  std::vector<se::Mask> masks;
  for (int t = 0; t < left.size(); ++t) {
    se::WarpResult w = se::forward_warp(left.frames[t], disp[t], a.scale);
    out.frames.push_back(std::move(w.image));
    masks.push_back(std::move(w.valid));
  }
  se::save_clip(out, a.out);
  if (!a.mask_out.empty()) {
    se::fs::create_directories(a.mask_out);
    for (int t = 0; t < left.size(); ++t) {
      se::save_mask_png(masks[t], se::fs::path(a.mask_out) / se::frame_file_name(t, left.size(), ".png"));
    }
  }
}

struct AugmentArgs {
  std::string left, disparity, out;
  std::vector<double> scales;
};

void run_augment(const AugmentArgs& a) {
  const se::VideoClip left = se::load_clip(a.left);
  const auto disp = load_disparities_for(a.disparity, left.size());
  const se::ScaleSet scales = a.scales.empty() ? se::ScaleSet::augmentation_default()
                                               : se::ScaleSet(a.scales);
  json manifest = json::array();
  for (double s : scales.factors()) {
    const se::fs::path dir = se::fs::path(a.out) / ("scale_" + scale_label(s));
    se::VideoClip view;
    json deltas = json::array();
    se::fs::create_directories(dir / "mask");
    for (int t = 0; t < left.size(); ++t) {
      se::AugmentedPair pair = se::make_augmented_pair(left.frames[t], disp[t], s);
      se::save_mask_png(pair.warp.valid, dir / "mask" / se::frame_file_name(t, left.size(), ".png"));
      view.frames.push_back(std::move(pair.warp.image));
      deltas.push_back(pair.delta);
    }
    se::save_clip(view, dir / "right");
    manifest.push_back({{"scale", s}, {"dir", dir.filename().string()}, {"delta", deltas}});
  }
  std::ofstream(se::fs::path(a.out) / "manifest.json") << manifest.dump(2) << "\n";
}

void run_anaglyph(const std::string& left_dir, const std::string& right_dir, const std::string& out) {
  const se::VideoClip left = se::load_clip(left_dir);
  const se::VideoClip right = se::load_clip(right_dir);
  require_same_length(left, right, "anaglyph");
  se::VideoClip result;
  for (int t = 0; t < left.size(); ++t) result.frames.push_back(se::anaglyph(left.frames[t], right.frames[t]));
  se::save_clip(result, out);
}

// --- metric ---

struct MetricArgs {
  std::string metric, a, b, left, dump_matches, flow_dump;
  se::PatchPsnrConfig ppsnr;
  se::MatchConfig match;
  se::FlowConfig flow;
};

json run_metric(const MetricArgs& m) {
  const se::VideoClip a = se::load_clip(m.a);
  const se::VideoClip b = se::load_clip(m.b);
  require_same_length(a, b, "metric");
  json out;
  out["metric"] = m.metric;
  try {
    if (m.metric == "psnr" || m.metric == "ssim" || m.metric == "ppsnr") {
      const auto kind = m.metric == "psnr"   ? se::FrameMetric::Psnr
                        : m.metric == "ssim" ? se::FrameMetric::Ssim
                                             : se::FrameMetric::PatchPsnr;
      const se::ClipMetricResult r = se::clip_metric(kind, a, b, m.ppsnr);
      out["aggregate"] = r.aggregate;
      out["per_frame"] = r.per_frame;
    } else if (m.metric == "match") {
      if (m.left.empty()) throw se::InvalidArgumentError("--left is required for the match metric");
      const se::VideoClip left = se::load_clip(m.left);
      require_same_length(left, a, "match");
      const se::DetectorConfig det;
      std::vector<double> errors;
      se::MatchCounts total;
      std::ostringstream dump;
      dump << "frame,u,v,status\n";
      for (int t = 0; t < left.size(); ++t) {
        const auto kps = se::detect_keypoints(left.frames[t], det);
        const auto m_gt = se::match_epipolar(kps, left.frames[t], a.frames[t], m.match, det,
                                             se::ColumnRange::all(a.width()));
        const auto m_pred = se::match_epipolar(kps, left.frames[t], b.frames[t], m.match, det,
                                               se::ColumnRange::all(b.width()));
        const auto br = se::matchability_error(m_gt, m_pred);
        errors.push_back(br.error);
        total.tp += br.n_tp;
        total.fp += br.n_fp;
        total.fn += br.n_fn;
        for (const auto& c : se::classify_matches(m_gt, m_pred)) {
          dump << t << ',' << c.key.u << ',' << c.key.v << ',' << se::to_string(c.status) << '\n';
        }
      }
      double mean = 0.0;
      for (double e : errors) mean += e;
      out["aggregate"] = mean / errors.size();
      out["per_frame"] = errors;
      out["counts"] = {{"tp", total.tp}, {"fp", total.fp}, {"fn", total.fn}};
      if (!m.dump_matches.empty()) {
        std::ofstream f(m.dump_matches);
        if (!f) throw se::IoError("cannot write match dump", m.dump_matches);
        f << dump.str();
      }
    } else if (m.metric == "temporal") {
      const se::TemporalErrorResult r = se::temporal_error(a, b, m.flow);
      out["aggregate"] = r.mean;
      out["per_frame"] = r.per_pair;
      if (!m.flow_dump.empty()) {
        const se::fs::path dir(m.flow_dump);
        se::fs::create_directories(dir);
        for (int t = 0; t + 1 < a.size(); ++t) {
          const auto fa = se::optical_flow(a.frames[t], a.frames[t + 1], m.flow);
          const auto fb = se::optical_flow(b.frames[t], b.frames[t + 1], m.flow);
          const std::string stem = se::frame_file_name(t, a.size() - 1, "");
          se::save_pfm(fa.du, dir / ("a_" + stem + "_du.pfm"));
          se::save_pfm(fa.dv, dir / ("a_" + stem + "_dv.pfm"));
          se::save_pfm(fb.du, dir / ("b_" + stem + "_du.pfm"));
          se::save_pfm(fb.dv, dir / ("b_" + stem + "_dv.pfm"));
        }
      }
    } else {
      throw se::InvalidArgumentError("unknown metric '" + m.metric + "'");
    }
  } catch (const se::IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw MetricFailure{m.metric, e.what()};
  }
  return out;
}

// --- disparity ---

struct DisparityArgs {
  std::string left, right, out;
  se::SgmConfig sgm;
};

void run_disparity(const DisparityArgs& d) {
  const se::VideoClip left = se::load_clip(d.left);
  const se::VideoClip right = se::load_clip(d.right);
  require_same_length(left, right, "disparity");
  std::vector<se::DisparityMap> maps;
  for (int t = 0; t < left.size(); ++t) {
    maps.push_back(se::estimate_disparity(left.frames[t], right.frames[t], d.sgm));
  }
  se::save_disparity_sequence(maps, d.out);
}

// --- attn-bench ---

struct AttnArgs {
  int h = 512, w = 512, c = 16, d = 8;
  std::string mode = "epipolar";
  std::string weights;
  std::uint64_t seed = 1;
  int bytes = 2;
};

se::FeatureMap random_map(int h, int w, int c, std::mt19937_64& rng) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> v(static_cast<std::size_t>(h) * w * c);
  for (float& x : v) x = normal(rng);
  return se::FeatureMap(h, w, c, std::move(v));
}

json run_attn_bench(const AttnArgs& a) {
  if (a.h < 1 || a.w < 1 || a.c < 1 || a.d < 1) {
    throw se::InvalidArgumentError("attn-bench dimensions must be >= 1");
  }
  const se::AttentionWeights weights =
      a.weights.empty() ? se::AttentionWeights::random(a.c, a.d, a.seed) : se::load_attention_weights(a.weights);
  if (weights.channels != a.c) throw se::ShapeError("weight file channel count differs from --c");
  std::mt19937_64 rng(a.seed);
  const se::FeatureMap h = random_map(a.h, a.w, a.c, rng);
  const se::FeatureMap g = random_map(a.h, a.w, a.c, rng);

  const bool oracle = a.mode == "oracle";
  if (!oracle && a.mode != "epipolar") throw se::InvalidArgumentError("--mode must be epipolar or oracle");
  // The dense reference walks (HW)^2 logits.
  const double dense_work = static_cast<double>(a.h) * a.w * a.h * a.w;
  if (oracle && dense_work > 1.1e9) {
    throw se::InvalidArgumentError("oracle mode is limited to (H*W)^2 <= 1.1e9; reduce --h/--w");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const se::FeatureMap out = oracle ? se::masked_full_attention(h, g, weights) : se::epipolar_attention(h, g, weights);
  const auto t1 = std::chrono::steady_clock::now();
  double checksum = 0.0;
  for (float x : out.data()) checksum += x;

  json j;
  j["mode"] = a.mode;
  j["h"] = a.h;
  j["w"] = a.w;
  j["c"] = a.c;
  j["d"] = weights.head_dim;
  j["seconds"] = std::chrono::duration<double>(t1 - t0).count();
  j["checksum"] = checksum;
  j["bytes_per_element"] = a.bytes;
  j["memory_epipolar_bytes"] = se::attention_memory_model(a.h, a.w, a.bytes, se::AttentionMode::Epipolar);
  j["memory_full_bytes"] = se::attention_memory_model(a.h, a.w, a.bytes, se::AttentionMode::Full);
  return j;
}

// --- evaluate / sensitivity / synth ---

struct ProtocolArgs {
  std::string left, right_gt, right_pred, gt_disp;
  std::optional<double> delta, scale, shift;
  se::ProtocolConfig cfg;
};

se::ProtocolRun load_protocol(const ProtocolArgs& p) {
  se::ProtocolRun run;
  run.input.left = se::load_clip(p.left);
  run.input.right = se::load_clip(p.right_gt);
  run.candidate = se::load_clip(p.right_pred);
  if (!p.gt_disp.empty()) run.gt_disparity = se::load_disparity_sequence(p.gt_disp);
  run.global = {p.scale, p.shift, p.delta};
  run.config = p.cfg;
  return run;
}

void add_protocol_options(CLI::App* cmd, ProtocolArgs& p, bool with_gt_disp) {
  cmd->add_option("--left", p.left, "left-view frame directory")->required();
  cmd->add_option("--right-gt", p.right_gt, "ground-truth right-view frame directory")->required();
  cmd->add_option("--right-pred", p.right_pred, "generated right-view frame directory")->required();
  if (with_gt_disp) cmd->add_option("--gt-disp", p.gt_disp, "ground-truth disparity PFM directory");
  cmd->add_option("--ppsnr-patch", p.cfg.ppsnr.patch)->capture_default_str();
  cmd->add_option("--ppsnr-stride", p.cfg.ppsnr.stride)->capture_default_str();
  cmd->add_option("--ppsnr-range", p.cfg.ppsnr.search_range)->capture_default_str();
  cmd->add_option("--psnr-cap", p.cfg.psnr_cap)->capture_default_str();
  cmd->add_option("--match-vtol", p.cfg.match.v_tol)->capture_default_str();
  cmd->add_option("--match-ratio", p.cfg.match.ratio)->capture_default_str();
  cmd->add_option("--match-dmax", p.cfg.match.d_max)->capture_default_str();
  cmd->add_option("--keypoints", p.cfg.detector.max_count)->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stereo video conversion evaluation toolkit"};
  app.require_subcommand(1);

  ConvertArgs convert;
  auto* c_convert = app.add_subcommand("convert", "forward-warp a left clip by scaled disparity");
  c_convert->add_option("--left", convert.left)->required();
  c_convert->add_option("--disparity", convert.disparity, "PFM directory")->required();
  c_convert->add_option("--scale", convert.scale)->capture_default_str();
  c_convert->add_option("--out", convert.out)->required();
  c_convert->add_option("--mask-out", convert.mask_out);

  AugmentArgs augment;
  auto* c_augment = app.add_subcommand("augment", "warp a left clip at every disparity scale");
  c_augment->add_option("--left", augment.left)->required();
  c_augment->add_option("--disparity", augment.disparity)->required();
  c_augment->add_option("--scales", augment.scales, "comma separated factors")->delimiter(',');
  c_augment->add_option("--out", augment.out)->required();

  std::string an_left, an_right, an_out;
  auto* c_anaglyph = app.add_subcommand("anaglyph", "red-cyan composite of a stereo clip");
  c_anaglyph->add_option("--left", an_left)->required();
  c_anaglyph->add_option("--right", an_right)->required();
  c_anaglyph->add_option("--out", an_out)->required();

  MetricArgs metric;
  auto* c_metric = app.add_subcommand("metric", "one metric over a pair of clips");
  c_metric->add_option("--metric", metric.metric)
      ->required()
      ->check(CLI::IsMember({"psnr", "ssim", "ppsnr", "match", "temporal"}));
  c_metric->add_option("--a", metric.a, "reference clip (ground-truth right for match/temporal)")->required();
  c_metric->add_option("--b", metric.b, "compared clip")->required();
  c_metric->add_option("--left", metric.left, "left clip (match)");
  c_metric->add_option("--patch", metric.ppsnr.patch)->capture_default_str();
  c_metric->add_option("--stride", metric.ppsnr.stride)->capture_default_str();
  c_metric->add_option("--range", metric.ppsnr.search_range)->capture_default_str();
  c_metric->add_option("--dump-matches", metric.dump_matches, "CSV of (u,v,status)");
  c_metric->add_option("--flow-dump", metric.flow_dump, "directory for du/dv PFM pairs");

  DisparityArgs disparity;
  auto* c_disp = app.add_subcommand("disparity", "semi-global matching on a stereo clip");
  c_disp->add_option("--left", disparity.left)->required();
  c_disp->add_option("--right", disparity.right)->required();
  c_disp->add_option("--out", disparity.out)->required();
  c_disp->add_option("--dmin", disparity.sgm.d_min)->capture_default_str();
  c_disp->add_option("--dmax", disparity.sgm.d_max)->capture_default_str();
  c_disp->add_option("--p1", disparity.sgm.p1)->capture_default_str();
  c_disp->add_option("--p2", disparity.sgm.p2)->capture_default_str();
  c_disp->add_option("--block", disparity.sgm.block)->capture_default_str();
  c_disp->add_option("--paths", disparity.sgm.paths)->capture_default_str();

  AttnArgs attn;
  auto* c_attn = app.add_subcommand("attn-bench", "time one attention pass and print memory figures");
  c_attn->set_help_flag("--help", "Print this help message and exit");  // frees -h for --h
  c_attn->add_option("--h", attn.h)->capture_default_str();
  c_attn->add_option("--w", attn.w)->capture_default_str();
  c_attn->add_option("--c", attn.c)->capture_default_str();
  c_attn->add_option("--d", attn.d)->capture_default_str();
  c_attn->add_option("--mode", attn.mode)->check(CLI::IsMember({"epipolar", "oracle"}))->capture_default_str();
  c_attn->add_option("--weights", attn.weights, "EPAW weight file");
  c_attn->add_option("--seed", attn.seed)->capture_default_str();
  c_attn->add_option("--bytes", attn.bytes, "bytes per attention entry")->capture_default_str();

  ProtocolArgs eval;
  std::string eval_out;
  auto* c_eval = app.add_subcommand("evaluate", "full protocol, JSON report");
  add_protocol_options(c_eval, eval, true);
  c_eval->add_option("--out", eval_out, "report path")->required();
  c_eval->add_option("--sgm-dmin", eval.cfg.sgm.d_min)->capture_default_str();
  c_eval->add_option("--sgm-dmax", eval.cfg.sgm.d_max)->capture_default_str();
  c_eval->add_option("--sgm-p1", eval.cfg.sgm.p1)->capture_default_str();
  c_eval->add_option("--sgm-p2", eval.cfg.sgm.p2)->capture_default_str();
  c_eval->add_option("--flow-levels", eval.cfg.flow.levels)->capture_default_str();
  c_eval->add_option("--flow-block", eval.cfg.flow.block)->capture_default_str();
  c_eval->add_option("--flow-radius", eval.cfg.flow.radius)->capture_default_str();
  c_eval->add_option("--delta", eval.delta, "median disparity given to the method");
  c_eval->add_option("--scale", eval.scale, "scale factor given to the method");
  c_eval->add_option("--shift", eval.shift, "shift factor given to the method");

  ProtocolArgs sens;
  std::string sens_kind = "shift", sens_out;
  std::vector<double> sens_levels;
  auto* c_sens = app.add_subcommand("sensitivity", "metric curves under shift or blur of the candidate");
  add_protocol_options(c_sens, sens, false);
  c_sens->add_option("--kind", sens_kind)->check(CLI::IsMember({"shift", "blur"}))->capture_default_str();
  c_sens->add_option("--levels", sens_levels)->delimiter(',')->required();
  c_sens->add_option("--out", sens_out, "CSV path")->required();

  std::uint64_t syn_seed = 7;
  int syn_w = 512, syn_h = 512, syn_n = 16, syn_motion = 2;
  std::string syn_profile = "two_plane:0,8", syn_out;
  auto* c_synth = app.add_subcommand("synth", "write a synthetic stereo scene");
  c_synth->add_option("--seed", syn_seed)->capture_default_str();
  c_synth->add_option("--width", syn_w)->capture_default_str();
  c_synth->add_option("--height", syn_h)->capture_default_str();
  c_synth->add_option("--frames", syn_n)->capture_default_str();
  c_synth->add_option("--motion", syn_motion, "camera pan in px per frame")->capture_default_str();
  c_synth->add_option("--profile", syn_profile, "constant:D or two_plane:BG,FG")->capture_default_str();
  c_synth->add_option("--out", syn_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_convert->parsed()) {
      run_convert(convert);
    } else if (c_augment->parsed()) {
      run_augment(augment);
    } else if (c_anaglyph->parsed()) {
      run_anaglyph(an_left, an_right, an_out);
    } else if (c_metric->parsed()) {
      std::cout << run_metric(metric).dump(2) << "\n";
    } else if (c_disp->parsed()) {
      run_disparity(disparity);
    } else if (c_attn->parsed()) {
      std::cout << run_attn_bench(attn).dump(2) << "\n";
    } else if (c_eval->parsed()) {
      const se::ProtocolRun run = load_protocol(eval);
      const se::EvaluationReport report = se::run_protocol(run);
      se::save_report(report, eval_out);
      if (!report.errors.empty()) {
        for (const auto& [name, message] : report.errors) {
          std::cerr << "metric " << name << " failed: " << message << "\n";
        }
        return 2;
      }
    } else if (c_sens->parsed()) {
      const se::ProtocolRun run = load_protocol(sens);
      const se::DegradationSpec spec{se::parse_degradation_kind(sens_kind), sens_levels};
      se::write_csv(se::sensitivity_table(se::sensitivity_sweep(run, spec)), sens_out);
    } else if (c_synth->parsed()) {
      const auto scene = se::make_synthetic_scene(syn_seed, syn_w, syn_h, syn_n,
                                                  se::DisparityProfile::parse(syn_profile), syn_motion);
      const se::fs::path out(syn_out);
      se::save_clip(scene.clip.left, out / "left");
      se::save_clip(scene.clip.right, out / "right");
      se::save_disparity_sequence(scene.disparity, out / "disparity");
    }
  } catch (const MetricFailure& f) {
    std::cerr << "metric " << f.metric << " failed: " << f.message << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
