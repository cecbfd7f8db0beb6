#include "stereoeval/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>

#include "stereoeval/warp_synth.hpp"

namespace stereoeval {

void ProtocolRun::validate() const {
  input.validate();
  if (candidate.size() != input.left.size()) {
    throw ShapeError("candidate has " + std::to_string(candidate.size()) + " frames, input has " +
                     std::to_string(input.left.size()));
  }
  candidate.validate();
  if (candidate.height() != input.left.height() || candidate.width() != input.left.width()) {
    throw ShapeError("candidate frame size differs from the input clip");
  }
  if (!gt_disparity.empty()) {
    if (gt_disparity.size() != static_cast<std::size_t>(input.left.size())) {
      throw ShapeError("ground-truth disparity count differs from the frame count");
    }
    for (const auto& d : gt_disparity) {
      if (d.height() != input.left.height() || d.width() != input.left.width()) {
        throw ShapeError("ground-truth disparity size differs from the frames");
      }
    }
  }
}

nlohmann::json config_to_json(const ProtocolRun& run) {
  const ProtocolConfig& c = run.config;
  nlohmann::json j;
  j["frames"] = run.input.left.size();
  j["height"] = run.input.left.height();
  j["width"] = run.input.left.width();
  j["psnr_cap"] = c.psnr_cap;
  j["ppsnr"] = {{"patch", c.ppsnr.patch},
                {"stride", c.ppsnr.stride},
                {"search_range", c.ppsnr.search_range},
                {"psnr_cap", c.ppsnr.psnr_cap}};
  j["detector"] = {{"max_count", c.detector.max_count},
                   {"nms_radius", c.detector.nms_radius},
                   {"border", c.detector.border},
                   {"harris_k", c.detector.harris_k},
                   {"window_sigma", c.detector.window_sigma}};
  j["match"] = {{"v_tol", c.match.v_tol},
                {"ratio", c.match.ratio},
                {"d_max", c.match.d_max},
                {"max_hamming", c.match.max_hamming},
                {"candidate_count", c.match.candidate_count}};
  j["sgm"] = {{"block", c.sgm.block}, {"d_min", c.sgm.d_min},   {"d_max", c.sgm.d_max},
              {"p1", c.sgm.p1},       {"p2", c.sgm.p2},         {"paths", c.sgm.paths},
              {"lr_tol", c.sgm.lr_tol}, {"uniqueness", c.sgm.uniqueness}};
  j["flow"] = {{"levels", c.flow.levels}, {"block", c.flow.block}, {"radius", c.flow.radius}};
  nlohmann::json g = nlohmann::json::object();
  if (run.global.scale) g["scale"] = *run.global.scale;
  if (run.global.shift) g["shift"] = *run.global.shift;
  if (run.global.median_disparity) g["median_disparity"] = *run.global.median_disparity;
  j["global_3d"] = g;
  return j;
}

namespace {

// Records a failing metric instead of aborting the whole run.
void guarded(EvaluationReport& report, const std::string& metric, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report.errors[metric] = e.what();
  }
}

// Left keypoints are detected once; both match sets are drawn from them.
MatchabilityBreakdown frame_matchability(const Frame& left, const Frame& gt_right, const Frame& pred,
                                         const ProtocolConfig& cfg, ColumnRange band,
                                         ColumnRange pred_valid) {
  std::vector<Keypoint> kps = detect_keypoints(left, cfg.detector);
  std::erase_if(kps, [&](const Keypoint& k) {
    return k.u < band.begin + cfg.detector.border || k.u >= band.end - cfg.detector.border;
  });
  const MatchSet m_gt = match_epipolar(kps, left, gt_right, cfg.match, cfg.detector,
                                       ColumnRange::all(gt_right.width()));
  const MatchSet m_pred = match_epipolar(kps, left, pred, cfg.match, cfg.detector, pred_valid);
  return matchability_error(m_gt, m_pred);
}

}  // namespace

EvaluationReport run_protocol(const ProtocolRun& run_in) {
  run_in.validate();
  ProtocolRun run = run_in;
  if (!run.global.median_disparity && !run.gt_disparity.empty()) {
    try {
      run.global.median_disparity = median_disparity(run.gt_disparity.front());
    } catch (const DegenerateError&) {
      // all-invalid ground truth: leave delta unset
    }
  }

  const ProtocolConfig& cfg = run.config;
  const VideoClip& left = run.input.left;
  const VideoClip& gt_right = run.input.right;
  const VideoClip& pred = run.candidate;

  EvaluationReport report;
  report.config = config_to_json(run);

  guarded(report, "psnr", [&] {
    PatchPsnrConfig capped = cfg.ppsnr;
    capped.psnr_cap = cfg.psnr_cap;
    const ClipMetricResult r = clip_metric(FrameMetric::Psnr, gt_right, pred, capped);
    report.per_frame.psnr = r.per_frame;
    report.per_frame.mse = r.per_frame_mse;
    report.psnr = r.aggregate;
  });
  guarded(report, "ssim", [&] {
    const ClipMetricResult r = clip_metric(FrameMetric::Ssim, gt_right, pred, cfg.ppsnr);
    report.per_frame.ssim = r.per_frame;
    report.ssim = r.aggregate;
  });
  guarded(report, "p_psnr", [&] {
    const ClipMetricResult r = clip_metric(FrameMetric::PatchPsnr, left, pred, cfg.ppsnr);
    report.per_frame.p_psnr = r.per_frame;
    report.per_frame.p_psnr_mse = r.per_frame_mse;
    report.p_psnr = r.aggregate;
  });
  guarded(report, "match_error", [&] {
    std::vector<double> errors;
    std::vector<MatchCounts> counts;
    MatchCounts total;
    for (int t = 0; t < left.size(); ++t) {
      const Frame& l = left.frames[t];
      const MatchabilityBreakdown b = frame_matchability(
          l, gt_right.frames[t], pred.frames[t], cfg, ColumnRange::all(l.width()),
          ColumnRange::all(l.width()));
      errors.push_back(b.error);
      counts.push_back({b.n_tp, b.n_fp, b.n_fn});
      total.tp += b.n_tp;
      total.fp += b.n_fp;
      total.fn += b.n_fn;
    }
    report.per_frame.match_error = errors;
    report.per_frame.match_counts = counts;
    report.match_error = std::accumulate(errors.begin(), errors.end(), 0.0) / errors.size();
    report.match_counts = total;
  });
  guarded(report, "disp_err", [&] {
    if (run.gt_disparity.empty()) throw InvalidArgumentError("no ground-truth disparity supplied");
    const DisparityErrorResult r =
        disparity_error(StereoClip{left, pred, run.input.rectified}, run.gt_disparity, cfg.sgm);
    report.per_frame.disp_err = r.per_frame;
    report.disp_excluded_frames = r.excluded_frames;
    if (!r.mean) throw DegenerateError("every frame was excluded from the disparity error");
    report.disp_err = r.mean;
  });
  guarded(report, "temp_err", [&] {
    const TemporalErrorResult r = temporal_error(gt_right, pred, cfg.flow);
    report.per_frame.temp_err = r.per_pair;
    report.per_frame.temp_pixels = r.per_pair_pixels;
    report.temp_err = r.mean;
  });
  return report;
}

DegradationKind parse_degradation_kind(const std::string& text) {
  if (text == "shift" || text == "horizontal_shift") return DegradationKind::HorizontalShift;
  if (text == "blur" || text == "gaussian_blur") return DegradationKind::GaussianBlur;
  throw InvalidArgumentError("unknown degradation kind '" + text + "' (shift|blur)");
}

std::string to_string(DegradationKind kind) {
  return kind == DegradationKind::HorizontalShift ? "shift" : "blur";
}

void DegradationSpec::validate(int width) const {
  if (levels.empty()) throw InvalidArgumentError("degradation needs at least one level");
  for (double level : levels) {
    if (!std::isfinite(level)) throw InvalidArgumentError("degradation level must be finite");
    if (kind == DegradationKind::HorizontalShift) {
      if (level != std::floor(level)) throw InvalidArgumentError("shift levels must be integers");
      // The symmetric crop keeps W - 2|k| columns.
      if (2 * std::abs(level) >= width) {
        throw InvalidArgumentError("shift of " + std::to_string(static_cast<int>(level)) +
                                   " px leaves no comparison region at width " + std::to_string(width));
      }
    } else if (level < 0.0) {
      throw InvalidArgumentError("blur sigma must be >= 0");
    }
  }
}

Frame shift_columns(const Frame& frame, int k) {
  const int w = frame.width();
  Frame out(frame.height(), w);
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = std::max(0, k); x < std::min(w, w + k); ++x) {
      for (int c = 0; c < Frame::kChannels; ++c) out(y, x, c) = frame(y, x - k, c);
    }
  }
  return out;
}

Frame crop_columns(const Frame& frame, ColumnRange cols) {
  if (cols.begin < 0 || cols.end > frame.width() || cols.size() == 0) {
    throw InvalidArgumentError("column crop outside the frame");
  }
  Frame out(frame.height(), cols.size());
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < cols.size(); ++x) {
      for (int c = 0; c < Frame::kChannels; ++c) out(y, x, c) = frame(y, x + cols.begin, c);
    }
  }
  return out;
}

std::vector<SensitivityRow> sensitivity_sweep(const ProtocolRun& run, const DegradationSpec& spec) {
  run.validate();
  const int w = run.input.left.width();
  spec.validate(w);
  const ProtocolConfig& cfg = run.config;
  const int n = run.input.left.size();

  std::vector<SensitivityRow> rows;
  for (double level : spec.levels) {
    double mse_sum = 0.0;
    double ppsnr_mse_sum = 0.0;
    double ssim_sum = 0.0;
    double match_sum = 0.0;
    for (int t = 0; t < n; ++t) {
      const Frame& left = run.input.left.frames[t];
      const Frame& gt = run.input.right.frames[t];
      const Frame& cand = run.candidate.frames[t];
      if (spec.kind == DegradationKind::HorizontalShift) {
        const int k = static_cast<int>(level);
        const int a = std::abs(k);
        const ColumnRange band{a, w - a};
        const ColumnRange real{std::max(0, k), std::min(w, w + k)};
        const Frame shifted = shift_columns(cand, k);
        const Frame gt_c = crop_columns(gt, band);
        const Frame pred_c = crop_columns(shifted, band);
        mse_sum += mse(gt_c, pred_c);
        ssim_sum += ssim(gt_c, pred_c);
        ppsnr_mse_sum += patch_search(left, shifted, cfg.ppsnr, band, real).mean_best_mse;
        match_sum += frame_matchability(left, gt, shifted, cfg, band, real).error;
      } else {
        const Frame blurred = level > 0.0 ? gaussian_blur(cand, level) : cand;
        const ColumnRange all = ColumnRange::all(w);
        mse_sum += mse(gt, blurred);
        ssim_sum += ssim(gt, blurred);
        ppsnr_mse_sum += patch_search(left, blurred, cfg.ppsnr, all, all).mean_best_mse;
        match_sum += frame_matchability(left, gt, blurred, cfg, all, all).error;
      }
    }
    SensitivityRow row;
    row.level = level;
    row.psnr = psnr_from_mse(mse_sum / n, cfg.psnr_cap);
    row.p_psnr = psnr_from_mse(ppsnr_mse_sum / n, cfg.ppsnr.psnr_cap);
    row.ssim = ssim_sum / n;
    row.match_error = match_sum / n;
    rows.push_back(row);
  }
  return rows;
}

CsvTable sensitivity_table(const std::vector<SensitivityRow>& rows) {
  CsvTable table;
  table.header = {"level", "psnr", "p_psnr", "ssim", "match_error"};
  const auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    table.rows.push_back({fmt(r.level), fmt(r.psnr), fmt(r.p_psnr), fmt(r.ssim), fmt(r.match_error)});
  }
  return table;
}

}  // namespace stereoeval
