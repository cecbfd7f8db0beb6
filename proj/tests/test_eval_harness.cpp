#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "stereoeval/eval_harness.hpp"
#include "stereoeval/synthetic_scene.hpp"
#include "stereoeval/warp_synth.hpp"

using namespace stereoeval;

namespace {

const SyntheticScene& scene() {
  static const SyntheticScene s = make_synthetic_scene(3, 192, 64, 3, DisparityProfile::parse("two_plane:0,8"));
  return s;
}

ProtocolRun run_with(const VideoClip& candidate, bool with_gt = true) {
  ProtocolRun run;
  run.input = scene().clip;
  run.candidate = candidate;
  if (with_gt) run.gt_disparity = scene().disparity;
  return run;
}

VideoClip blurred(const VideoClip& clip, double sigma) {
  VideoClip out = clip;
  for (Frame& f : out.frames) f = gaussian_blur(f, sigma);
  return out;
}

}  // namespace

TEST_CASE("ground-truth candidate scores perfectly") {
  const EvaluationReport r = run_protocol(run_with(scene().clip.right));
  CHECK(r.errors.empty());
  CHECK(*r.psnr == kDefaultPsnrCap);
  CHECK(*r.ssim == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*r.match_error == 0.0);
  CHECK(r.match_counts->fp == 0);
  CHECK(r.match_counts->fn == 0);
  CHECK(r.match_counts->tp > 0);
  CHECK(*r.temp_err == 0.0);
  REQUIRE(r.disp_err.has_value());
  CHECK(*r.disp_err <= 0.5);
  CHECK(r.per_frame.psnr.size() == 3);
  CHECK(r.per_frame.temp_err.size() == 2);
  // median disparity is filled in from frame 0 of the ground truth
  CHECK(r.config["global_3d"]["median_disparity"] == 0.0);
}

TEST_CASE("the left view as candidate is penalised by fidelity but not by P-PSNR") {
  const EvaluationReport r = run_protocol(run_with(scene().clip.left));
  CHECK(r.errors.empty());
  CHECK(*r.psnr < kDefaultPsnrCap);
  CHECK(*r.ssim < 1.0);
  CHECK(*r.p_psnr == kDefaultPsnrCap);
}

TEST_CASE("a degraded candidate: aggregates follow the documented rules") {
  ProtocolRun run = run_with(blurred(scene().clip.right, 1.5));
  run.global.scale = 1.0;
  run.global.shift = 0.25;
  const EvaluationReport r = run_protocol(run);
  CHECK(r.errors.empty());
  CHECK(*r.psnr < kDefaultPsnrCap);

  double mse = 0.0, pmse = 0.0, ssim_sum = 0.0, match_sum = 0.0;
  for (int t = 0; t < 3; ++t) {
    mse += r.per_frame.mse[t];
    pmse += r.per_frame.p_psnr_mse[t];
    ssim_sum += r.per_frame.ssim[t];
    match_sum += r.per_frame.match_error[t];
  }
  CHECK(*r.psnr == doctest::Approx(psnr_from_mse(mse / 3)).epsilon(1e-12));
  CHECK(*r.p_psnr == doctest::Approx(psnr_from_mse(pmse / 3)).epsilon(1e-12));
  CHECK(*r.ssim == doctest::Approx(ssim_sum / 3).epsilon(1e-12));
  CHECK(*r.match_error == doctest::Approx(match_sum / 3).epsilon(1e-12));
  double tsum = 0.0;
  std::int64_t tpx = 0;
  for (std::size_t i = 0; i < r.per_frame.temp_err.size(); ++i) {
    tsum += r.per_frame.temp_err[i] * r.per_frame.temp_pixels[i];
    tpx += r.per_frame.temp_pixels[i];
  }
  CHECK(*r.temp_err == doctest::Approx(tsum / tpx).epsilon(1e-12));
  MatchCounts c;
  for (const auto& m : r.per_frame.match_counts) {
    c.tp += m.tp;
    c.fp += m.fp;
    c.fn += m.fn;
  }
  CHECK(*r.match_counts == c);
  CHECK(r.config["global_3d"]["scale"] == 1.0);
  CHECK(r.config["global_3d"]["shift"] == 0.25);

  // Pure: the same run gives byte-identical JSON.
  CHECK(to_json(run_protocol(run)).dump() == to_json(r).dump());
}

TEST_CASE("a failing metric does not stop the others") {
  const EvaluationReport no_gt = run_protocol(run_with(scene().clip.right, false));
  CHECK(no_gt.errors.count("disp_err") == 1);
  CHECK_FALSE(no_gt.disp_err.has_value());
  CHECK(no_gt.psnr.has_value());
  CHECK(no_gt.temp_err.has_value());

  ProtocolRun single;
  single.input.left.frames = {scene().clip.left.frames[0]};
  single.input.right.frames = {scene().clip.right.frames[0]};
  single.candidate.frames = {scene().clip.right.frames[0]};
  single.gt_disparity = {scene().disparity[0]};
  const EvaluationReport one = run_protocol(single);
  CHECK(one.errors.count("temp_err") == 1);
  CHECK_FALSE(one.temp_err.has_value());
  CHECK(one.errors.size() == 1);
  CHECK(*one.psnr == kDefaultPsnrCap);
}

TEST_CASE("protocol rejects mismatched inputs") {
  ProtocolRun run = run_with(scene().clip.right);
  run.candidate.frames.pop_back();
  CHECK_THROWS_AS(run_protocol(run), ShapeError);
  ProtocolRun d = run_with(scene().clip.right);
  d.gt_disparity.pop_back();
  CHECK_THROWS_AS(run_protocol(d), ShapeError);
}

TEST_CASE("level 0 of either sweep reproduces the baseline") {
  const ProtocolRun run = run_with(blurred(scene().clip.right, 1.0), false);
  const EvaluationReport base = run_protocol(run);
  for (auto kind : {DegradationKind::HorizontalShift, DegradationKind::GaussianBlur}) {
    const auto rows = sensitivity_sweep(run, DegradationSpec{kind, {0.0}});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].psnr == doctest::Approx(*base.psnr).epsilon(1e-12));
    CHECK(rows[0].ssim == doctest::Approx(*base.ssim).epsilon(1e-12));
    CHECK(rows[0].p_psnr == doctest::Approx(*base.p_psnr).epsilon(1e-12));
    CHECK(rows[0].match_error == doctest::Approx(*base.match_error).epsilon(1e-12));
  }
}

TEST_CASE("shift sweep lowers PSNR and blur sweep lowers SSIM") {
  const ProtocolRun run = run_with(scene().clip.right, false);
  const auto shift = sensitivity_sweep(run, DegradationSpec{DegradationKind::HorizontalShift, {0, 2, 6}});
  REQUIRE(shift.size() == 3);
  CHECK(shift[0].psnr == kDefaultPsnrCap);
  CHECK(shift[1].psnr > shift[2].psnr);
  CHECK(shift[2].p_psnr >= shift[2].psnr);
  const auto blur = sensitivity_sweep(run, DegradationSpec{DegradationKind::GaussianBlur, {0, 1, 3}});
  CHECK(blur[0].ssim > blur[1].ssim);
  CHECK(blur[1].ssim > blur[2].ssim);
  CHECK(blur[2].match_error > blur[0].match_error);
}

TEST_CASE("degradation specs and parsing") {
  CHECK(parse_degradation_kind("shift") == DegradationKind::HorizontalShift);
  CHECK(parse_degradation_kind("blur") == DegradationKind::GaussianBlur);
  CHECK(to_string(DegradationKind::GaussianBlur) == "blur");
  CHECK_THROWS_AS(parse_degradation_kind("rotate"), InvalidArgumentError);
  CHECK_THROWS_AS(DegradationSpec({DegradationKind::HorizontalShift, {96}}).validate(192), InvalidArgumentError);
  CHECK_THROWS_AS(DegradationSpec({DegradationKind::HorizontalShift, {-100}}).validate(192), InvalidArgumentError);
  CHECK_THROWS_AS(DegradationSpec({DegradationKind::HorizontalShift, {1.5}}).validate(192), InvalidArgumentError);
  CHECK_THROWS_AS(DegradationSpec({DegradationKind::GaussianBlur, {-1}}).validate(192), InvalidArgumentError);
  CHECK_THROWS_AS(DegradationSpec({DegradationKind::GaussianBlur, {}}).validate(192), InvalidArgumentError);
  CHECK_NOTHROW(DegradationSpec({DegradationKind::HorizontalShift, {95, -95}}).validate(192));
}

TEST_CASE("shift_columns and crop_columns") {
  Frame f(2, 6);
  for (int x = 0; x < 6; ++x) {
    for (int c = 0; c < 3; ++c) f(1, x, c) = static_cast<float>(x + 1) / 8.0f;
  }
  const Frame r = shift_columns(f, 2);
  CHECK(r(1, 0, 0) == 0.0f);
  CHECK(r(1, 1, 0) == 0.0f);
  CHECK(r(1, 2, 0) == f(1, 0, 0));
  CHECK(r(1, 5, 2) == f(1, 3, 2));
  const Frame l = shift_columns(f, -2);
  CHECK(l(1, 0, 0) == f(1, 2, 0));
  CHECK(l(1, 4, 0) == 0.0f);
  CHECK(shift_columns(f, 0) == f);
  const Frame c = crop_columns(f, {1, 4});
  CHECK(c.width() == 3);
  CHECK(c(1, 0, 1) == f(1, 1, 1));
  CHECK_THROWS_AS(crop_columns(f, {4, 7}), InvalidArgumentError);
}

TEST_CASE("sensitivity table layout") {
  const CsvTable t = sensitivity_table({{0, 100, 100, 1, 0}, {1, 30.125, 99.5, 0.9, 1.0 / 3}});
  CHECK(t.header == std::vector<std::string>{"level", "psnr", "p_psnr", "ssim", "match_error"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1][1] == "30.125");
  CHECK(std::strtod(t.rows[1][4].c_str(), nullptr) == 1.0 / 3);
}

TEST_CASE("synthetic scenes") {
  const auto a = make_synthetic_scene(9, 96, 48, 3, DisparityProfile::parse("constant:4"));
  const auto b = make_synthetic_scene(9, 96, 48, 3, DisparityProfile::parse("constant:4"));
  CHECK(a.clip.left.frames == b.clip.left.frames);
  CHECK(a.clip.right.frames == b.clip.right.frames);
  CHECK(make_synthetic_scene(10, 96, 48, 3, DisparityProfile::parse("constant:4")).clip.left.frames[0] !=
        a.clip.left.frames[0]);

  // Right view is the left view moved by the disparity; frames pan by motion.
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x + 4 < 96; ++x) {
      for (int c = 0; c < 3; ++c) CHECK(a.clip.right.frames[0](y, x, c) == a.clip.left.frames[0](y, x + 4, c));
    }
    for (int x = 0; x + 2 < 96; ++x) {
      CHECK(a.clip.left.frames[1](y, x, 0) == a.clip.left.frames[0](y, x + 2, 0));
    }
  }
  for (float v : a.clip.left.frames[0].data()) CHECK(std::round(v * 255.0f) == doctest::Approx(v * 255.0f).epsilon(1e-5));

  const auto two = make_synthetic_scene(1, 128, 64, 1, DisparityProfile::parse("two_plane:0,8"));
  CHECK(median_disparity(two.disparity[0]) == 0.0);
  CHECK(max_disparity(two.disparity[0]) == 8.0);
  CHECK(two.disparity[0].valid_count() == 128u * 64u);

  CHECK(DisparityProfile::parse("two_plane:2,10").to_string() == "two_plane:2,10");
  CHECK_THROWS_AS(DisparityProfile::parse("two_plane:2"), InvalidArgumentError);
  CHECK_THROWS_AS(DisparityProfile::parse("ramp:1"), InvalidArgumentError);
}
