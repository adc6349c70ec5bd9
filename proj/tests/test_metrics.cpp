// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "testutil.hpp"
#include "weathercycle/colorspace.hpp"
#include "weathercycle/errors.hpp"
#include "weathercycle/evalcli.hpp"
#include "weathercycle/image_io.hpp"
#include "weathercycle/metrics.hpp"

using namespace weathercycle;
using wctest::random_tensor;
namespace fs = std::filesystem;

namespace {

RgbImage solid(double v, int h = 16, int w = 16) { return RgbImage(Tensor({3, h, w}, v)); }

RgbImage offset(const RgbImage& a, double d) {
  Tensor t = a.data;
  for (std::size_t i = 0; i < t.size(); ++i) t[i] += d;
  return RgbImage(std::move(t));
}

RgbImage checkerboard(int h, int w) {
  Tensor t({3, h, w});
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) t.at(c, i, j) = (i + j) % 2 ? 1.0 : 0.0;
  return RgbImage(std::move(t));
}

RgbImage inverted(const RgbImage& a) {
  Tensor t = a.data;
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 1.0 - t[i];
  return RgbImage(std::move(t));
}

}  // namespace

TEST_CASE("psnr reproduces its closed-form values") {
  wctest::Rng rng(90);
  RgbImage a(random_tensor({3, 16, 16}, rng, 0.0, 0.9));
  CHECK(psnr(a, a) == kPsnrCap);
  CHECK(psnr(a, offset(a, 0.1)) == doctest::Approx(20.0).epsilon(1e-12));  // MSE 0.01
  CHECK(psnr(solid(0.25), solid(0.75)) == doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-12));

  RgbImage b(random_tensor({3, 16, 16}, rng));
  CHECK(psnr(a, b) == psnr(b, a));

  // strictly decreasing in MSE
  CHECK(psnr(a, offset(a, 0.01)) > psnr(a, offset(a, 0.02)));
  CHECK(psnr(a, offset(a, 0.02)) > psnr(a, offset(a, 0.05)));

  CHECK_THROWS_AS(psnr(a, RgbImage(random_tensor({3, 8, 8}, rng))), DataError);
}

TEST_CASE("luma psnr ignores pure chroma differences") {
  // gray vs gray+red/blue shift with identical BT.601 luminance
  const int h = 16, w = 16;
  Tensor gray({3, h, w}, 0.5);
  Tensor tinted = gray;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      tinted.at(0, i, j) += 0.114;  // R up
      tinted.at(2, i, j) -= 0.299;  // B down by the luma-weight ratio
    }
  }
  RgbImage a(gray), b(tinted);
  CHECK(psnr(a, b) < 30.0);
  CHECK(psnr(a, b, true) > 90.0);  // luminance identical up to rounding
}

TEST_CASE("ssim matches its fixed points and symmetry") {
  wctest::Rng rng(91);
  RgbImage a(random_tensor({3, 16, 20}, rng));
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

  RgbImage b(random_tensor({3, 16, 20}, rng));
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
  CHECK(std::fabs(ssim(a, b)) <= 1.0);

  RgbImage board = checkerboard(16, 16);
  CHECK(ssim(board, inverted(board)) < 0.0);

  CHECK_THROWS_AS(ssim(RgbImage(random_tensor({3, 10, 16}, rng)),
                       RgbImage(random_tensor({3, 10, 16}, rng))),
                  DataError);
  CHECK_NOTHROW(ssim(RgbImage(random_tensor({3, 11, 11}, rng)),
                     RgbImage(random_tensor({3, 11, 11}, rng))));
  CHECK_THROWS_AS(ssim(a, RgbImage(random_tensor({3, 16, 16}, rng))), DataError);
}

TEST_CASE("report aggregates are the arithmetic means of the rows") {
  MetricReport report;
  report.entries = {{"a.png", 20.0, 0.5}, {"b.png", 30.0, 0.7}, {"c.png", 40.0, 0.9}};
  report.config_fingerprint = fingerprint_text("cfg");
  report.finalize();
  CHECK(report.mean_psnr == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(report.mean_ssim == doctest::Approx(0.7).epsilon(1e-12));

  // recompute the mean from the CSV body
  std::istringstream csv(report.to_csv());
  std::string line;
  REQUIRE(std::getline(csv, line));
  CHECK(line == "path,psnr,ssim");
  double sum = 0.0;
  int rows = 0;
  while (std::getline(csv, line)) {
    const std::size_t c1 = line.find(','), c2 = line.rfind(',');
    REQUIRE(c1 != std::string::npos);
    REQUIRE(c2 > c1);
    sum += std::stod(line.substr(c1 + 1, c2 - c1 - 1));
    ++rows;
  }
  CHECK(rows == 3);
  CHECK(sum / rows == doctest::Approx(report.mean_psnr).epsilon(1e-12));

  CHECK(report.config_fingerprint.size() == 16);
  CHECK(fingerprint_text("cfg") == report.config_fingerprint);
  CHECK(fingerprint_text("cfg2") != report.config_fingerprint);

  MetricReport empty;
  empty.finalize();
  CHECK(empty.mean_psnr == 0.0);
  CHECK(empty.to_json().find("\"count\": 0") != std::string::npos);
}

TEST_CASE("the exchange study returns cap values on an identical pair") {
  wctest::Rng rng(92);
  RgbImage img(random_tensor({3, 16, 16}, rng, 0.1, 0.9));
  SwapReport report = motivation_experiment(img, img);
  CHECK(report.psnr_raw == kPsnrCap);
  CHECK(report.psnr_luma_swap == kPsnrCap);
  CHECK(report.psnr_amp_swap >= 50.0);  // spectral round trip, not bit-exact

  CHECK_THROWS_AS(motivation_experiment(img, RgbImage(random_tensor({3, 8, 8}, rng))), DataError);
}

TEST_CASE("luminance-only corruption is fully undone by the luma swap") {
  wctest::Rng rng(93);
  const int h = 16, w = 16;
  Tensor clean_t({3, h, w});
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const double y = 0.3 + 0.3 * rng.next_double();
      for (int c = 0; c < 3; ++c) clean_t.at(c, i, j) = y + rng.uniform(-0.02, 0.02);
    }
  }
  RgbImage clean(clean_t);

  // corrupt Y only: recombine a veiled luminance with the original chroma
  auto [lum, chr] = rgb_to_ycbcr(clean);
  Tensor veiled = lum.data;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) veiled.at(i, j) += 0.25;
  RgbImage degraded = ycbcr_to_rgb(LumaPlane::unchecked(std::move(veiled)), chr);

  SwapReport report = motivation_experiment(degraded, clean);
  CHECK(report.psnr_luma_swap > report.psnr_raw);
  CHECK(report.psnr_luma_swap > 40.0);
  CHECK(report.luma_swapped.height() == h);
}

TEST_CASE("a low-frequency veil is reduced by the amplitude swap") {
  wctest::Rng rng(94);
  const int h = 32, w = 32;
  Tensor clean_t({3, h, w});
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const double y = 0.2 + 0.3 * rng.next_double();
      for (int c = 0; c < 3; ++c) clean_t.at(c, i, j) = y;
    }
  }
  RgbImage clean(clean_t);

  constexpr double kPi = 3.14159265358979323846;
  auto [lum, chr] = rgb_to_ycbcr(clean);
  Tensor veiled = lum.data;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      veiled.at(i, j) +=
          0.2 * (0.5 + 0.5 * std::cos(2.0 * kPi * i / h) * std::cos(2.0 * kPi * j / w));
    }
  }
  RgbImage hazy = ycbcr_to_rgb(LumaPlane::unchecked(std::move(veiled)), chr);

  SwapReport report = motivation_experiment(hazy, clean);
  CHECK(report.psnr_amp_swap > report.psnr_raw);
}

TEST_CASE("an identity checkpoint restores inputs unchanged through the CLI core") {
  const fs::path root = fs::temp_directory_path() / "wc_metrics_infer";
  fs::remove_all(root);
  fs::create_directories(root / "in");
  wctest::Rng rng(95);

  TrainConfig cfg;
  cfg.iterations = 1;
  cfg.batch = 1;
  cfg.crop = 16;
  cfg.base_width = 4;
  cfg.depth = 1;
  cfg.cta_lift = 4;
  cfg.cta_topk = 2;
  cfg.stub_dim = 8;
  cfg.pool_size = 1;
  TrainerState state = init_trainer(cfg);
  for (auto& [name, var] : state.params) {
    Tensor& t = var.mutable_value();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.0;
  }
  const std::string ckpt = (root / "id.ckpt").string();
  save_checkpoint(state, ckpt);

  RgbImage small(random_tensor({3, 16, 16}, rng));
  RgbImage odd(random_tensor({3, 13, 12}, rng));  // forces the pad/crop path
  save_image(small, (root / "in" / "small.png").string());
  save_image(odd, (root / "in" / "odd.png").string());

  MetricReport report =
      run_inference(ckpt, (root / "in").string(), (root / "out").string(), (root / "in").string());
  REQUIRE(report.entries.size() == 2);
  CHECK(report.entries[0].path == "odd.png");  // sorted by filename
  for (const MetricEntry& e : report.entries) {
    CHECK(e.psnr == kPsnrCap);
    CHECK(e.ssim == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(report.mean_psnr == kPsnrCap);

  RgbImage out_small = load_image((root / "out" / "small.png").string());
  CHECK(max_abs_diff(out_small.data, load_image((root / "in" / "small.png").string()).data) == 0.0);
  RgbImage out_odd = load_image((root / "out" / "odd.png").string());
  CHECK(out_odd.height() == 13);
  CHECK(out_odd.width() == 12);

  CHECK(fs::exists(root / "out" / "report.csv"));
  CHECK(fs::exists(root / "out" / "report.json"));
  std::ifstream json_in(root / "out" / "report.json");
  const std::string json((std::istreambuf_iterator<char>(json_in)),
                         std::istreambuf_iterator<char>());
  CHECK(json.find("\"count\": 2") != std::string::npos);
  fs::remove_all(root);
}

TEST_CASE("inference skips unreadable inputs and missing references") {
  const fs::path root = fs::temp_directory_path() / "wc_metrics_skip";
  fs::remove_all(root);
  fs::create_directories(root / "in");
  fs::create_directories(root / "ref");
  wctest::Rng rng(96);

  TrainConfig cfg;
  cfg.crop = 16;
  cfg.base_width = 4;
  cfg.depth = 1;
  cfg.cta_lift = 4;
  cfg.cta_topk = 2;
  cfg.stub_dim = 8;
  const std::string ckpt = (root / "m.ckpt").string();
  save_checkpoint(init_trainer(cfg), ckpt);

  save_image(RgbImage(random_tensor({3, 16, 16}, rng)), (root / "in" / "good.png").string());
  save_image(RgbImage(random_tensor({3, 16, 16}, rng)), (root / "in" / "orphan.png").string());
  std::ofstream(root / "in" / "corrupt.png") << "junk";
  save_image(RgbImage(random_tensor({3, 16, 16}, rng)), (root / "ref" / "good.png").string());

  MetricReport report =
      run_inference(ckpt, (root / "in").string(), (root / "out").string(), (root / "ref").string());
  REQUIRE(report.entries.size() == 1);  // orphan has no reference, corrupt is skipped
  CHECK(report.entries[0].path == "good.png");
  CHECK(fs::exists(root / "out" / "good.png"));
  CHECK(fs::exists(root / "out" / "orphan.png"));  // restored even without a reference
  CHECK_FALSE(fs::exists(root / "out" / "corrupt.png"));

  // no reference dir: outputs only, no reports
  MetricReport plain = run_inference(ckpt, (root / "in").string(), (root / "out2").string());
  CHECK(plain.entries.empty());
  CHECK_FALSE(fs::exists(root / "out2" / "report.csv"));

  // empty input dir: empty report, warning only
  fs::create_directories(root / "none");
  MetricReport empty =
      run_inference(ckpt, (root / "none").string(), (root / "out3").string(), (root / "ref").string());
  CHECK(empty.entries.empty());
  CHECK(empty.mean_psnr == 0.0);
  fs::remove_all(root);
}
