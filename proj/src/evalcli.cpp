// SPDX-License-Identifier: Apache-2.0
#include "weathercycle/evalcli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "weathercycle/colorspace.hpp"
#include "weathercycle/config.hpp"
#include "weathercycle/dacr.hpp"
#include "weathercycle/data_pipeline.hpp"
#include "weathercycle/errors.hpp"
#include "weathercycle/image_io.hpp"
#include "weathercycle/spectral.hpp"

namespace weathercycle {

namespace fs = std::filesystem;

SwapReport motivation_experiment(const RgbImage& degraded, const RgbImage& clean) {
  if (!degraded.data.same_shape(clean.data)) {
    throw DataError("motivation_experiment: degraded/clean pair differs in shape");
  }
  SwapReport report;
  report.psnr_raw = psnr(degraded, clean);

  report.luma_swapped = swap_luma(degraded, clean).first;
  report.psnr_luma_swap = psnr(report.luma_swapped, clean);

  auto [d_lum, d_chr] = rgb_to_ycbcr(degraded);
  auto [c_lum, c_chr] = rgb_to_ycbcr(clean);
  LumaPlane amp_y = swap_amplitude(d_lum, c_lum);  // clean amplitude, degraded phase
  clamp01(amp_y.data);
  report.amp_swapped = ycbcr_to_rgb(LumaPlane(std::move(amp_y.data)), d_chr);
  report.psnr_amp_swap = psnr(report.amp_swapped, clean);
  return report;
}

namespace {

Tensor pad_replicate(const Tensor& img, int bottom, int right) {
  const int h = img.dim(1), w = img.dim(2);
  Tensor out({3, h + bottom, w + right});
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < h + bottom; ++i) {
      const int si = std::min(i, h - 1);
      for (int j = 0; j < w + right; ++j) {
        out.at(c, i, j) = img.at(c, si, std::min(j, w - 1));
      }
    }
  }
  return out;
}

Tensor crop_tl(const Tensor& img, int h, int w) {
  Tensor out({3, h, w});
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) out.at(c, i, j) = img.at(c, i, j);
    }
  }
  return out;
}

}  // namespace

RgbImage restore_image(const TrainerState& state, const RgbImage& img) {
  const GeneratorConfig gen = state.config.generator_config();
  const int stride = 1 << state.config.depth;
  const int h = img.height(), w = img.width();
  const int ph = (h + stride - 1) / stride * stride;
  const int pw = (w + stride - 1) / stride * stride;
  if (ph == h && pw == w) return restore(state.params, gen, img);
  RgbImage padded(pad_replicate(img.data, ph - h, pw - w));
  RgbImage out = restore(state.params, gen, padded);
  return RgbImage(crop_tl(out.data, h, w));
}

MetricReport run_inference(const std::string& ckpt_path, const std::string& input_dir,
                           const std::string& output_dir, const std::string& ref_dir,
                           bool psnr_on_luma) {
  TrainerState state = load_checkpoint(ckpt_path);
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (!fs::is_directory(output_dir)) {
    throw DataError("cannot create output directory: " + output_dir);
  }

  MetricReport report;
  report.config_fingerprint = fingerprint_text(state.config.serialize());
  const std::vector<std::string> inputs = list_images(input_dir);
  if (inputs.empty()) {
    std::cerr << "warning: no images found in " << input_dir << "\n";
  }
  for (const std::string& path : inputs) {
    RgbImage img;
    try {
      img = load_image(path);
    } catch (const DataError& e) {
      std::cerr << "warning: skipping " << path << ": " << e.what() << "\n";
      continue;
    }
    const RgbImage out = restore_image(state, img);
    const std::string filename = fs::path(path).filename().string();
    save_image(out, (fs::path(output_dir) / filename).string());

    if (ref_dir.empty()) continue;
    const fs::path ref_path = fs::path(ref_dir) / filename;
    if (!fs::exists(ref_path)) {
      std::cerr << "warning: no reference for " << filename << ", skipping metrics\n";
      continue;
    }
    RgbImage ref;
    try {
      ref = load_image(ref_path.string());
    } catch (const DataError& e) {
      std::cerr << "warning: unreadable reference " << ref_path.string() << ": " << e.what()
                << "\n";
      continue;
    }
    MetricEntry entry;
    entry.path = filename;
    entry.psnr = psnr(out, ref, psnr_on_luma);
    entry.ssim = ssim(out, ref);
    report.entries.push_back(std::move(entry));
  }
  std::sort(report.entries.begin(), report.entries.end(),
            [](const MetricEntry& a, const MetricEntry& b) { return a.path < b.path; });
  report.finalize();

  if (!ref_dir.empty()) {
    std::ofstream csv(fs::path(output_dir) / "report.csv");
    csv << report.to_csv();
    std::ofstream json(fs::path(output_dir) / "report.json");
    json << report.to_json();
    if (!csv || !json) throw DataError("failed to write metric reports in " + output_dir);
  }
  return report;
}

int cmd_train(const std::string& config_path) {
  TrainConfig cfg = TrainConfig::load(config_path);
  if (const char* env_seed = std::getenv("WEATHERCYCLE_SEED")) {
    std::uint64_t seed = 0;
    const char* end = env_seed + std::strlen(env_seed);
    auto [ptr, err] = std::from_chars(env_seed, end, seed);
    if (err != std::errc() || ptr != end) {
      throw UsageError("WEATHERCYCLE_SEED must be an unsigned integer, got '" +
                       std::string(env_seed) + "'");
    }
    cfg.seed = seed;
  }
  TrainerState state = run_training(cfg, std::cout);
  std::cout << "training finished at step " << state.step;
  if (!state.config.checkpoint_out.empty()) {
    std::cout << ", checkpoint written to " << state.config.checkpoint_out;
  }
  std::cout << "\n";
  return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& input_dir, const std::string& output_dir,
              const std::string& ref_dir, bool psnr_on_luma) {
  MetricReport report = run_inference(ckpt, input_dir, output_dir, ref_dir, psnr_on_luma);
  if (!ref_dir.empty()) {
    std::cout << "images " << report.entries.size() << " mean_psnr "
              << format_double(report.mean_psnr) << " mean_ssim "
              << format_double(report.mean_ssim) << "\n";
  }
  return 0;
}

int cmd_analyze_swap(const std::string& degraded_path, const std::string& clean_path,
                     const std::string& output_dir) {
  const RgbImage degraded = load_image(degraded_path);
  const RgbImage clean = load_image(clean_path);
  const SwapReport report = motivation_experiment(degraded, clean);

  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (!fs::is_directory(output_dir)) {
    throw DataError("cannot create output directory: " + output_dir);
  }
  save_image(report.luma_swapped, (fs::path(output_dir) / "luma_swap.png").string());
  save_image(report.amp_swapped, (fs::path(output_dir) / "amp_swap.png").string());

  nlohmann::json j;
  j["psnr_raw"] = report.psnr_raw;
  j["psnr_luma_swap"] = report.psnr_luma_swap;
  j["psnr_amp_swap"] = report.psnr_amp_swap;
  std::ofstream json_out(fs::path(output_dir) / "swap_report.json");
  json_out << j.dump(2) << "\n";
  if (!json_out) throw DataError("failed to write swap_report.json in " + output_dir);

  std::cout << "psnr_raw " << format_double(report.psnr_raw) << "\n";
  std::cout << "psnr_luma_swap " << format_double(report.psnr_luma_swap) << "\n";
  std::cout << "psnr_amp_swap " << format_double(report.psnr_amp_swap) << "\n";
  return 0;
}

int cmd_classify(const std::string& input_dir, const std::string& backend_spec) {
  std::shared_ptr<EmbeddingBackend> backend = make_backend(backend_spec);
  const std::vector<std::string> prompts = default_prompts();
  const std::vector<std::string> inputs = list_images(input_dir);
  if (inputs.empty()) {
    std::cerr << "warning: no images found in " << input_dir << "\n";
    return 0;
  }
  for (const std::string& path : inputs) {
    RgbImage img;
    try {
      img = load_image(path);
    } catch (const DataError& e) {
      std::cerr << "warning: skipping " << path << ": " << e.what() << "\n";
      continue;
    }
    const DifficultyLabel label = classify_difficulty(*backend, img, prompts);
    std::cout << path << " " << difficulty_name(label.level) << " scores";
    for (double s : label.scores) std::cout << " " << format_double(s);
    std::cout << "\n";
  }
  return 0;
}

}  // namespace weathercycle
