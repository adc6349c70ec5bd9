// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "weathercycle/image.hpp"
#include "weathercycle/metrics.hpp"
#include "weathercycle/trainer.hpp"

namespace weathercycle {

// Paired exchange experiment: how much of the degradation disappears when the
// degraded image borrows the clean image's luminance, or only its luminance
// amplitude spectrum.
struct SwapReport {
  double psnr_raw = 0.0;        // degraded vs clean
  double psnr_luma_swap = 0.0;  // clean Y + degraded CbCr vs clean
  double psnr_amp_swap = 0.0;   // clean Y-amplitude + degraded phase/CbCr vs clean
  RgbImage luma_swapped;
  RgbImage amp_swapped;
};

SwapReport motivation_experiment(const RgbImage& degraded, const RgbImage& clean);

// Restores an image of arbitrary size with a trained state: replicate-pads to
// the net's stride multiple, restores, crops back.
RgbImage restore_image(const TrainerState& state, const RgbImage& img);

// Applies restore_image over every image in input_dir, writing outputs under
// the same filenames. With a reference directory the returned report carries
// per-image PSNR/SSIM (and report.csv / report.json are written next to the
// outputs). Unreadable inputs and missing references are warned about and
// skipped; the run continues. psnr_on_luma switches PSNR from RGB to the
// luminance plane.
MetricReport run_inference(const std::string& ckpt_path, const std::string& input_dir,
                           const std::string& output_dir, const std::string& ref_dir = "",
                           bool psnr_on_luma = false);

// CLI entry points. These return 0 on success and throw UsageError /
// DataError / NumericError for the caller to map onto exit codes 1 / 2 / 3.
int cmd_train(const std::string& config_path);
int cmd_infer(const std::string& ckpt, const std::string& input_dir, const std::string& output_dir,
              const std::string& ref_dir, bool psnr_on_luma = false);
int cmd_analyze_swap(const std::string& degraded_path, const std::string& clean_path,
                     const std::string& output_dir);
int cmd_classify(const std::string& input_dir, const std::string& backend_spec);

}  // namespace weathercycle
