// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "weathercycle/image.hpp"

namespace weathercycle {

// 10*log10(1/MSE), capped at 100 dB for identical images so aggregates stay
// finite. MSE runs over all three channels by default; on_luma switches it to
// the BT.601 luminance plane.
double psnr(const RgbImage& a, const RgbImage& b, bool on_luma = false);
constexpr double kPsnrCap = 100.0;

// Mean structural similarity over valid 11x11 Gaussian windows (sigma 1.5,
// K1=0.01, K2=0.03, dynamic range 1), computed on the BT.601 luminance.
double ssim(const RgbImage& a, const RgbImage& b);

struct MetricEntry {
  std::string path;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  std::vector<MetricEntry> entries;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::string config_fingerprint;

  // Recomputes the aggregate means from the per-image entries.
  void finalize();
  std::string to_csv() const;   // header + one `path,psnr,ssim` line per image
  std::string to_json() const;  // machine-readable summary with per-image list
};

// Short stable hex digest of arbitrary text (config provenance in reports).
std::string fingerprint_text(const std::string& text);

}  // namespace weathercycle
