// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "weathercycle/image.hpp"
#include "weathercycle/ldgm.hpp"
#include "weathercycle/rng.hpp"

namespace weathercycle {

struct AugmentConfig {
  double hflip_prob = 0.5;
  std::vector<int> rot90_choices = {0, 90, 180, 270};
  double jitter_brightness = 0.1;
  double jitter_contrast = 0.1;
  double jitter_saturation = 0.1;
  bool jitter_degraded = true;  // when false, color jitter touches the clean domain only
  void validate() const;
};

struct UnpairedDataset {
  std::vector<std::string> clean_paths;
  std::vector<std::string> degraded_paths;
  std::vector<std::pair<int, int>> clean_dims;     // (H,W) recorded at load
  std::vector<std::pair<int, int>> degraded_dims;  // (H,W) recorded at load
  int crop = 0;  // 0 disables crop-size validation
  std::uint64_t epoch_seed = 0;
};

// Deterministic sorted listing of `*.png|*.jpg|*.jpeg` in one directory; an
// optional `manifest.txt` (one path per line, `#` comments) overrides
// scanning.
std::vector<std::string> list_images(const std::string& dir);

// Builds the two domain listings via list_images. Every file is fully decoded
// once; unreadable files are reported to stderr and skipped. A crop larger
// than the smallest image is rejected here, not at sampling time.
UnpairedDataset load_unpaired(const std::string& clean_dir, const std::string& degraded_dir,
                              int crop = 0);

struct Batch {
  std::vector<Tensor> clean;     // each [3,crop,crop]
  std::vector<Tensor> degraded;  // each [3,crop,crop]
  std::vector<int> clean_indices;
  std::vector<int> degraded_indices;
  std::uint64_t step_seed = 0;
};

// `count` uniform indices over [0,n): distinct (partial shuffle) when the
// domain is large enough, with replacement otherwise.
std::vector<int> sample_indices(int n, int count, Rng& rng);

// Random crop + flip/rotation + color jitter, consuming a fixed number of
// draws from `rng` so item streams stay aligned. Output stays inside [0,1].
Tensor augment_crop(const Tensor& img, int crop, const AugmentConfig& aug, Rng& rng,
                    bool apply_jitter);

// Independent draws from each domain; deterministic under
// (ds.epoch_seed, step_seed) with per-item seeding.
Batch sample_batch(const UnpairedDataset& ds, const AugmentConfig& aug, int batch,
                   std::uint64_t step_seed);

// n random luminance patches cropped from degraded-domain images.
DegradationPool build_pool(const UnpairedDataset& ds, int n, int patch, std::uint64_t seed);

}  // namespace weathercycle
