// SPDX-License-Identifier: Apache-2.0
#include "weathercycle/data_pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "weathercycle/colorspace.hpp"
#include "weathercycle/errors.hpp"
#include "weathercycle/image_io.hpp"

namespace weathercycle {

namespace fs = std::filesystem;

void AugmentConfig::validate() const {
  if (hflip_prob < 0 || hflip_prob > 1) throw DataError("AugmentConfig: hflip_prob outside [0,1]");
  if (jitter_brightness < 0 || jitter_contrast < 0 || jitter_saturation < 0) {
    throw DataError("AugmentConfig: jitter deltas must be >= 0");
  }
  if (rot90_choices.empty()) throw DataError("AugmentConfig: rot90_choices must be non-empty");
  for (int r : rot90_choices) {
    if (r != 0 && r != 90 && r != 180 && r != 270) {
      throw DataError("AugmentConfig: rotations restricted to multiples of 90");
    }
  }
}

namespace {

bool has_image_ext(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

std::vector<std::string> list_images(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory missing: " + dir);
  std::vector<std::string> files;
  const fs::path manifest = fs::path(dir) / "manifest.txt";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    if (!in) throw DataError("cannot read " + manifest.string());
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
      std::size_t start = line.find_first_not_of(' ');
      if (start == std::string::npos) continue;
      line = line.substr(start);
      if (line.empty() || line[0] == '#') continue;
      fs::path p(line);
      files.push_back((p.is_absolute() ? p : fs::path(dir) / p).string());
    }
  } else {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && has_image_ext(entry.path())) {
        files.push_back(entry.path().string());
      }
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

namespace {

void probe_domain(const char* label, std::vector<std::string>& paths,
                  std::vector<std::pair<int, int>>& dims) {
  std::vector<std::string> kept;
  for (const std::string& p : paths) {
    int h = 0, w = 0;
    if (!probe_image(p, &h, &w)) {
      std::cerr << "warning: skipping unreadable " << label << " image " << p << "\n";
      continue;
    }
    kept.push_back(p);
    dims.emplace_back(h, w);
  }
  paths = std::move(kept);
}

std::pair<int, int> min_dims(const std::vector<std::pair<int, int>>& dims) {
  int h = dims.front().first, w = dims.front().second;
  for (const auto& [dh, dw] : dims) {
    h = std::min(h, dh);
    w = std::min(w, dw);
  }
  return {h, w};
}

}  // namespace

UnpairedDataset load_unpaired(const std::string& clean_dir, const std::string& degraded_dir,
                              int crop) {
  UnpairedDataset ds;
  ds.crop = crop;
  ds.clean_paths = list_images(clean_dir);
  ds.degraded_paths = list_images(degraded_dir);
  probe_domain("clean", ds.clean_paths, ds.clean_dims);
  probe_domain("degraded", ds.degraded_paths, ds.degraded_dims);
  if (ds.clean_paths.empty()) throw DataError("clean domain is empty: " + clean_dir);
  if (ds.degraded_paths.empty()) throw DataError("degraded domain is empty: " + degraded_dir);

  for (const std::string& c : ds.clean_paths) {
    const fs::path cc = fs::weakly_canonical(c);
    for (const std::string& d : ds.degraded_paths) {
      if (cc == fs::weakly_canonical(d)) {
        throw DataError("path appears in both domains: " + c);
      }
    }
  }

  if (crop > 0) {
    const auto [ch, cw] = min_dims(ds.clean_dims);
    const auto [dh, dw] = min_dims(ds.degraded_dims);
    const int min_h = std::min(ch, dh), min_w = std::min(cw, dw);
    if (crop > min_h || crop > min_w) {
      throw DataError("crop " + std::to_string(crop) + " exceeds the smallest image (" +
                      std::to_string(min_h) + "x" + std::to_string(min_w) + ")");
    }
  }
  return ds;
}

std::vector<int> sample_indices(int n, int count, Rng& rng) {
  if (n < 1 || count < 1) throw DataError("sample_indices: need n >= 1 and count >= 1");
  std::vector<int> out(static_cast<std::size_t>(count));
  if (n >= count) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < count; ++i) {  // partial Fisher-Yates
      const int j = i + rng.next_index(n - i);
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
      out[static_cast<std::size_t>(i)] = idx[static_cast<std::size_t>(i)];
    }
  } else {
    for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = rng.next_index(n);
  }
  return out;
}

namespace {

Tensor crop_at(const Tensor& img, int oy, int ox, int crop) {
  Tensor out({3, crop, crop});
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < crop; ++i) {
      const double* src = img.plane(c) + static_cast<std::size_t>(oy + i) * img.dim(2) + ox;
      double* dst = out.plane(c) + static_cast<std::size_t>(i) * crop;
      std::copy(src, src + crop, dst);
    }
  }
  return out;
}

void hflip(Tensor& t) {
  const int h = t.dim(1), w = t.dim(2);
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < h; ++i) {
      double* row = t.plane(c) + static_cast<std::size_t>(i) * w;
      std::reverse(row, row + w);
    }
  }
}

// 90 degrees counterclockwise per application.
Tensor rot90(const Tensor& t, int quarter_turns) {
  Tensor cur = t;
  for (int q = 0; q < quarter_turns; ++q) {
    const int h = cur.dim(1), w = cur.dim(2);
    Tensor next({3, w, h});
    for (int c = 0; c < 3; ++c) {
      for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
          next.at(c, w - 1 - j, i) = cur.at(c, i, j);
        }
      }
    }
    cur = std::move(next);
  }
  return cur;
}

void color_jitter(Tensor& t, double brightness, double contrast, double saturation) {
  if (brightness != 0.0) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += brightness;
  }
  if (contrast != 0.0) {
    const double m = mean_value(t);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (t[i] - m) * (1.0 + contrast) + m;
  }
  if (saturation != 0.0) {
    const int h = t.dim(1), w = t.dim(2);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const double y =
            0.299 * t.at(0, i, j) + 0.587 * t.at(1, i, j) + 0.114 * t.at(2, i, j);
        for (int c = 0; c < 3; ++c) {
          t.at(c, i, j) = y + (t.at(c, i, j) - y) * (1.0 + saturation);
        }
      }
    }
  }
  clamp01(t);
}

}  // namespace

Tensor augment_crop(const Tensor& img, int crop, const AugmentConfig& aug, Rng& rng,
                    bool apply_jitter) {
  aug.validate();
  if (img.dim(1) < crop || img.dim(2) < crop) throw DataError("augment_crop: image smaller than crop");
  const int oy = rng.next_index(img.dim(1) - crop + 1);
  const int ox = rng.next_index(img.dim(2) - crop + 1);
  Tensor out = crop_at(img, oy, ox, crop);

  if (rng.next_double() < aug.hflip_prob) hflip(out);
  const int rot = aug.rot90_choices[static_cast<std::size_t>(
      rng.next_index(static_cast<int>(aug.rot90_choices.size())))];
  if (rot != 0) out = rot90(out, rot / 90);

  const double b = rng.uniform(-aug.jitter_brightness, aug.jitter_brightness);
  const double c = rng.uniform(-aug.jitter_contrast, aug.jitter_contrast);
  const double s = rng.uniform(-aug.jitter_saturation, aug.jitter_saturation);
  if (apply_jitter) {
    color_jitter(out, b, c, s);
  }
  return out;
}

Batch sample_batch(const UnpairedDataset& ds, const AugmentConfig& aug, int batch,
                   std::uint64_t step_seed) {
  if (batch < 1) throw DataError("sample_batch: batch must be >= 1");
  if (ds.crop < 8) throw DataError("sample_batch: dataset crop must be >= 8");
  Batch out;
  out.step_seed = step_seed;
  for (int domain = 0; domain < 2; ++domain) {
    const bool is_clean = domain == 0;
    const auto& paths = is_clean ? ds.clean_paths : ds.degraded_paths;
    Rng index_rng(derive_seed(ds.epoch_seed, {kStreamBatch, step_seed, static_cast<std::uint64_t>(domain)}));
    std::vector<int> indices = sample_indices(static_cast<int>(paths.size()), batch, index_rng);
    for (int b = 0; b < batch; ++b) {
      const int idx = indices[static_cast<std::size_t>(b)];
      RgbImage img = load_image(paths[static_cast<std::size_t>(idx)]);
      Rng item_rng(derive_seed(ds.epoch_seed, {kStreamAugment, step_seed,
                                               static_cast<std::uint64_t>(domain),
                                               static_cast<std::uint64_t>(b)}));
      const bool jitter = is_clean || aug.jitter_degraded;
      Tensor crop = augment_crop(img.data, ds.crop, aug, item_rng, jitter);
      if (is_clean) {
        out.clean.push_back(std::move(crop));
        out.clean_indices.push_back(idx);
      } else {
        out.degraded.push_back(std::move(crop));
        out.degraded_indices.push_back(idx);
      }
    }
  }
  return out;
}

DegradationPool build_pool(const UnpairedDataset& ds, int n, int patch, std::uint64_t seed) {
  if (n < 1) throw DataError("build_pool: n must be >= 1");
  if (patch < 8) throw DataError("build_pool: patch must be >= 8");
  if (ds.degraded_paths.empty() || ds.degraded_dims.size() != ds.degraded_paths.size()) {
    throw DataError("build_pool: dataset has no probed degraded images");
  }
  const auto [min_h, min_w] = min_dims(ds.degraded_dims);
  if (patch > min_h || patch > min_w) {
    throw DataError("build_pool: patch " + std::to_string(patch) +
                    " exceeds the smallest degraded image");
  }
  Rng rng(derive_seed(seed, {kStreamPool}));
  DegradationPool pool;
  pool.patches.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int idx = rng.next_index(static_cast<int>(ds.degraded_paths.size()));
    RgbImage img = load_image(ds.degraded_paths[static_cast<std::size_t>(idx)]);
    const int oy = rng.next_index(img.height() - patch + 1);
    const int ox = rng.next_index(img.width() - patch + 1);
    Tensor crop = crop_at(img.data, oy, ox, patch);
    auto [lum, chr] = rgb_to_ycbcr(RgbImage(std::move(crop)));
    pool.patches.push_back(std::move(lum.data));
  }
  pool.validate();
  return pool;
}

}  // namespace weathercycle
