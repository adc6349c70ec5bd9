// SPDX-License-Identifier: Apache-2.0
#include "weathercycle/metrics.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>

#include <json.hpp>

#include "weathercycle/config.hpp"
#include "weathercycle/errors.hpp"

namespace weathercycle {

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

Tensor luma_of(const RgbImage& img) {
  const int h = img.height(), w = img.width();
  Tensor y({h, w});
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      y.at(i, j) = 0.299 * img.data.at(0, i, j) + 0.587 * img.data.at(1, i, j) +
                   0.114 * img.data.at(2, i, j);
    }
  }
  return y;
}

double mse_of(const Tensor& a, const Tensor& b) {
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    se += d * d;
  }
  return se / static_cast<double>(a.size());
}

Tensor gaussian_window();

}  // namespace

double psnr(const RgbImage& a, const RgbImage& b, bool on_luma) {
  if (!a.data.same_shape(b.data)) {
    throw DataError("psnr: images differ in shape (" + a.data.shape_str() + " vs " +
                    b.data.shape_str() + ")");
  }
  const double mse = on_luma ? mse_of(luma_of(a), luma_of(b)) : mse_of(a.data, b.data);
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace {

Tensor gaussian_window() {
  Tensor k({kSsimWindow, kSsimWindow});
  const int half = kSsimWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    for (int j = 0; j < kSsimWindow; ++j) {
      const double dy = i - half, dx = j - half;
      k.at(i, j) = std::exp(-(dy * dy + dx * dx) / (2.0 * kSsimSigma * kSsimSigma));
      sum += k.at(i, j);
    }
  }
  for (std::size_t i = 0; i < k.size(); ++i) k[i] /= sum;
  return k;
}

}  // namespace

double ssim(const RgbImage& a, const RgbImage& b) {
  if (!a.data.same_shape(b.data)) {
    throw DataError("ssim: images differ in shape (" + a.data.shape_str() + " vs " +
                    b.data.shape_str() + ")");
  }
  const int h = a.height(), w = a.width();
  if (h < kSsimWindow || w < kSsimWindow) {
    throw DataError("ssim: image smaller than the 11x11 window");
  }
  const Tensor x = luma_of(a);
  const Tensor y = luma_of(b);
  static const Tensor kWin = gaussian_window();

  constexpr double kC1 = 0.01 * 0.01;  // (K1*L)^2 with L = 1
  constexpr double kC2 = 0.03 * 0.03;  // (K2*L)^2
  double total = 0.0;
  std::int64_t windows = 0;
  for (int i = 0; i + kSsimWindow <= h; ++i) {
    for (int j = 0; j + kSsimWindow <= w; ++j) {
      double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
      for (int u = 0; u < kSsimWindow; ++u) {
        for (int v = 0; v < kSsimWindow; ++v) {
          const double wt = kWin.at(u, v);
          const double xv = x.at(i + u, j + v);
          const double yv = y.at(i + u, j + v);
          mx += wt * xv;
          my += wt * yv;
          mxx += wt * xv * xv;
          myy += wt * yv * yv;
          mxy += wt * xv * yv;
        }
      }
      const double vx = mxx - mx * mx;
      const double vy = myy - my * my;
      const double cov = mxy - mx * my;
      const double num = (2.0 * mx * my + kC1) * (2.0 * cov + kC2);
      const double den = (mx * mx + my * my + kC1) * (vx + vy + kC2);
      total += num / den;
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

void MetricReport::finalize() {
  mean_psnr = 0.0;
  mean_ssim = 0.0;
  if (entries.empty()) return;
  for (const MetricEntry& e : entries) {
    mean_psnr += e.psnr;
    mean_ssim += e.ssim;
  }
  mean_psnr /= static_cast<double>(entries.size());
  mean_ssim /= static_cast<double>(entries.size());
}

std::string MetricReport::to_csv() const {
  std::ostringstream out;
  out << "path,psnr,ssim\n";
  for (const MetricEntry& e : entries) {
    out << e.path << "," << format_double(e.psnr) << "," << format_double(e.ssim) << "\n";
  }
  return out.str();
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["count"] = entries.size();
  j["mean_psnr"] = mean_psnr;
  j["mean_ssim"] = mean_ssim;
  j["config_fingerprint"] = config_fingerprint;
  nlohmann::json per_image = nlohmann::json::array();
  for (const MetricEntry& e : entries) {
    per_image.push_back({{"path", e.path}, {"psnr", e.psnr}, {"ssim", e.ssim}});
  }
  j["images"] = per_image;
  return j.dump(2) + "\n";
}

std::string fingerprint_text(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a 64
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex;
  for (int shift = 60; shift >= 0; shift -= 4) out << ((h >> shift) & 0xf);
  return out.str();
}

}  // namespace weathercycle
