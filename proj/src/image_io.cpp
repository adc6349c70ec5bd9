// SPDX-License-Identifier: Apache-2.0
#include "weathercycle/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>

#include "weathercycle/errors.hpp"

namespace weathercycle {

RgbImage load_image(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
  if (m.empty()) throw DataError("load_image: cannot decode " + path);
  const int h = m.rows, w = m.cols;
  if (h < 8 || w < 8) throw DataError("load_image: image smaller than 8x8: " + path);
  Tensor t({3, h, w});
  for (int i = 0; i < h; ++i) {
    const cv::Vec3b* row = m.ptr<cv::Vec3b>(i);  // BGR on disk
    for (int j = 0; j < w; ++j) {
      t.at(0, i, j) = row[j][2] / 255.0;
      t.at(1, i, j) = row[j][1] / 255.0;
      t.at(2, i, j) = row[j][0] / 255.0;
    }
  }
  return RgbImage(std::move(t));
}

void save_image(const RgbImage& img, const std::string& path) {
  const int h = img.height(), w = img.width();
  cv::Mat m(h, w, CV_8UC3);
  auto to_byte = [](double v) {
    const double scaled = std::floor(std::min(1.0, std::max(0.0, v)) * 255.0 + 0.5);
    return static_cast<unsigned char>(std::min(255.0, scaled));
  };
  for (int i = 0; i < h; ++i) {
    cv::Vec3b* row = m.ptr<cv::Vec3b>(i);
    for (int j = 0; j < w; ++j) {
      row[j][0] = to_byte(img.data.at(2, i, j));
      row[j][1] = to_byte(img.data.at(1, i, j));
      row[j][2] = to_byte(img.data.at(0, i, j));
    }
  }
  if (!cv::imwrite(path, m)) throw DataError("save_image: cannot write " + path);
}

bool probe_image(const std::string& path, int* height, int* width) {
  cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
  if (m.empty() || m.rows < 8 || m.cols < 8) return false;
  if (height) *height = m.rows;
  if (width) *width = m.cols;
  return true;
}

}  // namespace weathercycle
