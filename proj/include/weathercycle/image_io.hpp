// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "weathercycle/image.hpp"

namespace weathercycle {

// 8-bit PNG/JPEG I/O. Decode divides by 255 into floats; encode multiplies by
// 255 with round-half-up. Channel order on disk is handled internally; the
// in-memory layout is always RGB planes.
RgbImage load_image(const std::string& path);
void save_image(const RgbImage& img, const std::string& path);

// Decode success probe used by the dataset loader to skip corrupt files.
bool probe_image(const std::string& path, int* height = nullptr, int* width = nullptr);

}  // namespace weathercycle
