#pragma once

#include <cstdint>
#include <string>

#include "superct/core.hpp"

namespace superct {

// Raw grid format: text header "F32 v1 <rows> <cols> <pixel_mm>\n" followed
// by row-major little-endian 32-bit floats.
void write_f32_image(const Image& img, const std::string& path);
Image read_f32_image(const std::string& path);

// Sinograms reuse the grid format with rows = views, cols = detectors and the
// detector pitch in the header's length slot.
void write_f32_sinogram(const Sinogram& s, double pitch_mm, const std::string& path);
Sinogram read_f32_sinogram(const std::string& path);

std::uint64_t fnv1a64(const std::string& text);

}  // namespace superct
