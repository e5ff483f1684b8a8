#pragma once

#include <filesystem>
#include <string>

#include "mgst/grid.hpp"

namespace mgst::io {

/// Reads PNG (8/16-bit, gray or RGB, alpha dropped) or PFM, chosen by
/// extension. PNG samples are scaled linearly to [0,1].
Image read_image(const std::filesystem::path& path);

/// Writes PNG or PFM by extension. PNG values are clipped to [0,1] and
/// quantized to `png_bit_depth` (8 or 16).
void write_image(const std::filesystem::path& path, const Image& img, int png_bit_depth = 16);

Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img, int bit_depth = 16);

/// Portable float map: "Pf" (gray) or "PF" (RGB), little-endian, rows
/// stored bottom to top.
Image read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const Image& img);

/// Text kernels: line 1 "KERNEL <size>", then `size` rows of
/// whitespace-separated decimals.
Kernel read_kernel(const std::filesystem::path& path);
void write_kernel(const std::filesystem::path& path, const Kernel& k);
Kernel parse_kernel(const std::string& text);
std::string format_kernel(const Kernel& k);

/// True for extensions read_image understands.
bool is_image_path(const std::filesystem::path& path);

}  // namespace mgst::io
