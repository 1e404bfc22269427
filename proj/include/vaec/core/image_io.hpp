#pragma once

#include <filesystem>

#include "vaec/core/image.hpp"

namespace vaec {

ImageU8 read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageU8& img);

// Baseline TIFF only: uncompressed 8-bit RGB, chunky planar layout.
// Reads both byte orders; writes little-endian, single strip.
ImageU8 read_tiff(const std::filesystem::path& path);
void write_tiff(const std::filesystem::path& path, const ImageU8& img);

/// Dispatches on file extension (.png, .tif, .tiff); falls back to magic sniffing.
ImageU8 read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const ImageU8& img);

} // namespace vaec
