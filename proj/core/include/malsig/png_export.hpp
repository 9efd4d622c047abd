#pragma once

#include <filesystem>

#include "malsig/bytes_image.hpp"

namespace malsig {

// Writes an 8-bit grayscale PNG (no alpha). Throws Error(IOFailure).
void write_png(const MalwareImage& img, const std::filesystem::path& path);

// Reads back an 8-bit grayscale PNG written by write_png.
MalwareImage read_png(const std::filesystem::path& path);

}  // namespace malsig
