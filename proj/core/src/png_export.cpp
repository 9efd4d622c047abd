#include "malsig/png_export.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "malsig/error.hpp"

namespace malsig {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const MalwareImage& img, const std::filesystem::path& path) {
  if (img.width == 0 || img.height == 0) throw Error(Errc::EmptyInput, "empty image");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw Error(Errc::IOFailure, "cannot open " + path.string() + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(Errc::IOFailure, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(Errc::IOFailure, "libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::uint32_t r = 0; r < img.height; ++r) {
    auto* row = const_cast<png_bytep>(img.pixels.data() + static_cast<std::size_t>(r) * img.width);
    png_write_row(png, row);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

MalwareImage read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw Error(Errc::IOFailure, "cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(Errc::IOFailure, "libpng initialisation failed");
  }
  MalwareImage img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(Errc::IOFailure, "libpng failed reading " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(Errc::IOFailure, "expected 8-bit grayscale PNG");
  }
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  for (std::uint32_t r = 0; r < img.height; ++r)
    png_read_row(png, img.pixels.data() + static_cast<std::size_t>(r) * img.width, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace malsig
