// Copyright 2026 The Savanna Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "savanna/image_io.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "savanna/error.hpp"

namespace savanna {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

[[noreturn]] void on_png_error(png_structp png, png_const_charp message) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = message;
  std::longjmp(png_jmpbuf(png), 1);
}

void on_png_warning(png_structp, png_const_charp) {}

struct Metadata {
  std::optional<double> gsd_cm;
  std::optional<std::string> acquired_at;
};

}  // namespace

RasterImage read_png(std::filesystem::path const& path,
                     std::optional<double> fallback_gsd_cm) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error(ErrorCode::kIoError, "cannot open image", path.string());

  png_byte signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 ||
      png_sig_cmp(signature, 0, 8) != 0) {
    throw Error(ErrorCode::kIoError, "not a PNG file", path.string());
  }

  std::string failure;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &failure,
                                           on_png_error, on_png_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kInternal, "libpng initialisation failed");
  }

  // Everything that must survive a longjmp lives outside this frame's
  // automatic objects with non-trivial destructors.
  std::vector<png_byte> rows;
  png_uint_32 width = 0, height = 0;
  int color_type = 0;
  Metadata meta;
  bool grayscale = false;
  std::vector<png_bytep> ptrs;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kIoError, "corrupt PNG: " + failure, path.string());
  }

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  color_type = png_get_color_type(png, info);
  grayscale = (color_type & PNG_COLOR_MASK_COLOR) == 0;

  if (!grayscale) {
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_read_update_info(png, info);
    if (png_get_channels(png, info) == 4) {
      // tRNS expansion re-adds alpha after the strip request.
      png_set_strip_alpha(png);
      png_read_update_info(png, info);
    }
    std::size_t stride = png_get_rowbytes(png, info);
    rows.resize(stride * height);
    ptrs.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) ptrs[y] = rows.data() + y * stride;
    png_read_image(png, ptrs.data());
    png_read_end(png, info);

    png_textp text = nullptr;
    int count = 0;
    png_get_text(png, info, &text, &count);
    for (int i = 0; i < count; ++i) {
      std::string key = text[i].key;
      std::string value(text[i].text, text[i].text_length);
      if (key == "gsd_cm") {
        char* end = nullptr;
        double v = std::strtod(value.c_str(), &end);
        if (end != value.c_str()) meta.gsd_cm = v;
      } else if (key == "acquired_at") {
        meta.acquired_at = value;
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);

  if (grayscale) {
    throw_invalid("image is not 3-channel RGB", path.string());
  }
  double gsd = meta.gsd_cm.value_or(fallback_gsd_cm.value_or(0.0));
  if (!(gsd > 0.0)) {
    throw_invalid("image has no gsd_cm metadata and no fallback GSD",
                  path.string());
  }
  std::optional<Timestamp> ts;
  if (meta.acquired_at) ts = Timestamp::parse(*meta.acquired_at);

  RasterImage img(path.stem().string(), static_cast<int>(width),
                  static_cast<int>(height), gsd, ts);
  std::copy(rows.begin(), rows.begin() + img.bytes().size(),
            img.bytes().begin());
  return img;
}

namespace {

void append_bytes(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void flush_noop(png_structp) {}

}  // namespace

std::vector<std::uint8_t> encode_png(RasterImage const& img) {
  std::vector<std::uint8_t> out;
  std::string failure;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &failure,
                                            on_png_error, on_png_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kInternal, "libpng initialisation failed");
  }
  std::string gsd_text = std::to_string(img.gsd_cm());
  std::string time_text =
      img.acquired_at() ? img.acquired_at()->iso8601() : std::string{};
  std::vector<png_bytep> ptrs(img.height());
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIoError, "PNG encoding failed: " + failure);
  }
  png_set_write_fn(png, &out, append_bytes, flush_noop);
  png_set_IHDR(png, info, img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_text text[2] = {};
  text[0].compression = PNG_TEXT_COMPRESSION_NONE;
  text[0].key = const_cast<char*>("gsd_cm");
  text[0].text = gsd_text.data();
  text[0].text_length = gsd_text.size();
  int n_text = 1;
  if (img.acquired_at()) {
    text[1].compression = PNG_TEXT_COMPRESSION_NONE;
    text[1].key = const_cast<char*>("acquired_at");
    text[1].text = time_text.data();
    text[1].text_length = time_text.size();
    n_text = 2;
  }
  png_set_text(png, info, text, n_text);
  png_write_info(png, info);
  auto bytes = img.bytes();
  for (int y = 0; y < img.height(); ++y) {
    ptrs[y] = const_cast<png_bytep>(bytes.data()) +
              static_cast<std::size_t>(y) * img.width() * 3;
  }
  png_write_image(png, ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(std::filesystem::path const& path, RasterImage const& img) {
  auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write image", path.string());
  out.write(reinterpret_cast<char const*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

RasterImage crop_centered(RasterImage const& img, Point2d center, int size) {
  RasterImage out(img.id(), size, size, img.gsd_cm(), img.acquired_at());
  int const cx = static_cast<int>(std::lround(center.x));
  int const cy = static_cast<int>(std::lround(center.y));
  int const half = size / 2;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      int sx = cx - half + x, sy = cy - half + y;
      out.set_pixel(x, y,
                    {img.clamped(sx, sy, 0), img.clamped(sx, sy, 1),
                     img.clamped(sx, sy, 2)});
    }
  }
  return out;
}

}  // namespace savanna
