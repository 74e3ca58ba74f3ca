#pragma once

// Image decoding/encoding, grayscale conversion and canonical resizing.
// Everything downstream of this header works on 256x256 inputs.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "dacd/error.hpp"

namespace dacd {

inline constexpr int kCanonicalSize = 256;

/// Row-major 8-bit RGB raster.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(checked_size(w, h), fill) {}
  Image(int w, int h, std::vector<std::uint8_t> px) : width(w), height(h), pixels(std::move(px)) {
    if (pixels.size() != checked_size(w, h)) throw Error("image: pixel buffer size mismatch");
  }

  std::uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    auto* p = &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  bool operator==(const Image&) const = default;

 private:
  static std::size_t checked_size(int w, int h) {
    if (w < 1 || h < 1) throw Error("image: dimensions must be >= 1");
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  }
};

/// Row-major luminance in [0,1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {
    if (w < 1 || h < 1) throw Error("gray image: dimensions must be >= 1");
  }

  float& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const GrayImage&) const = default;
};

namespace detail {

inline Image decode_png_bytes(const std::vector<unsigned char>& bytes, const std::string& origin) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    std::string msg = img.message;
    png_image_free(&img);
    throw Error("decode failure: " + origin + ": " + msg);
  }
  img.format = PNG_FORMAT_RGB;
  if (img.width < 1 || img.height < 1) {
    png_image_free(&img);
    throw Error("decode failure: " + origin + ": empty image");
  }
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(img));
  // Grayscale and palette inputs are promoted to RGB; alpha is composited on black.
  png_color background{0, 0, 0};
  if (!png_image_finish_read(&img, &background, px.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw Error("decode failure: " + origin + ": " + msg);
  }
  return Image(static_cast<int>(img.width), static_cast<int>(img.height), std::move(px));
}

}  // namespace detail

inline Image load_image(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error("file not found: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("file not found: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return detail::decode_png_bytes(bytes, path.string());
}

inline std::vector<unsigned char> encode_png(const Image& img) {
  png_image out{};
  out.version = PNG_IMAGE_VERSION;
  out.width = static_cast<png_uint_32>(img.width);
  out.height = static_cast<png_uint_32>(img.height);
  out.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&out, nullptr, &size, 0, img.pixels.data(), 0, nullptr)) {
    throw Error(std::string("png encode failure: ") + out.message);
  }
  std::vector<unsigned char> buf(size);
  if (!png_image_write_to_memory(&out, buf.data(), &size, 0, img.pixels.data(), 0, nullptr)) {
    throw Error(std::string("png encode failure: ") + out.message);
  }
  buf.resize(size);
  return buf;
}

inline void save_png(const Image& img, const std::filesystem::path& path) {
  auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("cannot write: " + path.string());
}

/// Bilinear resample to an arbitrary size, pixel-center aligned.
inline Image resize_bilinear(const Image& img, int out_w, int out_h) {
  if (img.width == out_w && img.height == out_h) return img;
  Image out(out_w, out_h);
  const double sx = static_cast<double>(img.width) / out_w;
  const double sy = static_cast<double>(img.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, img.height - 1);
    double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, img.width - 1);
      double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        double top = img.at(x0, y0, c) * (1.0 - wx) + img.at(x1, y0, c) * wx;
        double bot = img.at(x0, y1, c) * (1.0 - wx) + img.at(x1, y1, c) * wx;
        double v = top * (1.0 - wy) + bot * wy;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

inline Image resize_canonical(const Image& img) {
  return resize_bilinear(img, kCanonicalSize, kCanonicalSize);
}

/// Rec.601 luma scaled to [0,1].
inline GrayImage to_gray(const Image& img) {
  GrayImage g(img.width, img.height);
  for (std::size_t i = 0, n = g.pixels.size(); i < n; ++i) {
    const double r = img.pixels[3 * i];
    const double gr = img.pixels[3 * i + 1];
    const double b = img.pixels[3 * i + 2];
    double v = (0.299 * r + 0.587 * gr + 0.114 * b) / 255.0;
    g.pixels[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return g;
}

}  // namespace dacd
