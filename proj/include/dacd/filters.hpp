#pragma once

// Separable Gaussian smoothing and finite differences on GrayImage.
// Borders replicate the edge pixel.

#include <algorithm>
#include <cmath>
#include <vector>

#include "dacd/image.hpp"

namespace dacd {

inline std::vector<float> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[i + radius];
  }
  std::vector<float> out(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) out[i] = static_cast<float>(k[i] / sum);
  return out;
}

inline GrayImage gaussian_blur(const GrayImage& src, double sigma) {
  if (sigma <= 0.0) return src;
  const auto kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int w = src.width;
  const int h = src.height;
  GrayImage tmp(w, h);
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    const float* row = &src.pixels[static_cast<std::size_t>(y) * w];
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] * row[std::clamp(x + i, 0, w - 1)];
      }
      tmp.at(x, y) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] * tmp.at(x, std::clamp(y + i, 0, h - 1));
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

/// Central differences (one-sided at the border via clamping).
inline void central_gradient(const GrayImage& src, GrayImage& dx, GrayImage& dy) {
  const int w = src.width;
  const int h = src.height;
  dx = GrayImage(w, h);
  dy = GrayImage(w, h);
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0);
    const int yp = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0);
      const int xp = std::min(x + 1, w - 1);
      dx.at(x, y) = 0.5f * (src.at(xp, y) - src.at(xm, y));
      dy.at(x, y) = 0.5f * (src.at(x, yp) - src.at(x, ym));
    }
  }
}

/// |Lxx + Lyy| of an already smoothed image.
inline GrayImage abs_laplacian(const GrayImage& src) {
  const int w = src.width;
  const int h = src.height;
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0);
    const int yp = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0);
      const int xp = std::min(x + 1, w - 1);
      const float c = src.at(x, y);
      const float lxx = src.at(xp, y) - 2.0f * c + src.at(xm, y);
      const float lyy = src.at(x, yp) - 2.0f * c + src.at(x, ym);
      out.at(x, y) = std::fabs(lxx + lyy);
    }
  }
  return out;
}

}  // namespace dacd
