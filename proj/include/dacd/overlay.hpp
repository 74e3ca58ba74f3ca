#pragma once

// Query overlay: red outlines on the top-fraction LOC cells, blue markers on
// ground-truth box centres.

#include <algorithm>
#include <vector>

#include "dacd/eval.hpp"
#include "dacd/image.hpp"
#include "dacd/locgrid.hpp"

namespace dacd {

struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;  // inclusive
  int y1 = 0;
};

struct OverlayLayout {
  std::vector<PixelRect> cells;
  std::vector<std::pair<int, int>> markers;
};

inline constexpr int kMarkerHalf = 2;

inline OverlayLayout overlay_layout(const LocGrid& grid, const std::vector<GtBox>& gt, double frac) {
  OverlayLayout layout;
  for (const auto& c : top_fraction_cells(grid, frac)) {
    layout.cells.push_back({c.col * kCellPixels, c.row * kCellPixels, c.col * kCellPixels + kCellPixels - 1,
                            c.row * kCellPixels + kCellPixels - 1});
  }
  for (const auto& b : gt) layout.markers.emplace_back(b.x + b.w / 2, b.y + b.h / 2);
  return layout;
}

inline Image render_overlay(const Image& query, const LocGrid& grid, const std::vector<GtBox>& gt, double frac) {
  Image out = resize_canonical(query);
  const auto layout = overlay_layout(grid, gt, frac);
  auto put = [&](int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x >= 0 && y >= 0 && x < out.width && y < out.height) out.set(x, y, r, g, b);
  };
  for (const auto& rc : layout.cells) {
    for (int x = rc.x0; x <= rc.x1; ++x) {
      put(x, rc.y0, 255, 0, 0);
      put(x, rc.y1, 255, 0, 0);
    }
    for (int y = rc.y0; y <= rc.y1; ++y) {
      put(rc.x0, y, 255, 0, 0);
      put(rc.x1, y, 255, 0, 0);
    }
  }
  for (const auto& [mx, my] : layout.markers) {
    for (int y = my - kMarkerHalf; y <= my + kMarkerHalf; ++y) {
      for (int x = mx - kMarkerHalf; x <= mx + kMarkerHalf; ++x) put(x, y, 0, 0, 255);
    }
  }
  return out;
}

}  // namespace dacd
