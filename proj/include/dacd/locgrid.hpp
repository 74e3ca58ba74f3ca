#pragma once

// Coarse LOC grid: max pooling of feature scores, thresholding, and
// top-fraction cell selection.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "dacd/error.hpp"
#include "dacd/image.hpp"
#include "dacd/match.hpp"

namespace dacd {

inline constexpr int kCellPixels = 10;

struct GridDims {
  int w = 0;
  int h = 0;
  bool operator==(const GridDims&) const = default;
};

inline GridDims grid_dims(int width, int height) {
  if (width < kCellPixels || height < kCellPixels) {
    throw Error("grid_dims: image must be at least 10 px in each dimension");
  }
  return {width / kCellPixels, height / kCellPixels};
}

struct LocGrid {
  int w = 0;
  int h = 0;
  std::vector<double> values;  // row-major, h rows of w

  LocGrid() = default;
  LocGrid(int w_, int h_, double fill = 0.0) : w(w_), h(h_), values(static_cast<std::size_t>(w_) * h_, fill) {}

  double& at(int col, int row) { return values[static_cast<std::size_t>(row) * w + col]; }
  double at(int col, int row) const { return values[static_cast<std::size_t>(row) * w + col]; }
  std::size_t size() const { return values.size(); }

  bool operator==(const LocGrid&) const = default;
};

struct ChangeMask {
  int w = 0;
  int h = 0;
  std::vector<bool> bits;

  bool at(int col, int row) const { return bits[static_cast<std::size_t>(row) * w + col]; }
  bool operator==(const ChangeMask&) const = default;
};

struct Cell {
  int col = 0;
  int row = 0;
  bool operator==(const Cell&) const = default;
};

/// Cell holding pixel coordinate (x, y); trailing pixels clamp into the last cell.
inline Cell cell_of(double x, double y, int width, int height, GridDims dims) {
  const int col = std::min(static_cast<int>(std::floor(x * dims.w / width)), dims.w - 1);
  const int row = std::min(static_cast<int>(std::floor(y * dims.h / height)), dims.h - 1);
  return {col, row};
}

inline LocGrid pool_loc(const std::vector<ScoredFeature>& scored, int width, int height) {
  const GridDims dims = grid_dims(width, height);
  LocGrid grid(dims.w, dims.h, 0.0);
  for (const auto& s : scored) {
    const auto& kp = s.feature.keypoint;
    if (!(kp.x >= 0.0 && kp.y >= 0.0 && kp.x < width && kp.y < height)) {
      throw Error("pool_loc: keypoint outside image bounds");
    }
    const Cell c = cell_of(kp.x, kp.y, width, height, dims);
    double& v = grid.at(c.col, c.row);
    v = std::max(v, s.loc);
  }
  return grid;
}

inline ChangeMask threshold_mask(const LocGrid& grid, double tau) {
  ChangeMask m{grid.w, grid.h, std::vector<bool>(grid.size())};
  for (std::size_t i = 0; i < grid.size(); ++i) m.bits[i] = grid.values[i] >= tau;
  return m;
}

/// ceil(frac * n), robust to representation error in frac * n.
inline std::size_t top_fraction_count(double frac, std::size_t n) {
  if (!(frac > 0.0 && frac <= 1.0)) throw Error("top_fraction: frac must be in (0,1]");
  const double raw = frac * static_cast<double>(n);
  const double rounded = std::round(raw);
  const double count = std::fabs(raw - rounded) < 1e-9 ? rounded : std::ceil(raw);
  return std::min(n, static_cast<std::size_t>(count));
}

/// Highest-valued cells; equal values keep row-major order.
inline std::vector<Cell> top_fraction_cells(const LocGrid& grid, double frac) {
  const std::size_t k = top_fraction_count(frac, grid.size());
  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return grid.values[a] > grid.values[b]; });
  std::vector<Cell> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back({static_cast<int>(order[i] % grid.w), static_cast<int>(order[i] / grid.w)});
  }
  return out;
}

inline ChangeMask cells_to_mask(const std::vector<Cell>& cells, int w, int h) {
  ChangeMask m{w, h, std::vector<bool>(static_cast<std::size_t>(w) * h, false)};
  for (const auto& c : cells) m.bits[static_cast<std::size_t>(c.row) * w + c.col] = true;
  return m;
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string grid_to_csv(const LocGrid& grid) {
  std::string out;
  for (int r = 0; r < grid.h; ++r) {
    for (int c = 0; c < grid.w; ++c) {
      if (c) out += ',';
      out += format_double(grid.at(c, r));
    }
    out += '\n';
  }
  return out;
}

inline LocGrid grid_from_csv(const std::string& text) {
  LocGrid grid;
  std::vector<double> values;
  int rows = 0;
  int cols = -1;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    int n = 0;
    std::size_t p = 0;
    while (p <= line.size()) {
      std::size_t comma = line.find(',', p);
      if (comma == std::string::npos) comma = line.size();
      values.push_back(std::stod(line.substr(p, comma - p)));
      ++n;
      p = comma + 1;
    }
    if (cols >= 0 && n != cols) throw Error("grid csv: ragged rows");
    cols = n;
    ++rows;
  }
  if (rows == 0) throw Error("grid csv: empty");
  grid.w = cols;
  grid.h = rows;
  grid.values = std::move(values);
  return grid;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write: " + path.string());
  out << text;
  if (!out) throw Error("cannot write: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("file not found: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// White = change, each cell drawn as a 10x10 block.
inline Image mask_to_image(const ChangeMask& mask) {
  Image img(mask.w * kCellPixels, mask.h * kCellPixels, 0);
  for (int r = 0; r < mask.h; ++r) {
    for (int c = 0; c < mask.w; ++c) {
      if (!mask.at(c, r)) continue;
      for (int y = r * kCellPixels; y < (r + 1) * kCellPixels; ++y) {
        for (int x = c * kCellPixels; x < (c + 1) * kCellPixels; ++x) img.set(x, y, 255, 255, 255);
      }
    }
  }
  return img;
}

}  // namespace dacd
