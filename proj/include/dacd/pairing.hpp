#pragma once

// Viewpoint pairing from planar pose measurements and the pose CSV format
// (header: image_id,x,y,timestamp).

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dacd/error.hpp"
#include "dacd/locgrid.hpp"

namespace dacd {

struct Pose {
  std::string image_id;
  double x = 0.0;
  double y = 0.0;
  double timestamp = 0.0;
};

/// For each source pose, the destination pose at minimum squared planar
/// distance; equal distances prefer the earlier timestamp, then list order.
inline std::vector<std::pair<std::string, std::string>> pair_by_viewpoint(const std::vector<Pose>& src,
                                                                          const std::vector<Pose>& dst) {
  if (src.empty() || dst.empty()) throw Error("pair_by_viewpoint: pose lists must be non-empty");
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(src.size());
  for (const auto& s : src) {
    std::size_t best = 0;
    double best_d2 = INFINITY;
    for (std::size_t j = 0; j < dst.size(); ++j) {
      const double dx = dst[j].x - s.x;
      const double dy = dst[j].y - s.y;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best_d2 || (d2 == best_d2 && dst[j].timestamp < dst[best].timestamp)) {
        best = j;
        best_d2 = d2;
      }
    }
    out.emplace_back(s.image_id, dst[best].image_id);
  }
  return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    out.push_back(cell);
  }
  return out;
}

inline std::vector<Pose> parse_poses_csv(const std::string& text, const std::string& origin = "poses") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(origin + ": empty pose file");
  const auto header = split_csv_line(line);
  if (header != std::vector<std::string>{"image_id", "x", "y", "timestamp"}) {
    throw Error(origin + ": expected header image_id,x,y,timestamp");
  }
  std::vector<Pose> poses;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) throw Error(origin + ": line " + std::to_string(lineno) + ": expected 4 fields");
    try {
      Pose p{cells[0], std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3])};
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.timestamp)) {
        throw Error("non-finite value");
      }
      poses.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw Error(origin + ": line " + std::to_string(lineno) + ": bad number (" + e.what() + ")");
    }
  }
  return poses;
}

inline std::vector<Pose> read_poses_csv(const std::filesystem::path& path) {
  return parse_poses_csv(read_text(path), path.string());
}

inline std::string poses_to_csv(const std::vector<Pose>& poses) {
  std::string out = "image_id,x,y,timestamp\n";
  for (const auto& p : poses) {
    out += p.image_id + "," + format_double(p.x) + "," + format_double(p.y) + "," + format_double(p.timestamp) + "\n";
  }
  return out;
}

inline std::string pairs_to_csv(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::string out = "src_id,dst_id\n";
  for (const auto& [a, b] : pairs) out += a + "," + b + "\n";
  return out;
}

}  // namespace dacd
