#pragma once

// Ground truth, precision/recall sweeps and 11-point interpolated AP.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dacd/error.hpp"
#include "dacd/locgrid.hpp"

namespace dacd {

inline constexpr int kRecallCutoffs[] = {10, 20, 50, 100};

struct GtBox {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;
  bool operator==(const GtBox&) const = default;
};

struct GtMask {
  int w = 0;
  int h = 0;
  std::vector<bool> bits;

  bool at(int col, int row) const { return bits[static_cast<std::size_t>(row) * w + col]; }
  std::size_t positives() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), true)); }
};

struct PrPoint {
  double precision = 1.0;
  double recall = 0.0;
  double tau = 0.0;
};

/// Drops boxes whose both sides are <= min_side.
inline std::vector<GtBox> filter_small_changes(const std::vector<GtBox>& boxes, int min_side = 10) {
  std::vector<GtBox> out;
  for (const auto& b : boxes) {
    if (b.w <= min_side && b.h <= min_side) continue;
    out.push_back(b);
  }
  return out;
}

/// A cell is positive when its centre (in the pooling geometry) lies inside
/// any box, edges inclusive.
inline GtMask rasterize_gt(const std::vector<GtBox>& boxes, int width, int height) {
  const GridDims dims = grid_dims(width, height);
  GtMask m{dims.w, dims.h, std::vector<bool>(static_cast<std::size_t>(dims.w) * dims.h, false)};
  const double cw = static_cast<double>(width) / dims.w;
  const double ch = static_cast<double>(height) / dims.h;
  for (int r = 0; r < dims.h; ++r) {
    const double cy = (r + 0.5) * ch;
    for (int c = 0; c < dims.w; ++c) {
      const double cx = (c + 0.5) * cw;
      for (const auto& b : boxes) {
        if (cx >= b.x && cx <= b.x + b.w && cy >= b.y && cy <= b.y + b.h) {
          m.bits[static_cast<std::size_t>(r) * dims.w + c] = true;
          break;
        }
      }
    }
  }
  return m;
}

/// One point per distinct grid value, thresholds in descending order.
inline std::vector<PrPoint> pr_sweep(const LocGrid& grid, const GtMask& gt) {
  if (grid.w != gt.w || grid.h != gt.h) throw Error("pr_sweep: grid and ground-truth dimensions differ");
  const std::size_t positives = gt.positives();
  if (positives == 0) throw Error("pr_sweep: ground truth has no positive cells");

  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return grid.values[a] > grid.values[b]; });

  std::vector<PrPoint> out;
  std::size_t tp = 0;
  std::size_t predicted = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double tau = grid.values[order[i]];
    while (i < order.size() && grid.values[order[i]] == tau) {
      if (gt.bits[order[i]]) ++tp;
      ++predicted;
      ++i;
    }
    out.push_back({static_cast<double>(tp) / static_cast<double>(predicted),
                   static_cast<double>(tp) / static_cast<double>(positives), tau});
  }
  return out;
}

/// Max precision over points with recall >= level (0 when none).
inline double interpolated_precision(const std::vector<PrPoint>& points, double level) {
  double best = 0.0;
  for (const auto& p : points) {
    if (p.recall >= level) best = std::max(best, p.precision);
  }
  return best;
}

/// Mean interpolated precision over recall levels 0, 10, ..., max_recall_pct percent.
inline double interpolated_ap(const std::vector<PrPoint>& points, int max_recall_pct = 100) {
  if (points.empty()) throw Error("interpolated_ap: empty precision/recall curve");
  if (max_recall_pct < 10 || max_recall_pct > 100 || max_recall_pct % 10 != 0) {
    throw Error("interpolated_ap: recall cutoff must be one of 10, 20, ..., 100");
  }
  const int levels = max_recall_pct / 10;
  double sum = 0.0;
  for (int k = 0; k <= levels; ++k) sum += interpolated_precision(points, k / 10.0);
  return sum / (levels + 1);
}

inline double mean_ap(const std::vector<double>& aps) {
  if (aps.empty()) throw Error("mean_ap: no images to average");
  double sum = 0.0;
  for (double v : aps) sum += v;
  return sum / static_cast<double>(aps.size());
}

struct ImageEval {
  std::string image_id;
  std::map<int, double> ap_at;  // recall cutoff -> AP
};

struct EvalReport {
  std::string strategy;
  std::map<std::string, double> per_image_ap;  // AP@100
  std::map<int, double> map_at;                // cutoff -> mAP in [0,1]
  std::vector<ImageEval> images;               // input order
  std::vector<std::string> skipped;            // no positive ground truth
};

inline ImageEval evaluate_image(const std::string& id, const LocGrid& grid, const GtMask& gt) {
  const auto points = pr_sweep(grid, gt);
  ImageEval ev{id, {}};
  for (int x : kRecallCutoffs) ev.ap_at[x] = interpolated_ap(points, x);
  return ev;
}

inline void finalize_report(EvalReport& report) {
  report.per_image_ap.clear();
  report.map_at.clear();
  if (report.images.empty()) throw Error("evaluation: no image with positive ground truth");
  for (const auto& ev : report.images) report.per_image_ap[ev.image_id] = ev.ap_at.at(100);
  for (int x : kRecallCutoffs) {
    std::vector<double> aps;
    for (const auto& ev : report.images) aps.push_back(ev.ap_at.at(x));
    report.map_at[x] = mean_ap(aps);
  }
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json map_at = nlohmann::json::object();
  nlohmann::json map_pct = nlohmann::json::object();
  for (const auto& [x, v] : r.map_at) {
    map_at[std::to_string(x)] = v;
    map_pct[std::to_string(x)] = 100.0 * v;
  }
  nlohmann::json images = nlohmann::json::array();
  for (const auto& ev : r.images) {
    nlohmann::json ap = nlohmann::json::object();
    for (const auto& [x, v] : ev.ap_at) ap[std::to_string(x)] = v;
    images.push_back({{"image_id", ev.image_id}, {"ap_at", std::move(ap)}});
  }
  return {{"strategy", r.strategy},
          {"map_at", std::move(map_at)},
          {"map_at_pct", std::move(map_pct)},
          {"per_image_ap", r.per_image_ap},
          {"images", std::move(images)},
          {"skipped", r.skipped}};
}

// ---------------------------------------------------------------------------
// <image_id>.gt.json

struct GtAnnotation {
  std::string image_id;
  std::vector<GtBox> boxes;
};

inline nlohmann::json gt_to_json(const GtAnnotation& gt) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& b : gt.boxes) boxes.push_back({{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}});
  return {{"image_id", gt.image_id}, {"boxes", std::move(boxes)}};
}

inline GtAnnotation read_gt(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing ground truth: " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    GtAnnotation gt;
    gt.image_id = j.at("image_id").get<std::string>();
    for (const auto& b : j.at("boxes")) {
      GtBox box{b.at("x").get<int>(), b.at("y").get<int>(), b.at("w").get<int>(), b.at("h").get<int>()};
      if (box.w < 1 || box.h < 1) throw Error("ground truth: box sides must be >= 1 in " + path.string());
      gt.boxes.push_back(box);
    }
    return gt;
  } catch (const nlohmann::json::exception& e) {
    throw Error("ground truth: " + path.string() + ": " + e.what());
  }
}

}  // namespace dacd
