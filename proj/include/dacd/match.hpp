#pragma once

// Reference indexing, merge strategies, radius-constrained NN search and
// per-feature likelihood-of-change (LOC) scoring.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dacd/error.hpp"
#include "dacd/features.hpp"

namespace dacd {

enum class MergeStrategy : std::uint8_t { WithMerge, WithoutMerge };

struct CompareParams {
  double radius = 10.0;
  double d_a = 3.0;  // dense-keypoint penalty exp(-d_a^2)
  double d_b = 2.0;  // strong-match penalty exp(-d_b^2)
  double ratio_threshold = 0.4;
  double loc_ceiling = std::numbers::sqrt2;

  void validate() const {
    if (!(radius > 0.0)) throw Error("compare params: radius must be > 0");
    if (!(d_a > d_b && d_b > 1.0)) throw Error("compare params: require d_a > d_b > 1");
    if (!(ratio_threshold > 0.0 && ratio_threshold < 1.0)) {
      throw Error("compare params: ratio_threshold must be in (0,1)");
    }
    if (!(loc_ceiling > 0.0)) throw Error("compare params: loc_ceiling must be > 0");
  }

  double dense_factor() const { return std::exp(-d_a * d_a); }
  double match_factor() const { return std::exp(-d_b * d_b); }
};

enum class Penalty : std::uint8_t { DensePenalty = 1, MatchPenalty = 2, NoNeighborCeiling = 4 };

class PenaltySet {
 public:
  void add(Penalty p) { bits_ |= static_cast<std::uint8_t>(p); }
  bool has(Penalty p) const { return (bits_ & static_cast<std::uint8_t>(p)) != 0; }
  bool empty() const { return bits_ == 0; }
  bool operator==(const PenaltySet&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

struct ScoredFeature {
  Feature feature;
  double loc = 0.0;
  std::optional<std::size_t> matched_ref;  // index into RefIndex::features()
  PenaltySet penalties;

  bool operator==(const ScoredFeature&) const = default;
};

inline FeatureSet merge_feature_sets(const FeatureSet& raw, const FeatureSet& virt, MergeStrategy strategy) {
  if (raw.width != virt.width || raw.height != virt.height) {
    throw Error("merge: raw and virtual feature sets differ in image dimensions");
  }
  if (strategy == MergeStrategy::WithoutMerge) return virt;
  FeatureSet out = raw;
  out.features.insert(out.features.end(), virt.features.begin(), virt.features.end());
  return out;
}

/// Immutable 2-D kd-tree over reference keypoint positions.
class RefIndex {
 public:
  explicit RefIndex(FeatureSet refs) : refs_(std::move(refs)) {
    order_.resize(refs_.features.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<std::uint32_t>(i);
    build(0, order_.size(), 0);
  }

  const FeatureSet& feature_set() const { return refs_; }
  const std::vector<Feature>& features() const { return refs_.features; }
  std::size_t size() const { return refs_.features.size(); }

  /// Indices with dx^2 + dy^2 <= radius^2, by ascending distance then index.
  std::vector<std::size_t> neighbors_in_radius(double x, double y, double radius) const {
    if (!(radius > 0.0)) throw Error("neighbors_in_radius: radius must be > 0");
    std::vector<std::pair<double, std::size_t>> hits;
    search(0, order_.size(), 0, x, y, radius, radius * radius, hits);
    std::sort(hits.begin(), hits.end());
    std::vector<std::size_t> out;
    out.reserve(hits.size());
    for (const auto& h : hits) out.push_back(h.second);
    return out;
  }

 private:
  double coord(std::size_t feature, int axis) const {
    const auto& kp = refs_.features[feature].keypoint;
    return axis == 0 ? kp.x : kp.y;
  }

  void build(std::size_t lo, std::size_t hi, int depth) {
    if (hi - lo <= 1) return;
    const int axis = depth & 1;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](std::uint32_t a, std::uint32_t b) { return coord(a, axis) < coord(b, axis); });
    build(lo, mid, depth + 1);
    build(mid + 1, hi, depth + 1);
  }

  void search(std::size_t lo, std::size_t hi, int depth, double x, double y, double radius, double r2,
              std::vector<std::pair<double, std::size_t>>& hits) const {
    if (lo >= hi) return;
    const int axis = depth & 1;
    const std::size_t mid = lo + (hi - lo) / 2;
    const std::size_t idx = order_[mid];
    const auto& kp = refs_.features[idx].keypoint;
    const double dx = kp.x - x;
    const double dy = kp.y - y;
    const double d2 = dx * dx + dy * dy;
    if (d2 <= r2) hits.emplace_back(d2, idx);
    const double split = axis == 0 ? kp.x : kp.y;
    const double q = axis == 0 ? x : y;
    if (q - radius <= split) search(lo, mid, depth + 1, x, y, radius, r2, hits);
    if (q + radius >= split) search(mid + 1, hi, depth + 1, x, y, radius, r2, hits);
  }

  FeatureSet refs_;
  std::vector<std::uint32_t> order_;
};

inline RefIndex build_index(FeatureSet refs) { return RefIndex(std::move(refs)); }

inline std::vector<std::size_t> neighbors_in_radius(const RefIndex& index, double x, double y, double radius) {
  return index.neighbors_in_radius(x, y, radius);
}

/// Ratio rule on the two smallest in-radius descriptor distances (nearest <= second).
inline bool ratio_test_passes(double nearest, double second, double threshold) {
  if (second == 0.0) return nearest == 0.0;
  return nearest / second < threshold;
}

namespace detail {

struct NeighborDistances {
  std::size_t count = 0;  // in-radius neighbours
  bool has_second = false;
  double nearest = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();
  std::size_t nearest_index = 0;
};

inline bool same_feature_value(const Feature& a, const Feature& b) {
  return a.keypoint == b.keypoint && a.descriptor == b.descriptor;
}

// The second-nearest candidate skips exact copies (same keypoint and
// descriptor) of the nearest one, so a reference set merged with itself
// scores the same as the set alone.
inline NeighborDistances nearest_two(const Feature& q, const RefIndex& index, double radius) {
  NeighborDistances nd;
  const auto hits = index.neighbors_in_radius(q.keypoint.x, q.keypoint.y, radius);
  nd.count = hits.size();
  if (hits.empty()) return nd;
  std::vector<double> dist(hits.size());
  for (std::size_t i = 0; i < hits.size(); ++i) {
    dist[i] = descriptor_distance(q.descriptor, index.features()[hits[i]].descriptor);
    if (dist[i] < nd.nearest) {
      nd.nearest = dist[i];
      nd.nearest_index = hits[i];
    }
  }
  const Feature& best = index.features()[nd.nearest_index];
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits[i] == nd.nearest_index || same_feature_value(index.features()[hits[i]], best)) continue;
    if (!nd.has_second || dist[i] < nd.second) {
      nd.second = dist[i];
      nd.has_second = true;
    }
  }
  return nd;
}

inline void require_query(const Feature& q) {
  if (q.origin() != Origin::Query) throw Error("query_loc: feature origin must be Query");
}

}  // namespace detail

inline bool is_strong_match(const Feature& q, const RefIndex& index, const CompareParams& params) {
  detail::require_query(q);
  const auto nd = detail::nearest_two(q, index, params.radius);
  return nd.has_second && ratio_test_passes(nd.nearest, nd.second, params.ratio_threshold);
}

inline ScoredFeature query_loc(const Feature& q, const RefIndex& index, const CompareParams& params) {
  detail::require_query(q);
  ScoredFeature sf{q, params.loc_ceiling, std::nullopt, {}};
  const auto nd = detail::nearest_two(q, index, params.radius);
  if (nd.count == 0) {
    sf.penalties.add(Penalty::NoNeighborCeiling);
    return sf;
  }
  double loc = nd.nearest;
  sf.matched_ref = nd.nearest_index;
  if (q.keypoint.detector == Detector::Dense) {
    loc *= params.dense_factor();
    sf.penalties.add(Penalty::DensePenalty);
  }
  if (nd.has_second && ratio_test_passes(nd.nearest, nd.second, params.ratio_threshold)) {
    loc *= params.match_factor();
    sf.penalties.add(Penalty::MatchPenalty);
  }
  sf.loc = std::min(loc, params.loc_ceiling);
  return sf;
}

inline std::vector<ScoredFeature> score_image(const FeatureSet& query, const RefIndex& index,
                                              const CompareParams& params) {
  std::vector<ScoredFeature> out;
  out.reserve(query.features.size());
  for (const auto& q : query.features) out.push_back(query_loc(q, index, params));
  return out;
}

inline nlohmann::json scores_to_json(const std::vector<ScoredFeature>& scored) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : scored) {
    nlohmann::json pen = nlohmann::json::array();
    if (s.penalties.has(Penalty::DensePenalty)) pen.push_back("dense");
    if (s.penalties.has(Penalty::MatchPenalty)) pen.push_back("match");
    if (s.penalties.has(Penalty::NoNeighborCeiling)) pen.push_back("no_neighbor");
    arr.push_back({{"x", s.feature.keypoint.x},
                   {"y", s.feature.keypoint.y},
                   {"scale", s.feature.keypoint.scale},
                   {"detector", to_string(s.feature.keypoint.detector)},
                   {"loc", s.loc},
                   {"matched_ref", s.matched_ref ? nlohmann::json(*s.matched_ref) : nlohmann::json(nullptr)},
                   {"penalties", std::move(pen)}});
  }
  return arr;
}

}  // namespace dacd
