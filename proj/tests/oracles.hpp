#pragma once

// Brute-force reference implementations used by the unit and acceptance
// tests. They follow the written definitions directly (linear scans, explicit
// confusion matrices) and share no code with the library beyond data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dacd/dacd.hpp"

namespace oracle {

using namespace dacd;

// ---------------------------------------------------------------------------
// Random fixtures

inline Descriptor random_descriptor(std::mt19937_64& rng, bool allow_zero = true) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Descriptor d{};
  if (allow_zero && rng() % 16 == 0) return d;
  double sum = 0.0;
  for (auto& v : d) {
    v = (rng() % 3 == 0) ? 0.0f : u(rng);
    sum += v;
  }
  if (sum == 0.0) d[0] = 1.0f, sum = 1.0;
  for (auto& v : d) v = static_cast<float>(v / sum);
  return d;
}

inline Feature random_feature(std::mt19937_64& rng, double extent, Origin origin) {
  std::uniform_real_distribution<double> pos(0.0, extent);
  Keypoint kp;
  // Integer positions make exact radius-boundary hits common.
  if (rng() % 2 == 0) {
    kp.x = static_cast<double>(rng() % static_cast<std::uint64_t>(extent));
    kp.y = static_cast<double>(rng() % static_cast<std::uint64_t>(extent));
  } else {
    kp.x = pos(rng);
    kp.y = pos(rng);
  }
  kp.scale = (rng() % 2 == 0) ? 4.0 : 1.6;
  kp.detector = (rng() % 2 == 0) ? Detector::Dense : Detector::Corner;
  return Feature(kp, random_descriptor(rng), origin);
}

/// Random set with deliberate duplicates of positions and descriptors.
inline FeatureSet random_feature_set(std::mt19937_64& rng, std::size_t n, double extent, Origin origin) {
  FeatureSet fs{"rand", static_cast<int>(extent), static_cast<int>(extent), {}};
  for (std::size_t i = 0; i < n; ++i) {
    if (!fs.features.empty() && rng() % 10 == 0) {
      const Feature& src = fs.features[rng() % fs.features.size()];
      Keypoint kp = src.keypoint;
      Descriptor d = src.descriptor;
      if (rng() % 2 == 0) d = random_descriptor(rng);
      fs.features.emplace_back(kp, d, origin);
    } else {
      fs.features.push_back(random_feature(rng, extent, origin));
    }
  }
  return fs;
}

inline Image random_image(std::mt19937_64& rng, int w, int h) {
  Image img(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() % 256);
  return img;
}

// ---------------------------------------------------------------------------
// Matching

inline double desc_dist(const Descriptor& a, const Descriptor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

inline double desc_dist_sq(const Descriptor& a, const Descriptor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

/// Linear-scan radius query, ordered by (position distance, list index).
inline std::vector<std::size_t> scan_radius(const std::vector<Feature>& refs, double x, double y, double r) {
  std::vector<std::pair<double, std::size_t>> hits;
  for (std::size_t j = 0; j < refs.size(); ++j) {
    const double dx = refs[j].keypoint.x - x;
    const double dy = refs[j].keypoint.y - y;
    const double d2 = dx * dx + dy * dy;
    if (d2 <= r * r) hits.emplace_back(d2, j);
  }
  std::sort(hits.begin(), hits.end());
  std::vector<std::size_t> out;
  for (const auto& h : hits) out.push_back(h.second);
  return out;
}

inline ScoredFeature scan_query_loc(const Feature& q, const std::vector<Feature>& refs, const CompareParams& p) {
  ScoredFeature sf{q, p.loc_ceiling, std::nullopt, {}};
  const auto hits = scan_radius(refs, q.keypoint.x, q.keypoint.y, p.radius);
  if (hits.empty()) {
    sf.penalties.add(Penalty::NoNeighborCeiling);
    return sf;
  }
  std::size_t best = hits[0];
  double d1 = desc_dist(q.descriptor, refs[best].descriptor);
  for (std::size_t j : hits) {
    const double d = desc_dist(q.descriptor, refs[j].descriptor);
    if (d < d1) d1 = d, best = j;
  }
  bool have2 = false;
  double d2 = 0.0;
  for (std::size_t j : hits) {
    if (j == best) continue;
    if (refs[j].keypoint == refs[best].keypoint && refs[j].descriptor == refs[best].descriptor) continue;
    const double d = desc_dist(q.descriptor, refs[j].descriptor);
    if (!have2 || d < d2) d2 = d, have2 = true;
  }
  sf.matched_ref = best;
  double loc = d1;
  if (q.keypoint.detector == Detector::Dense) {
    loc *= std::exp(-p.d_a * p.d_a);
    sf.penalties.add(Penalty::DensePenalty);
  }
  const bool strong = have2 && (d2 == 0.0 ? d1 == 0.0 : d1 / d2 < p.ratio_threshold);
  if (strong) {
    loc *= std::exp(-p.d_b * p.d_b);
    sf.penalties.add(Penalty::MatchPenalty);
  }
  sf.loc = std::min(loc, p.loc_ceiling);
  return sf;
}

inline std::vector<ScoredFeature> scan_score_image(const FeatureSet& query, const FeatureSet& refs,
                                                   const CompareParams& p) {
  std::vector<ScoredFeature> out;
  for (const auto& q : query.features) out.push_back(scan_query_loc(q, refs.features, p));
  return out;
}

// ---------------------------------------------------------------------------
// Pooling

inline LocGrid scan_pool(const std::vector<ScoredFeature>& scored, int W, int H) {
  const int w = W / 10;
  const int h = H / 10;
  LocGrid g;
  g.w = w;
  g.h = h;
  g.values.assign(static_cast<std::size_t>(w) * h, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double best = 0.0;
      for (const auto& s : scored) {
        int sc = static_cast<int>(std::floor(s.feature.keypoint.x * w / W));
        int sr = static_cast<int>(std::floor(s.feature.keypoint.y * h / H));
        sc = std::min(sc, w - 1);
        sr = std::min(sr, h - 1);
        if (sc == c && sr == r) best = std::max(best, s.loc);
      }
      g.values[static_cast<std::size_t>(r) * w + c] = best;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Metrics

struct Confusion {
  double tau = 0.0;
  std::size_t tp = 0;
  std::size_t predicted = 0;
  std::size_t positives = 0;
};

inline std::vector<Confusion> confusion_sweep(const std::vector<double>& values, const std::vector<bool>& gt) {
  std::set<double, std::greater<>> taus(values.begin(), values.end());
  std::size_t positives = 0;
  for (bool b : gt) positives += b ? 1 : 0;
  std::vector<Confusion> out;
  for (double tau : taus) {
    Confusion c{tau, 0, 0, positives};
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] >= tau) {
        ++c.predicted;
        if (gt[i]) ++c.tp;
      }
    }
    out.push_back(c);
  }
  return out;
}

/// AP over recall levels 0, 10, ..., X percent; recall >= k/10 tested in integers.
inline double eleven_point_ap(const std::vector<Confusion>& sweep, int max_recall_pct) {
  const int levels = max_recall_pct / 10;
  double sum = 0.0;
  for (int k = 0; k <= levels; ++k) {
    double best = 0.0;
    for (const auto& c : sweep) {
      if (c.tp * 10 >= static_cast<std::size_t>(k) * c.positives) {
        best = std::max(best, static_cast<double>(c.tp) / static_cast<double>(c.predicted));
      }
    }
    sum += best;
  }
  return sum / (levels + 1);
}

inline std::vector<bool> center_rasterize(const std::vector<GtBox>& boxes, int W, int H) {
  const int w = W / 10;
  const int h = H / 10;
  std::vector<bool> out(static_cast<std::size_t>(w) * h, false);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double cx = (c + 0.5) * W / w;
      const double cy = (r + 0.5) * H / h;
      for (const auto& b : boxes) {
        if (b.x <= cx && cx <= b.x + b.w && b.y <= cy && cy <= b.y + b.h) out[static_cast<std::size_t>(r) * w + c] = true;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mining

inline double nbnn(const FeatureSet& query, const FeatureSet& entry) {
  double total = 0.0;
  for (const auto& q : query.features) {
    double best = INFINITY;
    for (const auto& e : entry.features) best = std::min(best, desc_dist_sq(q.descriptor, e.descriptor));
    total += best;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Files

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// relative path -> bytes, for every regular file under root.
inline std::map<std::string, std::string> tree_bytes(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("dacd_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
