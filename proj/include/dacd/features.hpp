#pragma once

// Keypoint detection (multi-scale Harris with Laplacian scale selection, and
// dense grid sampling) plus upright 128-bin gradient-orientation descriptors.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dacd/error.hpp"
#include "dacd/filters.hpp"
#include "dacd/image.hpp"

namespace dacd {

enum class Detector : std::uint8_t { Corner, Dense };
enum class Origin : std::uint8_t { Query, RawRef, VirtualRef };

inline constexpr std::size_t kDescriptorSize = 128;
using Descriptor = std::array<float, kDescriptorSize>;

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double scale = 1.0;
  Detector detector = Detector::Corner;

  bool operator==(const Keypoint&) const = default;
};

/// A described keypoint. The origin tag is fixed at construction.
class Feature {
 public:
  Keypoint keypoint;
  Descriptor descriptor{};

  Feature(Keypoint kp, const Descriptor& desc, Origin origin)
      : keypoint(kp), descriptor(desc), origin_(origin) {}

  Origin origin() const { return origin_; }

  bool operator==(const Feature&) const = default;

 private:
  Origin origin_;
};

struct FeatureSet {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<Feature> features;

  std::size_t size() const { return features.size(); }
  bool empty() const { return features.empty(); }
  bool operator==(const FeatureSet&) const = default;
};

struct ExtractionConfig {
  std::vector<double> scales{1.6, 3.2, 6.4, 12.8};
  double harris_k = 0.04;
  double threshold_rel = 0.01;  // relative to the strongest response over all scales
  double nms_radius = 5.0;
  double differentiation_ratio = 0.7;
  int stride = 8;
  double dense_scale = 4.0;
  double descriptor_smoothing = 1.0;
  bool use_corners = true;
  bool use_dense = true;
};

namespace detail {

struct CornerCandidate {
  int x;
  int y;
  std::size_t scale_index;
  float response;
};

}  // namespace detail

/// Harris corners computed at each integration scale, kept where the
/// scale-normalised Laplacian peaks over neighbouring scales, then greedily
/// suppressed within nms_radius in order of decreasing response.
inline std::vector<Keypoint> detect_corners(const GrayImage& gray, const ExtractionConfig& cfg) {
  const int w = gray.width;
  const int h = gray.height;
  const std::size_t ns = cfg.scales.size();
  if (ns == 0 || w < 3 || h < 3) return {};

  std::vector<GrayImage> response(ns);
  std::vector<GrayImage> log_norm(ns);
  float global_max = 0.0f;
  for (std::size_t s = 0; s < ns; ++s) {
    const double sigma_i = cfg.scales[s];
    const double sigma_d = cfg.differentiation_ratio * sigma_i;
    GrayImage lx, ly;
    central_gradient(gaussian_blur(gray, sigma_d), lx, ly);
    GrayImage xx(w, h), xy(w, h), yy(w, h);
    const float norm = static_cast<float>(sigma_d);
    for (std::size_t i = 0; i < lx.pixels.size(); ++i) {
      const float gx = lx.pixels[i] * norm;
      const float gy = ly.pixels[i] * norm;
      xx.pixels[i] = gx * gx;
      xy.pixels[i] = gx * gy;
      yy.pixels[i] = gy * gy;
    }
    xx = gaussian_blur(xx, sigma_i);
    xy = gaussian_blur(xy, sigma_i);
    yy = gaussian_blur(yy, sigma_i);
    GrayImage r(w, h);
    const float k = static_cast<float>(cfg.harris_k);
    for (std::size_t i = 0; i < r.pixels.size(); ++i) {
      const float det = xx.pixels[i] * yy.pixels[i] - xy.pixels[i] * xy.pixels[i];
      const float tr = xx.pixels[i] + yy.pixels[i];
      r.pixels[i] = det - k * tr * tr;
      global_max = std::max(global_max, r.pixels[i]);
    }
    response[s] = std::move(r);

    GrayImage lap = abs_laplacian(gaussian_blur(gray, sigma_i));
    const float s2 = static_cast<float>(sigma_i * sigma_i);
    for (auto& v : lap.pixels) v *= s2;
    log_norm[s] = std::move(lap);
  }
  if (global_max <= 0.0f) return {};
  const float threshold = static_cast<float>(cfg.threshold_rel) * global_max;

  std::vector<detail::CornerCandidate> candidates;
  for (std::size_t s = 0; s < ns; ++s) {
    const GrayImage& r = response[s];
    for (int y = 1; y < h - 1; ++y) {
      for (int x = 1; x < w - 1; ++x) {
        const float v = r.at(x, y);
        if (v <= threshold) continue;
        // Plateau ties resolve to the first pixel in raster order.
        bool is_max = true;
        for (int dy = -1; dy <= 1 && is_max; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const float n = r.at(x + dx, y + dy);
            const bool before = dy < 0 || (dy == 0 && dx < 0);
            if (before ? n >= v : n > v) {
              is_max = false;
              break;
            }
          }
        }
        if (!is_max) continue;
        const float lap = log_norm[s].at(x, y);
        if (s > 0 && log_norm[s - 1].at(x, y) > lap) continue;
        if (s + 1 < ns && log_norm[s + 1].at(x, y) > lap) continue;
        candidates.push_back({x, y, s, v});
      }
    }
  }

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return a.response > b.response; });

  // Bucket grid with cell side = radius so suppression checks stay local.
  const double radius = std::max(cfg.nms_radius, 0.0);
  const double r2 = radius * radius;
  const int cell = std::max(1, static_cast<int>(std::ceil(radius)));
  const int gw = (w + cell - 1) / cell;
  const int gh = (h + cell - 1) / cell;
  std::vector<std::vector<std::size_t>> buckets(static_cast<std::size_t>(gw) * gh);

  std::vector<Keypoint> out;
  for (const auto& c : candidates) {
    const int bx = c.x / cell;
    const int by = c.y / cell;
    bool suppressed = false;
    for (int yy = std::max(by - 1, 0); yy <= std::min(by + 1, gh - 1) && !suppressed; ++yy) {
      for (int xx = std::max(bx - 1, 0); xx <= std::min(bx + 1, gw - 1) && !suppressed; ++xx) {
        for (std::size_t idx : buckets[static_cast<std::size_t>(yy) * gw + xx]) {
          const double ddx = out[idx].x - c.x;
          const double ddy = out[idx].y - c.y;
          if (ddx * ddx + ddy * ddy <= r2) {
            suppressed = true;
            break;
          }
        }
      }
    }
    if (suppressed) continue;
    buckets[static_cast<std::size_t>(by) * gw + bx].push_back(out.size());
    out.push_back({static_cast<double>(c.x), static_cast<double>(c.y), cfg.scales[c.scale_index], Detector::Corner});
  }
  return out;
}

/// Regular grid, offset stride/2, row-major.
inline std::vector<Keypoint> detect_dense(const GrayImage& gray, const ExtractionConfig& cfg) {
  if (cfg.stride < 1) throw Error("dense detector: stride must be >= 1");
  const double offset = cfg.stride / 2.0;
  std::vector<Keypoint> out;
  for (double y = offset; y < gray.height; y += cfg.stride) {
    for (double x = offset; x < gray.width; x += cfg.stride) {
      out.push_back({x, y, cfg.dense_scale, Detector::Dense});
    }
  }
  return out;
}

/// Gradient field used by describe(); computed once per image.
struct GradientField {
  int width = 0;
  int height = 0;
  std::vector<float> magnitude;
  std::vector<float> orientation;  // [0, 2pi)

  GradientField(const GrayImage& gray, double smoothing) : width(gray.width), height(gray.height) {
    GrayImage dx, dy;
    central_gradient(gaussian_blur(gray, smoothing), dx, dy);
    magnitude.resize(dx.pixels.size());
    orientation.resize(dx.pixels.size());
    constexpr float two_pi = 2.0f * std::numbers::pi_v<float>;
    for (std::size_t i = 0; i < dx.pixels.size(); ++i) {
      const float gx = dx.pixels[i];
      const float gy = dy.pixels[i];
      magnitude[i] = std::sqrt(gx * gx + gy * gy);
      float a = std::atan2(gy, gx);
      if (a < 0.0f) a += two_pi;
      if (a >= two_pi) a -= two_pi;
      orientation[i] = a;
    }
  }
};

/// 4x4 spatial cells x 8 orientations over a window of side 4*scale, upright,
/// trilinear binning with a Gaussian window, L1-normalised. Windows without
/// gradient produce the zero descriptor.
inline Descriptor describe_keypoint(const GradientField& grad, const Keypoint& kp) {
  Descriptor d{};
  const double s = kp.scale;
  const double half = 2.0 * s;
  const double sigma = half;
  const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
  const int x0 = std::max(0, static_cast<int>(std::ceil(kp.x - half)));
  const int x1 = std::min(grad.width - 1, static_cast<int>(std::floor(kp.x + half)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(kp.y - half)));
  const int y1 = std::min(grad.height - 1, static_cast<int>(std::floor(kp.y + half)));
  constexpr double bins_per_rad = 8.0 / (2.0 * std::numbers::pi);

  std::array<double, kDescriptorSize> acc{};
  for (int py = y0; py <= y1; ++py) {
    const double ry = (py - kp.y) / s + 1.5;
    for (int px = x0; px <= x1; ++px) {
      const std::size_t pi = static_cast<std::size_t>(py) * grad.width + px;
      const double mag = grad.magnitude[pi];
      if (mag == 0.0) continue;
      const double rx = (px - kp.x) / s + 1.5;
      const double dx = px - kp.x;
      const double dy = py - kp.y;
      const double weight = mag * std::exp(-(dx * dx + dy * dy) * inv_two_sigma2);
      double ob = grad.orientation[pi] * bins_per_rad;
      if (ob >= 8.0) ob -= 8.0;

      const int r0 = static_cast<int>(std::floor(ry));
      const int c0 = static_cast<int>(std::floor(rx));
      const int o0 = static_cast<int>(std::floor(ob));
      const double fr = ry - r0;
      const double fc = rx - c0;
      const double fo = ob - o0;
      for (int ir = 0; ir <= 1; ++ir) {
        const int r = r0 + ir;
        if (r < 0 || r > 3) continue;
        const double wr = ir ? fr : 1.0 - fr;
        for (int ic = 0; ic <= 1; ++ic) {
          const int c = c0 + ic;
          if (c < 0 || c > 3) continue;
          const double wc = ic ? fc : 1.0 - fc;
          for (int io = 0; io <= 1; ++io) {
            const int o = (o0 + io) & 7;
            const double wo = io ? fo : 1.0 - fo;
            acc[static_cast<std::size_t>((r * 4 + c) * 8 + o)] += weight * wr * wc * wo;
          }
        }
      }
    }
  }
  double sum = 0.0;
  for (double v : acc) sum += v;
  if (sum > 0.0) {
    for (std::size_t i = 0; i < kDescriptorSize; ++i) d[i] = static_cast<float>(acc[i] / sum);
  }
  return d;
}

inline std::vector<Feature> describe(const GrayImage& gray, const std::vector<Keypoint>& kps,
                                     Origin origin = Origin::Query, double smoothing = 1.0) {
  const GradientField grad(gray, smoothing);
  std::vector<Feature> out;
  out.reserve(kps.size());
  for (const auto& kp : kps) {
    if (kp.x < 0 || kp.y < 0 || kp.x >= gray.width || kp.y >= gray.height) {
      throw Error("describe: keypoint outside image");
    }
    out.emplace_back(kp, describe_keypoint(grad, kp), origin);
  }
  return out;
}

/// Canonical resize, grayscale, corners then dense keypoints, descriptors.
inline FeatureSet extract(const Image& img, const ExtractionConfig& cfg, Origin origin,
                          std::string image_id = {}) {
  const Image canon = resize_canonical(img);
  const GrayImage gray = to_gray(canon);
  std::vector<Keypoint> kps;
  if (cfg.use_corners) kps = detect_corners(gray, cfg);
  if (cfg.use_dense) {
    auto dense = detect_dense(gray, cfg);
    kps.insert(kps.end(), dense.begin(), dense.end());
  }
  FeatureSet fs;
  fs.image_id = std::move(image_id);
  fs.width = canon.width;
  fs.height = canon.height;
  fs.features = describe(gray, kps, origin, cfg.descriptor_smoothing);
  return fs;
}

inline double descriptor_distance(const Descriptor& a, const Descriptor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < kDescriptorSize; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

inline double descriptor_distance_sq(const Descriptor& a, const Descriptor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < kDescriptorSize; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

// ---------------------------------------------------------------------------
// JSON sidecar (<image_id>.feat.json)

inline constexpr int kFeatureFileVersion = 1;

inline std::string to_string(Detector d) { return d == Detector::Corner ? "corner" : "dense"; }

inline std::string to_string(Origin o) {
  switch (o) {
    case Origin::Query: return "query";
    case Origin::RawRef: return "raw_ref";
    case Origin::VirtualRef: return "virtual_ref";
  }
  return "query";
}

inline Detector detector_from_string(const std::string& s) {
  if (s == "corner") return Detector::Corner;
  if (s == "dense") return Detector::Dense;
  throw Error("unknown detector tag: " + s);
}

inline Origin origin_from_string(const std::string& s) {
  if (s == "query") return Origin::Query;
  if (s == "raw_ref") return Origin::RawRef;
  if (s == "virtual_ref") return Origin::VirtualRef;
  throw Error("unknown origin tag: " + s);
}

inline nlohmann::json feature_set_to_json(const FeatureSet& fs) {
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& f : fs.features) {
    nlohmann::json bins = nlohmann::json::array();
    for (float v : f.descriptor) bins.push_back(v);
    feats.push_back({{"x", f.keypoint.x},
                     {"y", f.keypoint.y},
                     {"scale", f.keypoint.scale},
                     {"detector", to_string(f.keypoint.detector)},
                     {"origin", to_string(f.origin())},
                     {"bins", std::move(bins)}});
  }
  return {{"version", kFeatureFileVersion},
          {"image_id", fs.image_id},
          {"width", fs.width},
          {"height", fs.height},
          {"features", std::move(feats)}};
}

inline FeatureSet feature_set_from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != kFeatureFileVersion) throw Error("feature file: unsupported version");
  FeatureSet fs;
  fs.image_id = j.at("image_id").get<std::string>();
  fs.width = j.at("width").get<int>();
  fs.height = j.at("height").get<int>();
  for (const auto& jf : j.at("features")) {
    Keypoint kp{jf.at("x").get<double>(), jf.at("y").get<double>(), jf.at("scale").get<double>(),
                detector_from_string(jf.at("detector").get<std::string>())};
    const auto& bins = jf.at("bins");
    if (bins.size() != kDescriptorSize) throw Error("feature file: descriptor must have 128 bins");
    Descriptor d{};
    for (std::size_t i = 0; i < kDescriptorSize; ++i) d[i] = static_cast<float>(bins[i].get<double>());
    fs.features.emplace_back(kp, d, origin_from_string(jf.at("origin").get<std::string>()));
  }
  return fs;
}

inline void write_feature_set(const FeatureSet& fs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write: " + path.string());
  out << feature_set_to_json(fs).dump() << '\n';
}

inline FeatureSet read_feature_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("file not found: " + path.string());
  try {
    return feature_set_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error("feature file: " + path.string() + ": " + e.what());
  }
}

}  // namespace dacd
