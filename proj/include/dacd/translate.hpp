#pragma once

// Reference -> query-domain translation seam: identity, per-channel
// histogram matching against pooled domain statistics, or precomputed
// images read from a directory (e.g. the output of an external GAN).

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dacd/error.hpp"
#include "dacd/image.hpp"

namespace dacd {

/// Per-channel cumulative 256-bin histograms.
struct DomainStats {
  std::array<std::array<std::uint64_t, 256>, 3> cdf{};

  std::uint64_t total(int channel) const { return cdf[channel][255]; }
  bool operator==(const DomainStats&) const = default;
};

inline DomainStats image_stats(const Image& img) {
  DomainStats s;
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
    for (int c = 0; c < 3; ++c) ++s.cdf[c][img.pixels[i + c]];
  }
  for (int c = 0; c < 3; ++c) {
    for (int v = 1; v < 256; ++v) s.cdf[c][v] += s.cdf[c][v - 1];
  }
  return s;
}

inline DomainStats fit_domain_stats(const std::vector<Image>& images) {
  if (images.empty()) throw Error("fit_domain_stats: no images");
  DomainStats pooled;
  for (const auto& img : images) {
    const DomainStats s = image_stats(img);
    for (int c = 0; c < 3; ++c) {
      for (int v = 0; v < 256; ++v) pooled.cdf[c][v] += s.cdf[c][v];
    }
  }
  return pooled;
}

/// 1-D earth mover's distance between normalised channel histograms, in
/// intensity levels.
inline double channel_emd(const DomainStats& a, const DomainStats& b, int channel) {
  const double na = static_cast<double>(a.total(channel));
  const double nb = static_cast<double>(b.total(channel));
  double acc = 0.0;
  for (int v = 0; v < 255; ++v) acc += std::abs(a.cdf[channel][v] / na - b.cdf[channel][v] / nb);
  return acc;
}

/// Per-channel lookup table: v -> smallest t with CDF_target(t) >= CDF_source(v).
inline std::array<std::array<std::uint8_t, 256>, 3> matching_lut(const DomainStats& source,
                                                                  const DomainStats& target) {
  std::array<std::array<std::uint8_t, 256>, 3> lut{};
  for (int c = 0; c < 3; ++c) {
    const std::uint64_t ns = source.total(c);
    const std::uint64_t nt = target.total(c);
    if (ns == 0 || nt == 0) throw Error("histogram match: empty statistics");
    int t = 0;
    for (int v = 0; v < 256; ++v) {
      // Cross-multiplied comparison keeps the rule exact in integers.
      while (t < 255 && target.cdf[c][t] * ns < source.cdf[c][v] * nt) ++t;
      lut[c][v] = static_cast<std::uint8_t>(t);
    }
  }
  return lut;
}

inline Image histogram_match(const Image& img, const DomainStats& target) {
  const auto lut = matching_lut(image_stats(img), target);
  Image out = img;
  for (std::size_t i = 0; i < out.pixels.size(); i += 3) {
    for (int c = 0; c < 3; ++c) out.pixels[i + c] = lut[c][out.pixels[i + c]];
  }
  return out;
}

enum class TranslatorKind { Identity, HistogramMatch, ExternalDir };

struct TranslatorSpec {
  TranslatorKind kind = TranslatorKind::Identity;
  std::optional<DomainStats> stats;   // HistogramMatch
  std::filesystem::path directory;    // ExternalDir: holds <image_id>.png
};

inline std::string to_string(TranslatorKind k) {
  switch (k) {
    case TranslatorKind::Identity: return "identity";
    case TranslatorKind::HistogramMatch: return "histogram_match";
    case TranslatorKind::ExternalDir: return "external_dir";
  }
  return "identity";
}

inline TranslatorKind translator_kind_from_string(const std::string& s) {
  if (s == "identity") return TranslatorKind::Identity;
  if (s == "histogram_match") return TranslatorKind::HistogramMatch;
  if (s == "external_dir") return TranslatorKind::ExternalDir;
  throw Error("unknown translator kind: " + s);
}

inline Image translate(const Image& ref, const TranslatorSpec& spec, const std::string& image_id) {
  switch (spec.kind) {
    case TranslatorKind::Identity:
      return resize_canonical(ref);
    case TranslatorKind::HistogramMatch:
      if (!spec.stats) throw Error("translate: histogram matching requires domain statistics");
      return histogram_match(resize_canonical(ref), *spec.stats);
    case TranslatorKind::ExternalDir: {
      const auto path = spec.directory / (image_id + ".png");
      if (!std::filesystem::exists(path)) throw Error("translate: missing virtual image: " + path.string());
      return resize_canonical(load_image(path));
    }
  }
  throw Error("translate: unknown translator");
}

// ---------------------------------------------------------------------------
// Stats file: {"r": [256 ints], "g": [...], "b": [...]} (cumulative counts)

inline nlohmann::json stats_to_json(const DomainStats& s) {
  return {{"r", s.cdf[0]}, {"g", s.cdf[1]}, {"b", s.cdf[2]}};
}

inline DomainStats stats_from_json(const nlohmann::json& j) {
  DomainStats s;
  const char* keys[3] = {"r", "g", "b"};
  for (int c = 0; c < 3; ++c) {
    const auto& arr = j.at(keys[c]);
    if (arr.size() != 256) throw Error("domain stats: each channel needs 256 entries");
    for (int v = 0; v < 256; ++v) {
      s.cdf[c][v] = arr[v].get<std::uint64_t>();
      if (v > 0 && s.cdf[c][v] < s.cdf[c][v - 1]) throw Error("domain stats: cumulative histogram decreases");
    }
    if (s.total(c) == 0) throw Error("domain stats: empty histogram");
  }
  return s;
}

inline DomainStats read_stats(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing stats: " + path.string());
  try {
    return stats_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error("domain stats: " + path.string() + ": " + e.what());
  }
}

inline void write_stats(const DomainStats& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write: " + path.string());
  out << stats_to_json(s).dump() << '\n';
}

}  // namespace dacd
