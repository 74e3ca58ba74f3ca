#pragma once

// Seeded synthetic cross-domain change dataset: textured rectangle/ellipse
// scenes, a global per-channel photometric shift (affine + gamma) plus noise
// for the query domain, and 1-3 inserted change objects per query.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "dacd/eval.hpp"
#include "dacd/image.hpp"

namespace dacd {

/// mt19937_64 with explicit (library-independent) real/integer mappings so
/// outputs are byte-stable across standard library implementations.
class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) {  // inclusive
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>(engine_() % span);
  }
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

enum class Texture { Solid, HStripes, VStripes, Checker, Dots };

struct Shape {
  bool ellipse = false;
  int x = 0, y = 0, w = 1, h = 1;
  Texture texture = Texture::Solid;
  Rgb primary;
  Rgb secondary;
  int period = 8;
};

struct PhotometricShift {
  std::array<double, 3> gain{1.00, 0.10, 1.00};
  std::array<double, 3> bias{0.00, 0.45, 0.00};
  std::array<double, 3> gamma{0.6, 1.0, 1.7};
  double noise_sigma = 2.0;  // intensity levels
};

inline Rgb random_color(SynthRng& rng) {
  return {static_cast<std::uint8_t>(rng.integer(20, 235)), static_cast<std::uint8_t>(rng.integer(20, 235)),
          static_cast<std::uint8_t>(rng.integer(20, 235))};
}

inline Shape random_shape(SynthRng& rng, int min_side, int max_side, bool textured) {
  Shape s;
  s.ellipse = rng.uniform() < 0.35;
  s.w = rng.integer(min_side, max_side);
  s.h = rng.integer(min_side, max_side);
  s.x = rng.integer(0, kCanonicalSize - s.w);
  s.y = rng.integer(0, kCanonicalSize - s.h);
  const int t = textured ? rng.integer(1, 4) : rng.integer(0, 4);
  s.texture = static_cast<Texture>(t);
  s.primary = random_color(rng);
  s.secondary = random_color(rng);
  s.period = rng.integer(6, 16);
  return s;
}

inline bool shape_covers(const Shape& s, int x, int y) {
  if (x < s.x || y < s.y || x >= s.x + s.w || y >= s.y + s.h) return false;
  if (!s.ellipse) return true;
  const double cx = s.x + s.w / 2.0;
  const double cy = s.y + s.h / 2.0;
  const double dx = (x + 0.5 - cx) / (s.w / 2.0);
  const double dy = (y + 0.5 - cy) / (s.h / 2.0);
  return dx * dx + dy * dy <= 1.0;
}

inline void draw_shape(Image& img, const Shape& s) {
  for (int y = std::max(s.y, 0); y < std::min(s.y + s.h, img.height); ++y) {
    for (int x = std::max(s.x, 0); x < std::min(s.x + s.w, img.width); ++x) {
      if (!shape_covers(s, x, y)) continue;
      const int lx = x - s.x;
      const int ly = y - s.y;
      bool alt = false;
      switch (s.texture) {
        case Texture::Solid: break;
        case Texture::HStripes: alt = (ly / s.period) % 2 == 1; break;
        case Texture::VStripes: alt = (lx / s.period) % 2 == 1; break;
        case Texture::Checker: alt = ((lx / s.period) + (ly / s.period)) % 2 == 1; break;
        case Texture::Dots: {
          const int px = lx % (2 * s.period) - s.period;
          const int py = ly % (2 * s.period) - s.period;
          alt = px * px + py * py <= (s.period * s.period) / 3;
          break;
        }
      }
      const Rgb c = alt ? s.secondary : s.primary;
      img.set(x, y, c.r, c.g, c.b);
    }
  }
}

/// Reference-domain scene: vertical background gradient plus 7-11 shapes.
inline Image render_scene(SynthRng& rng) {
  Image img(kCanonicalSize, kCanonicalSize);
  const Rgb top = random_color(rng);
  const Rgb bottom = random_color(rng);
  for (int y = 0; y < img.height; ++y) {
    const double t = y / static_cast<double>(img.height - 1);
    const auto mix = [t](std::uint8_t a, std::uint8_t b) {
      return static_cast<std::uint8_t>(std::lround(a * (1.0 - t) + b * t));
    };
    for (int x = 0; x < img.width; ++x) img.set(x, y, mix(top.r, bottom.r), mix(top.g, bottom.g), mix(top.b, bottom.b));
  }
  const int n = rng.integer(7, 11);
  for (int i = 0; i < n; ++i) draw_shape(img, random_shape(rng, 24, 110, false));
  return img;
}

inline Image apply_shift(const Image& img, const PhotometricShift& shift, SynthRng& rng) {
  Image out = img;
  for (std::size_t i = 0; i < out.pixels.size(); i += 3) {
    for (int c = 0; c < 3; ++c) {
      const double v = img.pixels[i + c] / 255.0;
      double o = 255.0 * (shift.gain[c] * std::pow(v, shift.gamma[c]) + shift.bias[c]);
      if (shift.noise_sigma > 0.0) o += shift.noise_sigma * rng.normal();
      out.pixels[i + c] = static_cast<std::uint8_t>(std::clamp(std::lround(o), 0L, 255L));
    }
  }
  return out;
}

struct SynthPair {
  Image query;
  Image ref;
  std::vector<GtBox> boxes;
};

/// One scene pair; each change object is at least 24x24 px and fully inside.
inline SynthPair synth_pair(SynthRng& rng, const PhotometricShift& shift) {
  SynthPair p;
  p.ref = render_scene(rng);
  Image changed = p.ref;
  const int n = rng.integer(1, 3);
  for (int i = 0; i < n; ++i) {
    Shape obj = random_shape(rng, 24, 56, true);
    obj.ellipse = false;
    draw_shape(changed, obj);
    p.boxes.push_back({obj.x, obj.y, obj.w, obj.h});
  }
  p.query = apply_shift(changed, shift, rng);
  return p;
}

}  // namespace dacd
