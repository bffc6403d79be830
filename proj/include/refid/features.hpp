#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "refid/lexicon.hpp"

namespace refid {

/// Per-object perceptual measurements, all relative to the image/scene extent.
struct RawFeatures {
  double x_pos = 0.5;  // mean column / width
  double y_pos = 0.5;  // mean row / height (0 = top)
  double width = 0.0;
  double height = 0.0;
  double size = 0.0;   // pixel share
  double hue = 0.0;    // turns in [0, 1)
  double light = 0.0;
  bool achromatic = false;

  double value(Channel c) const {
    switch (c) {
      case Channel::x_pos: return x_pos;
      case Channel::y_pos: return y_pos;
      case Channel::width: return width;
      case Channel::height: return height;
      case Channel::size: return size;
      case Channel::hue: return hue;
      case Channel::light: return light;
    }
    return 0.0;
  }

  double& value(Channel c) {
    switch (c) {
      case Channel::x_pos: return x_pos;
      case Channel::y_pos: return y_pos;
      case Channel::width: return width;
      case Channel::height: return height;
      case Channel::size: return size;
      case Channel::hue: return hue;
      case Channel::light: return light;
    }
    return x_pos;
  }

  // achromatic is a measurement flag, not part of the feature value
  bool operator==(const RawFeatures& o) const {
    return x_pos == o.x_pos && y_pos == o.y_pos && width == o.width && height == o.height && size == o.size &&
           hue == o.hue && light == o.light;
  }
};

struct Hsl {
  double hue = 0.0;  // turns
  double sat = 0.0;
  double light = 0.0;
};

/// Hexcone HSL. Hue is 0 for achromatic input.
inline Hsl rgb_to_hsl(unsigned char r8, unsigned char g8, unsigned char b8) {
  const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double l = (mx + mn) / 2.0;
  const double delta = mx - mn;
  if (r8 == g8 && g8 == b8) return {0.0, 0.0, l};
  const double s = delta / (1.0 - std::abs(2.0 * l - 1.0));
  double h;
  if (mx == r)
    h = std::fmod((g - b) / delta, 6.0);
  else if (mx == g)
    h = (b - r) / delta + 2.0;
  else
    h = (r - g) / delta + 4.0;
  h /= 6.0;
  if (h < 0.0) h += 1.0;
  if (h >= 1.0) h -= 1.0;
  return {h, std::min(s, 1.0), l};
}

inline std::array<unsigned char, 3> hsl_to_rgb(double hue, double sat, double light) {
  const double c = (1.0 - std::abs(2.0 * light - 1.0)) * sat;
  double hp = std::fmod(hue, 1.0);
  if (hp < 0) hp += 1.0;
  hp *= 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = light - c / 2.0;
  auto to8 = [](double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  };
  return {to8(r + m), to8(g + m), to8(b + m)};
}

/// Circular distance between two hues in turns, in [0, 0.5].
inline double hue_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), 1.0);
  return std::min(d, 1.0 - d);
}

/// Per-channel mean and population standard deviation over one environment.
/// The hue entry is unused (hue is phasor-encoded).
struct EnvStats {
  std::array<double, 7> mean{};
  std::array<double, 7> std{};

  double mean_of(Channel c) const { return mean[static_cast<std::size_t>(c)]; }
  double std_of(Channel c) const { return std[static_cast<std::size_t>(c)]; }
};

inline constexpr double kZeroVarianceGuard = 1e-9;

inline EnvStats compute_env_stats(std::span<const RawFeatures> objects) {
  EnvStats s;
  if (objects.empty()) return s;
  const double n = static_cast<double>(objects.size());
  for (Channel c : kAllChannels) {
    if (c == Channel::hue) continue;
    const auto k = static_cast<std::size_t>(c);
    double sum = 0.0;
    for (const auto& o : objects) sum += o.value(c);
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& o : objects) ss += (o.value(c) - mean) * (o.value(c) - mean);
    s.mean[k] = mean;
    s.std[k] = std::sqrt(ss / n);
  }
  return s;
}

inline double zscore(const RawFeatures& raw, const EnvStats& stats, Channel c) {
  const double sd = stats.std_of(c);
  if (sd < kZeroVarianceGuard) return 0.0;
  return (raw.value(c) - stats.mean_of(c)) / sd;
}

/// phi_sigma(o; env): the feature vector a symbol sees for one object.
inline std::vector<double> symbol_features(const Lexicon& lex, std::size_t symbol, const RawFeatures& raw,
                                           const EnvStats& stats) {
  std::vector<double> out;
  out.reserve(lex.dim(symbol));
  for (Channel c : lex.channels(symbol)) {
    if (c == Channel::hue) {
      const double angle = 2.0 * std::numbers::pi * raw.hue;
      out.push_back(std::cos(angle));
      out.push_back(std::sin(angle));
    } else {
      out.push_back(raw.value(c));
      out.push_back(zscore(raw, stats, c));
    }
  }
  return out;
}

/// Full feature table of an environment: one column per object, rows follow
/// the lexicon's global parameter layout (every symbol's block filled in).
inline Eigen::MatrixXd feature_table(const Lexicon& lex, std::span<const RawFeatures> objects) {
  const EnvStats stats = compute_env_stats(objects);
  Eigen::MatrixXd table(static_cast<Eigen::Index>(lex.total_dim()), static_cast<Eigen::Index>(objects.size()));
  for (std::size_t j = 0; j < objects.size(); ++j) {
    for (std::size_t s = 0; s < lex.size(); ++s) {
      const auto f = symbol_features(lex, s, objects[j], stats);
      for (std::size_t k = 0; k < f.size(); ++k)
        table(static_cast<Eigen::Index>(lex.offset(s) + k), static_cast<Eigen::Index>(j)) = f[k];
    }
  }
  return table;
}

}  // namespace refid
