#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "refid/dataset.hpp"
#include "refid/features.hpp"
#include "refid/model.hpp"
#include "refid/random.hpp"
#include "refid/raster.hpp"
#include "refid/training.hpp"

namespace refid::synth {

enum class NamedColor { red, green, blue, yellow, white };

inline constexpr std::array<NamedColor, 5> kAllColors{NamedColor::red, NamedColor::green, NamedColor::blue,
                                                      NamedColor::yellow, NamedColor::white};

/// Nominal hue in turns; white is achromatic and reports 0.
inline double nominal_hue(NamedColor c) {
  switch (c) {
    case NamedColor::red: return 0.0;
    case NamedColor::yellow: return 1.0 / 6.0;
    case NamedColor::green: return 1.0 / 3.0;
    case NamedColor::blue: return 2.0 / 3.0;
    case NamedColor::white: return 0.0;
  }
  return 0.0;
}

inline std::string_view color_name(NamedColor c) {
  switch (c) {
    case NamedColor::red: return "red";
    case NamedColor::green: return "green";
    case NamedColor::blue: return "blue";
    case NamedColor::yellow: return "yellow";
    case NamedColor::white: return "white";
  }
  return "";
}

/// One block of a generated scene, in scene-relative units (y grows downward).
struct BlockSpec {
  double cx = 0.5, cy = 0.5;
  double w = 0.1, h = 0.1;
  NamedColor color = NamedColor::red;
  double hue = 0.0;    // turns, after jitter
  double light = 0.5;

  double x0() const { return cx - w / 2; }
  double x1() const { return cx + w / 2; }
  double y0() const { return cy - h / 2; }
  double y1() const { return cy + h / 2; }
  double area() const { return w * h; }
};

inline double overlap_area(const BlockSpec& a, const BlockSpec& b) {
  const double ox = std::max(0.0, std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0()));
  const double oy = std::max(0.0, std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0()));
  return ox * oy;
}

inline constexpr double kChromaticSaturation = 0.75;

inline std::array<std::uint8_t, 3> display_rgb(const BlockSpec& b) {
  const double sat = b.color == NamedColor::white ? 0.0 : kChromaticSaturation;
  return hsl_to_rgb(b.hue, sat, b.light);
}

inline RawFeatures analytic_features(const BlockSpec& b) {
  RawFeatures f;
  f.x_pos = b.cx;
  f.y_pos = b.cy;
  f.width = b.w;
  f.height = b.h;
  f.size = b.w * b.h;
  f.hue = b.color == NamedColor::white ? 0.0 : b.hue;
  f.achromatic = b.color == NamedColor::white;
  f.light = b.light;
  return f;
}

/// Per-object membership grades mu_sigma(o) in [0, 1], one row per object,
/// one column per lexicon symbol.
struct OracleTruth {
  Eigen::MatrixXd grades;

  std::size_t num_objects() const { return static_cast<std::size_t>(grades.rows()); }
};

/// Shape of the membership functions. Every grade is a logistic of an
/// absolute term plus an environment-relative term, except hue grades, which
/// are Gaussian in circular hue distance and gated by lightness. The relative
/// term divides by max(spread, floor): differences below the floor are not
/// perceived as "more left" or "bigger".
struct OracleShape {
  double position_pivot = 0.5, position_scale = 0.08;
  double narrow_pivot = 0.095, broad_pivot = 0.175, extent_scale = 0.01;
  double small_pivot = 0.009, big_pivot = 0.018, size_scale = 0.002;
  double context_weight = 1.0;
  double position_floor = 0.1, extent_floor = 0.03, size_floor = 0.004;
  double hue_width = 0.06;
  double white_pivot = 0.75, light_scale = 0.04;
};

inline double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

inline OracleTruth membership_grades(const Lexicon& lex, std::span<const RawFeatures> objects,
                                     const OracleShape& shape = {}) {
  const EnvStats stats = compute_env_stats(objects);
  OracleTruth truth;
  truth.grades.resize(static_cast<Eigen::Index>(objects.size()), static_cast<Eigen::Index>(lex.size()));
  const double cw = shape.context_weight;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const RawFeatures& f = objects[i];
    auto rel = [&](Channel c, double floor) { return (f.value(c) - stats.mean_of(c)) / std::max(stats.std_of(c), floor); };
    const double zx = rel(Channel::x_pos, shape.position_floor), zy = rel(Channel::y_pos, shape.position_floor);
    const double zw = rel(Channel::width, shape.extent_floor), zh = rel(Channel::height, shape.extent_floor);
    const double zs = rel(Channel::size, shape.size_floor);
    const double chroma_gate = logistic((shape.white_pivot - f.light) / shape.light_scale);
    for (std::size_t s = 0; s < lex.size(); ++s) {
      const std::string& name = lex.symbol(s).name;
      double g = 0.0;
      if (name == "left") g = logistic((shape.position_pivot - f.x_pos) / shape.position_scale - cw * zx);
      else if (name == "right") g = logistic((f.x_pos - shape.position_pivot) / shape.position_scale + cw * zx);
      else if (name == "top") g = logistic((shape.position_pivot - f.y_pos) / shape.position_scale - cw * zy);
      else if (name == "bottom") g = logistic((f.y_pos - shape.position_pivot) / shape.position_scale + cw * zy);
      else if (name == "thin") g = logistic((shape.narrow_pivot - f.width) / shape.extent_scale - cw * zw);
      else if (name == "wide") g = logistic((f.width - shape.broad_pivot) / shape.extent_scale + cw * zw);
      else if (name == "short") g = logistic((shape.narrow_pivot - f.height) / shape.extent_scale - cw * zh);
      else if (name == "tall") g = logistic((f.height - shape.broad_pivot) / shape.extent_scale + cw * zh);
      else if (name == "small") g = logistic((shape.small_pivot - f.size) / shape.size_scale - cw * zs);
      else if (name == "big") g = logistic((f.size - shape.big_pivot) / shape.size_scale + cw * zs);
      else if (name == "white") g = logistic((f.light - shape.white_pivot) / shape.light_scale);
      else {
        for (NamedColor c : kAllColors) {
          if (c == NamedColor::white || color_name(c) != name) continue;
          const double d = hue_distance(f.hue, nominal_hue(c)) / shape.hue_width;
          g = chroma_gate * std::exp(-d * d);
        }
      }
      truth.grades(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = g;
    }
  }
  return truth;
}

inline OracleTruth membership_grades(const Lexicon& lex, const Environment& env, const OracleShape& shape = {}) {
  const auto raw = env.raw_features();
  return membership_grades(lex, std::span<const RawFeatures>(raw), shape);
}

inline constexpr double kSelectThreshold = 0.5;
inline constexpr double kFallbackBand = 0.1;
/// A describer only uses symbols that clearly apply to the referent.
inline constexpr double kDescribeThreshold = 0.75;

/// Objects an identifier would accept for a description: joint grade
/// min over symbols >= 0.5, else everything within 0.1 of the best grade.
inline std::vector<std::size_t> oracle_select(const OracleTruth& truth, const Description& desc) {
  const std::size_t n = truth.num_objects();
  std::vector<std::size_t> out;
  if (desc.empty()) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  std::vector<double> joint(n, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s : desc)
      joint[i] = std::min(joint[i], truth.grades(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)));
  for (std::size_t i = 0; i < n; ++i)
    if (joint[i] >= kSelectThreshold) out.push_back(i);
  if (out.empty()) {
    const double best = *std::max_element(joint.begin(), joint.end());
    for (std::size_t i = 0; i < n; ++i)
      if (joint[i] >= best - kFallbackBand) out.push_back(i);
  }
  return out;
}

/// Per-category generation ranges. Object counts for categories 2-4 are not
/// pinned by anything external, so they are knobs.
struct GeneratorKnobs {
  std::array<std::pair<int, int>, 5> object_counts{{{3, 3}, {4, 6}, {5, 7}, {5, 8}, {12, 16}}};
  double max_overlap = 0.0;  // fraction of the smaller block's area; invariant caps it at 0.1
  double margin = 0.02;      // keep blocks this far from the scene border
  double hue_jitter = 0.02;
  double row_jitter = 0.0;   // vertical offset of category-1 blocks from their shared row, at most 0.05
  int max_attempts = 1000;
};

namespace detail {

inline bool fits(const BlockSpec& b, const std::vector<BlockSpec>& placed, const GeneratorKnobs& k) {
  if (b.x0() < k.margin || b.x1() > 1.0 - k.margin || b.y0() < k.margin || b.y1() > 1.0 - k.margin) return false;
  for (const auto& o : placed)
    if (overlap_area(b, o) > k.max_overlap * std::min(b.area(), o.area()) + 1e-15) return false;
  return true;
}

inline void paint(BlockSpec& b, NamedColor c, Rng& rng, const GeneratorKnobs& k) {
  b.color = c;
  if (c == NamedColor::white) {
    b.hue = 0.0;
    b.light = rng.uniform(0.86, 0.96);
  } else {
    double h = nominal_hue(c) + rng.uniform(-k.hue_jitter, k.hue_jitter);
    if (h < 0) h += 1.0;
    b.hue = h;
    b.light = rng.uniform(0.42, 0.58);
  }
}

// Draws (w, h, cx, cy) until the block fits.
template <class Draw>
BlockSpec place(std::vector<BlockSpec>& placed, Rng& rng, const GeneratorKnobs& k, Draw&& draw) {
  for (int attempt = 0; attempt < k.max_attempts; ++attempt) {
    BlockSpec b = draw(rng);
    if (fits(b, placed, k)) {
      placed.push_back(b);
      return b;
    }
  }
  throw Error(Errc::placement_failure, "could not place block after " + std::to_string(k.max_attempts) + " attempts");
}

inline NamedColor pick(Rng& rng, std::span<const NamedColor> from) {
  return from[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(from.size()) - 1))];
}

inline std::vector<NamedColor> distinct_colors(Rng& rng, std::vector<NamedColor> pool, std::size_t n) {
  for (std::size_t i = 0; i + 1 < pool.size(); ++i)
    std::swap(pool[i], pool[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i), static_cast<int>(pool.size()) - 1))]);
  pool.resize(std::min(n, pool.size()));
  return pool;
}

}  // namespace detail

struct GeneratedEnvironment {
  Environment env;
  std::vector<BlockSpec> blocks;
  OracleTruth truth;
};

inline Environment environment_from_blocks(std::string id, std::string category, const std::vector<BlockSpec>& blocks) {
  Environment env;
  env.id = std::move(id);
  env.category = std::move(category);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    SceneObject o;
    o.id = "o" + std::to_string(i + 1);
    o.raw = analytic_features(blocks[i]);
    const auto& b = blocks[i];
    o.block = SceneBlock{b.cx, b.cy, b.w, b.h, display_rgb(b)};
    env.objects.push_back(std::move(o));
  }
  return env;
}

/// Standard wooden block footprints (w, h) in scene units.
inline constexpr std::array<std::array<double, 2>, 5> kBlockCatalog{{
    {0.08, 0.08},  // small cube
    {0.11, 0.11},  // medium cube
    {0.15, 0.15},  // big cube
    {0.07, 0.20},  // standing bar
    {0.20, 0.07},  // lying bar
}};

namespace detail {

inline std::array<double, 2> catalog_shape(Rng& rng, double jitter = 0.06) {
  const auto& s = kBlockCatalog[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(kBlockCatalog.size()) - 1))];
  return {s[0] * rng.uniform(1.0 - jitter, 1.0 + jitter), s[1] * rng.uniform(1.0 - jitter, 1.0 + jitter)};
}

// n distinct cells of a rows x cols grid spanning [0.15, 0.85]^2, row-major.
inline std::vector<std::array<double, 2>> grid_slots(Rng& rng, int n, int rows, int cols) {
  std::vector<int> cells(static_cast<std::size_t>(rows * cols));
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
  for (std::size_t i = 0; i + 1 < cells.size(); ++i)
    std::swap(cells[i], cells[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i), static_cast<int>(cells.size()) - 1))]);
  cells.resize(static_cast<std::size_t>(std::min(n, rows * cols)));
  std::sort(cells.begin(), cells.end());
  std::vector<std::array<double, 2>> out;
  for (int c : cells) {
    const int r = c / cols, k = c % cols;
    const double x = cols == 1 ? 0.5 : 0.15 + 0.7 * k / (cols - 1);
    const double y = rows == 1 ? 0.5 : 0.2 + 0.6 * r / (rows - 1);
    out.push_back({x, y});
  }
  return out;
}

}  // namespace detail

/// Blocks-world scene of one of the five categories:
///  1: three differently coloured blocks side by side;
///  2: same-coloured blocks told apart by geometry or position;
///  3: two colours, each block admitting several descriptions;
///  4: several colours where position and colour must be traded off;
///  5: many blocks in no particular arrangement.
inline GeneratedEnvironment generate_environment(int category, std::uint64_t seed, const GeneratorKnobs& knobs = {},
                                                 const Lexicon& lex = default_lexicon(), std::string id = {}) {
  if (category < 1 || category > 5) throw Error(Errc::schema_error, "category must be in 1..5");
  Rng rng(seed);
  const auto [lo, hi] = knobs.object_counts[static_cast<std::size_t>(category - 1)];
  const int n = rng.uniform_int(lo, hi);
  std::vector<BlockSpec> placed;
  static const std::vector<NamedColor> chromatic{NamedColor::red, NamedColor::green, NamedColor::blue,
                                                 NamedColor::yellow};
  const std::vector<NamedColor> all(kAllColors.begin(), kAllColors.end());

  // blocks on grid cells with a little positional jitter
  auto place_on_grid = [&](int rows, int cols, auto&& color_of) {
    const auto slots = detail::grid_slots(rng, n, rows, cols);
    for (std::size_t i = 0; i < slots.size(); ++i) {
      detail::place(placed, rng, knobs, [&](Rng& r) {
        BlockSpec b;
        const auto wh = detail::catalog_shape(r);
        b.w = wh[0];
        b.h = wh[1];
        b.cx = slots[i][0] + r.uniform(-0.02, 0.02);
        b.cy = slots[i][1] + r.uniform(-0.02, 0.02);
        return b;
      });
      detail::paint(placed.back(), color_of(i), rng, knobs);
    }
  };

  switch (category) {
    case 1: {
      const auto colors = detail::distinct_colors(rng, chromatic, static_cast<std::size_t>(n));
      const double base_y = rng.uniform(0.3, 0.7);
      const double gap = rng.uniform(0.22, 0.3);
      const double start = 0.5 - gap * (n - 1) / 2.0 + rng.uniform(-0.05, 0.05);
      for (int i = 0; i < n; ++i) {
        const double cx = start + gap * i;
        detail::place(placed, rng, knobs, [&](Rng& r) {
          BlockSpec s;
          const auto wh = detail::catalog_shape(r);
          s.w = std::min(wh[0], 0.16);
          s.h = wh[1];
          s.cx = cx + r.uniform(-0.02, 0.02);
          s.cy = base_y + (knobs.row_jitter > 0.0 ? r.uniform(-knobs.row_jitter, knobs.row_jitter) : 0.0);
          return s;
        });
        detail::paint(placed.back(), colors[static_cast<std::size_t>(i) % colors.size()], rng, knobs);
      }
      break;
    }
    case 2: {
      const NamedColor c = detail::pick(rng, all);
      const int rows = n <= 4 ? 1 : 2;
      place_on_grid(rows, n <= 4 ? n : 3, [&](std::size_t) { return c; });
      break;
    }
    case 3: {
      const auto two = detail::distinct_colors(rng, all, 2);
      place_on_grid(n <= 6 ? 2 : 3, 3, [&](std::size_t i) { return two[i % 2]; });
      break;
    }
    case 4: {
      const auto three = detail::distinct_colors(rng, all, 3);
      place_on_grid(n <= 6 ? 2 : 3, n <= 6 ? 3 : 4, [&](std::size_t) { return detail::pick(rng, three); });
      break;
    }
    default: {
      for (int i = 0; i < n; ++i) {
        detail::place(placed, rng, knobs, [&](Rng& r) {
          BlockSpec b;
          const auto wh = detail::catalog_shape(r);
          b.w = wh[0] * 0.8;
          b.h = wh[1] * 0.8;
          b.cx = r.uniform(b.w / 2, 1.0 - b.w / 2);
          b.cy = r.uniform(b.h / 2, 1.0 - b.h / 2);
          return b;
        });
        detail::paint(placed.back(), detail::pick(rng, all), rng, knobs);
      }
      break;
    }
  }

  GeneratedEnvironment out;
  if (id.empty()) id = "e" + std::to_string(category) + "." + std::to_string(seed % 1000);
  out.env = environment_from_blocks(std::move(id), "g" + std::to_string(category), placed);
  out.blocks = std::move(placed);
  out.truth = membership_grades(lex, out.env);
  return out;
}

/// Paints every block into an RGB raster and a label mask (id = object index + 1).
inline std::pair<Image, LabelMask> rasterize(const Environment& env, int width = 640, int height = 480,
                                             std::array<std::uint8_t, 3> background = {30, 30, 30}) {
  Image img(width, height, background);
  LabelMask mask(width, height);
  for (std::size_t i = 0; i < env.objects.size(); ++i) {
    const auto& o = env.objects[i];
    SceneBlock b = o.block.value_or(SceneBlock{o.raw.x_pos, o.raw.y_pos, o.raw.width, o.raw.height,
                                               hsl_to_rgb(o.raw.hue, o.raw.achromatic ? 0.0 : kChromaticSaturation,
                                                          o.raw.light)});
    const int x_begin = std::max(0, static_cast<int>(std::ceil((b.cx - b.w / 2) * width - 0.5)));
    const int x_end = std::min(width, static_cast<int>(std::ceil((b.cx + b.w / 2) * width - 0.5)));
    const int y_begin = std::max(0, static_cast<int>(std::ceil((b.cy - b.h / 2) * height - 0.5)));
    const int y_end = std::min(height, static_cast<int>(std::ceil((b.cy + b.h / 2) * height - 0.5)));
    for (int y = y_begin; y < y_end; ++y)
      for (int x = x_begin; x < x_end; ++x) {
        auto* px = img.at(x, y);
        px[0] = b.rgb[0];
        px[1] = b.rgb[1];
        px[2] = b.rgb[2];
        mask.at(x, y) = static_cast<std::uint16_t>(i + 1);
      }
  }
  return {std::move(img), std::move(mask)};
}

struct CorpusSpec {
  std::array<int, 5> env_counts{5, 5, 5, 5, 2};
  int descriptions_per_object = 5;
  int replicas = 10;
  double noise = 0.05;
  std::uint64_t seed = 7;
  GeneratorKnobs knobs;
  OracleShape shape;

  void validate() const {
    for (int c : env_counts)
      if (c < 1) throw Error(Errc::schema_error, "every category needs at least one environment");
    if (descriptions_per_object < 1) throw Error(Errc::schema_error, "descriptions per object must be >= 1");
    if (replicas < 1) throw Error(Errc::schema_error, "replicas must be >= 1");
    if (!(noise >= 0.0)) throw Error(Errc::schema_error, "noise must be >= 0");
    if (knobs.max_overlap < 0.0 || knobs.max_overlap > 0.1) throw Error(Errc::schema_error, "max_overlap must lie in [0, 0.1]");
  }
};

/// Descriptions of one referent, from single symbols up to three, drawn
/// among the symbols the referent fits best.
inline std::vector<Description> describe(const OracleTruth& truth, std::size_t object, int count, Rng& rng) {
  const auto row = truth.grades.row(static_cast<Eigen::Index>(object));
  std::vector<std::size_t> order(static_cast<std::size_t>(row.size()));
  for (std::size_t s = 0; s < order.size(); ++s) order[s] = s;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return row(static_cast<Eigen::Index>(a)) > row(static_cast<Eigen::Index>(b));
  });
  std::vector<std::size_t> candidates;
  for (std::size_t s : order)
    if (row(static_cast<Eigen::Index>(s)) >= kDescribeThreshold) candidates.push_back(s);
  if (candidates.size() < 2) {
    for (std::size_t s : order) {
      if (candidates.size() >= 2) break;
      if (std::find(candidates.begin(), candidates.end(), s) == candidates.end()) candidates.push_back(s);
    }
  }

  std::vector<Description> out;
  for (int k = 0; k < count; ++k) {
    Description best;
    for (int attempt = 0; attempt < 20; ++attempt) {
      const double u = rng.uniform();
      std::size_t len = u < 0.3 ? 1 : (u < 0.75 ? 2 : 3);
      len = std::min(len, candidates.size());
      std::vector<std::size_t> pool = candidates;
      std::vector<std::size_t> chosen;
      while (chosen.size() < len) {
        double total = 0.0;
        for (std::size_t s : pool) total += row(static_cast<Eigen::Index>(s)) + 1e-3;
        double r = rng.uniform() * total;
        std::size_t pick = pool.size() - 1;
        for (std::size_t i = 0; i < pool.size(); ++i) {
          r -= row(static_cast<Eigen::Index>(pool[i])) + 1e-3;
          if (r < 0) {
            pick = i;
            break;
          }
        }
        chosen.push_back(pool[pick]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
      }
      best = Description(chosen);
      if (std::find(out.begin(), out.end(), best) == out.end()) break;
    }
    out.push_back(best);
  }
  return out;
}

/// Replicates one identification with Gaussian noise on the grades.
inline std::vector<std::size_t> noisy_select(const OracleTruth& truth, const Description& desc, double noise, Rng& rng) {
  if (noise <= 0.0) return oracle_select(truth, desc);
  OracleTruth noisy = truth;
  for (Eigen::Index i = 0; i < noisy.grades.rows(); ++i)
    for (std::size_t s : desc) {
      auto& g = noisy.grades(i, static_cast<Eigen::Index>(s));
      g = std::clamp(g + rng.normal(0.0, noise), 0.0, 1.0);
    }
  return oracle_select(noisy, desc);
}

struct GeneratedCorpus {
  Corpus corpus;
  std::vector<std::vector<BlockSpec>> blocks;  // per environment
};

inline GeneratedCorpus generate_corpus(const CorpusSpec& spec, const Lexicon& lex = default_lexicon()) {
  spec.validate();
  GeneratedCorpus out;
  std::uint64_t stream = 0;
  for (int c = 1; c <= 5; ++c) {
    for (int i = 1; i <= spec.env_counts[static_cast<std::size_t>(c - 1)]; ++i, ++stream) {
      const std::string id = "e" + std::to_string(c) + "." + std::to_string(i);
      const std::uint64_t env_seed = derive_seed(spec.seed, stream);
      GeneratedEnvironment g;
      for (std::uint64_t retry = 0;; ++retry) {
        try {
          g = generate_environment(c, retry == 0 ? env_seed : derive_seed(env_seed, retry), spec.knobs, lex, id);
          break;
        } catch (const Error& e) {
          if (e.code() != Errc::placement_failure || retry >= 64) throw;
        }
      }
      g.truth = membership_grades(lex, g.env, spec.shape);

      Rng rng(derive_seed(spec.seed ^ 0x5eedfaceULL, stream));
      for (std::size_t o = 0; o < g.env.size(); ++o) {
        for (const auto& desc : describe(g.truth, o, spec.descriptions_per_object, rng)) {
          for (int r = 0; r < spec.replicas; ++r) {
            const auto sel = noisy_select(g.truth, desc, spec.noise, rng);
            out.corpus.tasks.push_back(make_task(g.env, desc, sel));
          }
        }
      }
      out.corpus.environments.push_back(std::move(g.env));
      out.blocks.push_back(std::move(g.blocks));
    }
  }
  return out;
}

}  // namespace refid::synth
