#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "refid/errors.hpp"
#include "refid/features.hpp"

namespace refid {

/// 8-bit RGB raster, row-major, origin at the top-left pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h, std::array<std::uint8_t, 3> fill = {0, 0, 0})
      : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3) {
    for (std::size_t i = 0; i < rgb.size(); i += 3) {
      rgb[i] = fill[0];
      rgb[i + 1] = fill[1];
      rgb[i + 2] = fill[2];
    }
  }

  std::uint8_t* at(int x, int y) { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }
};

/// Per-pixel object ids; 0 is background.
struct LabelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> labels;

  LabelMask() = default;
  LabelMask(int w, int h) : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0) {}

  std::uint16_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint16_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

// Reads the next header integer, skipping whitespace and '#' comments.
inline int read_pnm_int(std::istream& in, const std::string& what) {
  int c = in.peek();
  while (in && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else {
      in.get();
    }
    c = in.peek();
  }
  int value = 0;
  if (!(in >> value)) throw Error(Errc::schema_error, "malformed PNM header (" + what + ")");
  return value;
}

struct PnmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

inline PnmHeader read_pnm_header(std::istream& in) {
  PnmHeader h;
  char m[2] = {0, 0};
  in.read(m, 2);
  if (!in || m[0] != 'P') throw Error(Errc::schema_error, "not a PNM file");
  h.magic = std::string(m, 2);
  h.width = read_pnm_int(in, "width");
  h.height = read_pnm_int(in, "height");
  h.maxval = read_pnm_int(in, "maxval");
  if (h.width <= 0 || h.height <= 0) throw Error(Errc::empty_image, "image has zero pixels");
  if (h.maxval <= 0 || h.maxval > 65535) throw Error(Errc::schema_error, "bad PNM maxval");
  in.get();  // single whitespace before binary data
  return h;
}

inline std::ifstream open_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  return in;
}

}  // namespace detail

inline Image read_ppm(std::istream& in) {
  const auto h = detail::read_pnm_header(in);
  if (h.magic != "P3" && h.magic != "P6") throw Error(Errc::schema_error, "expected P3/P6, got " + h.magic);
  if (h.maxval != 255) throw Error(Errc::schema_error, "only maxval 255 images are supported");
  Image img(h.width, h.height);
  if (h.magic == "P6") {
    in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (!in) throw Error(Errc::schema_error, "truncated P6 pixel data");
  } else {
    for (auto& v : img.rgb) {
      int x = 0;
      if (!(in >> x) || x < 0 || x > 255) throw Error(Errc::schema_error, "bad P3 sample");
      v = static_cast<std::uint8_t>(x);
    }
  }
  return img;
}

inline Image read_ppm(const std::filesystem::path& path) {
  auto in = detail::open_binary(path);
  return read_ppm(in);
}

inline void write_ppm(std::ostream& out, const Image& img) {
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
}

inline void write_ppm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  write_ppm(out, img);
}

inline LabelMask read_pgm(std::istream& in) {
  const auto h = detail::read_pnm_header(in);
  if (h.magic != "P2" && h.magic != "P5") throw Error(Errc::schema_error, "expected P2/P5, got " + h.magic);
  LabelMask mask(h.width, h.height);
  if (h.magic == "P5") {
    const bool wide = h.maxval > 255;
    for (auto& v : mask.labels) {
      int hi = in.get();
      if (wide) {
        int lo = in.get();
        v = static_cast<std::uint16_t>((hi << 8) | lo);
      } else {
        v = static_cast<std::uint16_t>(hi);
      }
      if (!in) throw Error(Errc::schema_error, "truncated P5 pixel data");
    }
  } else {
    for (auto& v : mask.labels) {
      int x = 0;
      if (!(in >> x) || x < 0 || x > h.maxval) throw Error(Errc::schema_error, "bad P2 sample");
      v = static_cast<std::uint16_t>(x);
    }
  }
  return mask;
}

inline LabelMask read_pgm(const std::filesystem::path& path) {
  auto in = detail::open_binary(path);
  return read_pgm(in);
}

inline void write_pgm(std::ostream& out, const LabelMask& mask) {
  std::uint16_t mx = 0;
  for (auto v : mask.labels) mx = std::max(mx, v);
  const bool wide = mx > 255;
  out << "P5\n" << mask.width << ' ' << mask.height << '\n' << (wide ? 65535 : 255) << '\n';
  for (auto v : mask.labels) {
    if (wide) out.put(static_cast<char>(v >> 8));
    out.put(static_cast<char>(v & 0xff));
  }
}

inline void write_pgm(const std::filesystem::path& path, const LabelMask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  write_pgm(out, mask);
}

inline constexpr int kLightBins = 32;
inline constexpr double kHueSaturationFloor = 0.05;

/// Measures one labelled pixel cluster.
inline RawFeatures extract_cluster_features(const Image& image, const LabelMask& mask, int object_id) {
  if (image.width != mask.width || image.height != mask.height)
    throw Error(Errc::dimension_mismatch, "image and mask sizes differ");
  if (image.width <= 0 || image.height <= 0) throw Error(Errc::empty_image, "image has zero pixels");

  double sum_x = 0, sum_y = 0, phasor_c = 0, phasor_s = 0;
  std::size_t count = 0, chromatic = 0;
  int min_x = image.width, max_x = -1, min_y = image.height, max_y = -1;
  std::array<std::size_t, kLightBins> hist{};

  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      if (mask.at(x, y) != object_id) continue;
      ++count;
      sum_x += x + 0.5;
      sum_y += y + 0.5;
      min_x = std::min(min_x, x);
      max_x = std::max(max_x, x);
      min_y = std::min(min_y, y);
      max_y = std::max(max_y, y);
      const auto* px = image.at(x, y);
      const Hsl hsl = rgb_to_hsl(px[0], px[1], px[2]);
      if (hsl.sat > kHueSaturationFloor) {
        const double a = 2.0 * std::numbers::pi * hsl.hue;
        phasor_c += std::cos(a);
        phasor_s += std::sin(a);
        ++chromatic;
      }
      const int bin = std::min(kLightBins - 1, static_cast<int>(hsl.light * kLightBins));
      ++hist[static_cast<std::size_t>(bin)];
    }
  }
  if (count == 0) throw Error(Errc::object_not_found, "object id " + std::to_string(object_id) + " not in mask");

  const double w = image.width, h = image.height;
  RawFeatures f;
  f.x_pos = sum_x / static_cast<double>(count) / w;
  f.y_pos = sum_y / static_cast<double>(count) / h;
  f.width = (max_x - min_x + 1) / w;
  f.height = (max_y - min_y + 1) / h;
  f.size = static_cast<double>(count) / (w * h);
  if (chromatic == 0) {
    f.hue = 0.0;
    f.achromatic = true;
  } else {
    double turns = std::atan2(phasor_s, phasor_c) / (2.0 * std::numbers::pi);
    if (turns < 0) turns += 1.0;
    if (turns >= 1.0) turns -= 1.0;
    f.hue = turns;
  }
  // ties go to the lower bin
  std::size_t best = 0;
  for (std::size_t b = 1; b < hist.size(); ++b)
    if (hist[b] > hist[best]) best = b;
  f.light = (static_cast<double>(best) + 0.5) / kLightBins;
  return f;
}

}  // namespace refid
