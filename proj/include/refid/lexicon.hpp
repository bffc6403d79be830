#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "refid/errors.hpp"

namespace refid {

/// Perceptual measurement channels of an object (see RawFeatures).
enum class Channel { x_pos, y_pos, width, height, size, hue, light };

inline constexpr std::array<Channel, 7> kAllChannels{Channel::x_pos, Channel::y_pos, Channel::width,
                                                     Channel::height, Channel::size, Channel::hue,
                                                     Channel::light};

inline std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::x_pos: return "x_pos";
    case Channel::y_pos: return "y_pos";
    case Channel::width: return "width";
    case Channel::height: return "height";
    case Channel::size: return "size";
    case Channel::hue: return "hue";
    case Channel::light: return "light";
  }
  return "";
}

inline std::optional<Channel> channel_from_name(std::string_view name) {
  for (Channel c : kAllChannels)
    if (channel_name(c) == name) return c;
  return std::nullopt;
}

/// Feature dimension a channel contributes to a symbol's vector.
/// Scalar channels emit (raw, z-score); hue emits a unit phasor (cos, sin).
inline constexpr std::size_t channel_dim(Channel) { return 2; }

struct Symbol {
  std::string name;
  std::size_t index = 0;

  bool operator==(const Symbol&) const = default;
};

/// Ordered symbol set with a fixed symbol -> channel association.
///
/// The declaration order fixes the global parameter layout: symbol i owns the
/// contiguous block [offset(i), offset(i) + dim(i)) of the flat weight vector.
class Lexicon {
 public:
  Lexicon() = default;

  void add(std::string name, std::vector<Channel> channels) {
    for (auto& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (name.empty()) throw Error(Errc::schema_error, "lexicon symbol name is empty");
    if (find(name)) throw Error(Errc::duplicate_id, "lexicon symbol '" + name + "' declared twice");
    if (channels.empty()) throw Error(Errc::schema_error, "symbol '" + name + "' has no channels");
    std::size_t dim = 0;
    for (Channel c : channels) dim += channel_dim(c);
    offsets_.push_back(total_dim_);
    dims_.push_back(dim);
    total_dim_ += dim;
    symbols_.push_back(Symbol{std::move(name), symbols_.size()});
    channels_.push_back(std::move(channels));
  }

  std::size_t size() const noexcept { return symbols_.size(); }
  const std::vector<Symbol>& symbols() const noexcept { return symbols_; }
  const Symbol& symbol(std::size_t i) const { return symbols_.at(i); }
  const std::vector<Channel>& channels(std::size_t i) const { return channels_.at(i); }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t offset(std::size_t i) const { return offsets_.at(i); }
  std::size_t total_dim() const noexcept { return total_dim_; }

  std::optional<std::size_t> find(std::string_view name) const {
    for (const auto& s : symbols_)
      if (s.name == name) return s.index;
    return std::nullopt;
  }

  const std::vector<Channel>& lookup(std::string_view name) const {
    auto i = find(name);
    if (!i) throw Error(Errc::unknown_symbol, std::string(name));
    return channels_[*i];
  }

  bool operator==(const Lexicon& o) const {
    return symbols_ == o.symbols_ && channels_ == o.channels_;
  }

 private:
  std::vector<Symbol> symbols_;
  std::vector<std::vector<Channel>> channels_;
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;
  std::size_t total_dim_ = 0;
};

/// The blocks-world lexicon: location, geometry and chromatic labels.
inline Lexicon default_lexicon() {
  Lexicon lex;
  lex.add("left", {Channel::x_pos});
  lex.add("right", {Channel::x_pos});
  lex.add("top", {Channel::y_pos});
  lex.add("bottom", {Channel::y_pos});
  lex.add("thin", {Channel::width});
  lex.add("wide", {Channel::width});
  lex.add("short", {Channel::height});
  lex.add("tall", {Channel::height});
  lex.add("small", {Channel::size});
  lex.add("big", {Channel::size});
  lex.add("red", {Channel::hue});
  lex.add("green", {Channel::hue});
  lex.add("blue", {Channel::hue});
  lex.add("yellow", {Channel::hue});
  lex.add("white", {Channel::light});
  return lex;
}

/// A set of symbol indices; the empty set is the uninformative description.
class Description {
 public:
  Description() = default;
  explicit Description(std::vector<std::size_t> symbols) : symbols_(std::move(symbols)) {
    std::sort(symbols_.begin(), symbols_.end());
    symbols_.erase(std::unique(symbols_.begin(), symbols_.end()), symbols_.end());
  }

  const std::vector<std::size_t>& symbols() const noexcept { return symbols_; }
  bool empty() const noexcept { return symbols_.empty(); }
  std::size_t size() const noexcept { return symbols_.size(); }
  bool contains(std::size_t i) const { return std::binary_search(symbols_.begin(), symbols_.end(), i); }
  auto begin() const { return symbols_.begin(); }
  auto end() const { return symbols_.end(); }

  bool operator==(const Description&) const = default;
  auto operator<=>(const Description&) const = default;

 private:
  std::vector<std::size_t> symbols_;
};

inline Description parse_description(std::span<const std::string> tokens, const Lexicon& lex) {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& tok : tokens) {
    std::string lower(tok);
    for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    auto i = lex.find(lower);
    if (!i) throw Error(Errc::unknown_symbol, tok);
    ids.push_back(*i);
  }
  return Description(std::move(ids));
}

/// Splits on whitespace, then parses.
inline Description parse_description(std::string_view text, const Lexicon& lex) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) tokens.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return parse_description(std::span<const std::string>(tokens), lex);
}

inline std::vector<std::string> render_description(const Description& d, const Lexicon& lex) {
  std::vector<std::string> out;
  for (std::size_t i : d) out.push_back(lex.symbol(i).name);
  return out;
}

inline std::string join_description(const Description& d, const Lexicon& lex) {
  std::string out;
  for (const auto& name : render_description(d, lex)) {
    if (!out.empty()) out += ' ';
    out += name;
  }
  return out;
}

}  // namespace refid
