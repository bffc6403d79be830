#pragma once

#include <cctype>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>

#include "json.hpp"

#include "refid/errors.hpp"

namespace refid {

using Json = nlohmann::json;

namespace detail {

// Walks already-valid JSON text and records the 1-based line of every value,
// keyed by JSON pointer.
class LineIndexer {
 public:
  explicit LineIndexer(std::string_view text) : text_(text) {}

  std::map<std::string, int> run() {
    skip_ws();
    value("");
    return std::move(lines_);
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }

  std::string string_token() {
    std::string out;
    ++pos_;  // opening quote
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) {
        out += text_[pos_ + 1];
        pos_ += 2;
        continue;
      }
      out += text_[pos_++];
    }
    ++pos_;
    return out;
  }

  static std::string escape_pointer(const std::string& key) {
    std::string out;
    for (char c : key) {
      if (c == '~') out += "~0";
      else if (c == '/') out += "~1";
      else out += c;
    }
    return out;
  }

  void value(const std::string& ptr) {
    lines_[ptr] = line_;
    if (pos_ >= text_.size()) return;
    const char c = text_[pos_];
    if (c == '{') {
      ++pos_;
      skip_ws();
      while (pos_ < text_.size() && text_[pos_] != '}') {
        const std::string key = string_token();
        skip_ws();
        ++pos_;  // ':'
        skip_ws();
        value(ptr + "/" + escape_pointer(key));
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') {
          ++pos_;
          skip_ws();
        }
      }
      ++pos_;
    } else if (c == '[') {
      ++pos_;
      skip_ws();
      std::size_t i = 0;
      while (pos_ < text_.size() && text_[pos_] != ']') {
        value(ptr + "/" + std::to_string(i++));
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') {
          ++pos_;
          skip_ws();
        }
      }
      ++pos_;
    } else if (c == '"') {
      string_token();
    } else {
      while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != '}' && text_[pos_] != ']' &&
             !std::isspace(static_cast<unsigned char>(text_[pos_])))
        ++pos_;
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::map<std::string, int> lines_;
};

}  // namespace detail

/// Parsed JSON document that can report source lines for schema errors.
class JsonDocument {
 public:
  JsonDocument(std::string text, std::string source) : source_(std::move(source)) {
    try {
      root_ = Json::parse(text);
    } catch (const Json::parse_error& e) {
      int line = 1;
      for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i)
        if (text[i] == '\n') ++line;
      throw Error(Errc::schema_error, source_ + ":" + std::to_string(line) + ": invalid JSON (" + e.what() + ")");
    }
    lines_ = detail::LineIndexer(text).run();
  }

  const Json& root() const noexcept { return root_; }

  int line_of(const std::string& pointer) const {
    // fall back to the closest enclosing value that exists
    std::string p = pointer;
    for (;;) {
      auto it = lines_.find(p);
      if (it != lines_.end()) return it->second;
      auto slash = p.rfind('/');
      if (slash == std::string::npos) return 1;
      p = p.substr(0, slash);
    }
  }

  [[noreturn]] void fail(Errc code, const std::string& pointer, const std::string& message) const {
    throw Error(code, source_ + ":" + std::to_string(line_of(pointer)) + ": " + (pointer.empty() ? "/" : pointer) +
                          ": " + message);
  }

  const Json& require(const Json& obj, const std::string& pointer, const char* key, Json::value_t type) const {
    if (!obj.is_object()) fail(Errc::schema_error, pointer, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(Errc::schema_error, pointer + "/" + key, "missing field");
    if (!type_matches(*it, type)) fail(Errc::schema_error, pointer + "/" + key, std::string("expected ") + type_label(type));
    return *it;
  }

  const std::string& source() const noexcept { return source_; }

 private:
  static bool type_matches(const Json& j, Json::value_t type) {
    if (type == Json::value_t::number_float) return j.is_number();
    if (type == Json::value_t::number_unsigned) return j.is_number_unsigned();
    return j.type() == type;
  }

  static const char* type_label(Json::value_t type) {
    switch (type) {
      case Json::value_t::object: return "object";
      case Json::value_t::array: return "array";
      case Json::value_t::string: return "string";
      case Json::value_t::boolean: return "boolean";
      case Json::value_t::number_unsigned: return "non-negative integer";
      default: return "number";
    }
  }

  std::string source_;
  Json root_;
  std::map<std::string, int> lines_;
};

}  // namespace refid
