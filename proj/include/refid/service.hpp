#pragma once

#include <filesystem>
#include <string>
#include <utility>

#include "httplib.h"
#include "refid/dataset.hpp"
#include "refid/identify.hpp"

namespace refid::service {

struct ApiResponse {
  int status = 200;
  Json body;
};

/// Loaded model + corpus; immutable once constructed, so handlers are pure
/// and safe to call from any number of threads.
class ApiState {
 public:
  ApiState(ModelParams params, Corpus corpus) : params_(std::move(params)), corpus_(std::move(corpus)) {
    params_.check_layout();
    for (const auto& t : corpus_.tasks)
      for (std::size_t s : t.desc)
        if (s >= params_.lexicon.size())
          throw Error(Errc::dimension_mismatch, "corpus uses symbols beyond the model lexicon");
  }

  const ModelParams& params() const noexcept { return params_; }
  const Corpus& corpus() const noexcept { return corpus_; }

 private:
  ModelParams params_;
  Corpus corpus_;
};

inline ApiResponse error_response(int status, const Error& e) {
  return {status, {{"error", std::string(errc_name(e.code()))}, {"detail", e.detail()}}};
}

inline ApiResponse get_lexicon(const ApiState& s) {
  Json symbols = Json::array();
  const Lexicon& lex = s.params().lexicon;
  for (std::size_t i = 0; i < lex.size(); ++i) {
    Json channels = Json::array();
    for (Channel c : lex.channels(i)) channels.push_back(std::string(channel_name(c)));
    std::string display = lex.symbol(i).name;
    if (!display.empty()) display[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(display[0])));
    symbols.push_back({{"name", lex.symbol(i).name}, {"display_name", display}, {"channels", channels}});
  }
  return {200, {{"symbols", std::move(symbols)}}};
}

inline Json environment_to_json(const Environment& env) {
  Json objects = Json::array();
  for (const auto& o : env.objects) {
    Json obj = {{"id", o.id}, {"features", features_to_json(o.raw)}};
    if (o.block)
      obj["scene"] = {{"center", {o.block->cx, o.block->cy}},
                      {"size", {o.block->w, o.block->h}},
                      {"rgb", {o.block->rgb[0], o.block->rgb[1], o.block->rgb[2]}}};
    objects.push_back(std::move(obj));
  }
  return {{"id", env.id}, {"category", env.category}, {"objects", std::move(objects)}};
}

inline ApiResponse get_environments(const ApiState& s) {
  Json list = Json::array();
  for (const auto& e : s.corpus().environments)
    list.push_back({{"id", e.id}, {"category", e.category}, {"object_count", e.size()}});
  return {200, {{"environments", std::move(list)}}};
}

inline ApiResponse get_environment(const ApiState& s, const std::string& id) {
  const Environment* env = s.corpus().find_env(id);
  if (!env) return error_response(404, Error(Errc::unknown_environment, id));
  return {200, environment_to_json(*env)};
}

/// Body: {"env_id": "...", "symbols": ["green", "left"]}.
inline ApiResponse post_identify(const ApiState& s, const std::string& body) {
  Json req = Json::parse(body, nullptr, false);
  if (req.is_discarded() || !req.is_object())
    return error_response(400, Error(Errc::schema_error, "request body must be a JSON object"));
  if (!req.contains("env_id") || !req["env_id"].is_string())
    return error_response(400, Error(Errc::schema_error, "env_id must be a string"));
  const Json symbols = req.value("symbols", Json::array());
  if (!symbols.is_array()) return error_response(400, Error(Errc::schema_error, "symbols must be an array"));
  std::vector<std::string> tokens;
  for (const auto& t : symbols) {
    if (!t.is_string()) return error_response(400, Error(Errc::schema_error, "symbols must be strings"));
    tokens.push_back(t.get<std::string>());
  }

  const Environment* env = s.corpus().find_env(req["env_id"].get<std::string>());
  if (!env) return error_response(404, Error(Errc::unknown_environment, req["env_id"].get<std::string>()));
  Description desc;
  try {
    desc = parse_description(std::span<const std::string>(tokens), s.params().lexicon);
  } catch (const Error& e) {
    ApiResponse r = error_response(422, e);
    r.body["token"] = e.detail();
    return r;
  }
  return {200, identification_to_json(identify(s.params(), *env, desc))};
}

namespace detail {

inline void reply(httplib::Response& res, const ApiResponse& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

}  // namespace detail

/// Routes the API onto a server. `state` must outlive it.
inline void install_routes(httplib::Server& server, const ApiState& state, const std::filesystem::path& static_dir = {}) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  server.Get("/api/lexicon", [&state](const httplib::Request&, httplib::Response& res) {
    detail::reply(res, get_lexicon(state));
  });
  server.Get("/api/environments", [&state](const httplib::Request&, httplib::Response& res) {
    detail::reply(res, get_environments(state));
  });
  server.Get(R"(/api/environments/([^/]+))", [&state](const httplib::Request& req, httplib::Response& res) {
    detail::reply(res, get_environment(state, req.matches[1]));
  });
  server.Post("/api/identify", [&state](const httplib::Request& req, httplib::Response& res) {
    detail::reply(res, post_identify(state, req.body));
  });
  if (!static_dir.empty() && !server.set_mount_point("/", static_dir.string()))
    throw Error(Errc::io_error, "cannot serve static files from " + static_dir.string());
}

}  // namespace refid::service
