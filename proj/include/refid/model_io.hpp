#pragma once

#include <filesystem>
#include <string>

#include "refid/dataset.hpp"
#include "refid/json_util.hpp"
#include "refid/model.hpp"
#include "refid/training.hpp"

namespace refid {

/// Version of the per-symbol feature encoding (raw + z-score, hue phasor).
inline constexpr int kFeatureConfigVersion = 1;

struct ModelFile {
  ModelParams params;
  double ridge = 0.0;
  FitReport fit;
};

inline Json model_to_json(const ModelFile& m) {
  Json symbols = Json::array();
  const Lexicon& lex = m.params.lexicon;
  for (std::size_t i = 0; i < lex.size(); ++i) {
    Json channels = Json::array();
    for (Channel c : lex.channels(i)) channels.push_back(std::string(channel_name(c)));
    symbols.push_back({{"name", lex.symbol(i).name}, {"channels", channels}, {"dim", lex.dim(i)}, {"offset", lex.offset(i)}});
  }
  Json beta = Json::array();
  for (double b : m.params.beta) beta.push_back(b);
  return {{"format", "refid-model"},
          {"feature_config_version", kFeatureConfigVersion},
          {"lexicon", std::move(symbols)},
          {"beta", std::move(beta)},
          {"ridge", m.ridge},
          {"fit",
           {{"method", std::string(method_name(m.fit.method))},
            {"iterations", m.fit.iterations},
            {"final_loss", m.fit.final_loss},
            {"grad_norm", m.fit.grad_norm},
            {"converged", m.fit.converged}}}};
}

inline std::string dump_model(const ModelFile& m) { return model_to_json(m).dump(1) + "\n"; }

inline ModelFile model_from_document(const JsonDocument& doc) {
  using vt = Json::value_t;
  const Json& root = doc.root();
  if (!root.is_object()) doc.fail(Errc::schema_error, "", "expected an object");
  const auto version = doc.require(root, "", "feature_config_version", vt::number_unsigned).get<int>();
  if (version != kFeatureConfigVersion)
    doc.fail(Errc::schema_error, "/feature_config_version", "unsupported feature config version " + std::to_string(version));

  ModelFile m;
  const Json& syms = doc.require(root, "", "lexicon", vt::array);
  for (std::size_t i = 0; i < syms.size(); ++i) {
    const std::string ptr = "/lexicon/" + std::to_string(i);
    const auto name = doc.require(syms[i], ptr, "name", vt::string).get<std::string>();
    const Json& chans = doc.require(syms[i], ptr, "channels", vt::array);
    std::vector<Channel> channels;
    for (std::size_t k = 0; k < chans.size(); ++k) {
      auto c = chans[k].is_string() ? channel_from_name(chans[k].get<std::string>()) : std::nullopt;
      if (!c) doc.fail(Errc::schema_error, ptr + "/channels/" + std::to_string(k), "unknown channel");
      channels.push_back(*c);
    }
    try {
      m.params.lexicon.add(name, channels);
    } catch (const Error& e) {
      doc.fail(e.code(), ptr, e.detail());
    }
    const auto dim = doc.require(syms[i], ptr, "dim", vt::number_unsigned).get<std::size_t>();
    if (dim != m.params.lexicon.dim(i)) doc.fail(Errc::dimension_mismatch, ptr + "/dim", "dimension disagrees with channels");
  }
  const Json& beta = doc.require(root, "", "beta", vt::array);
  if (beta.size() != m.params.lexicon.total_dim())
    doc.fail(Errc::dimension_mismatch, "/beta",
             "has " + std::to_string(beta.size()) + " entries, lexicon needs " + std::to_string(m.params.lexicon.total_dim()));
  m.params.beta.resize(static_cast<Eigen::Index>(beta.size()));
  for (std::size_t i = 0; i < beta.size(); ++i) {
    if (!beta[i].is_number()) doc.fail(Errc::schema_error, "/beta/" + std::to_string(i), "expected number");
    m.params.beta(static_cast<Eigen::Index>(i)) = beta[i].get<double>();
  }
  m.ridge = doc.require(root, "", "ridge", vt::number_float).get<double>();
  if (root.contains("fit") && root["fit"].is_object()) {
    const Json& f = root["fit"];
    m.fit.method = f.value("method", std::string("bfgs")) == "newton" ? FitMethod::newton : FitMethod::bfgs;
    m.fit.iterations = f.value("iterations", 0);
    m.fit.final_loss = f.value("final_loss", 0.0);
    m.fit.grad_norm = f.value("grad_norm", 0.0);
    m.fit.converged = f.value("converged", false);
  }
  return m;
}

inline void save_model(const ModelFile& m, const std::filesystem::path& path) { write_text_file(path, dump_model(m)); }

inline ModelFile load_model(const std::filesystem::path& path) {
  return model_from_document(JsonDocument(read_text_file(path), path.string()));
}

}  // namespace refid
