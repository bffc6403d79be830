#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "refid/errors.hpp"
#include "refid/features.hpp"
#include "refid/lexicon.hpp"

namespace refid {

/// Rendering geometry for one object, in scene-relative units.
struct SceneBlock {
  double cx = 0.5, cy = 0.5;
  double w = 0.0, h = 0.0;
  std::array<std::uint8_t, 3> rgb{0, 0, 0};

  bool operator==(const SceneBlock&) const = default;
};

struct SceneObject {
  std::string id;
  RawFeatures raw;
  std::optional<SceneBlock> block;

  bool operator==(const SceneObject&) const = default;
};

/// The candidate set of an identification; object order indexes posteriors.
struct Environment {
  std::string id;
  std::string category;
  std::vector<SceneObject> objects;

  std::size_t size() const noexcept { return objects.size(); }

  std::vector<RawFeatures> raw_features() const {
    std::vector<RawFeatures> out;
    out.reserve(objects.size());
    for (const auto& o : objects) out.push_back(o.raw);
    return out;
  }

  std::optional<std::size_t> index_of(const std::string& object_id) const {
    for (std::size_t i = 0; i < objects.size(); ++i)
      if (objects[i].id == object_id) return i;
    return std::nullopt;
  }

  bool has_scene() const {
    for (const auto& o : objects)
      if (!o.block) return false;
    return !objects.empty();
  }

  bool operator==(const Environment&) const = default;
};

/// Per-symbol weights beta_sigma, stored flat in lexicon layout order.
struct ModelParams {
  Lexicon lexicon;
  Eigen::VectorXd beta;

  static ModelParams zeros(Lexicon lex) {
    ModelParams p{std::move(lex), {}};
    p.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.lexicon.total_dim()));
    return p;
  }

  auto block(std::size_t symbol) const {
    return beta.segment(static_cast<Eigen::Index>(lexicon.offset(symbol)),
                        static_cast<Eigen::Index>(lexicon.dim(symbol)));
  }
  auto block(std::size_t symbol) {
    return beta.segment(static_cast<Eigen::Index>(lexicon.offset(symbol)),
                        static_cast<Eigen::Index>(lexicon.dim(symbol)));
  }

  void check_layout() const {
    if (static_cast<std::size_t>(beta.size()) != lexicon.total_dim())
      throw Error(Errc::dimension_mismatch, "beta has " + std::to_string(beta.size()) + " entries, lexicon layout needs " +
                                                std::to_string(lexicon.total_dim()));
  }
};

/// Scores of every object in an environment under a description, from a
/// precomputed feature table (rows: lexicon layout, columns: objects).
inline Eigen::VectorXd object_scores(const Eigen::MatrixXd& table, const Description& desc, const ModelParams& params) {
  params.check_layout();
  if (table.rows() != params.beta.size())
    throw Error(Errc::dimension_mismatch, "feature table rows disagree with parameter layout");
  Eigen::VectorXd scores = Eigen::VectorXd::Zero(table.cols());
  for (std::size_t s : desc) {
    const auto off = static_cast<Eigen::Index>(params.lexicon.offset(s));
    const auto dim = static_cast<Eigen::Index>(params.lexicon.dim(s));
    scores.noalias() += table.middleRows(off, dim).transpose() * params.beta.segment(off, dim);
  }
  return scores;
}

/// Numerically stable softmax (max-shifted).
inline Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
  if (scores.size() == 0) return scores;
  const double mx = scores.maxCoeff();
  Eigen::VectorXd e = (scores.array() - mx).exp().matrix();
  return e / e.sum();
}

inline double log_sum_exp(const Eigen::VectorXd& scores) {
  const double mx = scores.maxCoeff();
  return mx + std::log((scores.array() - mx).exp().sum());
}

inline Eigen::MatrixXd feature_table(const Lexicon& lex, const Environment& env) {
  const auto raw = env.raw_features();
  return feature_table(lex, std::span<const RawFeatures>(raw));
}

inline void check_env(const Environment& env) {
  if (env.objects.empty()) throw Error(Errc::schema_error, "environment '" + env.id + "' has no objects");
}

inline double object_score(std::size_t obj_index, const Description& desc, const Environment& env,
                           const ModelParams& params) {
  check_env(env);
  if (obj_index >= env.size()) throw Error(Errc::object_not_found, "object index " + std::to_string(obj_index));
  return object_scores(feature_table(params.lexicon, env), desc, params)(static_cast<Eigen::Index>(obj_index));
}

/// pr(o | D; env) for every object, aligned with env.objects.
inline Eigen::VectorXd posterior(const Description& desc, const Environment& env, const ModelParams& params) {
  check_env(env);
  return softmax(object_scores(feature_table(params.lexicon, env), desc, params));
}

/// Negative log-likelihood of one object: logsumexp(scores) - score(o).
inline double nll(std::size_t obj_index, const Description& desc, const Environment& env, const ModelParams& params) {
  check_env(env);
  if (obj_index >= env.size()) throw Error(Errc::object_not_found, "object index " + std::to_string(obj_index));
  const Eigen::VectorXd s = object_scores(feature_table(params.lexicon, env), desc, params);
  return log_sum_exp(s) - s(static_cast<Eigen::Index>(obj_index));
}

/// Shannon entropy in nats.
inline double entropy(const Eigen::VectorXd& probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

}  // namespace refid
