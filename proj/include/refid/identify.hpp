#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "refid/json_util.hpp"
#include "refid/model.hpp"

namespace refid {

struct RankedObject {
  std::string object_id;
  std::size_t index = 0;  // position in the environment
  double prob = 0.0;
};

/// Posterior over an environment, ranked. Used by both the REPL and the HTTP
/// service so the two cannot disagree.
struct Identification {
  std::vector<RankedObject> ranked;  // descending prob; ties keep env order
  double entropy = 0.0;              // nats
};

inline Identification identify(const ModelParams& params, const Environment& env, const Description& desc) {
  const Eigen::VectorXd q = posterior(desc, env, params);
  Identification out;
  out.entropy = entropy(q);
  out.ranked.reserve(env.size());
  for (std::size_t i = 0; i < env.size(); ++i) out.ranked.push_back({env.objects[i].id, i, q(static_cast<Eigen::Index>(i))});
  std::stable_sort(out.ranked.begin(), out.ranked.end(),
                   [](const RankedObject& a, const RankedObject& b) { return a.prob > b.prob; });
  return out;
}

inline Json identification_to_json(const Identification& id) {
  Json post = Json::array();
  for (const auto& r : id.ranked) post.push_back({{"object_id", r.object_id}, {"prob", r.prob}});
  return {{"posterior", std::move(post)}, {"entropy", id.entropy}};
}

inline std::string format_identification(const Identification& id) {
  std::string out;
  char line[128];
  for (const auto& r : id.ranked) {
    std::snprintf(line, sizeof line, "%-8s %.6f\n", r.object_id.c_str(), r.prob);
    out += line;
  }
  std::snprintf(line, sizeof line, "entropy  %.6f nats\n", id.entropy);
  out += line;
  return out;
}

}  // namespace refid
