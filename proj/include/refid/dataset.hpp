#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "refid/json_util.hpp"
#include "refid/model.hpp"
#include "refid/training.hpp"

namespace refid {

struct Corpus {
  std::vector<Environment> environments;
  std::vector<IdentificationTask> tasks;

  /// category -> env ids, in environment order
  std::map<std::string, std::vector<std::string>> categories() const {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& e : environments) out[e.category].push_back(e.id);
    return out;
  }

  const Environment* find_env(const std::string& id) const {
    for (const auto& e : environments)
      if (e.id == id) return &e;
    return nullptr;
  }

  const Environment& env(const std::string& id) const {
    if (const auto* e = find_env(id)) return *e;
    throw Error(Errc::unknown_environment, id);
  }

  bool operator==(const Corpus&) const = default;
};

// ---------------------------------------------------------------------------
// corpus.json

inline Json features_to_json(const RawFeatures& f) {
  Json j = Json::object();
  for (Channel c : kAllChannels) j[std::string(channel_name(c))] = f.value(c);
  return j;
}

inline Json corpus_to_json(const Corpus& corpus, const Lexicon& lex) {
  Json envs = Json::array();
  for (const auto& e : corpus.environments) {
    Json objs = Json::array();
    Json scene = Json::array();
    for (const auto& o : e.objects) {
      objs.push_back({{"id", o.id}, {"features", features_to_json(o.raw)}});
      if (o.block)
        scene.push_back({{"id", o.id},
                         {"center", {o.block->cx, o.block->cy}},
                         {"size", {o.block->w, o.block->h}},
                         {"rgb", {o.block->rgb[0], o.block->rgb[1], o.block->rgb[2]}}});
    }
    Json je = {{"id", e.id}, {"category", e.category}, {"objects", std::move(objs)}};
    if (!scene.empty()) je["scene"] = std::move(scene);
    envs.push_back(std::move(je));
  }
  Json tasks = Json::array();
  for (const auto& t : corpus.tasks)
    tasks.push_back({{"env_id", t.env_id}, {"symbols", render_description(t.desc, lex)}, {"selected", t.selected}});
  return {{"environments", std::move(envs)}, {"tasks", std::move(tasks)}};
}

inline std::string dump_corpus(const Corpus& corpus, const Lexicon& lex) {
  return corpus_to_json(corpus, lex).dump(1) + "\n";
}

inline Corpus corpus_from_document(const JsonDocument& doc, const Lexicon& lex) {
  using vt = Json::value_t;
  Corpus corpus;
  const Json& root = doc.root();
  if (!root.is_object()) doc.fail(Errc::schema_error, "", "expected an object");

  const Json& envs = doc.require(root, "", "environments", vt::array);
  std::set<std::string> env_ids;
  for (std::size_t i = 0; i < envs.size(); ++i) {
    const std::string ptr = "/environments/" + std::to_string(i);
    const Json& je = envs[i];
    Environment env;
    env.id = doc.require(je, ptr, "id", vt::string).get<std::string>();
    env.category = doc.require(je, ptr, "category", vt::string).get<std::string>();
    if (!env_ids.insert(env.id).second) doc.fail(Errc::duplicate_id, ptr + "/id", "duplicate environment id '" + env.id + "'");
    const Json& objs = doc.require(je, ptr, "objects", vt::array);
    if (objs.empty()) doc.fail(Errc::schema_error, ptr + "/objects", "environment has no objects");
    std::set<std::string> obj_ids;
    for (std::size_t k = 0; k < objs.size(); ++k) {
      const std::string optr = ptr + "/objects/" + std::to_string(k);
      SceneObject obj;
      obj.id = doc.require(objs[k], optr, "id", vt::string).get<std::string>();
      if (!obj_ids.insert(obj.id).second) doc.fail(Errc::duplicate_id, optr + "/id", "duplicate object id '" + obj.id + "'");
      const Json& jf = doc.require(objs[k], optr, "features", vt::object);
      for (Channel c : kAllChannels) {
        const std::string key(channel_name(c));
        const double v = doc.require(jf, optr + "/features", key.c_str(), vt::number_float).get<double>();
        if (!std::isfinite(v)) doc.fail(Errc::schema_error, optr + "/features/" + key, "not finite");
        obj.raw.value(c) = v;
      }
      if (!(obj.raw.hue >= 0.0 && obj.raw.hue < 1.0))
        doc.fail(Errc::schema_error, optr + "/features/hue", "hue must lie in [0, 1)");
      env.objects.push_back(std::move(obj));
    }
    if (je.contains("scene")) {
      const Json& scene = doc.require(je, ptr, "scene", vt::array);
      for (std::size_t k = 0; k < scene.size(); ++k) {
        const std::string sptr = ptr + "/scene/" + std::to_string(k);
        const auto id = doc.require(scene[k], sptr, "id", vt::string).get<std::string>();
        auto idx = env.index_of(id);
        if (!idx) doc.fail(Errc::schema_error, sptr + "/id", "scene entry for unknown object '" + id + "'");
        const Json& center = doc.require(scene[k], sptr, "center", vt::array);
        const Json& size = doc.require(scene[k], sptr, "size", vt::array);
        const Json& rgb = doc.require(scene[k], sptr, "rgb", vt::array);
        if (center.size() != 2 || !center[0].is_number() || !center[1].is_number())
          doc.fail(Errc::schema_error, sptr + "/center", "expected [x, y]");
        if (size.size() != 2 || !size[0].is_number() || !size[1].is_number())
          doc.fail(Errc::schema_error, sptr + "/size", "expected [w, h]");
        if (rgb.size() != 3) doc.fail(Errc::schema_error, sptr + "/rgb", "expected [r, g, b]");
        SceneBlock b;
        b.cx = center[0].get<double>();
        b.cy = center[1].get<double>();
        b.w = size[0].get<double>();
        b.h = size[1].get<double>();
        for (int c = 0; c < 3; ++c) {
          if (!rgb[c].is_number_unsigned() || rgb[c].get<unsigned>() > 255)
            doc.fail(Errc::schema_error, sptr + "/rgb/" + std::to_string(c), "expected a byte");
          b.rgb[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(rgb[c].get<unsigned>());
        }
        env.objects[*idx].block = b;
      }
    }
    corpus.environments.push_back(std::move(env));
  }

  const Json& tasks = doc.require(root, "", "tasks", vt::array);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const std::string ptr = "/tasks/" + std::to_string(i);
    const Json& jt = tasks[i];
    const auto env_id = doc.require(jt, ptr, "env_id", vt::string).get<std::string>();
    const Environment* env = corpus.find_env(env_id);
    if (!env) doc.fail(Errc::dangling_env_ref, ptr + "/env_id", "unknown environment '" + env_id + "'");
    const Json& syms = doc.require(jt, ptr, "symbols", vt::array);
    std::vector<std::string> tokens;
    for (std::size_t k = 0; k < syms.size(); ++k) {
      if (!syms[k].is_string()) doc.fail(Errc::schema_error, ptr + "/symbols/" + std::to_string(k), "expected string");
      tokens.push_back(syms[k].get<std::string>());
      if (!lex.find(tokens.back()))
        doc.fail(Errc::unknown_symbol, ptr + "/symbols/" + std::to_string(k), "'" + tokens.back() + "' not in lexicon");
    }
    const Json& sel = doc.require(jt, ptr, "selected", vt::array);
    if (sel.empty()) doc.fail(Errc::empty_selection, ptr + "/selected", "no object selected");
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < sel.size(); ++k) {
      const std::string sptr = ptr + "/selected/" + std::to_string(k);
      if (!sel[k].is_string()) doc.fail(Errc::schema_error, sptr, "expected string");
      auto oi = env->index_of(sel[k].get<std::string>());
      if (!oi) doc.fail(Errc::schema_error, sptr, "object '" + sel[k].get<std::string>() + "' not in environment '" + env_id + "'");
      idx.push_back(*oi);
    }
    try {
      corpus.tasks.push_back(make_task(*env, parse_description(std::span<const std::string>(tokens), lex), idx));
    } catch (const Error& e) {
      doc.fail(e.code(), ptr, e.detail());
    }
  }
  return corpus;
}

inline Corpus parse_corpus(std::string text, const std::string& source, const Lexicon& lex) {
  return corpus_from_document(JsonDocument(std::move(text), source), lex);
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::io_error, "failed writing " + path.string());
}

inline Corpus load_corpus(const std::filesystem::path& path, const Lexicon& lex = default_lexicon()) {
  return parse_corpus(read_text_file(path), path.string(), lex);
}

inline void save_corpus(const Corpus& corpus, const std::filesystem::path& path, const Lexicon& lex = default_lexicon()) {
  write_text_file(path, dump_corpus(corpus, lex));
}

// ---------------------------------------------------------------------------
// metrics

struct EvalMetrics {
  double t_lklh = 0.0;  // mean posterior mass on the selected objects
  double kl = 0.0;      // mean KL(p || q), nats
  double qtp = 0.0;     // mean q^T p
  std::size_t n_tasks = 0;
};

using TaskFilter = std::function<bool(const IdentificationTask&, const Environment&)>;

inline TaskFilter env_filter(std::string id) {
  return [id = std::move(id)](const IdentificationTask& t, const Environment&) { return t.env_id == id; };
}

inline TaskFilter category_filter(std::string cat) {
  return [cat = std::move(cat)](const IdentificationTask&, const Environment& e) { return e.category == cat; };
}

/// Running sums of per-task metrics.
struct MetricSums {
  double t_lklh = 0.0, kl = 0.0, qtp = 0.0;
  std::size_t n = 0;

  void add(const EvalMetrics& m) {
    t_lklh += m.t_lklh * static_cast<double>(m.n_tasks);
    kl += m.kl * static_cast<double>(m.n_tasks);
    qtp += m.qtp * static_cast<double>(m.n_tasks);
    n += m.n_tasks;
  }

  EvalMetrics mean() const {
    if (n == 0) return {};
    const double d = static_cast<double>(n);
    return {t_lklh / d, kl / d, qtp / d, n};
  }
};

/// Per-task metric values under the model posterior.
inline EvalMetrics task_metrics(const Eigen::VectorXd& q, const IdentificationTask& t, const Environment& env) {
  EvalMetrics m;
  for (const auto& id : t.selected) m.t_lklh += q(static_cast<Eigen::Index>(*env.index_of(id)));
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const double p = t.target(i);
    if (p > 0.0) m.kl += p * (std::log(p) - std::log(q(i)));
  }
  m.qtp = q.dot(t.target);
  m.n_tasks = 1;
  return m;
}

inline EvalMetrics evaluate(const ModelParams& params, const Corpus& corpus, const TaskFilter& filter = {}) {
  params.check_layout();
  std::map<std::string, Eigen::MatrixXd> tables;
  MetricSums sums;
  for (const auto& t : corpus.tasks) {
    const Environment& env = corpus.env(t.env_id);
    if (filter && !filter(t, env)) continue;
    auto it = tables.find(env.id);
    if (it == tables.end()) it = tables.emplace(env.id, feature_table(params.lexicon, env)).first;
    const Eigen::VectorXd q = softmax(object_scores(it->second, t.desc, params));
    sums.add(task_metrics(q, t, env));
  }
  if (sums.n == 0) throw Error(Errc::empty_selection, "task filter matched no tasks");
  return sums.mean();
}

/// Parses "env=ID" or "cat=ID"; empty means all tasks.
inline TaskFilter parse_filter(const std::string& spec) {
  if (spec.empty()) return {};
  auto eq = spec.find('=');
  if (eq != std::string::npos) {
    const std::string key = spec.substr(0, eq), value = spec.substr(eq + 1);
    if (key == "env" && !value.empty()) return env_filter(value);
    if (key == "cat" && !value.empty()) return category_filter(value);
  }
  throw Error(Errc::schema_error, "filter must be env=ID or cat=ID, got '" + spec + "'");
}

// ---------------------------------------------------------------------------
// cross-validation

enum class CvMode { env, category };

inline std::string_view mode_name(CvMode m) { return m == CvMode::env ? "env" : "cat"; }

struct Fold {
  std::string group;                 // held-out env id or category
  std::vector<std::size_t> train;    // task indices
  std::vector<std::size_t> test;
};

namespace detail {

inline std::vector<Fold> split_by(const Corpus& corpus, CvMode mode) {
  std::map<std::string, std::string> group_of_env;
  std::set<std::string> groups;
  for (const auto& e : corpus.environments) {
    const std::string g = mode == CvMode::env ? e.id : e.category;
    group_of_env[e.id] = g;
    groups.insert(g);
  }
  if (groups.size() < 2)
    throw Error(Errc::too_few_groups, "need at least 2 " + std::string(mode == CvMode::env ? "environments" : "categories") +
                                          ", have " + std::to_string(groups.size()));
  std::vector<Fold> folds;
  for (const auto& g : groups) {
    Fold f;
    f.group = g;
    for (std::size_t i = 0; i < corpus.tasks.size(); ++i) {
      auto it = group_of_env.find(corpus.tasks[i].env_id);
      if (it == group_of_env.end()) throw Error(Errc::dangling_env_ref, corpus.tasks[i].env_id);
      (it->second == g ? f.test : f.train).push_back(i);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

}  // namespace detail

inline std::vector<Fold> split_leave_one_env(const Corpus& corpus) { return detail::split_by(corpus, CvMode::env); }
inline std::vector<Fold> split_leave_one_category(const Corpus& corpus) {
  return detail::split_by(corpus, CvMode::category);
}

struct FoldResult {
  std::string group;
  EvalMetrics metrics;
  FitReport fit;
};

struct CvReport {
  CvMode mode = CvMode::env;
  std::vector<FoldResult> folds;
  EvalMetrics aggregate;   // mean over every held-out task
  EvalMetrics fold_mean;   // unweighted mean of the fold metrics
};

inline FoldResult run_fold(const Lexicon& lex, const Corpus& corpus, const Fold& fold, const FitConfig& config) {
  FoldResult out;
  out.group = fold.group;
  std::vector<IdentificationTask> train;
  train.reserve(fold.train.size());
  for (auto i : fold.train) train.push_back(corpus.tasks[i]);
  try {
    auto fitted = fit(lex, train, corpus.environments, config);
    out.fit = std::move(fitted.report);
    MetricSums sums;
    std::map<std::string, Eigen::MatrixXd> tables;
    for (auto i : fold.test) {
      const auto& t = corpus.tasks[i];
      const Environment& env = corpus.env(t.env_id);
      auto it = tables.find(env.id);
      if (it == tables.end()) it = tables.emplace(env.id, feature_table(lex, env)).first;
      sums.add(task_metrics(softmax(object_scores(it->second, t.desc, fitted.params)), t, env));
    }
    out.metrics = sums.mean();
  } catch (const Error& e) {
    throw Error(e.code(), "fold '" + fold.group + "': " + e.detail());
  }
  return out;
}

/// Trains on each fold's complement and evaluates on the fold. Folds run in
/// parallel (up to `workers`, 0 = hardware concurrency); results keep fold order.
inline CvReport cross_validate(const Lexicon& lex, const Corpus& corpus, const FitConfig& config, CvMode mode,
                               unsigned workers = 0) {
  const auto folds = detail::split_by(corpus, mode);
  CvReport report;
  report.mode = mode;
  report.folds.resize(folds.size());
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(folds.size()));

  if (workers <= 1) {
    for (std::size_t i = 0; i < folds.size(); ++i) report.folds[i] = run_fold(lex, corpus, folds[i], config);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.push_back(std::async(std::launch::async, [&] {
        for (std::size_t i = next++; i < folds.size(); i = next++)
          report.folds[i] = run_fold(lex, corpus, folds[i], config);
      }));
    for (auto& f : pool) f.get();
  }

  MetricSums all;
  double t = 0.0, kl = 0.0, qtp = 0.0;
  std::size_t counted = 0;
  for (const auto& f : report.folds) {
    if (f.metrics.n_tasks == 0) continue;
    all.add(f.metrics);
    t += f.metrics.t_lklh;
    kl += f.metrics.kl;
    qtp += f.metrics.qtp;
    ++counted;
  }
  report.aggregate = all.mean();
  if (counted > 0) {
    const double d = static_cast<double>(counted);
    report.fold_mean = {t / d, kl / d, qtp / d, all.n};
  }
  return report;
}

// ---------------------------------------------------------------------------
// reports

struct ReportRow {
  std::string label;
  EvalMetrics metrics;
};

inline Json metrics_to_json(const EvalMetrics& m) {
  return {{"t_lklh", m.t_lklh}, {"kl", m.kl}, {"qtp", m.qtp}, {"n_tasks", m.n_tasks}};
}

inline std::string format_table(const std::vector<ReportRow>& rows, const std::vector<ReportRow>& footer) {
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.label.size());
  for (const auto& r : footer) width = std::max(width, r.label.size());
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-*s | %7s | %6s | %6s | %6s\n", static_cast<int>(width), "group", "t_lklh", "KL",
                "qTp", "tasks");
  out << buf << std::string(width, '-') << "-+---------+--------+--------+-------\n";
  auto line = [&](const ReportRow& r) {
    std::snprintf(buf, sizeof buf, "%-*s | %6.1f%% | %6.3f | %6.3f | %6zu\n", static_cast<int>(width), r.label.c_str(),
                  100.0 * r.metrics.t_lklh, r.metrics.kl, r.metrics.qtp, r.metrics.n_tasks);
    out << buf;
  };
  for (const auto& r : rows) line(r);
  if (!footer.empty()) out << std::string(width, '-') << "-+---------+--------+--------+-------\n";
  for (const auto& r : footer) line(r);
  return out.str();
}

inline std::string cv_table(const CvReport& r) {
  std::vector<ReportRow> rows;
  for (const auto& f : r.folds) rows.push_back({f.group, f.metrics});
  return format_table(rows, {{"avg", r.aggregate}, {"fold-mean", r.fold_mean}});
}

inline Json cv_to_json(const CvReport& r) {
  Json folds = Json::array();
  for (const auto& f : r.folds) {
    Json jf = metrics_to_json(f.metrics);
    jf["group"] = f.group;
    jf["iterations"] = f.fit.iterations;
    jf["converged"] = f.fit.converged;
    jf["train_loss"] = f.fit.final_loss;
    folds.push_back(std::move(jf));
  }
  return {{"mode", std::string(mode_name(r.mode))},
          {"folds", std::move(folds)},
          {"aggregate", metrics_to_json(r.aggregate)},
          {"fold_mean", metrics_to_json(r.fold_mean)}};
}

/// Table-I-shaped evaluation: one row per environment, one per category, overall average.
struct EvalReport {
  std::vector<ReportRow> environments;
  std::vector<ReportRow> categories;
  EvalMetrics overall;
};

inline EvalReport evaluate_report(const ModelParams& params, const Corpus& corpus, const TaskFilter& filter = {}) {
  EvalReport rep;
  rep.overall = evaluate(params, corpus, filter);
  for (const auto& e : corpus.environments) {
    const std::string id = e.id;
    auto f = [&](const IdentificationTask& t, const Environment& env) {
      return t.env_id == id && (!filter || filter(t, env));
    };
    bool any = false;
    for (const auto& t : corpus.tasks)
      if (f(t, e)) any = true;
    if (any) rep.environments.push_back({id, evaluate(params, corpus, f)});
  }
  for (const auto& [cat, ids] : corpus.categories()) {
    auto f = [&, cat = cat](const IdentificationTask& t, const Environment& env) {
      return env.category == cat && (!filter || filter(t, env));
    };
    bool any = false;
    for (const auto& t : corpus.tasks)
      if (f(t, corpus.env(t.env_id))) any = true;
    if (any) rep.categories.push_back({cat, evaluate(params, corpus, f)});
  }
  return rep;
}

inline std::string eval_table(const EvalReport& r) {
  std::vector<ReportRow> rows = r.environments;
  rows.insert(rows.end(), r.categories.begin(), r.categories.end());
  return format_table(rows, {{"avg", r.overall}});
}

inline Json eval_to_json(const EvalReport& r) {
  Json envs = Json::array(), cats = Json::array();
  for (const auto& row : r.environments) {
    Json j = metrics_to_json(row.metrics);
    j["group"] = row.label;
    envs.push_back(std::move(j));
  }
  for (const auto& row : r.categories) {
    Json j = metrics_to_json(row.metrics);
    j["group"] = row.label;
    cats.push_back(std::move(j));
  }
  return {{"environments", std::move(envs)}, {"categories", std::move(cats)}, {"overall", metrics_to_json(r.overall)}};
}

}  // namespace refid
