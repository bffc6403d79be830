#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "refid/errors.hpp"
#include "refid/model.hpp"
#include "refid/optim.hpp"
#include "refid/random.hpp"

namespace refid {

/// Probability given to every object the identifier did not select.
inline constexpr double kUnselectedMass = 0.005;

/// One summand of the training loss: an environment, a description and the
/// identifier's target distribution over the environment's objects.
struct IdentificationTask {
  std::string env_id;
  Description desc;
  std::vector<std::string> selected;  // object ids, environment order
  Eigen::VectorXd target;

  bool operator==(const IdentificationTask& o) const {
    return env_id == o.env_id && desc == o.desc && selected == o.selected && target.size() == o.target.size() &&
           target == o.target;
  }
};

/// Selected objects share what the unselected ones leave of the unit mass.
inline Eigen::VectorXd target_distribution(std::span<const std::size_t> selected, std::size_t env_size) {
  if (selected.empty()) throw Error(Errc::empty_selection, "no object selected");
  std::vector<bool> mark(env_size, false);
  std::size_t n_sel = 0;
  for (std::size_t i : selected) {
    if (i >= env_size) throw Error(Errc::schema_error, "selected index " + std::to_string(i) + " out of range");
    if (!mark[i]) ++n_sel;
    mark[i] = true;
  }
  const std::size_t n_unsel = env_size - n_sel;
  const double rest = 1.0 - kUnselectedMass * static_cast<double>(n_unsel);
  if (!(rest > 0.0))
    throw Error(Errc::mass_overflow, std::to_string(n_unsel) + " unselected objects exhaust the probability mass");
  const double each = rest / static_cast<double>(n_sel);
  Eigen::VectorXd p(static_cast<Eigen::Index>(env_size));
  for (std::size_t i = 0; i < env_size; ++i) p(static_cast<Eigen::Index>(i)) = mark[i] ? each : kUnselectedMass;
  return p;
}

inline Eigen::VectorXd target_distribution(std::span<const std::string> selected, const Environment& env) {
  std::vector<std::size_t> idx;
  for (const auto& id : selected) {
    auto i = env.index_of(id);
    if (!i) throw Error(Errc::schema_error, "selected object '" + id + "' not in environment '" + env.id + "'");
    idx.push_back(*i);
  }
  return target_distribution(std::span<const std::size_t>(idx), env.size());
}

/// Builds a task, ordering the selected ids by environment order.
inline IdentificationTask make_task(const Environment& env, Description desc, std::span<const std::size_t> selected) {
  IdentificationTask t;
  t.env_id = env.id;
  t.desc = std::move(desc);
  t.target = target_distribution(selected, env.size());
  std::vector<std::size_t> sorted(selected.begin(), selected.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (std::size_t i : sorted) t.selected.push_back(env.objects[i].id);
  return t;
}

/// KL training objective sum_tasks KL(p || q) + ridge * |beta|^2 with its
/// analytic Jacobian sum Phi (q - p) + 2 ridge beta and Hessian
/// sum Phi [diag(q) - q q^T] Phi^T + 2 ridge I.
class KlObjective {
 public:
  KlObjective(const Lexicon& lex, std::span<const IdentificationTask> tasks, std::span<const Environment> envs,
              double ridge = 0.0)
      : dim_(static_cast<Eigen::Index>(lex.total_dim())), ridge_(ridge) {
    std::map<std::string, std::size_t> env_index;
    for (std::size_t i = 0; i < envs.size(); ++i) env_index.emplace(envs[i].id, i);
    std::map<std::size_t, Eigen::MatrixXd> tables;

    terms_.reserve(tasks.size());
    for (const auto& task : tasks) {
      auto it = env_index.find(task.env_id);
      if (it == env_index.end()) throw Error(Errc::unknown_environment, task.env_id);
      const Environment& env = envs[it->second];
      check_env(env);
      if (static_cast<std::size_t>(task.target.size()) != env.size())
        throw Error(Errc::dimension_mismatch, "target for env '" + env.id + "' has " +
                                                  std::to_string(task.target.size()) + " entries, env has " +
                                                  std::to_string(env.size()));
      auto tab = tables.find(it->second);
      if (tab == tables.end()) tab = tables.emplace(it->second, feature_table(lex, env)).first;

      Term term;
      Eigen::Index rows = 0;
      for (std::size_t s : task.desc) {
        if (s >= lex.size()) throw Error(Errc::dimension_mismatch, "symbol index outside lexicon");
        rows += static_cast<Eigen::Index>(lex.dim(s));
      }
      term.phi.resize(rows, static_cast<Eigen::Index>(env.size()));
      term.rows.reserve(static_cast<std::size_t>(rows));
      Eigen::Index r = 0;
      for (std::size_t s : task.desc) {
        const auto off = static_cast<Eigen::Index>(lex.offset(s));
        const auto d = static_cast<Eigen::Index>(lex.dim(s));
        term.phi.middleRows(r, d) = tab->second.middleRows(off, d);
        for (Eigen::Index k = 0; k < d; ++k) term.rows.push_back(off + k);
        r += d;
      }
      term.p = task.target;
      term.neg_entropy = 0.0;
      for (double pi : term.p)
        if (pi > 0.0) term.neg_entropy += pi * std::log(pi);
      terms_.push_back(std::move(term));
    }
  }

  Eigen::Index dim() const noexcept { return dim_; }
  std::size_t num_terms() const noexcept { return terms_.size(); }
  double ridge() const noexcept { return ridge_; }

  double value(const Eigen::VectorXd& beta) const {
    check(beta);
    double total = 0.0;
    for (const auto& t : terms_) total += kl_term(t, beta, nullptr);
    return total + ridge_ * beta.squaredNorm();
  }

  double value_and_gradient(const Eigen::VectorXd& beta, Eigen::VectorXd& grad) const {
    check(beta);
    grad = 2.0 * ridge_ * beta;
    double total = 0.0;
    Eigen::VectorXd q;
    for (const auto& t : terms_) {
      total += kl_term(t, beta, &q);
      const Eigen::VectorXd local = t.phi * (q - t.p);
      for (std::size_t k = 0; k < t.rows.size(); ++k) grad(t.rows[k]) += local(static_cast<Eigen::Index>(k));
    }
    return total + ridge_ * beta.squaredNorm();
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& beta) const {
    Eigen::VectorXd g;
    value_and_gradient(beta, g);
    return g;
  }

  Eigen::MatrixXd hessian(const Eigen::VectorXd& beta) const {
    check(beta);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim_, dim_);
    Eigen::VectorXd q;
    for (const auto& t : terms_) {
      if (t.rows.empty()) continue;
      kl_term(t, beta, &q);
      const Eigen::VectorXd phi_q = t.phi * q;
      const Eigen::MatrixXd local =
          t.phi * q.asDiagonal() * t.phi.transpose() - phi_q * phi_q.transpose();
      for (std::size_t a = 0; a < t.rows.size(); ++a)
        for (std::size_t b = 0; b < t.rows.size(); ++b)
          h(t.rows[a], t.rows[b]) += local(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
    Eigen::MatrixXd sym = 0.5 * (h + h.transpose());
    sym.diagonal().array() += 2.0 * ridge_;
    return sym;
  }

  /// Model posterior q for term i.
  Eigen::VectorXd posterior_of(std::size_t i, const Eigen::VectorXd& beta) const {
    Eigen::VectorXd q;
    kl_term(terms_.at(i), beta, &q);
    return q;
  }

 private:
  struct Term {
    Eigen::MatrixXd phi;              // rows: the description's parameter rows; cols: objects
    std::vector<Eigen::Index> rows;   // global layout index of each phi row
    Eigen::VectorXd p;
    double neg_entropy = 0.0;         // sum p log p
  };

  void check(const Eigen::VectorXd& beta) const {
    if (beta.size() != dim_)
      throw Error(Errc::dimension_mismatch, "beta has " + std::to_string(beta.size()) + " entries, expected " +
                                                std::to_string(dim_));
  }

  static Eigen::VectorXd gather(const Term& t, const Eigen::VectorXd& beta) {
    Eigen::VectorXd b(static_cast<Eigen::Index>(t.rows.size()));
    for (std::size_t k = 0; k < t.rows.size(); ++k) b(static_cast<Eigen::Index>(k)) = beta(t.rows[k]);
    return b;
  }

  // KL(p || q) for one term; optionally returns q.
  static double kl_term(const Term& t, const Eigen::VectorXd& beta, Eigen::VectorXd* q_out) {
    Eigen::VectorXd scores = t.rows.empty() ? Eigen::VectorXd::Zero(t.phi.cols())
                                            : Eigen::VectorXd(t.phi.transpose() * gather(t, beta));
    const double lse = log_sum_exp(scores);
    double cross = 0.0;  // sum p log q
    for (Eigen::Index i = 0; i < scores.size(); ++i)
      if (t.p(i) > 0.0) cross += t.p(i) * (scores(i) - lse);
    if (q_out) *q_out = (scores.array() - lse).exp().matrix();
    return t.neg_entropy - cross;
  }

  std::vector<Term> terms_;
  Eigen::Index dim_;
  double ridge_;
};

inline double kl_loss(const ModelParams& params, std::span<const IdentificationTask> tasks,
                      std::span<const Environment> envs, double ridge = 0.0) {
  params.check_layout();
  return KlObjective(params.lexicon, tasks, envs, ridge).value(params.beta);
}

inline Eigen::VectorXd loss_jacobian(const ModelParams& params, std::span<const IdentificationTask> tasks,
                                     std::span<const Environment> envs, double ridge = 0.0) {
  params.check_layout();
  return KlObjective(params.lexicon, tasks, envs, ridge).gradient(params.beta);
}

inline Eigen::MatrixXd loss_hessian(const ModelParams& params, std::span<const IdentificationTask> tasks,
                                    std::span<const Environment> envs, double ridge = 0.0) {
  params.check_layout();
  return KlObjective(params.lexicon, tasks, envs, ridge).hessian(params.beta);
}

enum class FitMethod { bfgs, newton };
enum class FitInit { zeros, seeded_gaussian };

inline std::string_view method_name(FitMethod m) { return m == FitMethod::bfgs ? "bfgs" : "newton"; }

struct FitConfig {
  FitMethod method = FitMethod::bfgs;
  double grad_tol = 1e-6;
  int max_iters = 500;
  double ridge = 1e-6;
  FitInit init = FitInit::zeros;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(grad_tol > 0.0)) throw Error(Errc::schema_error, "grad_tol must be positive");
    if (max_iters < 1) throw Error(Errc::schema_error, "max_iters must be at least 1");
    if (!(ridge >= 0.0)) throw Error(Errc::schema_error, "ridge must be non-negative");
  }
};

struct FitReport {
  FitMethod method = FitMethod::bfgs;
  int iterations = 0;
  int evaluations = 0;
  double final_loss = 0.0;
  double grad_norm = 0.0;  // infinity norm
  bool converged = false;
  std::string status;
  std::vector<double> loss_history;
};

struct FitResult {
  ModelParams params;
  FitReport report;
};

inline FitResult fit(const Lexicon& lex, std::span<const IdentificationTask> tasks, std::span<const Environment> envs,
                     const FitConfig& config = {}) {
  config.validate();
  if (tasks.empty()) throw Error(Errc::empty_selection, "no training tasks");
  const KlObjective objective(lex, tasks, envs, config.ridge);

  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(objective.dim());
  if (config.init == FitInit::seeded_gaussian) {
    Rng rng(config.seed);
    for (auto& v : x0) v = rng.normal(0.0, 0.01);
  }

  optim::Options opt;
  opt.grad_tol = config.grad_tol;
  opt.max_iters = config.max_iters;
  auto fg = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) { return objective.value_and_gradient(x, g); };
  optim::Result res = config.method == FitMethod::bfgs
                          ? optim::bfgs(fg, x0, opt)
                          : optim::newton(fg, [&](const Eigen::VectorXd& x) { return objective.hessian(x); }, x0, opt);

  FitResult out{ModelParams{lex, res.x}, {}};
  out.report.method = config.method;
  out.report.iterations = res.iterations;
  out.report.evaluations = res.evaluations;
  out.report.final_loss = res.f;
  out.report.grad_norm = res.grad_inf;
  out.report.converged = res.converged;
  out.report.status = res.status;
  out.report.loss_history = std::move(res.history);
  return out;
}

/// Central-difference gradient of f at x.
template <class F>
Eigen::VectorXd numeric_gradient(F&& f, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x(i);
    xp(i) = xi + h;
    const double fp = f(xp);
    xp(i) = xi - h;
    const double fm = f(xp);
    xp(i) = xi;
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// max_i |analytic_i - numeric_i| / max(1e-8, |analytic_i|)
inline double max_relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double denom = std::max(1e-8, std::abs(analytic(i)));
    worst = std::max(worst, std::abs(analytic(i) - numeric(i)) / denom);
  }
  return worst;
}

/// Compares a supplied Jacobian against central differences of f.
template <class F>
double gradient_check(F&& f, const Eigen::VectorXd& analytic, const Eigen::VectorXd& x, double h) {
  if (!(h > 0.0)) throw Error(Errc::schema_error, "finite-difference step must be positive");
  return max_relative_error(analytic, numeric_gradient(f, x, h));
}

inline double gradient_check(const ModelParams& params, std::span<const IdentificationTask> tasks,
                             std::span<const Environment> envs, double h, double ridge = 0.0) {
  const KlObjective obj(params.lexicon, tasks, envs, ridge);
  return gradient_check([&](const Eigen::VectorXd& b) { return obj.value(b); }, obj.gradient(params.beta),
                        params.beta, h);
}

}  // namespace refid
