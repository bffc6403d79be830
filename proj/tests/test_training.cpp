#include <gtest/gtest.h>

#include <cmath>

#include "refid/model_io.hpp"
#include "refid/synth.hpp"
#include "refid/training.hpp"
#include "test_util.hpp"

using namespace refid;
using refid::testing::make_env;
using refid::testing::random_instance;
using refid::testing::raw_x;

namespace {

// KL(p || q) written out independently of the library
double kl_oracle(const std::vector<double>& p, const std::vector<double>& q) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) s += static_cast<long double>(p[i]) * std::log(static_cast<long double>(p[i]) / q[i]);
  return static_cast<double>(s);
}

Eigen::MatrixXd fd_hessian(const KlObjective& obj, const Eigen::VectorXd& x, double h) {
  const auto n = x.size();
  Eigen::MatrixXd out(n, n);
  Eigen::VectorXd xp = x;
  for (Eigen::Index j = 0; j < n; ++j) {
    xp(j) = x(j) + h;
    const Eigen::VectorXd gp = obj.gradient(xp);
    xp(j) = x(j) - h;
    const Eigen::VectorXd gm = obj.gradient(xp);
    xp(j) = x(j);
    out.col(j) = (gp - gm) / (2.0 * h);
  }
  return out;
}

std::size_t sym(const char* name) { return *default_lexicon().find(name); }

}  // namespace

TEST(Target, Examples) {
  const std::vector<std::size_t> a{0};
  const Eigen::VectorXd p = target_distribution(a, 4);
  EXPECT_NEAR(p(0), 0.985, 1e-15);
  for (int i = 1; i < 4; ++i) EXPECT_EQ(p(i), 0.005);

  const std::vector<std::size_t> all{0, 1, 2, 3, 4};
  for (double v : target_distribution(all, 5)) EXPECT_DOUBLE_EQ(v, 0.2);

  try {
    target_distribution(std::span<const std::size_t>(), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_selection);
  }
}

TEST(Target, MassOverflowAndRange) {
  const std::vector<std::size_t> one{0};
  EXPECT_NO_THROW(target_distribution(one, 200));  // 199 * 0.005 = 0.995
  try {
    target_distribution(one, 201);  // 200 * 0.005 = 1
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::mass_overflow);
  }
  const std::vector<std::size_t> bad{5};
  EXPECT_THROW(target_distribution(bad, 5), Error);
}

TEST(Target, ExhaustiveSizes) {
  for (std::size_t n = 2; n <= 30; ++n)
    for (std::size_t k = 1; k <= n; ++k) {
      std::vector<std::size_t> sel;
      for (std::size_t i = 0; i < k; ++i) sel.push_back((i * 7) % n);
      std::sort(sel.begin(), sel.end());
      sel.erase(std::unique(sel.begin(), sel.end()), sel.end());
      const Eigen::VectorXd p = target_distribution(sel, n);
      ASSERT_NEAR(p.sum(), 1.0, 1e-12);
      for (std::size_t i = 0; i < n; ++i)
        if (!std::binary_search(sel.begin(), sel.end(), i)) ASSERT_EQ(p(static_cast<Eigen::Index>(i)), 0.005);
    }
}

TEST(Target, ByIdAndMakeTask) {
  const Environment env = make_env("e", {raw_x(0.1), raw_x(0.5), raw_x(0.9)});
  const std::vector<std::string> ids{"o3", "o1"};
  const Eigen::VectorXd p = target_distribution(ids, env);
  EXPECT_DOUBLE_EQ(p(0), 0.4975);
  EXPECT_EQ(p(1), 0.005);
  const std::vector<std::string> missing{"o9"};
  EXPECT_THROW(target_distribution(missing, env), Error);

  const std::vector<std::size_t> sel{2, 0, 2};
  const auto t = make_task(env, Description{}, sel);
  EXPECT_EQ(t.selected, (std::vector<std::string>{"o1", "o3"}));
}

TEST(KlLoss, UniformExample) {
  const Environment env = make_env("e", {raw_x(0.1), raw_x(0.3), raw_x(0.6), raw_x(0.9)});
  const std::vector<std::size_t> sel{0};
  const std::vector<IdentificationTask> tasks{make_task(env, Description({sym("left")}), sel)};
  const std::vector<Environment> envs{env};
  const double expected = kl_oracle({0.985, 0.005, 0.005, 0.005}, {0.25, 0.25, 0.25, 0.25});
  EXPECT_NEAR(expected, 1.2919, 1e-4);
  EXPECT_NEAR(kl_loss(ModelParams::zeros(default_lexicon()), tasks, envs), expected, 1e-12);
}

TEST(KlLoss, ZeroWhenTargetsMatchPosterior) {
  // all-selected targets are uniform, as is q at beta = 0
  const Environment env = make_env("e", {raw_x(0.1), raw_x(0.3), raw_x(0.6)});
  const std::vector<std::size_t> all{0, 1, 2};
  const std::vector<IdentificationTask> tasks{make_task(env, Description({sym("red")}), all)};
  const std::vector<Environment> envs{env};
  const ModelParams zero = ModelParams::zeros(default_lexicon());
  EXPECT_NEAR(kl_loss(zero, tasks, envs), 0.0, 1e-15);
  EXPECT_LT(loss_jacobian(zero, tasks, envs).lpNorm<Eigen::Infinity>(), 1e-15);
}

TEST(KlLoss, ErrorsAndRidge) {
  const Environment env = make_env("e", {raw_x(0.1), raw_x(0.3)});
  const std::vector<std::size_t> sel{0};
  std::vector<IdentificationTask> tasks{make_task(env, Description({sym("left")}), sel)};
  const std::vector<Environment> envs{env};
  ModelParams p = ModelParams::zeros(default_lexicon());
  p.beta.setConstant(0.5);
  const double base = kl_loss(p, tasks, envs);
  EXPECT_NEAR(kl_loss(p, tasks, envs, 0.1) - base, 0.1 * p.beta.squaredNorm(), 1e-12);

  tasks[0].env_id = "nope";
  try {
    kl_loss(p, tasks, envs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unknown_environment);
  }
  tasks[0].env_id = "e";
  tasks[0].target = Eigen::VectorXd::Constant(3, 1.0 / 3);
  try {
    kl_loss(p, tasks, envs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::dimension_mismatch);
  }
}

TEST(Jacobian, HandComputedTwoObjects) {
  // x = 0.2, 0.6: mean 0.4, std 0.2, z = -1, +1; q = (0.5, 0.5), p = (0.995, 0.005)
  const Environment env = make_env("e", {raw_x(0.2), raw_x(0.6)});
  const std::vector<std::size_t> sel{0};
  const std::vector<IdentificationTask> tasks{make_task(env, Description({sym("left")}), sel)};
  const std::vector<Environment> envs{env};
  Eigen::VectorXd j = loss_jacobian(ModelParams::zeros(default_lexicon()), tasks, envs);
  const auto off = static_cast<Eigen::Index>(default_lexicon().offset(sym("left")));
  EXPECT_NEAR(j(off), 0.2 * -0.495 + 0.6 * 0.495, 1e-15);
  EXPECT_NEAR(j(off + 1), -1.0 * -0.495 + 1.0 * 0.495, 1e-15);
  j(off) = j(off + 1) = 0.0;
  EXPECT_EQ(j.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(Jacobian, GradientCheck) {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    auto inst = random_instance(rng, 3, 5, 6, 0.1);
    EXPECT_LT(gradient_check(inst.params, inst.tasks, inst.envs, 1e-5), 1e-4);
    EXPECT_LT(gradient_check(inst.params, inst.tasks, inst.envs, 1e-5, 0.01), 1e-4);
    inst.params.beta.setZero();
    EXPECT_LT(gradient_check(inst.params, inst.tasks, inst.envs, 1e-5), 1e-4);
  }
}

TEST(Jacobian, CheckDetectsCorruption) {
  Rng rng(22);
  const auto inst = random_instance(rng, 3, 5, 6, 0.1);
  const KlObjective obj(inst.params.lexicon, inst.tasks, inst.envs);
  Eigen::VectorXd bad = obj.gradient(inst.params.beta);
  bad(static_cast<Eigen::Index>(default_lexicon().offset(sym("left")))) += 1.0;
  const double err =
      gradient_check([&](const Eigen::VectorXd& b) { return obj.value(b); }, bad, inst.params.beta, 1e-5);
  EXPECT_GE(err, 0.5);
  EXPECT_THROW(gradient_check(inst.params, inst.tasks, inst.envs, 0.0), Error);
}

TEST(Hessian, MatchesFiniteDifferencesAndIsPsd) {
  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const auto inst = random_instance(rng, 3, 5, 6, 0.1);
    const KlObjective obj(inst.params.lexicon, inst.tasks, inst.envs);
    const Eigen::MatrixXd h = obj.hessian(inst.params.beta);
    const Eigen::MatrixXd fd = fd_hessian(obj, inst.params.beta, 1e-5);
    EXPECT_LE((h - fd).cwiseAbs().maxCoeff() / h.cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_EQ((h - h.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h).eigenvalues().minCoeff(), -1e-8);
  }
}

TEST(Hessian, SingleObjectEnvironmentsGiveRidgeOnly) {
  const Environment env = make_env("solo", {raw_x(0.4)});
  const std::vector<std::size_t> sel{0};
  const std::vector<IdentificationTask> tasks{make_task(env, Description({sym("left"), sym("red")}), sel),
                                              make_task(env, Description({sym("white")}), sel)};
  const std::vector<Environment> envs{env};
  ModelParams p = ModelParams::zeros(default_lexicon());
  p.beta.setConstant(0.7);
  const double ridge = 0.25;
  const Eigen::MatrixXd h = loss_hessian(p, tasks, envs, ridge);
  EXPECT_LT((h - 2.0 * ridge * Eigen::MatrixXd::Identity(h.rows(), h.cols())).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Loss, MidpointConvexity) {
  Rng rng(24);
  const auto inst = random_instance(rng, 3, 6, 8, 0.5);
  const KlObjective obj(inst.params.lexicon, inst.tasks, inst.envs, 1e-3);
  for (int probe = 0; probe < 200; ++probe) {
    Eigen::VectorXd a(obj.dim()), b(obj.dim());
    for (auto& v : a) v = rng.normal(0.0, 2.0);
    for (auto& v : b) v = rng.normal(0.0, 2.0);
    EXPECT_LE(obj.value(0.5 * (a + b)), 0.5 * (obj.value(a) + obj.value(b)) + 1e-9);
  }
}

TEST(Loss, KlNonNegative) {
  Rng rng(25);
  const auto inst = random_instance(rng, 4, 5, 10, 1.0);
  for (const auto& t : inst.tasks) {
    const std::vector<IdentificationTask> one{t};
    EXPECT_GE(kl_loss(inst.params, one, inst.envs), 0.0);
  }
}

TEST(Fit, StartsAtOptimumWhenTargetsAreUniform) {
  const Environment env = make_env("e", {raw_x(0.1), raw_x(0.3), raw_x(0.6)});
  const std::vector<std::size_t> all{0, 1, 2};
  const std::vector<IdentificationTask> tasks{make_task(env, Description({sym("left")}), all)};
  const std::vector<Environment> envs{env};
  const auto r = fit(default_lexicon(), tasks, envs);
  EXPECT_TRUE(r.report.converged);
  EXPECT_EQ(r.report.iterations, 0);
  EXPECT_EQ(r.params.beta.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(Fit, EmptyTasksAndBadConfig) {
  const std::vector<Environment> envs{make_env("e", {raw_x(0.1)})};
  try {
    fit(default_lexicon(), std::span<const IdentificationTask>(), envs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_selection);
  }
  FitConfig bad;
  bad.grad_tol = 0.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = {};
  bad.max_iters = 0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Fit, NonFiniteFeaturesSignalled) {
  RawFeatures broken = raw_x(0.2);
  broken.x_pos = std::nan("");
  const Environment env = make_env("e", {broken, raw_x(0.5)});
  const std::vector<std::size_t> sel{0};
  const std::vector<IdentificationTask> tasks{make_task(env, Description({sym("left")}), sel)};
  const std::vector<Environment> envs{env};
  try {
    fit(default_lexicon(), tasks, envs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::non_finite_loss);
  }
}

class FitOnSynthetic : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    synth::CorpusSpec spec;
    spec.env_counts = {3, 1, 1, 1, 1};
    spec.replicas = 3;
    spec.seed = 99;
    corpus_ = new Corpus(synth::generate_corpus(spec).corpus);
  }
  static void TearDownTestSuite() { delete corpus_; }
  static Corpus* corpus_;
};
Corpus* FitOnSynthetic::corpus_ = nullptr;

TEST_F(FitOnSynthetic, BfgsConvergesMonotonically) {
  const auto r = fit(default_lexicon(), corpus_->tasks, corpus_->environments);
  EXPECT_TRUE(r.report.converged) << r.report.status;
  EXPECT_LE(r.report.grad_norm, 1e-6);
  const KlObjective obj(default_lexicon(), corpus_->tasks, corpus_->environments, 1e-6);
  EXPECT_LE(obj.gradient(r.params.beta).lpNorm<Eigen::Infinity>(), 1e-6);
  const auto& h = r.report.loss_history;
  ASSERT_GE(h.size(), 2u);
  for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LE(h[i], h[i - 1] + optim::rounding_slack(h[i - 1]));
}

TEST_F(FitOnSynthetic, NewtonAgreesWithBfgs) {
  FitConfig cfg;
  const auto b = fit(default_lexicon(), corpus_->tasks, corpus_->environments, cfg);
  cfg.method = FitMethod::newton;
  const auto n = fit(default_lexicon(), corpus_->tasks, corpus_->environments, cfg);
  ASSERT_TRUE(n.report.converged);
  EXPECT_NEAR(b.report.final_loss, n.report.final_loss, 1e-6);
  EXPECT_LE(n.report.grad_norm, 1e-6);
}

TEST_F(FitOnSynthetic, GaussianInitIsSeeded) {
  FitConfig cfg;
  cfg.init = FitInit::seeded_gaussian;
  cfg.seed = 5;
  const auto a = fit(default_lexicon(), corpus_->tasks, corpus_->environments, cfg);
  const auto b = fit(default_lexicon(), corpus_->tasks, corpus_->environments, cfg);
  EXPECT_EQ(a.params.beta, b.params.beta);
  const auto z = fit(default_lexicon(), corpus_->tasks, corpus_->environments);
  EXPECT_NEAR(a.report.final_loss, z.report.final_loss, 1e-6);
}

TEST(ModelFile, RoundTripIsBitExact) {
  Rng rng(26);
  ModelFile m;
  m.params = ModelParams::zeros(default_lexicon());
  for (auto& b : m.params.beta) b = rng.normal(0.0, 3.0) * std::pow(10.0, rng.uniform_int(-12, 12));
  m.params.beta(0) = 0.1;
  m.params.beta(1) = 1.0 / 3.0;
  m.ridge = 1e-6;
  m.fit.iterations = 12;
  m.fit.converged = true;
  const auto dir = refid::testing::scratch_dir("modelfile");
  save_model(m, dir / "m.json");
  const ModelFile back = load_model(dir / "m.json");
  ASSERT_EQ(back.params.beta.size(), m.params.beta.size());
  EXPECT_EQ(std::memcmp(back.params.beta.data(), m.params.beta.data(), sizeof(double) * m.params.beta.size()), 0);
  EXPECT_EQ(back.params.lexicon, m.params.lexicon);
  EXPECT_EQ(back.ridge, m.ridge);
  EXPECT_EQ(back.fit.iterations, 12);
  EXPECT_TRUE(back.fit.converged);
  EXPECT_EQ(dump_model(back), dump_model(m));
}

TEST(ModelFile, RejectsBadFiles) {
  ModelFile m{ModelParams::zeros(default_lexicon()), 0.0, {}};
  Json j = model_to_json(m);
  j["beta"].erase(0);
  try {
    model_from_document(JsonDocument(j.dump(1), "m.json"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::dimension_mismatch);
    EXPECT_NE(std::string(e.what()).find("m.json"), std::string::npos);
  }
  j = model_to_json(m);
  j["feature_config_version"] = 99;
  EXPECT_THROW(model_from_document(JsonDocument(j.dump(), "m.json")), Error);
  j = model_to_json(m);
  j["lexicon"][0]["channels"][0] = "smell";
  EXPECT_THROW(model_from_document(JsonDocument(j.dump(), "m.json")), Error);
  EXPECT_THROW(model_from_document(JsonDocument("{not json", "m.json")), Error);
}
