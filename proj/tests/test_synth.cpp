#include <gtest/gtest.h>

#include <set>

#include "refid/raster.hpp"
#include "refid/synth.hpp"
#include "test_util.hpp"

using namespace refid;
using namespace refid::synth;

namespace {

std::size_t sym(const char* n) { return *default_lexicon().find(n); }

}  // namespace

TEST(Generate, CategoryOneIsThreeDistinctColorsInARow) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto g = generate_environment(1, seed);
    ASSERT_EQ(g.blocks.size(), 3u);
    std::set<NamedColor> colors;
    for (const auto& b : g.blocks) colors.insert(b.color);
    EXPECT_EQ(colors.size(), 3u);
    for (const auto& b : g.blocks) EXPECT_LE(std::abs(b.cy - g.blocks[0].cy), 0.05);
  }
}

TEST(Generate, ObjectCountsPerCategory) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    for (int c = 1; c <= 4; ++c) {
      const auto n = generate_environment(c, seed).env.size();
      EXPECT_GE(n, 3u);
      EXPECT_LE(n, 8u);
    }
    EXPECT_GE(generate_environment(5, seed).env.size(), 12u);
  }
}

TEST(Generate, CategoryTwoSharesOneColor) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = generate_environment(2, seed);
    for (const auto& b : g.blocks) EXPECT_EQ(b.color, g.blocks[0].color);
  }
}

TEST(Generate, Deterministic) {
  for (int c = 1; c <= 5; ++c) {
    const auto a = generate_environment(c, 1234);
    const auto b = generate_environment(c, 1234);
    EXPECT_EQ(a.env, b.env);
    EXPECT_EQ(a.truth.grades, b.truth.grades);
  }
  EXPECT_NE(generate_environment(5, 1).env, generate_environment(5, 2).env);
}

TEST(Generate, BlocksInsideSceneWithLimitedOverlap) {
  GeneratorKnobs knobs;
  knobs.max_overlap = 0.1;
  for (std::uint64_t seed = 0; seed < 40; ++seed)
    for (int c = 1; c <= 5; ++c) {
      const auto g = generate_environment(c, seed, knobs);
      for (std::size_t i = 0; i < g.blocks.size(); ++i) {
        const auto& b = g.blocks[i];
        EXPECT_GE(b.x0(), 0.0);
        EXPECT_LE(b.x1(), 1.0);
        EXPECT_GE(b.y0(), 0.0);
        EXPECT_LE(b.y1(), 1.0);
        EXPECT_GT(b.w, 0.0);
        EXPECT_LE(b.w, 1.0);
        for (std::size_t j = i + 1; j < g.blocks.size(); ++j)
          EXPECT_LE(overlap_area(b, g.blocks[j]), 0.1 * std::min(b.area(), g.blocks[j].area()) + 1e-12);
      }
    }
}

TEST(Generate, PlacementFailureOnImpossibleKnobs) {
  GeneratorKnobs knobs;
  knobs.margin = 0.49;
  knobs.max_attempts = 50;
  try {
    generate_environment(3, 1, knobs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::placement_failure);
  }
  EXPECT_THROW(generate_environment(6, 1), Error);
}

TEST(Oracle, GradesFiniteAndBounded) {
  for (int c = 1; c <= 5; ++c) {
    const auto g = generate_environment(c, 77);
    EXPECT_TRUE(g.truth.grades.allFinite());
    EXPECT_GE(g.truth.grades.minCoeff(), 0.0);
    EXPECT_LE(g.truth.grades.maxCoeff(), 1.0);
  }
}

TEST(Oracle, LeftGradeIncreasesWhenBlockMovesLeft) {
  const Lexicon lex = default_lexicon();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto g = generate_environment(4, seed);
    auto raws = g.env.raw_features();
    const double before = membership_grades(lex, raws).grades(0, static_cast<Eigen::Index>(sym("left")));
    raws[0].x_pos -= 0.01;
    const double after = membership_grades(lex, raws).grades(0, static_cast<Eigen::Index>(sym("left")));
    EXPECT_GT(after, before);
  }
}

TEST(Oracle, SelectExamples) {
  const Lexicon lex = default_lexicon();
  // empty description selects everything
  const auto g = generate_environment(4, 3);
  EXPECT_EQ(oracle_select(g.truth, Description{}).size(), g.env.size());

  // "left" on three side-by-side blocks picks the leftmost one
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto row = generate_environment(1, seed);
    std::size_t leftmost = 0;
    for (std::size_t i = 1; i < row.blocks.size(); ++i)
      if (row.blocks[i].cx < row.blocks[leftmost].cx) leftmost = i;
    bool others_right = true;
    for (std::size_t i = 0; i < row.blocks.size(); ++i)
      if (i != leftmost && row.blocks[i].cx <= 0.5) others_right = false;
    if (!others_right) continue;
    EXPECT_EQ(oracle_select(row.truth, Description({sym("left")})), std::vector<std::size_t>{leftmost});
  }

  // contradictory description on two blocks: fallback keeps the best, never empty
  std::vector<RawFeatures> two(2);
  two[0].x_pos = 0.3;
  two[1].x_pos = 0.7;
  const auto t = membership_grades(lex, two);
  const auto sel = oracle_select(t, Description({sym("left"), sym("right")}));
  EXPECT_FALSE(sel.empty());
}

TEST(Oracle, FallbackBand) {
  OracleTruth t;
  t.grades.resize(3, 1);
  t.grades << 0.3, 0.25, 0.1;
  EXPECT_EQ(oracle_select(t, Description({0})), (std::vector<std::size_t>{0, 1}));
  t.grades << 0.6, 0.5, 0.49;
  EXPECT_EQ(oracle_select(t, Description({0})), (std::vector<std::size_t>{0, 1}));
}

TEST(Corpus, DefaultSpecShape) {
  const auto g = generate_corpus(CorpusSpec{});
  EXPECT_EQ(g.corpus.environments.size(), 22u);
  const auto cats = g.corpus.categories();
  ASSERT_EQ(cats.size(), 5u);
  EXPECT_EQ(cats.at("g1").size(), 5u);
  EXPECT_EQ(cats.at("g5").size(), 2u);
  std::size_t max_g1 = 0, min_g5 = 1000;
  for (const auto& e : g.corpus.environments) {
    if (e.category == "g1") max_g1 = std::max(max_g1, e.size());
    if (e.category == "g5") min_g5 = std::min(min_g5, e.size());
  }
  EXPECT_GT(min_g5, max_g1);
  for (const auto& t : g.corpus.tasks) {
    const Environment& env = g.corpus.env(t.env_id);
    ASSERT_FALSE(t.selected.empty());
    for (const auto& id : t.selected) ASSERT_TRUE(env.index_of(id).has_value());
    ASSERT_LE(t.desc.size(), 3u);
    ASSERT_NEAR(t.target.sum(), 1.0, 1e-12);
  }
  // ten identifications per description
  EXPECT_EQ(g.corpus.tasks.size() % 10, 0u);
}

TEST(Corpus, ByteIdenticalForSameSeed) {
  CorpusSpec spec;
  spec.replicas = 3;
  const std::string a = dump_corpus(generate_corpus(spec).corpus, default_lexicon());
  const std::string b = dump_corpus(generate_corpus(spec).corpus, default_lexicon());
  EXPECT_EQ(a, b);
  spec.seed = 8;
  EXPECT_NE(dump_corpus(generate_corpus(spec).corpus, default_lexicon()), a);
}

TEST(Corpus, ZeroNoiseReplicasAgreeWithOracle) {
  CorpusSpec spec;
  spec.env_counts = {2, 2, 1, 1, 1};
  spec.noise = 0.0;
  spec.replicas = 4;
  const auto g = generate_corpus(spec);
  const auto& tasks = g.corpus.tasks;
  ASSERT_EQ(tasks.size() % 4, 0u);
  for (std::size_t i = 0; i < tasks.size(); i += 4) {
    for (std::size_t r = 1; r < 4; ++r) EXPECT_EQ(tasks[i + r], tasks[i]);
    const Environment& env = g.corpus.env(tasks[i].env_id);
    const auto truth = membership_grades(default_lexicon(), env);
    std::vector<std::string> crisp;
    for (auto k : oracle_select(truth, tasks[i].desc)) crisp.push_back(env.objects[k].id);
    EXPECT_EQ(tasks[i].selected, crisp);
  }
}

TEST(Corpus, DescriptionsUseWellFittingSymbols) {
  CorpusSpec spec;
  spec.env_counts = {1, 1, 1, 1, 1};
  spec.replicas = 1;
  const auto g = generate_corpus(spec);
  std::set<std::size_t> lengths;
  for (const auto& t : g.corpus.tasks) lengths.insert(t.desc.size());
  EXPECT_TRUE(lengths.count(1));
  EXPECT_TRUE(lengths.count(2) || lengths.count(3));
}

TEST(Corpus, SpecValidation) {
  CorpusSpec spec;
  spec.env_counts[2] = 0;
  EXPECT_THROW(generate_corpus(spec), Error);
  spec = {};
  spec.replicas = 0;
  EXPECT_THROW(generate_corpus(spec), Error);
  spec = {};
  spec.knobs.max_overlap = 0.2;
  EXPECT_THROW(generate_corpus(spec), Error);
}

TEST(Rasterize, ReextractionMatchesAnalyticFeatures) {
  const int W = 640, H = 480;
  for (int c = 1; c <= 5; ++c) {
    const auto g = generate_environment(c, 500 + static_cast<std::uint64_t>(c));
    const auto [img, mask] = rasterize(g.env, W, H);
    for (std::size_t i = 0; i < g.env.size(); ++i) {
      const RawFeatures want = analytic_features(g.blocks[i]);
      const RawFeatures got = extract_cluster_features(img, mask, static_cast<int>(i + 1));
      EXPECT_LE(std::abs(got.x_pos - want.x_pos) * W, 1.5);
      EXPECT_LE(std::abs(got.y_pos - want.y_pos) * H, 1.5);
      EXPECT_LE(std::abs(got.width - want.width) * W, 1.5);
      EXPECT_LE(std::abs(got.height - want.height) * H, 1.5);
      EXPECT_LE(hue_distance(got.hue, want.hue), 0.02);
      EXPECT_LE(std::abs(got.light - want.light), 0.02);
      EXPECT_EQ(got.achromatic, want.achromatic);
    }
  }
}
