// Copyright (c) 2026 The spkfuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <vector>

#include "oracles.h"
#include "spkfuse/evaluation.h"
#include "spkfuse/rng.h"
#include "test_util.h"

namespace spkfuse {
namespace {

Eigen::RowVectorXd Vec(std::initializer_list<double> v) {
  Eigen::RowVectorXd out(v.size());
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

TEST(Cosine, Examples) {
  const auto a = Vec({1, 2, 3});
  EXPECT_NEAR(CosineScore(a, a), 1.0, 1e-15);
  EXPECT_NEAR(CosineScore(Vec({1, 0}), Vec({0, 5})), 0.0, 1e-15);
  EXPECT_NEAR(CosineScore(a, -a), -1.0, 1e-15);
  EXPECT_THROW(CosineScore(a, Vec({0, 0, 0})), DomainError);
  EXPECT_THROW(CosineScore(a, Vec({1, 2})), DomainError);
}

EmbeddingStore RandomStore(Rng* rng, int n, int dim, double scale = 1.0) {
  EmbeddingStore s;
  for (int i = 0; i < n; ++i) {
    Eigen::RowVectorXd v(dim);
    for (auto& x : v) x = rng->Normal() * scale;
    s.Add({"u" + std::to_string(i), v});
  }
  return s;
}

TEST(ScoreTrials, OrderMissingAndScale) {
  Rng rng(1);
  const EmbeddingStore s = RandomStore(&rng, 4, 5);
  TrialList empty;
  EXPECT_TRUE(ScoreTrials(s, empty).scores.empty());
  TrialList t;
  t.trials = {{"u2", "u0", TrialLabel::kSame},
              {"u1", "u3", TrialLabel::kDifferent}};
  const ScoreSet r = ScoreTrials(s, t);
  ASSERT_EQ(r.scores.size(), 2u);
  EXPECT_EQ(r.scores[0].trial.enroll_id, "u2");
  EXPECT_DOUBLE_EQ(r.scores[0].score,
                   CosineScore(s.Get("u2").vector, s.Get("u0").vector));
  EXPECT_EQ(r.SameScores().size(), 1u);
  EXPECT_EQ(r.DifferentScores().size(), 1u);

  EmbeddingStore scaled;
  for (const auto& e : s.entries()) scaled.Add({e.utterance_id, 3.5 * e.vector});
  const ScoreSet r2 = ScoreTrials(scaled, t);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(r2.scores[i].score, r.scores[i].score, 1e-14);
  }
  t.trials.push_back({"u1", "ghost", TrialLabel::kSame});
  try {
    ScoreTrials(s, t);
    FAIL();
  } catch (const LookupError& e) {
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos);
  }
}

TEST(EmbeddingStore, ValidationAndFormats) {
  EmbeddingStore s;
  s.Add({"a", Vec({1, 2})});
  EXPECT_THROW(s.Add({"b", Vec({1, 2, 3})}), ValidationError);
  EXPECT_THROW(s.Add({"a", Vec({1, 2})}), ValidationError);
  EXPECT_THROW(s.Add({"c", Vec({1, std::nan("")})}), ValidationError);
  EXPECT_THROW(s.Get("zz"), LookupError);

  Rng rng(2);
  const EmbeddingStore r = RandomStore(&rng, 6, 512);
  test::TempDir dir;
  WriteEmbeddingsText(r, dir.path() / "e.txt");
  WriteEmbeddingsBinary(r, dir.path() / "e.bin");
  const EmbeddingStore t = ReadEmbeddings(dir.path() / "e.txt");
  const EmbeddingStore b = ReadEmbeddings(dir.path() / "e.bin");
  ASSERT_EQ(t.size(), 6u);
  ASSERT_EQ(b.size(), 6u);
  EXPECT_EQ(b.Dim(), 512);
  for (size_t i = 0; i < 6; ++i) {
    // Both formats carry float32 precision; they agree exactly.
    EXPECT_EQ(t.entries()[i].vector, b.entries()[i].vector);
    EXPECT_EQ(t.entries()[i].utterance_id, r.entries()[i].utterance_id);
    EXPECT_LT((t.entries()[i].vector - r.entries()[i].vector).cwiseAbs().maxCoeff(),
              1e-6);
  }
  const std::string bin = test::ReadFile(dir.path() / "e.bin");
  EXPECT_EQ(bin.substr(0, 6), "6 512\n");

  std::ofstream(dir.path() / "bad.txt") << "a 1 2\nb 1 x\n";
  EXPECT_THROW(ReadEmbeddings(dir.path() / "bad.txt"), FormatError);
  std::ofstream(dir.path() / "dims.txt") << "a 1 2\nb 1 2 3\n";
  EXPECT_THROW(ReadEmbeddings(dir.path() / "dims.txt"), ValidationError);
  std::ofstream(dir.path() / "trunc.bin") << "2 4\na\n" << std::string(16, '\0');
  EXPECT_THROW(ReadEmbeddings(dir.path() / "trunc.bin"), FormatError);
  EXPECT_THROW(ReadEmbeddings(dir.path() / "missing"), IoError);
}

TEST(Eer, Fixtures) {
  const std::vector<double> s1{0.9, 0.8}, d1{0.1, 0.2};
  EXPECT_EQ(ComputeEer(s1, d1).eer, 0.0);
  const std::vector<double> s2{0.3, 0.5, 0.7}, d2{0.7, 0.3, 0.5};
  EXPECT_NEAR(ComputeEer(s2, d2).eer, 0.5, 1e-12);
  const std::vector<double> s3{0.8, 0.6, 0.4}, d3{0.5, 0.3, 0.1};
  const EerResult r = ComputeEer(s3, d3);
  EXPECT_NEAR(r.eer, 1.0 / 3.0, 1e-12);
  EXPECT_GT(r.threshold, 0.4);
  EXPECT_LE(r.threshold, 0.5);
  const std::vector<double> none;
  EXPECT_THROW(ComputeEer(s1, none), DomainError);
  EXPECT_THROW(ComputeEer(none, d1), DomainError);
  const std::vector<double> bad{std::nan("")};
  EXPECT_THROW(ComputeEer(bad, d1), DomainError);
}

std::vector<double> RandomScores(Rng* rng, int n, double shift, bool ties) {
  std::vector<double> v(n);
  for (double& x : v) {
    x = rng->Normal() + shift;
    if (ties) x = std::round(x * 4) / 4;
  }
  return v;
}

TEST(Eer, MatchesBruteForceSweep) {
  Rng rng(3);
  for (int rep = 0; rep < 300; ++rep) {
    const int ns = 1 + static_cast<int>(rng.UniformInt(500));
    const int nd = 1 + static_cast<int>(rng.UniformInt(500));
    const bool ties = rep % 3 == 0;
    const double shift = rng.Uniform(-1.0, 3.0);
    const auto s = RandomScores(&rng, ns, shift, ties);
    const auto d = RandomScores(&rng, nd, 0.0, ties);
    const EerResult got = ComputeEer(s, d);
    const oracle::Eer want = oracle::BruteForceEer(s, d);
    ASSERT_NEAR(got.eer, want.eer, 1e-12) << rep;
    ASSERT_NEAR(got.threshold, want.threshold, 1e-12) << rep;
    ASSERT_GE(got.eer, 0.0);
    ASSERT_LE(got.eer, 1.0);
  }
}

TEST(Eer, RankStatisticAndLabelSymmetry) {
  Rng rng(4);
  for (int rep = 0; rep < 100; ++rep) {
    auto s = RandomScores(&rng, 50, 1.0, false);
    auto d = RandomScores(&rng, 70, 0.0, false);
    const double e = ComputeEer(s, d).eer;
    std::vector<double> ts, td, ns, nd;
    for (double x : s) ts.push_back(std::exp(2 * x) + 3);
    for (double x : d) td.push_back(std::exp(2 * x) + 3);
    EXPECT_NEAR(ComputeEer(ts, td).eer, e, 1e-12);
    for (double x : d) ns.push_back(-x);
    for (double x : s) nd.push_back(-x);
    EXPECT_NEAR(ComputeEer(ns, nd).eer, e, 1e-12);
  }
}

TEST(Eer, ZeroExactlyWhenStrictlySeparated) {
  Rng rng(5);
  for (int rep = 0; rep < 200; ++rep) {
    const auto s = RandomScores(&rng, 20, rng.Uniform(0.0, 6.0), true);
    const auto d = RandomScores(&rng, 20, 0.0, true);
    const double min_s = *std::min_element(s.begin(), s.end());
    const double max_d = *std::max_element(d.begin(), d.end());
    // Score >= threshold accepts, so a shared boundary score counts against.
    EXPECT_EQ(ComputeEer(s, d).eer == 0.0, min_s > max_d) << rep;
  }
}

TEST(Det, EndpointsMonotonicityAndEerOnCurve) {
  Rng rng(6);
  const auto s = RandomScores(&rng, 80, 1.5, true);
  const auto d = RandomScores(&rng, 120, 0.0, true);
  const DetCurve c = DetPoints(s, d);
  EXPECT_EQ(c.front().far, 1.0);
  EXPECT_EQ(c.front().frr, 0.0);
  EXPECT_EQ(c.back().far, 0.0);
  EXPECT_EQ(c.back().frr, 1.0);
  for (size_t i = 1; i < c.size(); ++i) {
    EXPECT_GT(c[i].threshold, c[i - 1].threshold);
    EXPECT_LE(c[i].far, c[i - 1].far);
    EXPECT_GE(c[i].frr, c[i - 1].frr);
    // Recompute by counting.
    double far = 0, frr = 0;
    for (double x : d) far += x >= c[i].threshold;
    for (double x : s) frr += x < c[i].threshold;
    EXPECT_DOUBLE_EQ(c[i].far, far / d.size());
    EXPECT_DOUBLE_EQ(c[i].frr, frr / s.size());
  }
  const EerResult e = ComputeEer(s, d);
  bool bracketed = false;
  for (size_t i = 1; i < c.size(); ++i) {
    if (c[i - 1].threshold <= e.threshold && e.threshold <= c[i].threshold) {
      bracketed = true;
    }
  }
  EXPECT_TRUE(bracketed);

  const std::vector<double> ps{0.9, 0.8}, pd{0.1, 0.2};
  bool has_zero = false;
  for (const auto& p : DetPoints(ps, pd)) has_zero |= p.far == 0 && p.frr == 0;
  EXPECT_TRUE(has_zero);
}

TEST(Io, ScoresAndDetRoundTrip) {
  test::TempDir dir;
  ScoreSet s;
  s.scores = {{{"a", "b", TrialLabel::kSame}, 0.123456789012345678},
              {{"a", "c", TrialLabel::kDifferent}, -0.5}};
  WriteScores(s, dir.path() / "scores.tsv");
  EXPECT_EQ(test::ReadFile(dir.path() / "scores.tsv").substr(0, 9),
            "a\tb\tsame\t");
  const ScoreSet r = ReadScores(dir.path() / "scores.tsv");
  ASSERT_EQ(r.scores.size(), 2u);
  EXPECT_EQ(r.scores[0].score, s.scores[0].score);
  EXPECT_EQ(r.scores[1].trial.label, TrialLabel::kDifferent);
  WriteDetCsv(DetPoints(s), dir.path() / "det.csv");
  EXPECT_EQ(test::ReadFile(dir.path() / "det.csv").substr(0, 18),
            "threshold,far,frr\n");
  std::ofstream(dir.path() / "bad.tsv") << "a\tb\tmaybe\t0.1\n";
  EXPECT_THROW(ReadScores(dir.path() / "bad.tsv"), FormatError);
}

TEST(Posteriors, AggregationAndTieBreak) {
  std::vector<Eigen::RowVectorXd> p{Vec({0.9, 0.1}), Vec({0.1, 0.9})};
  const PosteriorDecision d = AggregatePosteriors(p);
  EXPECT_EQ(d.predicted, 0);
  EXPECT_NEAR(d.mean_posterior[0], 0.5, 1e-15);
  EXPECT_NEAR(d.mean_posterior.sum(), 1.0, 1e-15);
  std::vector<Eigen::RowVectorXd> one{Vec({0.2, 0.7, 0.1})};
  const PosteriorDecision o = AggregatePosteriors(one);
  EXPECT_EQ(o.predicted, 1);
  EXPECT_EQ(o.mean_posterior, one[0]);
  std::vector<Eigen::RowVectorXd> empty;
  EXPECT_THROW(AggregatePosteriors(empty), DomainError);
}

}  // namespace
}  // namespace spkfuse
