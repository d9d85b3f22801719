#include <doctest.h>

#include <random>

#include "histel/errors.hpp"
#include "histel/nilpred.hpp"
#include "support.hpp"

using namespace histel;
using testsupport::OracleDevMean;
using testsupport::OracleDevMedian;
using testsupport::OracleDevTop;
using testsupport::OracleFixed;

namespace {

std::vector<double> RandomScores(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(1, 10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(len(rng));
  for (double& v : s) v = u(rng);
  if (rng() % 5 == 0) s.push_back(s.front());  // exact ties
  return s;
}

}  // namespace

TEST_SUITE("nilpred") {
  TEST_CASE("fixed threshold") {
    CHECK(NilFixed(ScoreVector({0.40, 0.2}), 0.443));
    CHECK_FALSE(NilFixed(ScoreVector({1.0}), 0.5));
    CHECK(NilFixed(ScoreVector(), 0.0));
    CHECK_FALSE(NilFixed(ScoreVector({0.0}), 0.0));
    CHECK(NilFixed(ScoreVector({-0.1}), 0.0));
  }

  TEST_CASE("deviation heuristics") {
    CHECK(NilDevTop(ScoreVector({0.5, 0.5}), 0.001));
    CHECK_FALSE(NilDevTop(ScoreVector({0.50, 0.49}), 0.011));
    CHECK(RelativeGap(0.50, 0.49) == doctest::Approx(0.0202).epsilon(1e-3));
    CHECK(NilDevTop(ScoreVector({0.3}), 0.4) == NilFixed(ScoreVector({0.3}), 0.4));
    CHECK(NilDevMean(ScoreVector({0.4, 0.4, 0.4}), 0.001));
    CHECK(NilDevMedian(ScoreVector({0.4, 0.4, 0.4}), 0.001));
    const ScoreVector s({0.9, 0.1, 0.1});
    CHECK(s.Mean() == doctest::Approx(0.3667).epsilon(1e-3));
    CHECK(RelativeGap(0.9, s.Mean()) == doctest::Approx(0.8421).epsilon(1e-3));
    CHECK_FALSE(NilDevMean(s, 0.022));
    CHECK(NilDevMean(ScoreVector(), 0.5));
  }

  TEST_CASE("heuristics equal their formulas on random vectors") {
    std::mt19937_64 rng(30);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int c = 0; c < 500; ++c) {
      const auto raw = RandomScores(rng);
      const double tau = u(rng);
      const ScoreVector s(raw);
      CHECK(NilFixed(s, tau) == OracleFixed(raw, tau));
      CHECK(NilDevTop(s, tau) == OracleDevTop(raw, tau));
      CHECK(NilDevMedian(s, tau) == OracleDevMedian(raw, tau));
      CHECK(NilDevMean(s, tau) == OracleDevMean(raw, tau));
    }
  }

  TEST_CASE("decisions are monotone in tau") {
    std::mt19937_64 rng(31);
    for (int c = 0; c < 200; ++c) {
      const ScoreVector s(RandomScores(rng));
      for (auto k : {NilKind::kFixed, NilKind::kDevTop, NilKind::kDevMedian, NilKind::kDevMean}) {
        bool was_nil = false;
        for (int i = 0; i <= 1000; i += 7) {
          const bool nil = NilDecision(k, i / 1000.0, NilInput{&s, "", ""});
          CHECK((!was_nil || nil));
          was_nil = nil;
        }
      }
    }
  }

  TEST_CASE("tau = 0 on strictly positive gaps never predicts NIL") {
    const ScoreVector s({0.9, 0.5, 0.2});
    CHECK_FALSE(NilDevTop(s, 0.0));
    CHECK_FALSE(NilDevMedian(s, 0.0));
    CHECK_FALSE(NilDevMean(s, 0.0));
  }

  TEST_CASE("string similarities") {
    CHECK(LevenshteinSimilarity("Marlborough Honse", "Marlborough House") ==
          doctest::Approx(1.0 - 1.0 / 17.0).epsilon(1e-12));
    CHECK(JaccardSimilarity("abc", "xyz") == 0.0);
    CHECK(HammingSimilarity("abc", "abd") == doctest::Approx(2.0 / 3.0));
    CHECK(HammingSimilarity("ab", "abcd") == doctest::Approx(0.5));
    CHECK(LevenshteinSimilarity("", "") == 1.0);
    CHECK(JaccardSimilarity("", "") == 1.0);
    CHECK(HammingSimilarity("", "") == 1.0);
    CHECK(LevenshteinSimilarity("Barrière", "Barriere") == doctest::Approx(1.0 - 1.0 / 8.0));
    std::mt19937_64 rng(32);
    const char* alpha[] = {"a", "b", "c", "é"};
    for (int c = 0; c < 200; ++c) {
      std::string a, b;
      for (int i = rng() % 8; i > 0; --i) a += alpha[rng() % 4];
      for (int i = rng() % 8; i > 0; --i) b += alpha[rng() % 4];
      for (auto f : {LevenshteinSimilarity, JaccardSimilarity, HammingSimilarity}) {
        CHECK(f(a, b) == f(b, a));
        CHECK(f(a, a) == 1.0);
        CHECK(f(a, b) >= 0.0);
        CHECK(f(a, b) <= 1.0);
      }
    }
  }

  TEST_CASE("string rules") {
    const ScoreVector s({0.7});
    CHECK_FALSE(NilDecision(NilKind::kLevenshtein, 1.0, {&s, "Parma", "Parma"}));
    CHECK(NilDecision(NilKind::kJaccard, 0.1, {&s, "abc", "xyz"}));
    const ScoreVector none;
    CHECK(NilDecision(NilKind::kHamming, 0.0, {&none, "a", "a"}));
  }

  TEST_CASE("rule parsing and serialisation") {
    const auto r = NilRule::Parse("dev_mean:0.022");
    CHECK(r.kind == NilKind::kDevMean);
    CHECK(r.tau == 0.022);
    CHECK(NilRule::Parse("always-nil").kind == NilKind::kAlwaysNil);
    CHECK(NilRule::Parse("dev-top:0.011").kind == NilKind::kDevTop);
    CHECK_THROWS_AS(NilRule::Parse("fixed"), ConfigError);
    CHECK_THROWS_AS(NilRule::Parse("fixed:1.5"), ConfigError);
    CHECK_THROWS_AS(NilRule::Parse("fixed:abc"), ConfigError);
    CHECK_THROWS_AS(NilRule::Parse("svm:0.2"), ConfigError);
    const auto back = NilRule::FromJson(r.ToJson());
    CHECK(back.kind == r.kind);
    CHECK(back.tau == r.tau);
    CHECK(NilRule::Parse(r.ToString()).tau == r.tau);
  }

  TEST_CASE("sweep picks the smallest best tau") {
    std::vector<SweepItem> all_nil(5);
    for (auto& it : all_nil) {
      it.scores = ScoreVector({0.6});
      it.gold_nil = true;
    }
    auto r = SweepTau(NilKind::kFixed, all_nil);
    CHECK(r.f1 == 1.0);
    CHECK(r.tau == doctest::Approx(0.601));

    std::vector<SweepItem> all_linked(5);
    for (auto& it : all_linked) {
      it.scores = ScoreVector({0.95});
      it.link_correct = true;
    }
    r = SweepTau(NilKind::kFixed, all_linked);
    CHECK(r.tau == 0.0);
    CHECK(r.f1 == 1.0);

    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> lo(0.0, 0.3), hi(0.7, 1.0);
    std::vector<SweepItem> sep;
    double max_nil = 0.0;
    for (int i = 0; i < 200; ++i) {
      SweepItem it;
      it.gold_nil = i % 3 == 0;
      it.link_correct = !it.gold_nil;
      it.scores = ScoreVector({it.gold_nil ? lo(rng) : hi(rng), 0.01});
      if (it.gold_nil) max_nil = std::max(max_nil, it.scores[0]);
      sep.push_back(it);
    }
    r = SweepTau(NilKind::kFixed, sep);
    CHECK(r.f1 == 1.0);
    // Smallest grid point strictly above every NIL score.
    CHECK(r.tau == std::floor(max_nil * 1000 + 1) / 1000);
    CHECK(SweepTau(NilKind::kFixed, sep).tau == r.tau);
    CHECK_THROWS_AS(SweepTau(NilKind::kFixed, std::vector<SweepItem>{}), DataError);
  }

  TEST_CASE("logistic regression") {
    NilRule zero;
    zero.kind = NilKind::kLogistic;
    zero.weights.assign(kNilFeatureCount + 1, 0.0);
    zero.features = NilFeatureNames();
    const std::vector<double> f(kNilFeatureCount, 0.3);
    CHECK(LogisticProbability(zero, f) == 0.5);
    CHECK_FALSE(LogisticPredict(zero, f));

    std::mt19937_64 rng(34);
    std::normal_distribution<double> g;
    LogisticData data;
    for (int i = 0; i < 20; ++i) {
      std::vector<double> x(kNilFeatureCount);
      for (double& v : x) v = g(rng);
      data.x.push_back(x);
      data.y.push_back(rng() % 2);
    }
    std::vector<double> w(kNilFeatureCount + 1);
    for (double& v : w) v = g(rng);
    const auto grad = LogisticGradient(w, data);
    double worst = 0;
    for (std::size_t d = 0; d < w.size(); ++d) {
      auto wp = w, wm = w;
      wp[d] += 1e-5;
      wm[d] -= 1e-5;
      const double fd = (LogisticLoss(wp, data) - LogisticLoss(wm, data)) / 2e-5;
      worst = std::max(worst, std::abs(fd - grad[d]) / std::max(1e-8, std::abs(fd) + std::abs(grad[d])));
    }
    CHECK(worst < 1e-4);

    LogisticData one;
    one.x = {f, f};
    one.y = {1, 1};
    const auto t = LogisticTrain(one, 100, 0.1);
    CHECK(t.warnings.size() == 1);
    CHECK(LogisticPredict(t.rule, f));
    CHECK(NilRule::FromJson(t.rule.ToJson()).weights == t.rule.weights);
  }

  TEST_CASE("score normalisation") {
    CHECK(NormalizeScores(std::vector<double>{1.0, -1.0, 0.0}, true) == std::vector<double>{1.0, 0.0, 0.5});
    CHECK(NormalizeScores(std::vector<double>{3.0, 1.0, 2.0}, false) == std::vector<double>{1.0, 0.0, 0.5});
    CHECK(NormalizeScores(std::vector<double>{2.0, 2.0}, false) == std::vector<double>{1.0, 1.0});
    CHECK(NormalizeScores(std::vector<double>{}, false).empty());
  }
}
