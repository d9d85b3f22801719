#include <doctest.h>

#include <random>

#include "histel/errors.hpp"
#include "histel/evalrep.hpp"
#include "support.hpp"

using namespace histel;

namespace {

MentionAnnotation Gold(int i, std::string link, int year = 1850, std::string type = "person") {
  MentionAnnotation m;
  m.document_id = "d";
  m.document_date = year;
  m.sentence_index = i;
  m.token_begin = 0;
  m.token_end = 1;
  m.surface = "m" + std::to_string(i);
  m.ner_type = std::move(type);
  m.gold_link = std::move(link);
  return m;
}

Prediction Pred(const MentionAnnotation& m, std::string q) { return Prediction{m.Id(), std::move(q), 0, "", 0}; }

EntityRecord Ent(std::string qid, std::string year, std::string type, std::int64_t pop) {
  EntityRecord e;
  e.qid = std::move(qid);
  if (!year.empty()) e.dates["P569"] = year;
  if (!type.empty()) e.ner_types = {type};
  e.popularity = pop;
  return e;
}

std::vector<std::vector<std::optional<std::string>>> Units(
    const std::vector<std::vector<std::optional<std::string>>>& coders) {
  std::vector<std::vector<std::optional<std::string>>> units(coders[0].size());
  for (std::size_t u = 0; u < units.size(); ++u)
    for (const auto& c : coders) units[u].push_back(c[u]);
  return units;
}

}  // namespace

TEST_SUITE("evalrep") {
  TEST_CASE("micro scores") {
    const std::vector<MentionAnnotation> gold{Gold(0, "Q1"), Gold(1, "NIL"), Gold(2, "Q3")};
    std::vector<Prediction> p{Pred(gold[0], "Q1"), Pred(gold[1], "NIL"), Pred(gold[2], "Q3")};
    CHECK(Score(p, gold).f1 == 1.0);
    p[2].predicted = "Q4";
    auto r = Score(p, gold);
    CHECK(r.precision == doctest::Approx(2.0 / 3.0));
    CHECK(r.recall == doctest::Approx(2.0 / 3.0));
    CHECK(r.f1 == doctest::Approx(2.0 / 3.0));
    p.pop_back();
    r = Score(p, gold);
    CHECK(r.n_missing == 1);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == doctest::Approx(2.0 / 3.0));
    p.push_back(Prediction{"nope", "NIL", 0, "", 0});
    CHECK_THROWS_AS(Score(p, gold), DataError);
    p.pop_back();
    p.push_back(p.front());
    CHECK_THROWS_AS(Score(p, gold), DataError);
  }

  TEST_CASE("always-NIL F1 equals the NIL share and scores ignore order") {
    std::mt19937_64 rng(40);
    for (int c = 0; c < 50; ++c) {
      std::vector<MentionAnnotation> gold;
      long nil = 0;
      for (int i = 0; i < 40; ++i) {
        const bool is_nil = rng() % 3 == 0;
        nil += is_nil;
        gold.push_back(Gold(i, is_nil ? "NIL" : "Q" + std::to_string(1 + rng() % 9)));
      }
      std::vector<Prediction> p;
      for (const auto& m : gold) p.push_back(Pred(m, "NIL"));
      CHECK(Score(p, gold).f1 == doctest::Approx(nil / 40.0).epsilon(1e-12));
      for (auto& q : p) q.predicted = rng() % 2 ? "NIL" : "Q" + std::to_string(1 + rng() % 9);
      const double f1 = Score(p, gold).f1;
      std::shuffle(p.begin(), p.end(), rng);
      CHECK(Score(p, gold).f1 == f1);
    }
  }

  TEST_CASE("plausibility accuracy and F1") {
    const KnowledgeBase kb({Ent("Q1", "1707", "B-person", 5), Ent("Q2", "1983", "B-person", 5),
                            Ent("Q3", "1700", "B-city", 5), Ent("Q4", "", "", 5)},
                           EmbeddingIndex{});
    // Ten predictions with known (time, type) plausibility bits.
    std::vector<MentionAnnotation> gold;
    std::vector<Prediction> p;
    const std::vector<std::pair<std::string, std::string>> cases{
        {"Q1", "person"}, {"Q1", "person"}, {"Q2", "person"}, {"Q3", "person"}, {"Q4", "person"},
        {"Q3", "city"},   {"NIL", "person"}, {"Q2", "city"},  {"Q1", "city"},   {"Q5", "person"}};
    for (std::size_t i = 0; i < cases.size(); ++i) {
      gold.push_back(Gold(static_cast<int>(i), "Q1", 1824, cases[i].second));
      p.push_back(Pred(gold.back(), cases[i].first));
    }
    gold.push_back(Gold(10, "NIL"));
    p.push_back(Pred(gold.back(), "Q2"));
    // time: plausible Q1 Q1 Q3 Q4 Q3 Q1 Q5 = 7, implausible Q2 Q2 = 2, empty 1.
    // type: plausible Q1 Q1 Q2 Q4 Q3 Q5 = 6, implausible Q3/person, Q2/city, Q1/city = 3.
    const auto r = PlausibilityScore(p, gold, kb);
    CHECK(r.n == 10);
    CHECK(r.year_accuracy == doctest::Approx(0.7));
    CHECK(r.type_accuracy == doctest::Approx(0.6));
    const double py = 7.0 / 9, ry = 7.0 / 8;
    CHECK(r.year_f1 == doctest::Approx(2 * py * ry / (py + ry)));
    const double pt = 6.0 / 9, rt = 6.0 / 7;
    CHECK(r.type_f1 == doctest::Approx(2 * pt * rt / (pt + rt)));
  }

  TEST_CASE("Constantini prediction is time-implausible") {
    const KnowledgeBase kb({Ent("Q5129347", "1983", "B-person", 1)}, EmbeddingIndex{});
    const std::vector<MentionAnnotation> gold{Gold(0, "Q1", 1824)};
    const std::vector<Prediction> p{Pred(gold[0], "Q5129347")};
    const auto r = PlausibilityScore(p, gold, kb);
    CHECK(r.year_accuracy == 0.0);
    CHECK(r.type_accuracy == 1.0);
  }

  TEST_CASE("error breakdown buckets") {
    std::vector<MentionAnnotation> gold;
    std::vector<Prediction> p;
    std::vector<CandidateRecord> cands;
    std::map<ErrorBucket, long> tally;
    std::mt19937_64 rng(41);
    for (int i = 0; i < 20; ++i) {
      const bool gold_nil = rng() % 2;
      gold.push_back(Gold(i, gold_nil ? "NIL" : "Q5"));
      const bool pred_nil = rng() % 2;
      const bool in_topk = rng() % 2;
      const bool correct = rng() % 4 == 0;
      std::string predicted = pred_nil ? "NIL" : "Q7";
      if (correct) predicted = gold.back().gold_link;
      p.push_back(Pred(gold.back(), predicted));
      CandidateRecord c;
      c.mention_id = gold.back().Id();
      c.nil_strategy = gold_nil && in_topk;
      c.survivors = {"Q7"};
      if (!gold_nil && in_topk) c.survivors.push_back("Q5");
      cands.push_back(c);
      if (predicted != gold.back().gold_link) ++tally[{gold_nil, in_topk, predicted == "NIL"}];
    }
    const auto b = BreakdownErrors(p, gold, cands);
    CHECK(b.counts == tally);
    double sum = 0;
    for (const auto& [k, n] : b.counts) sum += b.Share(k);
    CHECK(std::abs(sum - 1.0) < 1e-9);

    const std::vector<MentionAnnotation> g1{Gold(0, "Q5")};
    const std::vector<Prediction> p1{Pred(g1[0], "NIL")};
    CandidateRecord c1;
    c1.mention_id = g1[0].Id();
    c1.survivors = {"Q5"};
    const auto b1 = BreakdownErrors(p1, g1, std::vector<CandidateRecord>{c1});
    CHECK(b1.Share({false, true, true}) == 1.0);
    const std::vector<Prediction> ok{Pred(g1[0], "Q5")};
    CHECK(BreakdownErrors(ok, g1, {}).n_errors == 0);
    CHECK(BreakdownErrors(ok, g1, {}).Share({false, true, true}) == 0.0);
  }

  TEST_CASE("Krippendorff alpha") {
    std::vector<std::vector<std::optional<std::string>>> perfect;
    for (int i = 0; i < 10; ++i) perfect.push_back({"L" + std::to_string(i % 3), "L" + std::to_string(i % 3)});
    CHECK(KrippendorffAlpha(perfect) == 1.0);

    const auto j = nlohmann::json::parse(testsupport::Slurp(testsupport::DataPath("oracle_values.json")))["krippendorff"];
    std::vector<std::vector<std::optional<std::string>>> coders;
    for (const auto& row : j["coders"]) {
      std::vector<std::optional<std::string>> c;
      for (const auto& v : row) c.push_back(v.is_null() ? std::nullopt : std::optional(v.dump()));
      coders.push_back(c);
    }
    const double alpha = KrippendorffAlpha(Units(coders));
    CHECK(std::abs(alpha - j["alpha"].get<double>()) < 1e-9);
    CHECK(alpha == doctest::Approx(0.743).epsilon(1e-3));

    // Bijective relabelling.
    auto renamed = coders;
    for (auto& c : renamed)
      for (auto& v : c)
        if (v) v = "x" + *v + "y";
    CHECK(KrippendorffAlpha(Units(renamed)) == alpha);

    std::vector<std::vector<std::optional<std::string>>> opposed;
    for (int i = 0; i < 10; ++i) opposed.push_back({i % 2 ? "a" : "b", i % 2 ? "b" : "a"});
    CHECK(KrippendorffAlpha(opposed) <= 0.0);
    CHECK_THROWS_AS(KrippendorffAlpha({{"a", std::nullopt}, {std::nullopt, "b"}}), DataError);
  }

  TEST_CASE("Spearman") {
    const std::vector<double> up{1, 2, 3, 4, 5}, down{9, 7, 5, 3, 1};
    CHECK(Spearman(up, up)->rho == 1.0);
    CHECK(Spearman(up, down)->rho == -1.0);
    CHECK_FALSE(Spearman(up, std::vector<double>{1, 1, 1, 1, 1}).has_value());
    CHECK_THROWS_AS(Spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}), DataError);
    CHECK_THROWS_AS(Spearman(up, std::vector<double>{1, 2, 3}), DataError);
    CHECK(AverageRanks(std::vector<double>{10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});

    const auto j = nlohmann::json::parse(testsupport::Slurp(testsupport::DataPath("oracle_values.json")))["spearman"];
    const auto x = j["x"].get<std::vector<double>>(), y = j["y"].get<std::vector<double>>();
    const auto r = Spearman(x, y);
    REQUIRE(r.has_value());
    CHECK(std::abs(r->rho - j["rho"].get<double>()) < 1e-9);
    CHECK(r->p_value == doctest::Approx(j["p_value"].get<double>()).epsilon(1e-6));

    std::vector<double> t(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) t[i] = std::log1p(x[i]) * 3 + 7;
    CHECK(Spearman(t, y)->rho == r->rho);
  }

  TEST_CASE("popularity preference") {
    const KnowledgeBase kb({Ent("Q1", "", "", 10), Ent("Q2", "", "", 500), Ent("Q3", "", "", 1)},
                           EmbeddingIndex{});
    std::vector<MentionAnnotation> gold;
    std::vector<Prediction> p;
    for (int i = 0; i < 10; ++i) {
      gold.push_back(Gold(i, "Q1"));
      p.push_back(Pred(gold.back(), "Q1"));
    }
    CHECK(PopularityPreference(p, gold, kb) == 0.0);
    p[3].predicted = "Q2";
    CHECK(PopularityPreference(p, gold, kb) == doctest::Approx(0.10));
    p[4].predicted = "Q3";
    p[5].predicted = "NIL";
    CHECK(PopularityPreference(p, gold, kb) == doctest::Approx(0.10));
  }

  TEST_CASE("popularity histogram") {
    const KnowledgeBase one({Ent("Q1", "", "", 100)}, EmbeddingIndex{});
    const std::vector<std::string> q1{"Q1", "Q1", "NIL"};
    auto bins = PopularityHistogram(one, q1);
    REQUIRE(bins.size() == 1);
    CHECK(bins[0].lower == 100.0);
    CHECK(bins[0].upper == 1000.0);
    CHECK(bins[0].count == 1);
    CHECK(PopularityHistogram(one, std::vector<std::string>{}).empty());

    std::vector<EntityRecord> es;
    std::vector<std::string> links;
    std::map<int, long> tally;
    std::mt19937_64 rng(42);
    for (int i = 0; i < 1000; ++i) {
      const std::int64_t pop = static_cast<std::int64_t>(std::pow(10.0, (rng() % 6000) / 1000.0)) - (i % 7 == 0 ? 1 : 0);
      es.push_back(Ent("Q" + std::to_string(i + 1), "", "", pop));
      links.push_back(es.back().qid);
      ++tally[pop == 0 ? -1 : static_cast<int>(std::to_string(pop).size()) - 1];
    }
    const KnowledgeBase kb(es, EmbeddingIndex{});
    bins = PopularityHistogram(kb, links);
    long total = 0;
    for (const auto& b : bins) {
      const int e = b.lower == 0.0 ? -1 : static_cast<int>(std::lround(std::log10(b.lower)));
      CHECK(b.count == (tally.count(e) ? tally[e] : 0));
      total += b.count;
    }
    CHECK(total == 1000);
    CHECK(HistogramCsv(bins).rfind("lower,upper,count\n", 0) == 0);
  }
}
