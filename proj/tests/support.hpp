// Shared fixtures and brute-force oracles for the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "histel/corpus.hpp"
#include "histel/dynamics.hpp"
#include "histel/kbstore.hpp"
#include "histel/nilpred.hpp"
#include "histel/retrieval.hpp"

namespace testsupport {

inline std::string DataPath(const std::string& name) {
  return std::string(HISTEL_TEST_DATA) + "/" + name;
}

inline std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- games ---------------------------------------------------------------------------

// A random game with n players, each with 1..max_m strategies drawn from a
// shared pool; A symmetric with zero diagonal, Z symmetric in [0, 1].
inline histel::Game RandomGame(std::mt19937_64& rng, int max_n = 6, int max_m = 5) {
  std::uniform_int_distribution<int> n_dist(1, max_n), m_dist(1, max_m);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  histel::Game g;
  const int n = n_dist(rng);
  const int pool = max_m * 2;
  for (int s = 0; s < pool; ++s) g.strategies.push_back({histel::StrategyKind::kEntity, "Q" + std::to_string(s + 1)});
  for (int i = 0; i < n; ++i) {
    histel::Player p;
    p.mention = i;
    std::vector<std::size_t> ids(pool);
    for (int s = 0; s < pool; ++s) ids[s] = s;
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(m_dist(rng));
    p.strategies = ids;
    p.scores.assign(ids.size(), 0.0);
    std::vector<double> x(ids.size());
    double sum = 0.0;
    for (double& v : x) sum += (v = u01(rng) + 1e-3);
    for (double& v : x) v /= sum;
    g.players.push_back(p);
    g.x.push_back(x);
  }
  g.a = histel::DenseMatrix(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) g.a(i, j) = g.a(j, i) = u01(rng) < 0.2 ? 0.0 : u01(rng);
  g.z = histel::DenseMatrix(pool, pool);
  for (int h = 0; h < pool; ++h)
    for (int s = h; s < pool; ++s) g.z(h, s) = g.z(s, h) = u01(rng);
  return g;
}

// Payoff written out directly: u_h = x_i^h * sum_j A_ij sum_s Z[h, s] x_j^s.
inline std::vector<double> NaivePayoff(const histel::Game& g, std::size_t i) {
  std::vector<double> u;
  const auto& si = g.players[i].strategies;
  for (std::size_t h = 0; h < si.size(); ++h) {
    double total = 0.0;
    for (std::size_t j = 0; j < g.players.size(); ++j) {
      if (j == i) continue;
      const auto& sj = g.players[j].strategies;
      for (std::size_t s = 0; s < sj.size(); ++s) total += g.a(i, j) * g.z(si[h], sj[s]) * g.x[j][s];
    }
    u.push_back(g.x[i][h] * total);
  }
  return u;
}

// The hand-derived two-player game: player 1 over {a, b}, player 2 fixed on
// c, A_12 = 1, Z[a, c] = 1, Z[b, c] = 0, X_1 uniform.
inline histel::Game TwoPlayerGame() {
  histel::Game g;
  g.strategies = {{histel::StrategyKind::kEntity, "Q1"},
                  {histel::StrategyKind::kEntity, "Q2"},
                  {histel::StrategyKind::kEntity, "Q3"}};
  histel::Player p1, p2;
  p1.strategies = {0, 1};
  p1.scores = {0.0, 0.0};
  p1.mention = 0;
  p2.strategies = {2};
  p2.scores = {0.0};
  p2.mention = 1;
  g.players = {p1, p2};
  g.x = {{0.5, 0.5}, {1.0}};
  g.a = histel::DenseMatrix(2, 2);
  g.a(0, 1) = g.a(1, 0) = 1.0;
  g.z = histel::DenseMatrix(3, 3);
  g.z(0, 0) = g.z(1, 1) = g.z(2, 2) = 1.0;
  g.z(0, 2) = g.z(2, 0) = 1.0;
  return g;
}

// --- NIL formula oracles ----------------------------------------------------------------

inline std::vector<double> SortedDesc(std::vector<double> s) {
  std::sort(s.begin(), s.end(), [](double a, double b) { return a > b; });
  return s;
}

inline double OracleMedian(std::vector<double> s) {
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  return n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

inline double OracleMean(const std::vector<double>& s) {
  double t = 0;
  for (double v : s) t += v;
  return t / s.size();
}

// Percentage difference, 0 on a zero denominator.
inline double OracleRatio(double a, double b) {
  return (a + b) == 0.0 ? 0.0 : (a - b) / ((a + b) / 2.0);
}

inline bool OracleFixed(const std::vector<double>& s, double tau) {
  return s.empty() || *std::max_element(s.begin(), s.end()) < tau;
}
inline bool OracleDevTop(const std::vector<double>& raw, double tau) {
  if (raw.size() < 2) return OracleFixed(raw, tau);
  const auto s = SortedDesc(raw);
  return OracleRatio(s[0], s[1]) < tau;
}
inline bool OracleDevMedian(const std::vector<double>& raw, double tau) {
  if (raw.empty()) return true;
  return OracleRatio(SortedDesc(raw)[0], OracleMedian(raw)) < tau;
}
inline bool OracleDevMean(const std::vector<double>& raw, double tau) {
  if (raw.empty()) return true;
  return OracleRatio(SortedDesc(raw)[0], OracleMean(raw)) < tau;
}

// --- synthetic end-to-end corpus ------------------------------------------------------

struct SyntheticRun {
  std::vector<histel::Document> docs;
  std::vector<histel::EntityRecord> entities;
  histel::EmbeddingIndex entity_embeddings;
  histel::EmbeddingIndex mention_embeddings;
};

// Normalises in double precision, then rounds to float.
inline void Renormalize(std::vector<float>& v) {
  double n = 0;
  for (auto x : v) n += double(x) * x;
  n = std::sqrt(n);
  for (auto& x : v) x = static_cast<float>(x / n);
}

inline std::vector<float> UnitGaussian(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<float> g;
  std::vector<float> v(dim);
  for (auto& x : v) x = g(rng);
  Renormalize(v);
  return v;
}

// Homonym disambiguation corpus. Every name is shared by three plausible
// entities from distinct domains; every third name also has a modern
// look-alike (born 1983) in the domain of its first entity. An entity vector
// mixes a per-name identity with its domain centre, so a mention's context
// (identity plus the sentence's domain cue) ranks its homonyms first and gold
// within the top 3. The linked mentions of a sentence share a domain and no
// second domain is common to their homonyms; NIL mentions (unknown surface,
// an identity absent from the KB) ride along as extra players.
// n_entities counts the look-alikes.
inline SyntheticRun MakeSyntheticRun(std::size_t n_mentions, std::size_t n_entities,
                                     double nil_share, std::uint64_t seed, std::size_t dim = 128) {
  constexpr std::size_t kDomains = 8, kHomonyms = 3;
  std::mt19937_64 rng(seed);
  SyntheticRun run;
  const std::size_t names = n_entities * 3 / 10;
  const std::size_t decoys = n_entities - kHomonyms * names;
  std::vector<std::vector<float>> centre, identity, rows;
  for (std::size_t d = 0; d < kDomains; ++d) centre.push_back(UnitGaussian(rng, dim));
  for (std::size_t n = 0; n < names; ++n) identity.push_back(UnitGaussian(rng, dim));
  auto mix = [&](std::size_t n, std::size_t d) {
    std::vector<float> v(dim);
    const auto noise = UnitGaussian(rng, dim);
    for (std::size_t k = 0; k < dim; ++k) v[k] = 0.8f * identity[n][k] + 0.6f * centre[d][k] + 0.1f * noise[k];
    Renormalize(v);
    return v;
  };
  auto add = [&](const std::string& qid, std::size_t n, std::size_t d, const std::string& born) {
    histel::EntityRecord r;
    r.qid = qid;
    r.label = "Name " + std::to_string(n);
    r.ner_types = {"B-person"};
    r.dates["P569"] = born;
    r.popularity = static_cast<std::int64_t>((n * 37 + d * 11) % 1000);
    r.embedding_id = rows.size();
    run.entities.push_back(r);
    rows.push_back(mix(n, d));
  };
  // home[n]: the domains of the name's homonyms; by_domain lists (name, entity index).
  std::vector<std::array<std::size_t, kHomonyms>> home(names);
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> by_domain(kDomains);
  std::vector<std::size_t> perm(kDomains);
  for (std::size_t n = 0; n < names; ++n) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t h = 0; h < kHomonyms; ++h) {
      home[n][h] = perm[h];
      by_domain[perm[h]].push_back({n, run.entities.size()});
      add("Q" + std::to_string(1000 + kHomonyms * n + h), n, perm[h], std::to_string(1600 + (n * 7 + h * 60) % 200));
    }
  }
  for (std::size_t n = 0; n < decoys; ++n) add("Q" + std::to_string(500000 + n), 3 * n, home[3 * n][0], "1983");
  run.entity_embeddings = histel::EmbeddingIndex::FromRows(rows, histel::NormMode::kUnit);

  // True when two names have homonyms in a common domain other than d.
  auto share_other = [&](std::size_t a, std::size_t b, std::size_t d) {
    for (auto x : home[a])
      for (auto y : home[b]) if (x == y && x != d) return true;
    return false;
  };
  // Mention context: who it is, plus the sentence's domain.
  auto context = [&](const std::vector<float>& who, std::size_t d) {
    std::vector<float> v(dim);
    const auto noise = UnitGaussian(rng, dim);
    for (std::size_t k = 0; k < dim; ++k) v[k] = who[k] + 0.5f * centre[d][k] + 0.3f * noise[k];
    Renormalize(v);
    return v;
  };
  std::uniform_int_distribution<std::size_t> any_domain(0, kDomains - 1);
  std::size_t n_nil = static_cast<std::size_t>(std::llround(n_mentions * nil_share));
  std::size_t n_linked = n_mentions - n_nil;
  if (n_linked % 2) ++n_nil, --n_linked;
  const std::size_t n_sent = std::max<std::size_t>(1, n_linked / 2);

  std::vector<std::vector<float>> ctx;
  std::size_t made = 0, nil_made = 0;
  histel::Document doc;
  for (std::size_t s = 0; s < n_sent; ++s) {
    if (s % 5 == 0) {
      if (s) run.docs.push_back(doc);
      doc = {};
      doc.document_id = "synthetic-" + std::to_string(s / 5);
      doc.document_date = 1850;
    }
    histel::Sentence sent;
    std::vector<std::pair<std::size_t, std::size_t>> golds;
    std::size_t d = 0;
    do d = any_domain(rng);
    while (by_domain[d].size() < 2);
    if (2 * s < n_linked) {
      std::uniform_int_distribution<std::size_t> pick(0, by_domain[d].size() - 1);
      const auto a = by_domain[d][pick(rng)];
      auto b = a;
      while (b.first == a.first || share_other(a.first, b.first, d)) b = by_domain[d][pick(rng)];
      golds = {a, b};
      for (const auto& [n, e] : golds) {
        sent.tokens.push_back({"the", "O", std::nullopt, std::nullopt});
        histel::Token t;
        t.surface = run.entities[e].label;
        t.iob = "B-person";
        t.link = run.entities[e].qid;
        sent.tokens.push_back(t);
        ctx.push_back(context(identity[n], d));
        ++made;
      }
    }
    // Spread NIL mentions evenly over the sentences.
    const std::size_t nil_here = (n_nil * (s + 1)) / n_sent - (n_nil * s) / n_sent;
    for (std::size_t i = 0; i < nil_here; ++i, ++nil_made, ++made) {
      sent.tokens.push_back({"and", "O", std::nullopt, std::nullopt});
      histel::Token t;
      t.surface = "Unknown" + std::to_string(nil_made);
      t.iob = "B-person";
      t.link = std::string(histel::kNil);
      sent.tokens.push_back(t);
      ctx.push_back(context(UnitGaussian(rng, dim), d));
    }
    sent.tokens.push_back({".", "O", std::nullopt, std::nullopt});
    for (const auto& t : sent.tokens) sent.text += (sent.text.empty() ? "" : " ") + t.surface;
    doc.sentences.push_back(sent);
  }
  run.docs.push_back(doc);
  run.mention_embeddings = histel::EmbeddingIndex::FromRows(ctx, histel::NormMode::kUnit);
  return run;
}

}  // namespace testsupport
