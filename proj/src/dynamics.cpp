#include "histel/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>

#include "histel/errors.hpp"
#include "histel/text.hpp"

namespace histel {

// --- sense inventory ----------------------------------------------------------

void SenseInventory::Add(const std::string& lemma, Sense sense) {
  senses_[FoldKey(lemma)].push_back(std::move(sense));
}

const std::vector<SenseInventory::Sense>* SenseInventory::Find(std::string_view token) const {
  const auto it = senses_.find(FoldKey(token));
  return it == senses_.end() ? nullptr : &it->second;
}

SenseInventory SenseInventory::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open sense inventory '" + path + "'");
  SenseInventory inv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto id = j.at("embedding_id").get<std::int64_t>();
      if (id < 0) throw ParseError(line_no, "negative embedding_id", path);
      inv.Add(j.at("lemma").get<std::string>(),
              Sense{j.at("sense_id").get<std::string>(), static_cast<std::size_t>(id)});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what(), path);
    }
  }
  return inv;
}

// --- game construction ----------------------------------------------------------

double ShiftedSimilarity(std::span<const float> a, std::span<const float> b) {
  return (1.0 + Cosine(a, b)) / 2.0;
}

namespace {

std::vector<double> Softmax(const std::vector<double>& logits, double temperature) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double hi = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - hi) / temperature);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

}  // namespace

Game BuildGame(const Sentence& sentence, std::span<const MentionInput> mentions,
               const KnowledgeBase& kb, const SenseInventory* senses,
               const DynamicsConfig& config) {
  if (!(config.prior_temperature > 0.0)) throw ConfigError("prior temperature must be > 0");
  Game game;
  std::map<std::string, std::size_t> strategy_ids;
  std::vector<std::vector<float>> strategy_embeddings;
  auto intern = [&](StrategyKind kind, const std::string& label,
                    std::span<const float> embedding) -> std::size_t {
    const std::string key = (kind == StrategyKind::kSense ? "sense:" : "") + label;
    auto [it, inserted] = strategy_ids.try_emplace(key, game.strategies.size());
    if (inserted) {
      game.strategies.push_back(Strategy{kind, label});
      strategy_embeddings.emplace_back(embedding.begin(), embedding.end());
    }
    return it->second;
  };

  std::vector<char> in_mention(sentence.tokens.size(), 0);
  for (std::size_t m = 0; m < mentions.size(); ++m) {
    const CandidateSet& cs = *mentions[m].candidates;
    Player p;
    p.kind = PlayerKind::kMention;
    p.mention = static_cast<int>(m);
    p.token = cs.mention.surface;
    p.embedding.assign(mentions[m].context_embedding.begin(), mentions[m].context_embedding.end());
    for (const Candidate* c : cs.Survivors()) {
      const auto& e = kb.entity(c->entity);
      if (!e.embedding_id) throw DataError("candidate " + c->qid + " has no embedding");
      p.strategies.push_back(
          intern(StrategyKind::kEntity, c->qid, kb.embeddings().Row(*e.embedding_id)));
      p.scores.push_back(c->score);
    }
    if (config.nil_strategy) {
      game.nil_strategy = intern(StrategyKind::kNil, std::string(kNil), {});
      p.strategies.push_back(*game.nil_strategy);
      p.scores.push_back(0.0);
    }
    if (p.strategies.empty()) {
      throw DataError("mention " + cs.mention.Id() + " has no strategies and NIL is disabled");
    }
    for (int t = cs.mention.token_begin; t < cs.mention.token_end; ++t) {
      if (t >= 0 && static_cast<std::size_t>(t) < in_mention.size()) in_mention[t] = 1;
    }
    game.players.push_back(std::move(p));
  }

  if (senses != nullptr && !senses->empty()) {
    for (std::size_t t = 0; t < sentence.tokens.size(); ++t) {
      if (in_mention[t]) continue;
      const auto* found = senses->Find(sentence.tokens[t].surface);
      if (found == nullptr || found->empty()) continue;
      Player p;
      p.kind = PlayerKind::kContext;
      p.token = sentence.tokens[t].surface;
      p.embedding.assign(kb.embeddings().dimension(), 0.0f);
      for (const auto& sense : *found) {
        const auto row = kb.embeddings().Row(sense.embedding_id);
        p.strategies.push_back(intern(StrategyKind::kSense, sense.sense_id, row));
        p.scores.push_back(0.0);
        for (std::size_t d = 0; d < row.size(); ++d) {
          p.embedding[d] += row[d] / static_cast<float>(found->size());
        }
      }
      game.players.push_back(std::move(p));
    }
  }

  const std::size_t n = game.players.size();
  game.a = DenseMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double w = ShiftedSimilarity(game.players[i].embedding, game.players[j].embedding);
      if (w < config.adjacency_threshold) w = 0.0;
      game.a(i, j) = w;
      game.a(j, i) = w;
    }
  }

  const std::size_t m = game.strategies.size();
  game.z = DenseMatrix(m, m);
  for (std::size_t h = 0; h < m; ++h) {
    for (std::size_t s = h; s < m; ++s) {
      double v;
      if (game.strategies[h].kind == StrategyKind::kNil ||
          game.strategies[s].kind == StrategyKind::kNil) {
        v = config.nil_kappa;
      } else {
        v = ShiftedSimilarity(strategy_embeddings[h], strategy_embeddings[s]);
      }
      game.z(h, s) = v;
      game.z(s, h) = v;
    }
  }

  game.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Player& p = game.players[i];
    const std::size_t k = p.strategies.size();
    if (config.init == InitMode::kUniform || p.kind == PlayerKind::kContext) {
      game.x[i].assign(k, 1.0 / static_cast<double>(k));
      continue;
    }
    // Prior: softmax of retrieval scores; the NIL strategy takes the mean
    // candidate score as its logit.
    std::vector<double> logits = p.scores;
    double mean = 0.0;
    std::size_t n_real = 0;
    for (std::size_t h = 0; h < k; ++h) {
      if (game.nil_strategy && p.strategies[h] == *game.nil_strategy) continue;
      mean += logits[h];
      ++n_real;
    }
    mean = n_real ? mean / static_cast<double>(n_real) : 0.0;
    for (std::size_t h = 0; h < k; ++h) {
      if (game.nil_strategy && p.strategies[h] == *game.nil_strategy) logits[h] = mean;
    }
    game.x[i] = Softmax(logits, config.prior_temperature);
  }
  return game;
}

// --- dynamics -------------------------------------------------------------------

namespace {

// f_h = sum_j A_ij (Z x_j)_h, the payoff of strategy h per unit of x_i^h.
void FitnessInto(const Game& game, const std::vector<std::vector<double>>& x, std::size_t i,
                 std::vector<double>& f) {
  const Player& pi = game.players[i];
  f.assign(pi.strategies.size(), 0.0);
  for (std::size_t j = 0; j < game.players.size(); ++j) {
    const double w = game.a(i, j);
    if (j == i || w == 0.0) continue;
    const Player& pj = game.players[j];
    for (std::size_t h = 0; h < pi.strategies.size(); ++h) {
      double zx = 0.0;
      for (std::size_t s = 0; s < pj.strategies.size(); ++s) {
        zx += game.z(pi.strategies[h], pj.strategies[s]) * x[j][s];
      }
      f[h] += w * zx;
    }
  }
}

// Writes the synchronous update of `x` into `next`; returns max |delta|.
double Step(const Game& game, const std::vector<std::vector<double>>& x,
            std::vector<std::vector<double>>& next) {
  double delta = 0.0;
  std::vector<double> f;
  next.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    FitnessInto(game, x, i, f);
    // Equal fitness everywhere leaves x_i unchanged; skipping the division
    // keeps such states fixed bit for bit.
    if (std::adjacent_find(f.begin(), f.end(), std::not_equal_to<>()) == f.end()) {
      next[i] = x[i];
      continue;
    }
    next[i].resize(f.size());
    double total = 0.0;
    for (std::size_t h = 0; h < f.size(); ++h) total += (next[i][h] = x[i][h] * f[h]);
    if (!(total > 0.0)) {
      next[i] = x[i];
      continue;
    }
    for (std::size_t h = 0; h < f.size(); ++h) {
      next[i][h] /= total;
      delta = std::max(delta, std::abs(next[i][h] - x[i][h]));
    }
  }
  return delta;
}

}  // namespace

std::vector<double> Payoff(const Game& game, std::size_t i) {
  std::vector<double> u;
  FitnessInto(game, game.x, i, u);
  for (std::size_t h = 0; h < u.size(); ++h) u[h] *= game.x[i][h];
  return u;
}

Game ReplicatorStep(Game game) {
  std::vector<std::vector<double>> next;
  Step(game, game.x, next);
  game.x = std::move(next);
  return game;
}

DynamicsResult RunDynamics(const Game& game, const DynamicsConfig& config) {
  if (!(config.tol > 0.0)) throw ConfigError("dynamics tol must be > 0");
  if (config.max_iter < 1) throw ConfigError("dynamics max_iter must be >= 1");
  DynamicsResult result;
  result.x = game.x;
  std::vector<std::vector<double>> next;
  for (int it = 0; it < config.max_iter; ++it) {
    const double delta = Step(game, result.x, next);
    std::swap(result.x, next);
    ++result.iterations;
    result.trace.push_back(delta);
    if (delta < config.tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

LinkDecision SelectLink(const Game& game, std::span<const std::vector<double>> x,
                        std::size_t player) {
  const Player& p = game.players.at(player);
  const auto& probs = x[player];
  std::size_t best = 0;
  for (std::size_t h = 1; h < p.strategies.size(); ++h) {
    const auto& lh = game.strategies[p.strategies[h]].label;
    const auto& lb = game.strategies[p.strategies[best]].label;
    if (probs[h] > probs[best] || (probs[h] == probs[best] && QidLess(lh, lb))) best = h;
  }
  LinkDecision d;
  d.predicted = game.strategies[p.strategies[best]].label;
  d.probability = probs[best];
  d.score = p.scores[best];
  d.heuristic = game.strategies[p.strategies[best]].kind == StrategyKind::kNil ? "nil-strategy"
                                                                                : "dynamics";
  return d;
}

LinkDecision SelectLinkStatic(const CandidateSet& cs, bool nil_enabled) {
  LinkDecision d;
  d.mention_id = cs.mention.Id();
  d.filtered_count = cs.FilteredCount();
  const auto survivors = cs.Survivors();
  if (survivors.empty()) {
    if (!nil_enabled) {
      throw DataError("mention " + cs.mention.Id() + " has no candidates and NIL is disabled");
    }
    d.heuristic = "no-candidates";
    return d;
  }
  const Candidate* best = survivors.front();
  for (const Candidate* c : survivors) {
    if (c->score > best->score || (c->score == best->score && QidLess(c->qid, best->qid))) {
      best = c;
    }
  }
  d.predicted = best->qid;
  d.score = best->score;
  d.probability = 1.0;
  d.heuristic = "static";
  return d;
}

}  // namespace histel
