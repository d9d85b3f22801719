#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "histel/corpus.hpp"
#include "histel/kbstore.hpp"
#include "histel/retrieval.hpp"
#include "histel/text.hpp"

namespace histel {

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class PlayerKind { kMention, kContext };

enum class StrategyKind { kEntity, kSense, kNil };

struct Strategy {
  StrategyKind kind = StrategyKind::kEntity;
  std::string label;  // QID, sense id, or NIL
};

struct Player {
  PlayerKind kind = PlayerKind::kMention;
  std::vector<std::size_t> strategies;  // global ids into Game::z
  std::vector<double> scores;           // retrieval score per strategy (NIL: 0)
  std::vector<float> embedding;
  int mention = -1;  // index into the sentence's mentions, -1 for context players
  std::string token;
};

// One sentence-level disambiguation game. x[i] is player i's mixed strategy
// over players[i].strategies; a is the player adjacency; z the payoff
// similarity over the union of all strategies.
struct Game {
  std::vector<Player> players;
  std::vector<Strategy> strategies;
  std::vector<std::vector<double>> x;
  DenseMatrix a;
  DenseMatrix z;
  std::optional<std::size_t> nil_strategy;
};

enum class InitMode { kUniform, kPrior };

struct DynamicsConfig {
  double tol = 1e-6;
  int max_iter = 1000;
  InitMode init = InitMode::kPrior;
  // Build-time options.
  bool nil_strategy = false;       // offer NIL as a strategy to every mention
  double nil_kappa = 0.5;          // constant payoff similarity of the NIL strategy
  double adjacency_threshold = 0.25;  // shifted similarities below this are zeroed
  double prior_temperature = 1.0;  // softmax temperature of the retrieval prior
};

// Optional sense inventory: lemma -> senses, each with an embedding row in
// the knowledge base index. Tokens matching a lemma become context players.
class SenseInventory {
 public:
  struct Sense {
    std::string sense_id;
    std::size_t embedding_id = 0;
  };

  void Add(const std::string& lemma, Sense sense);
  const std::vector<Sense>* Find(std::string_view token) const;
  bool empty() const { return senses_.empty(); }

  // JSON lines: {"lemma": ..., "sense_id": ..., "embedding_id": ...}.
  static SenseInventory Load(const std::string& path);

 private:
  std::unordered_map<std::string, std::vector<Sense>> senses_;
};

struct MentionInput {
  const CandidateSet* candidates = nullptr;  // after plausibility filtering
  std::span<const float> context_embedding;
};

// Players are the mentions (strategies = surviving candidates, plus NIL when
// enabled) and the sense-inventory tokens of the sentence outside mention
// spans. Throws DataError for a mention without strategies.
Game BuildGame(const Sentence& sentence, std::span<const MentionInput> mentions,
               const KnowledgeBase& kb, const SenseInventory* senses,
               const DynamicsConfig& config);

// Shifted cosine (1 + cos) / 2, in [0, 1].
double ShiftedSimilarity(std::span<const float> a, std::span<const float> b);

// u_h = x_i^h * sum_j A_ij (Z x_j)_h for each strategy h of player i.
std::vector<double> Payoff(const Game& game, std::size_t i);

// One synchronous discrete replicator update of every player:
// x_i^h <- u_h / sum_k u_k. Players with zero total payoff, or with equal
// payoff per unit weight on every strategy, keep their X exactly.
Game ReplicatorStep(Game game);

struct DynamicsResult {
  std::vector<std::vector<double>> x;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // max |delta| per iteration
};

DynamicsResult RunDynamics(const Game& game, const DynamicsConfig& config);

struct LinkDecision {
  std::string mention_id;
  std::string predicted = std::string(histel::kNil);
  double score = 0.0;        // raw retrieval score of the chosen candidate
  double probability = 0.0;  // final mixed-strategy weight (dynamics only)
  std::string heuristic;     // what decided the link
  std::size_t filtered_count = 0;
};

// Argmax of the mention player's final strategy; ties go to the smaller QID
// and NIL loses every tie.
LinkDecision SelectLink(const Game& game, std::span<const std::vector<double>> x,
                        std::size_t player);

// Argmax of raw similarity over surviving candidates. With no survivors the
// result is NIL when nil_enabled, otherwise DataError.
LinkDecision SelectLinkStatic(const CandidateSet& cs, bool nil_enabled);

}  // namespace histel
