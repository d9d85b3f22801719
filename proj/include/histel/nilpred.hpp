#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace histel {

// Candidate scores sorted descending; s0 is the top score.
class ScoreVector {
 public:
  ScoreVector() = default;
  explicit ScoreVector(std::vector<double> scores);

  bool empty() const { return s_.empty(); }
  std::size_t size() const { return s_.size(); }
  double operator[](std::size_t i) const { return s_[i]; }
  const std::vector<double>& values() const { return s_; }
  double Median() const;
  double Mean() const;

 private:
  std::vector<double> s_;
};

// Percentage difference (a - b) / ((a + b) / 2); 0 when a + b == 0.
double RelativeGap(double a, double b);

bool NilFixed(const ScoreVector& s, double tau);
bool NilDevTop(const ScoreVector& s, double tau);
bool NilDevMedian(const ScoreVector& s, double tau);
bool NilDevMean(const ScoreVector& s, double tau);

// Normalised similarities in [0, 1] over code points.
double LevenshteinSimilarity(std::string_view a, std::string_view b);
double JaccardSimilarity(std::string_view a, std::string_view b);  // character bigrams
double HammingSimilarity(std::string_view a, std::string_view b);

enum class NilKind {
  kFixed,
  kDevTop,
  kDevMedian,
  kDevMean,
  kLevenshtein,
  kJaccard,
  kHamming,
  kLogistic,
  kAlwaysNil,
  kNever,
};

std::string_view NilKindName(NilKind k);
std::optional<NilKind> ParseNilKind(std::string_view name);
bool IsScoreKind(NilKind k);
bool IsStringKind(NilKind k);

inline constexpr int kNilFeatureCount = 6;
std::vector<std::string> NilFeatureNames();

// [s0, s0 - s1, dev_top, dev_median, dev_mean, levenshtein-sim]; missing
// scores count as 0.
std::vector<double> NilFeatures(const ScoreVector& s, std::string_view surface,
                                std::string_view label);

struct NilRule {
  NilKind kind = NilKind::kNever;
  double tau = 0.0;
  std::vector<double> weights;  // logistic: bias first, then one per feature
  std::vector<std::string> features;

  // "KIND[:TAU]", e.g. "dev_mean:0.022" or "always-nil".
  static NilRule Parse(std::string_view spec);
  static NilRule FromJson(const nlohmann::json& j);
  static NilRule Load(const std::string& path);
  nlohmann::json ToJson() const;
  std::string ToString() const;
};

struct NilInput {
  const ScoreVector* scores = nullptr;
  std::string_view surface;
  std::string_view label;  // label of the chosen entity
};

bool PredictNil(const NilRule& rule, const NilInput& in);

// Decision of a threshold heuristic with explicit tau (no logistic).
bool NilDecision(NilKind kind, double tau, const NilInput& in);

// One development item for sweeping: gold link and whether the chosen link
// (when not NIL) was correct.
struct SweepItem {
  ScoreVector scores;
  std::string surface;
  std::string label;
  bool gold_nil = false;
  bool link_correct = false;  // the linker's choice equals the gold QID
};

struct SweepResult {
  double tau = 0.0;
  double f1 = 0.0;
};

// Grid i / 1000, i = 0..1000; ties go to the smallest tau.
SweepResult SweepTau(NilKind kind, std::span<const SweepItem> dev);

double Sigmoid(double z);

struct LogisticData {
  std::vector<std::vector<double>> x;
  std::vector<int> y;  // 1 = NIL
};

// Mean cross-entropy and its gradient w.r.t. [bias, w...].
double LogisticLoss(std::span<const double> w, const LogisticData& data);
std::vector<double> LogisticGradient(std::span<const double> w, const LogisticData& data);

struct TrainResult {
  NilRule rule;
  std::vector<std::string> warnings;
};

TrainResult LogisticTrain(const LogisticData& data, int epochs, double lr);
double LogisticProbability(const NilRule& rule, std::span<const double> features);
bool LogisticPredict(const NilRule& rule, std::span<const double> features);

// Heuristic input normalisation: shifted cosine for unit embeddings,
// min-max over the candidate set otherwise.
std::vector<double> NormalizeScores(std::span<const double> raw, bool unit_embeddings);

}  // namespace histel
