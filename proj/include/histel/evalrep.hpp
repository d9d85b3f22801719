#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "histel/corpus.hpp"
#include "histel/kbstore.hpp"
#include "histel/retrieval.hpp"

namespace histel {

// One line of a predictions file.
struct Prediction {
  std::string mention_id;
  std::string predicted;
  double score = 0.0;
  std::string heuristic;
  std::size_t filtered_count = 0;
};

nlohmann::json PredictionToJson(const Prediction& p);
Prediction PredictionFromJson(const nlohmann::json& j);
std::vector<Prediction> ReadPredictions(const std::string& path);

struct EvalResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long n_correct = 0;
  long n_wrong = 0;    // emitted and wrong
  long n_missing = 0;  // no prediction for the mention
  long n_total = 0;
};

// Micro scores over mentions. A prediction is correct iff it equals the gold
// link (NIL included). Throws DataError on an unknown or duplicated mention id.
EvalResult Score(std::span<const Prediction> predictions, std::span<const MentionAnnotation> gold);

struct PlausibilityResult {
  long n = 0;  // non-NIL gold mentions
  double year_accuracy = 0.0;
  double year_f1 = 0.0;
  double type_accuracy = 0.0;
  double type_f1 = 0.0;
};

// NIL-gold mentions are skipped; a NIL or missing answer counts as a false
// negative, an implausible QID as a false positive.
PlausibilityResult PlausibilityScore(std::span<const Prediction> predictions,
                                     std::span<const MentionAnnotation> gold,
                                     const KnowledgeBase& kb);

struct ErrorBucket {
  bool target_nil = false;
  bool target_in_topk = false;
  bool predicted_nil = false;

  auto operator<=>(const ErrorBucket&) const = default;
};

struct ErrorBreakdown {
  long n_errors = 0;
  std::map<ErrorBucket, long> counts;

  double Share(const ErrorBucket& b) const;
};

// A missing prediction counts as NIL. For NIL targets "in top-k" means the
// run offered a NIL strategy for the mention.
ErrorBreakdown BreakdownErrors(std::span<const Prediction> predictions,
                               std::span<const MentionAnnotation> gold,
                               std::span<const CandidateRecord> candidates);

// units[u][c] = label of coder c on unit u, nullopt when missing. Nominal
// metric over the coincidence matrix; units with fewer than two codings are
// dropped. Throws DataError when nothing is pairable.
double KrippendorffAlpha(const std::vector<std::vector<std::optional<std::string>>>& units);

struct SpearmanResult {
  double rho = 0.0;
  double p_value = 1.0;  // two-sided, Student t approximation
  std::size_t n = 0;
};

std::vector<double> AverageRanks(std::span<const double> v);

// nullopt when either input is constant. Throws DataError on length
// mismatch or fewer than three pairs.
std::optional<SpearmanResult> Spearman(std::span<const double> x, std::span<const double> y);

// Share of all scored mentions whose wrong QID answer is strictly more
// popular than the gold entity.
double PopularityPreference(std::span<const Prediction> predictions,
                            std::span<const MentionAnnotation> gold, const KnowledgeBase& kb);

struct HistogramBin {
  double lower = 0.0;
  double upper = 0.0;
  long count = 0;
};

// Log10 bins [10^e, 10^(e+1)) over the distinct non-NIL gold entities found
// in the KB; popularity 0 goes to [0, 1). Bins are contiguous from the lowest
// to the highest occupied one.
std::vector<HistogramBin> PopularityHistogram(const KnowledgeBase& kb,
                                              std::span<const std::string> gold_links);
std::string HistogramCsv(std::span<const HistogramBin> bins);

nlohmann::json EvalResultToJson(const EvalResult& r);
nlohmann::json PlausibilityToJson(const PlausibilityResult& r);
nlohmann::json BreakdownToJson(const ErrorBreakdown& b);
std::string EvalReportText(const EvalResult& r, const std::optional<PlausibilityResult>& p,
                           const std::optional<ErrorBreakdown>& b);

}  // namespace histel
