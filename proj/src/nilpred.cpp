#include "histel/nilpred.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>

#include "histel/errors.hpp"
#include "histel/text.hpp"

namespace histel {

ScoreVector::ScoreVector(std::vector<double> scores) : s_(std::move(scores)) {
  std::sort(s_.begin(), s_.end(), std::greater<>());
}

double ScoreVector::Median() const {
  if (s_.empty()) return 0.0;
  const std::size_t n = s_.size();
  return n % 2 ? s_[n / 2] : (s_[n / 2 - 1] + s_[n / 2]) / 2.0;
}

double ScoreVector::Mean() const {
  if (s_.empty()) return 0.0;
  return std::accumulate(s_.begin(), s_.end(), 0.0) / static_cast<double>(s_.size());
}

double RelativeGap(double a, double b) {
  const double den = (a + b) / 2.0;
  return den == 0.0 ? 0.0 : (a - b) / den;
}

bool NilFixed(const ScoreVector& s, double tau) { return s.empty() || s[0] < tau; }

bool NilDevTop(const ScoreVector& s, double tau) {
  if (s.size() < 2) return NilFixed(s, tau);
  return RelativeGap(s[0], s[1]) < tau;
}

bool NilDevMedian(const ScoreVector& s, double tau) {
  return s.empty() || RelativeGap(s[0], s.Median()) < tau;
}

bool NilDevMean(const ScoreVector& s, double tau) {
  return s.empty() || RelativeGap(s[0], s.Mean()) < tau;
}

// --- string similarities ----------------------------------------------------------

double LevenshteinSimilarity(std::string_view a, std::string_view b) {
  const auto x = DecodeUtf8(a);
  const auto y = DecodeUtf8(b);
  const std::size_t longest = std::max(x.size(), y.size());
  if (longest == 0) return 1.0;
  std::vector<std::size_t> prev(y.size() + 1), cur(y.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x[i - 1] != y[j - 1])});
    }
    std::swap(prev, cur);
  }
  return 1.0 - static_cast<double>(prev[y.size()]) / static_cast<double>(longest);
}

double JaccardSimilarity(std::string_view a, std::string_view b) {
  auto bigrams = [](std::string_view s) {
    const auto cps = DecodeUtf8(s);
    std::set<std::pair<char32_t, char32_t>> out;
    for (std::size_t i = 0; i + 1 < cps.size(); ++i) out.emplace(cps[i], cps[i + 1]);
    return out;
  };
  const auto x = bigrams(a);
  const auto y = bigrams(b);
  if (x.empty() && y.empty()) return a == b ? 1.0 : 0.0;
  std::size_t inter = 0;
  for (const auto& g : x) inter += y.count(g);
  return static_cast<double>(inter) / static_cast<double>(x.size() + y.size() - inter);
}

double HammingSimilarity(std::string_view a, std::string_view b) {
  const auto x = DecodeUtf8(a);
  const auto y = DecodeUtf8(b);
  const std::size_t longest = std::max(x.size(), y.size());
  if (longest == 0) return 1.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) same += x[i] == y[i];
  return static_cast<double>(same) / static_cast<double>(longest);
}

// --- rules ------------------------------------------------------------------------

namespace {

struct KindName {
  NilKind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {NilKind::kFixed, "fixed"},           {NilKind::kDevTop, "dev_top"},
    {NilKind::kDevMedian, "dev_median"},  {NilKind::kDevMean, "dev_mean"},
    {NilKind::kLevenshtein, "levenshtein"}, {NilKind::kJaccard, "jaccard"},
    {NilKind::kHamming, "hamming"},       {NilKind::kLogistic, "logistic"},
    {NilKind::kAlwaysNil, "always-nil"},  {NilKind::kNever, "none"},
};

}  // namespace

std::string_view NilKindName(NilKind k) {
  for (const auto& kn : kKindNames) {
    if (kn.kind == k) return kn.name;
  }
  return "?";
}

std::optional<NilKind> ParseNilKind(std::string_view name) {
  std::string n = ToLowerAscii(name);
  std::replace(n.begin(), n.end(), '-', '_');
  if (n == "always_nil") return NilKind::kAlwaysNil;
  for (const auto& kn : kKindNames) {
    if (kn.name == n) return kn.kind;
  }
  return std::nullopt;
}

bool IsScoreKind(NilKind k) {
  return k == NilKind::kFixed || k == NilKind::kDevTop || k == NilKind::kDevMedian ||
         k == NilKind::kDevMean;
}

bool IsStringKind(NilKind k) {
  return k == NilKind::kLevenshtein || k == NilKind::kJaccard || k == NilKind::kHamming;
}

std::vector<std::string> NilFeatureNames() {
  return {"s0", "s0_minus_s1", "dev_top", "dev_median", "dev_mean", "levenshtein"};
}

std::vector<double> NilFeatures(const ScoreVector& s, std::string_view surface,
                                std::string_view label) {
  const double s0 = s.empty() ? 0.0 : s[0];
  const double s1 = s.size() > 1 ? s[1] : 0.0;
  return {s0,
          s0 - s1,
          RelativeGap(s0, s1),
          RelativeGap(s0, s.Median()),
          RelativeGap(s0, s.Mean()),
          LevenshteinSimilarity(surface, label)};
}

NilRule NilRule::Parse(std::string_view spec) {
  const auto colon = spec.find(':');
  const auto name = Trim(spec.substr(0, colon));
  const auto kind = ParseNilKind(name);
  if (!kind) throw ConfigError("unknown NIL rule '" + std::string(name) + "'");
  NilRule rule;
  rule.kind = *kind;
  if (colon != std::string_view::npos) {
    const std::string t(Trim(spec.substr(colon + 1)));
    char* end = nullptr;
    rule.tau = std::strtod(t.c_str(), &end);
    if (t.empty() || *end != '\0') throw ConfigError("bad NIL threshold '" + t + "'");
  } else if (IsScoreKind(*kind) || IsStringKind(*kind)) {
    throw ConfigError("NIL rule '" + std::string(name) + "' needs a threshold (KIND:TAU)");
  }
  if (!(rule.tau >= 0.0 && rule.tau <= 1.0)) throw ConfigError("NIL threshold must be in [0, 1]");
  if (rule.kind == NilKind::kLogistic) {
    throw ConfigError("logistic NIL rules are loaded from a trained rule file");
  }
  return rule;
}

NilRule NilRule::FromJson(const nlohmann::json& j) {
  NilRule rule;
  const auto kind = ParseNilKind(j.at("kind").get<std::string>());
  if (!kind) throw ConfigError("unknown NIL rule kind in rule file");
  rule.kind = *kind;
  rule.tau = j.value("tau", 0.0);
  if (!(rule.tau >= 0.0 && rule.tau <= 1.0)) throw ConfigError("NIL threshold must be in [0, 1]");
  rule.weights = j.value("weights", std::vector<double>{});
  rule.features = j.value("features", std::vector<std::string>{});
  if (rule.kind == NilKind::kLogistic) {
    if (rule.features != NilFeatureNames()) {
      throw ConfigError("logistic rule feature order does not match this build");
    }
    if (rule.weights.size() != rule.features.size() + 1) {
      throw ConfigError("logistic rule needs bias + one weight per feature");
    }
  }
  return rule;
}

NilRule NilRule::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open NIL rule file '" + path + "'");
  try {
    return FromJson(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

nlohmann::json NilRule::ToJson() const {
  nlohmann::json j;
  j["kind"] = NilKindName(kind);
  j["tau"] = tau;
  j["weights"] = weights;
  j["features"] = features;
  return j;
}

std::string NilRule::ToString() const {
  if (IsScoreKind(kind) || IsStringKind(kind)) {
    return std::string(NilKindName(kind)) + ":" + nlohmann::json(tau).dump();
  }
  return std::string(NilKindName(kind));
}

bool NilDecision(NilKind kind, double tau, const NilInput& in) {
  static const ScoreVector kEmpty;
  const ScoreVector& s = in.scores ? *in.scores : kEmpty;
  switch (kind) {
    case NilKind::kFixed: return NilFixed(s, tau);
    case NilKind::kDevTop: return NilDevTop(s, tau);
    case NilKind::kDevMedian: return NilDevMedian(s, tau);
    case NilKind::kDevMean: return NilDevMean(s, tau);
    case NilKind::kLevenshtein:
      return s.empty() || LevenshteinSimilarity(in.surface, in.label) < tau;
    case NilKind::kJaccard: return s.empty() || JaccardSimilarity(in.surface, in.label) < tau;
    case NilKind::kHamming: return s.empty() || HammingSimilarity(in.surface, in.label) < tau;
    case NilKind::kAlwaysNil: return true;
    case NilKind::kNever: return s.empty();
    case NilKind::kLogistic: break;
  }
  throw ConfigError("NilDecision does not handle logistic rules");
}

bool PredictNil(const NilRule& rule, const NilInput& in) {
  if (rule.kind != NilKind::kLogistic) return NilDecision(rule.kind, rule.tau, in);
  if (!in.scores || in.scores->empty()) return true;
  return LogisticPredict(rule, NilFeatures(*in.scores, in.surface, in.label));
}

SweepResult SweepTau(NilKind kind, std::span<const SweepItem> dev) {
  if (dev.empty()) throw DataError("threshold sweep needs development data");
  if (!IsScoreKind(kind) && !IsStringKind(kind)) {
    throw ConfigError("rule '" + std::string(NilKindName(kind)) + "' has no threshold");
  }
  SweepResult best{0.0, -1.0};
  for (int i = 0; i <= 1000; ++i) {
    const double tau = i / 1000.0;
    std::size_t correct = 0;
    for (const auto& item : dev) {
      const bool nil = NilDecision(kind, tau, NilInput{&item.scores, item.surface, item.label});
      correct += nil ? item.gold_nil : (!item.gold_nil && item.link_correct);
    }
    // One prediction per mention: micro P = R = F1 = accuracy.
    const double f1 = static_cast<double>(correct) / static_cast<double>(dev.size());
    if (f1 > best.f1) best = {tau, f1};
  }
  return best;
}

// --- logistic regression ------------------------------------------------------------

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

double Logit(std::span<const double> w, std::span<const double> x) {
  double z = w[0];
  for (std::size_t d = 0; d < x.size(); ++d) z += w[d + 1] * x[d];
  return z;
}

void CheckData(std::span<const double> w, const LogisticData& data) {
  if (data.x.size() != data.y.size()) throw DataError("logistic data: feature/label count mismatch");
  for (const auto& row : data.x) {
    if (row.size() + 1 != w.size()) throw DataError("logistic data: feature width mismatch");
  }
}

}  // namespace

double LogisticLoss(std::span<const double> w, const LogisticData& data) {
  CheckData(w, data);
  if (data.x.empty()) return 0.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    const double z = Logit(w, data.x[i]);
    // log(1 + e^z) - y z, computed stably.
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    loss += softplus - data.y[i] * z;
  }
  return loss / static_cast<double>(data.x.size());
}

std::vector<double> LogisticGradient(std::span<const double> w, const LogisticData& data) {
  CheckData(w, data);
  std::vector<double> g(w.size(), 0.0);
  if (data.x.empty()) return g;
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    const double r = Sigmoid(Logit(w, data.x[i])) - data.y[i];
    g[0] += r;
    for (std::size_t d = 0; d < data.x[i].size(); ++d) g[d + 1] += r * data.x[i][d];
  }
  for (double& v : g) v /= static_cast<double>(data.x.size());
  return g;
}

TrainResult LogisticTrain(const LogisticData& data, int epochs, double lr) {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
  TrainResult out;
  out.rule.kind = NilKind::kLogistic;
  out.rule.features = NilFeatureNames();
  out.rule.weights.assign(kNilFeatureCount + 1, 0.0);
  CheckData(out.rule.weights, data);
  const auto positives = std::count(data.y.begin(), data.y.end(), 1);
  if (positives == 0 || positives == static_cast<long>(data.y.size())) {
    // Constant predictor: bias only.
    out.rule.weights[0] = positives == 0 ? -4.0 : 4.0;
    out.warnings.push_back("training data has a single class; emitting a constant predictor");
    return out;
  }
  for (int e = 0; e < epochs; ++e) {
    const auto g = LogisticGradient(out.rule.weights, data);
    for (std::size_t d = 0; d < g.size(); ++d) out.rule.weights[d] -= lr * g[d];
  }
  return out;
}

double LogisticProbability(const NilRule& rule, std::span<const double> features) {
  if (rule.weights.size() != features.size() + 1) {
    throw DataError("logistic rule width does not match features");
  }
  return Sigmoid(Logit(rule.weights, features));
}

bool LogisticPredict(const NilRule& rule, std::span<const double> features) {
  return LogisticProbability(rule, features) > 0.5;
}

std::vector<double> NormalizeScores(std::span<const double> raw, bool unit_embeddings) {
  std::vector<double> out(raw.begin(), raw.end());
  if (unit_embeddings) {
    for (double& v : out) v = std::clamp((1.0 + v) / 2.0, 0.0, 1.0);
    return out;
  }
  if (out.empty()) return out;
  const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  const double a = *lo;
  const double span = *hi - a;
  for (double& v : out) v = span > 0.0 ? (v - a) / span : 1.0;
  return out;
}

}  // namespace histel
