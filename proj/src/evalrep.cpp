#include "histel/evalrep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include <boost/math/distributions/students_t.hpp>

#include "histel/errors.hpp"
#include "histel/text.hpp"

namespace histel {

nlohmann::json PredictionToJson(const Prediction& p) {
  return {{"mention_id", p.mention_id},
          {"predicted", p.predicted},
          {"score", p.score},
          {"heuristic", p.heuristic},
          {"filtered_count", p.filtered_count}};
}

Prediction PredictionFromJson(const nlohmann::json& j) {
  Prediction p;
  p.mention_id = j.at("mention_id").get<std::string>();
  p.predicted = j.at("predicted").get<std::string>();
  if (p.predicted != kNil && !IsQid(p.predicted)) {
    throw DataError("prediction for " + p.mention_id + " is neither a QID nor NIL");
  }
  p.score = j.value("score", 0.0);
  p.heuristic = j.value("heuristic", std::string{});
  p.filtered_count = j.value("filtered_count", std::size_t{0});
  return p;
}

std::vector<Prediction> ReadPredictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions '" + path + "'");
  std::vector<Prediction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    try {
      out.push_back(PredictionFromJson(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what(), path);
    } catch (const DataError& e) {
      throw ParseError(line_no, e.what(), path);
    }
  }
  return out;
}

namespace {

// mention id -> prediction, validated against the gold mentions.
std::unordered_map<std::string, const Prediction*> IndexPredictions(
    std::span<const Prediction> predictions, std::span<const MentionAnnotation> gold) {
  std::set<std::string> ids;
  for (const auto& m : gold) ids.insert(m.Id());
  std::unordered_map<std::string, const Prediction*> out;
  for (const auto& p : predictions) {
    if (!ids.count(p.mention_id)) throw DataError("prediction for unknown mention " + p.mention_id);
    if (!out.emplace(p.mention_id, &p).second) {
      throw DataError("duplicate prediction for mention " + p.mention_id);
    }
  }
  return out;
}

double F1(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

double Ratio(long a, long b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); }

}  // namespace

EvalResult Score(std::span<const Prediction> predictions, std::span<const MentionAnnotation> gold) {
  const auto index = IndexPredictions(predictions, gold);
  EvalResult r;
  r.n_total = static_cast<long>(gold.size());
  for (const auto& m : gold) {
    const auto it = index.find(m.Id());
    if (it == index.end()) {
      ++r.n_missing;
    } else if (it->second->predicted == m.gold_link) {
      ++r.n_correct;
    } else {
      ++r.n_wrong;
    }
  }
  r.precision = Ratio(r.n_correct, r.n_correct + r.n_wrong);
  r.recall = Ratio(r.n_correct, r.n_total);
  r.f1 = F1(r.precision, r.recall);
  return r;
}

PlausibilityResult PlausibilityScore(std::span<const Prediction> predictions,
                                     std::span<const MentionAnnotation> gold,
                                     const KnowledgeBase& kb) {
  const auto index = IndexPredictions(predictions, gold);
  PlausibilityResult r;
  long year_tp = 0, year_fp = 0, type_tp = 0, type_fp = 0, empty = 0;
  for (const auto& m : gold) {
    if (m.gold_link == kNil) continue;
    ++r.n;
    const auto it = index.find(m.Id());
    if (it == index.end() || it->second->predicted == kNil) {
      ++empty;
      continue;
    }
    std::optional<int> year;
    std::set<std::string> types;
    if (const auto e = kb.Find(it->second->predicted)) {
      year = kb.EntityYear(*e);
      types = kb.entity(*e).ner_types;
    }
    (PhiD(m.document_date, year) ? year_tp : year_fp) += 1;
    (PhiT(m.ner_type, types, kb.taxonomy()) ? type_tp : type_fp) += 1;
  }
  r.year_accuracy = Ratio(year_tp, r.n);
  r.type_accuracy = Ratio(type_tp, r.n);
  r.year_f1 = F1(Ratio(year_tp, year_tp + year_fp), Ratio(year_tp, year_tp + empty));
  r.type_f1 = F1(Ratio(type_tp, type_tp + type_fp), Ratio(type_tp, type_tp + empty));
  return r;
}

double ErrorBreakdown::Share(const ErrorBucket& b) const {
  const auto it = counts.find(b);
  return it == counts.end() ? 0.0 : Ratio(it->second, n_errors);
}

ErrorBreakdown BreakdownErrors(std::span<const Prediction> predictions,
                               std::span<const MentionAnnotation> gold,
                               std::span<const CandidateRecord> candidates) {
  const auto index = IndexPredictions(predictions, gold);
  std::unordered_map<std::string, const CandidateRecord*> by_id;
  for (const auto& c : candidates) by_id.emplace(c.mention_id, &c);
  ErrorBreakdown out;
  for (const auto& m : gold) {
    const auto it = index.find(m.Id());
    const std::string predicted = it == index.end() ? std::string(kNil) : it->second->predicted;
    if (predicted == m.gold_link) continue;
    ErrorBucket b;
    b.target_nil = m.gold_link == kNil;
    b.predicted_nil = predicted == kNil;
    if (const auto c = by_id.find(m.Id()); c != by_id.end()) {
      const auto& rec = *c->second;
      b.target_in_topk = b.target_nil ? rec.nil_strategy
                                      : std::find(rec.survivors.begin(), rec.survivors.end(),
                                                  m.gold_link) != rec.survivors.end();
    }
    ++out.counts[b];
    ++out.n_errors;
  }
  return out;
}

double KrippendorffAlpha(const std::vector<std::vector<std::optional<std::string>>>& units) {
  std::map<std::string, std::size_t> category;
  std::vector<std::vector<std::size_t>> pairable;
  for (const auto& unit : units) {
    std::vector<std::size_t> values;
    for (const auto& v : unit) {
      if (v) values.push_back(category.try_emplace(*v, category.size()).first->second);
    }
    if (values.size() >= 2) pairable.push_back(std::move(values));
  }
  if (pairable.empty()) throw DataError("no unit has two or more codings");
  const std::size_t c = category.size();
  std::vector<double> o(c * c, 0.0);
  for (const auto& values : pairable) {
    const double w = 1.0 / static_cast<double>(values.size() - 1);
    for (std::size_t i = 0; i < values.size(); ++i) {
      for (std::size_t j = 0; j < values.size(); ++j) {
        if (i != j) o[values[i] * c + values[j]] += w;
      }
    }
  }
  std::vector<double> nc(c, 0.0);
  double n = 0.0;
  for (std::size_t a = 0; a < c; ++a) {
    for (std::size_t b = 0; b < c; ++b) nc[a] += o[a * c + b];
    n += nc[a];
  }
  double d_o = 0.0, d_e = 0.0;
  for (std::size_t a = 0; a < c; ++a) {
    for (std::size_t b = 0; b < c; ++b) {
      if (a == b) continue;
      d_o += o[a * c + b];
      d_e += nc[a] * nc[b];
    }
  }
  d_o /= n;
  d_e /= n * (n - 1.0);
  if (d_o == 0.0) return 1.0;
  return 1.0 - d_o / d_e;
}

std::vector<double> AverageRanks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

std::optional<SpearmanResult> Spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("spearman: inputs differ in length");
  if (x.size() < 3) throw DataError("spearman: needs at least three pairs");
  const auto rx = AverageRanks(x);
  const auto ry = AverageRanks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  SpearmanResult r;
  r.n = x.size();
  r.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  if (std::abs(r.rho) >= 1.0) {
    r.p_value = 0.0;
  } else {
    const double df = n - 2.0;
    const double t = r.rho * std::sqrt(df / (1.0 - r.rho * r.rho));
    boost::math::students_t dist(df);
    r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  return r;
}

double PopularityPreference(std::span<const Prediction> predictions,
                            std::span<const MentionAnnotation> gold, const KnowledgeBase& kb) {
  const auto index = IndexPredictions(predictions, gold);
  long more_popular = 0;
  for (const auto& m : gold) {
    const auto it = index.find(m.Id());
    if (it == index.end() || m.gold_link == kNil) continue;
    const auto& p = it->second->predicted;
    if (p == kNil || p == m.gold_link) continue;
    const auto pe = kb.Find(p);
    const auto ge = kb.Find(m.gold_link);
    if (pe && ge && kb.entity(*pe).popularity > kb.entity(*ge).popularity) ++more_popular;
  }
  return Ratio(more_popular, static_cast<long>(gold.size()));
}

std::vector<HistogramBin> PopularityHistogram(const KnowledgeBase& kb,
                                              std::span<const std::string> gold_links) {
  std::set<std::string> seen;
  std::map<int, long> by_exp;  // -1 holds popularity 0
  for (const auto& q : gold_links) {
    if (q == kNil || !seen.insert(q).second) continue;
    const auto e = kb.Find(q);
    if (!e) continue;
    const auto pop = kb.entity(*e).popularity;
    int exp = -1;
    if (pop >= 1) {
      exp = 0;
      for (std::int64_t v = pop; v >= 10; v /= 10) ++exp;
    }
    ++by_exp[exp];
  }
  std::vector<HistogramBin> bins;
  if (by_exp.empty()) return bins;
  for (int e = by_exp.begin()->first; e <= by_exp.rbegin()->first; ++e) {
    HistogramBin b;
    b.lower = e < 0 ? 0.0 : std::pow(10.0, e);
    b.upper = std::pow(10.0, e + 1);
    const auto it = by_exp.find(e);
    b.count = it == by_exp.end() ? 0 : it->second;
    bins.push_back(b);
  }
  return bins;
}

std::string HistogramCsv(std::span<const HistogramBin> bins) {
  std::ostringstream out;
  out << "lower,upper,count\n";
  for (const auto& b : bins) out << b.lower << ',' << b.upper << ',' << b.count << '\n';
  return out.str();
}

nlohmann::json EvalResultToJson(const EvalResult& r) {
  return {{"precision", r.precision}, {"recall", r.recall},   {"f1", r.f1},
          {"n_correct", r.n_correct}, {"n_wrong", r.n_wrong}, {"n_missing", r.n_missing},
          {"n_total", r.n_total}};
}

nlohmann::json PlausibilityToJson(const PlausibilityResult& r) {
  return {{"n", r.n},
          {"year_accuracy", r.year_accuracy},
          {"year_f1", r.year_f1},
          {"type_accuracy", r.type_accuracy},
          {"type_f1", r.type_f1}};
}

namespace {

std::string BucketLabel(const ErrorBucket& b) {
  return std::string(b.target_nil ? "NIL" : "QID") + "," + (b.target_in_topk ? "in_topk" : "not_in_topk") +
         "," + (b.predicted_nil ? "NIL" : "QID");
}

}  // namespace

nlohmann::json BreakdownToJson(const ErrorBreakdown& b) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [bucket, count] : b.counts) {
    rows.push_back({{"target", bucket.target_nil ? "NIL" : "QID"},
                    {"target_in_topk", bucket.target_in_topk},
                    {"predicted", bucket.predicted_nil ? "NIL" : "QID"},
                    {"count", count},
                    {"share", b.Share(bucket)}});
  }
  return {{"n_errors", b.n_errors}, {"rows", rows}};
}

std::string EvalReportText(const EvalResult& r, const std::optional<PlausibilityResult>& p,
                           const std::optional<ErrorBreakdown>& b) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "mentions   " << r.n_total << "  correct " << r.n_correct << "  wrong " << r.n_wrong
      << "  missing " << r.n_missing << '\n';
  out << "precision  " << r.precision << '\n' << "recall     " << r.recall << '\n'
      << "f1         " << r.f1 << '\n';
  if (p) {
    out << "\nplausibility (" << p->n << " non-NIL mentions)\n";
    out << "  year  acc " << p->year_accuracy << "  f1 " << p->year_f1 << '\n';
    out << "  type  acc " << p->type_accuracy << "  f1 " << p->type_f1 << '\n';
  }
  if (b) {
    out << "\nerrors (" << b->n_errors << ")  target,in_topk,predicted\n";
    for (const auto& [bucket, count] : b->counts) {
      out << "  " << std::left << std::setw(22) << BucketLabel(bucket) << std::right << ' '
          << count << "  " << b->Share(bucket) << '\n';
    }
  }
  return out.str();
}

}  // namespace histel
