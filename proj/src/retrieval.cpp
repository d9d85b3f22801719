#include "histel/retrieval.hpp"

#include <algorithm>
#include <fstream>

#include "histel/errors.hpp"
#include "histel/kernels.hpp"
#include "histel/text.hpp"

namespace histel {

namespace {

bool Ranks(const Candidate& a, const Candidate& b) {
  if (a.survives() != b.survives()) return a.survives();
  if (a.score != b.score) return a.score > b.score;
  return QidLess(a.qid, b.qid);
}

}  // namespace

std::string_view ConstraintName(Constraint c) {
  return c == Constraint::kTime ? "phi_d" : "phi_t";
}

ConstraintSet ConstraintSet::Parse(std::string_view spec) {
  ConstraintSet out;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    auto comma = spec.find(',', pos);
    if (comma == std::string_view::npos) comma = spec.size();
    const auto name = Trim(spec.substr(pos, comma - pos));
    if (name == "phi_d") {
      out.time = true;
    } else if (name == "phi_t") {
      out.type = true;
    } else if (!name.empty() && name != "none") {
      throw ConfigError("unknown constraint '" + std::string(name) + "' (expected phi_d, phi_t)");
    }
    pos = comma + 1;
  }
  return out;
}

std::string ConstraintSet::ToString() const {
  if (time && type) return "phi_d,phi_t";
  if (time) return "phi_d";
  if (type) return "phi_t";
  return "";
}

std::vector<const Candidate*> CandidateSet::Survivors() const {
  std::vector<const Candidate*> out;
  for (const auto& c : candidates) {
    if (c.survives()) out.push_back(&c);
  }
  return out;
}

std::size_t CandidateSet::FilteredCount() const {
  return static_cast<std::size_t>(std::count_if(candidates.begin(), candidates.end(),
                                                [](const Candidate& c) { return !c.survives(); }));
}

CandidateSet Retrieve(const MentionAnnotation& mention, std::span<const float> context_embedding,
                      const KnowledgeBase& kb, int k, ScanMode mode) {
  if (k < 1) throw ConfigError("retrieval depth k must be >= 1");
  CandidateSet out;
  out.mention = mention;
  out.k = k;
  const EmbeddingIndex& index = kb.embeddings();
  if (kb.empty() || index.size() == 0) return out;

  std::vector<double> row_scores(index.size());
  if (mode == ScanMode::kParallel) {
    kernels::DenseScoresParallel(index, context_embedding, row_scores);
  } else {
    kernels::DenseScoresSerial(index, context_embedding, row_scores);
  }

  std::vector<Candidate> pool;
  pool.reserve(kb.size());
  for (std::size_t i = 0; i < kb.size(); ++i) {
    const auto& e = kb.entity(i);
    if (!e.embedding_id) continue;
    pool.push_back(Candidate{e.qid, i, row_scores[*e.embedding_id], std::nullopt});
  }
  const auto limit = static_cast<std::size_t>(k);

  std::vector<Candidate> chosen;
  std::vector<char> taken(kb.size(), 0);
  // Alias matches first, best-scored up to k.
  std::vector<Candidate> aliases;
  for (std::size_t i : kb.LookupAlias(mention.surface)) {
    const auto& e = kb.entity(i);
    if (!e.embedding_id) continue;
    aliases.push_back(Candidate{e.qid, i, row_scores[*e.embedding_id], std::nullopt});
  }
  std::sort(aliases.begin(), aliases.end(), Ranks);
  for (auto& c : aliases) {
    if (chosen.size() == limit) break;
    taken[c.entity] = 1;
    chosen.push_back(std::move(c));
  }
  // Dense top-k fills the remaining slots. At most chosen.size() of the
  // dense leaders can already be taken, so ranking k + that many suffices.
  const std::size_t want = std::min(pool.size(), limit + chosen.size());
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(want), pool.end(),
                    Ranks);
  for (std::size_t i = 0; i < want && chosen.size() < limit; ++i) {
    if (taken[pool[i].entity]) continue;
    taken[pool[i].entity] = 1;
    chosen.push_back(pool[i]);
  }
  std::sort(chosen.begin(), chosen.end(), Ranks);
  out.candidates = std::move(chosen);
  return out;
}

bool PhiD(int document_year, std::optional<int> entity_year) {
  return !entity_year || *entity_year <= document_year;
}

bool PhiT(std::string_view mention_ner_type, const std::set<std::string>& entity_ner_types,
          const TypeTaxonomy& tax) {
  if (entity_ner_types.empty()) return true;
  return TypesCompatible({std::string(mention_ner_type)}, entity_ner_types, tax);
}

CandidateSet ApplyConstraints(const CandidateSet& cs, const ConstraintSet& constraints,
                              const KnowledgeBase& kb, int document_year) {
  CandidateSet out = cs;
  if (constraints.empty()) return out;
  for (auto& c : out.candidates) {
    if (c.filtered_by) continue;
    if (constraints.time && !PhiD(document_year, kb.EntityYear(c.entity))) {
      c.filtered_by = Constraint::kTime;
    } else if (constraints.type &&
               !PhiT(cs.mention.ner_type, kb.entity(c.entity).ner_types, kb.taxonomy())) {
      c.filtered_by = Constraint::kType;
    }
  }
  std::stable_sort(out.candidates.begin(), out.candidates.end(), Ranks);
  return out;
}

nlohmann::json CandidateSetToJson(const CandidateSet& cs, bool nil_strategy) {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : cs.candidates) {
    cands.push_back({{"qid", c.qid},
                     {"score", c.score},
                     {"filtered_by", c.filtered_by ? nlohmann::json(std::string(
                                                         ConstraintName(*c.filtered_by)))
                                                   : nlohmann::json()}});
  }
  return {{"mention_id", cs.mention.Id()},
          {"surface", cs.mention.surface},
          {"ner_type", cs.mention.ner_type},
          {"document_date", cs.mention.document_date},
          {"k", cs.k},
          {"nil_strategy", nil_strategy},
          {"candidates", cands}};
}

CandidateRecord CandidateRecordFromJson(const nlohmann::json& j) {
  CandidateRecord r;
  r.mention_id = j.at("mention_id").get<std::string>();
  r.nil_strategy = j.value("nil_strategy", false);
  for (const auto& c : j.at("candidates")) {
    const auto qid = c.at("qid").get<std::string>();
    if (c.contains("filtered_by") && !c.at("filtered_by").is_null()) {
      r.filtered.push_back(qid);
    } else {
      r.survivors.push_back(qid);
      r.survivor_scores.push_back(c.at("score").get<double>());
    }
  }
  return r;
}

std::vector<CandidateRecord> ReadCandidateDump(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open candidate dump '" + path + "'");
  std::vector<CandidateRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    try {
      out.push_back(CandidateRecordFromJson(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what(), path);
    }
  }
  return out;
}

}  // namespace histel
