#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "histel/corpus.hpp"
#include "histel/kbstore.hpp"

namespace histel {

enum class Constraint { kTime, kType };  // phi_d, phi_t

std::string_view ConstraintName(Constraint c);

// Enabled plausibility constraints. Evaluation order is time, then type.
struct ConstraintSet {
  bool time = false;
  bool type = false;

  bool empty() const { return !time && !type; }
  // "phi_d,phi_t", "phi_d", "" ...; throws ConfigError on unknown names.
  static ConstraintSet Parse(std::string_view spec);
  std::string ToString() const;
};

struct Candidate {
  std::string qid;
  std::size_t entity = 0;  // index into the knowledge base
  double score = 0.0;
  std::optional<Constraint> filtered_by;

  bool survives() const { return !filtered_by.has_value(); }
  bool operator==(const Candidate&) const = default;
};

struct CandidateSet {
  MentionAnnotation mention;
  // Survivors first, each group by descending score, ties by ascending QID.
  std::vector<Candidate> candidates;
  int k = 0;

  std::vector<const Candidate*> Survivors() const;
  std::size_t FilteredCount() const;
};

enum class ScanMode { kSerial, kParallel };

// Top-k entities by inner product with the context embedding, with alias
// matches of the mention surface guaranteed a slot (scored densely, no
// bonus). Entities without an embedding are not retrievable.
CandidateSet Retrieve(const MentionAnnotation& mention, std::span<const float> context_embedding,
                      const KnowledgeBase& kb, int k, ScanMode mode = ScanMode::kSerial);

// Time plausibility: the entity must not postdate the document. A missing
// entity date is plausible.
bool PhiD(int document_year, std::optional<int> entity_year);

// Type plausibility: entities without mapped types are plausible.
bool PhiT(std::string_view mention_ner_type, const std::set<std::string>& entity_ner_types,
          const TypeTaxonomy& tax);

// Marks each candidate failing an enabled constraint with the first failing
// one. Scores are left untouched.
CandidateSet ApplyConstraints(const CandidateSet& cs, const ConstraintSet& constraints,
                              const KnowledgeBase& kb, int document_year);

// Candidate dump line; `nil_strategy` records whether the linker offered a
// NIL strategy for this mention.
nlohmann::json CandidateSetToJson(const CandidateSet& cs, bool nil_strategy);

// Parsed candidate dump entry.
struct CandidateRecord {
  std::string mention_id;
  std::vector<std::string> survivors;
  std::vector<std::string> filtered;
  std::vector<double> survivor_scores;
  bool nil_strategy = false;
};

CandidateRecord CandidateRecordFromJson(const nlohmann::json& j);
std::vector<CandidateRecord> ReadCandidateDump(const std::string& path);

}  // namespace histel
