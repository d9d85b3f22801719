#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace histel {

struct EntityRecord {
  std::string qid;  // Q<digits>, or NIL
  std::string label;
  std::vector<std::string> aliases;
  std::set<std::string> wikidata_types;       // P31 values
  std::set<std::string> ner_types;            // mapped NER classes
  std::map<std::string, std::string> dates;   // property id -> ISO date or year
  std::int64_t popularity = 0;
  std::optional<std::size_t> embedding_id;
};

// Time-related properties in retrieval order (rank 1 first).
class PropertyPriority {
 public:
  // P569 ... P585, the fifteen properties used for time plausibility.
  static const PropertyPriority& Default();

  explicit PropertyPriority(std::vector<std::pair<int, std::string>> ranked);

  const std::vector<std::pair<int, std::string>>& ranked() const { return ranked_; }
  bool Contains(std::string_view pid) const;

 private:
  std::vector<std::pair<int, std::string>> ranked_;
};

// Year of an ISO-8601 date ("1707-03-12", "+1707-03-12T00:00:00Z", "-0500")
// or a bare year. nullopt when unparseable.
std::optional<int> ParseDateYear(std::string_view value);

// Year of the highest-priority date property present on the record.
// Throws DataError naming the property if its value cannot be parsed.
std::optional<int> ResolveEntityDate(const EntityRecord& record,
                                     const PropertyPriority& priority = PropertyPriority::Default());

// "person" / "I-person" -> "B-person". Taxonomy entries use this form.
std::string CanonicalType(std::string_view type);

// Parent type -> sub-types. A sub-type may sit under several parents.
class TypeTaxonomy {
 public:
  TypeTaxonomy() = default;
  explicit TypeTaxonomy(std::map<std::string, std::set<std::string>> children);

  static const TypeTaxonomy& Builtin();
  static TypeTaxonomy FromJson(const nlohmann::json& j);
  static TypeTaxonomy Load(const std::string& path);

  const std::map<std::string, std::set<std::string>>& children() const { return children_; }
  // Direct parents of a type, empty if none.
  const std::set<std::string>& Parents(const std::string& type) const;

 private:
  std::map<std::string, std::set<std::string>> children_;
  std::map<std::string, std::set<std::string>> parents_;
};

// {type} plus every ancestor, transitively.
std::set<std::string> ExpandTypes(const std::string& type, const TypeTaxonomy& tax);
std::set<std::string> ExpandTypes(const std::set<std::string>& types, const TypeTaxonomy& tax);

// True iff the expanded sets intersect. Types are canonicalized first.
bool TypesCompatible(const std::set<std::string>& a, const std::set<std::string>& b,
                     const TypeTaxonomy& tax);

enum class NormMode : std::uint8_t { kRaw = 0, kUnit = 1 };

class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;
  // Throws DataError if a row has the wrong length or, in unit mode, a norm
  // further than 1e-6 from 1.
  EmbeddingIndex(std::size_t dimension, std::vector<float> values, NormMode mode);

  static EmbeddingIndex FromRows(const std::vector<std::vector<float>>& rows, NormMode mode);
  // Binary layout: "HELIXEMB", u32 count, u32 dimension, u8 norm mode,
  // count*dimension little-endian float32.
  static EmbeddingIndex Load(const std::string& path);
  static EmbeddingIndex Decode(std::string_view bytes);
  std::string Encode() const;
  void Save(const std::string& path) const;

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return dimension_ == 0 ? 0 : values_.size() / dimension_; }
  NormMode norm_mode() const { return mode_; }
  std::span<const float> Row(std::size_t id) const;
  const std::vector<float>& values() const { return values_; }

 private:
  std::size_t dimension_ = 0;
  std::vector<float> values_;
  NormMode mode_ = NormMode::kRaw;
};

// Inner product of two stored rows; cosine similarity in unit mode.
double Similarity(const EmbeddingIndex& index, std::size_t a, std::size_t b);
double Dot(std::span<const float> a, std::span<const float> b);
// Cosine of two arbitrary vectors; 0 when either has zero norm.
double Cosine(std::span<const float> a, std::span<const float> b);

// Immutable after construction.
class KnowledgeBase {
 public:
  KnowledgeBase() = default;
  KnowledgeBase(std::vector<EntityRecord> entities, EmbeddingIndex embeddings,
                TypeTaxonomy taxonomy = TypeTaxonomy::Builtin(),
                PropertyPriority priority = PropertyPriority::Default());

  const std::vector<EntityRecord>& entities() const { return entities_; }
  std::size_t size() const { return entities_.size(); }
  bool empty() const { return entities_.empty(); }
  const EntityRecord& entity(std::size_t i) const { return entities_[i]; }
  std::optional<std::size_t> Find(std::string_view qid) const;
  // Entities whose label or alias folds to the same key as `surface`.
  std::vector<std::size_t> LookupAlias(std::string_view surface) const;
  std::optional<int> EntityYear(std::size_t i) const { return years_[i]; }

  const EmbeddingIndex& embeddings() const { return embeddings_; }
  const TypeTaxonomy& taxonomy() const { return taxonomy_; }
  const PropertyPriority& priority() const { return priority_; }
  // Non-fatal load diagnostics, e.g. ignored date properties.
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::vector<EntityRecord> entities_;
  std::unordered_map<std::string, std::size_t> by_qid_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_alias_;
  std::vector<std::optional<int>> years_;
  EmbeddingIndex embeddings_;
  TypeTaxonomy taxonomy_;
  PropertyPriority priority_ = PropertyPriority::Default();
  std::vector<std::string> warnings_;
};

EntityRecord EntityFromJson(const nlohmann::json& j);
nlohmann::json EntityToJson(const EntityRecord& e);

std::vector<EntityRecord> ReadEntities(const std::string& path);

// Empty paths select: no embeddings, the builtin taxonomy.
KnowledgeBase LoadKb(const std::string& entities_path, const std::string& embeddings_path,
                     const std::string& taxonomy_path = {});

}  // namespace histel
