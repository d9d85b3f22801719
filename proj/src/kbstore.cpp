#include "histel/kbstore.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>

#include "histel/errors.hpp"
#include "histel/text.hpp"

namespace histel {

namespace {

constexpr std::string_view kMagic = "HELIXEMB";
constexpr std::size_t kHeaderSize = 8 + 4 + 4 + 1;

std::uint32_t ReadU32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}

void WriteU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

float ReadF32(const char* p) {
  std::uint32_t bits = ReadU32(p);
  return std::bit_cast<float>(bits);
}

std::string ReadFile(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(std::string("cannot open ") + what + " file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

// --- property priority ------------------------------------------------------

const PropertyPriority& PropertyPriority::Default() {
  static const PropertyPriority kDefault({
      {1, "P569"},    // date of birth
      {2, "P571"},    // inception
      {3, "P1619"},   // date of official opening
      {4, "P1191"},   // date of first performance
      {5, "P10135"},  // recording date
      {6, "P577"},    // publication date
      {7, "P575"},    // time of discovery or invention
      {8, "P1317"},   // floruit
      {9, "P7124"},   // date of the first one
      {10, "P10673"}, // debut date
      {11, "P9448"},  // introduced on
      {12, "P6949"},  // announcement date
      {13, "P729"},   // service entry
      {14, "P2031"},  // work period (start)
      {15, "P585"},   // point in time
  });
  return kDefault;
}

PropertyPriority::PropertyPriority(std::vector<std::pair<int, std::string>> ranked)
    : ranked_(std::move(ranked)) {
  for (std::size_t i = 0; i < ranked_.size(); ++i) {
    if (ranked_[i].first != static_cast<int>(i) + 1) {
      throw ConfigError("property priority ranks must run 1..N without gaps");
    }
  }
}

bool PropertyPriority::Contains(std::string_view pid) const {
  for (const auto& [rank, p] : ranked_) {
    if (p == pid) return true;
  }
  return false;
}

std::optional<int> ParseDateYear(std::string_view value) {
  value = Trim(value);
  bool negative = false;
  if (!value.empty() && (value.front() == '+' || value.front() == '-')) {
    negative = value.front() == '-';
    value.remove_prefix(1);
  }
  std::size_t n = 0;
  while (n < value.size() && value[n] >= '0' && value[n] <= '9') ++n;
  if (n == 0) return std::nullopt;
  if (n < value.size() && value[n] != '-' && value[n] != 'T') return std::nullopt;
  int year = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + n, year);
  if (ec != std::errc()) return std::nullopt;
  return negative ? -year : year;
}

std::optional<int> ResolveEntityDate(const EntityRecord& record, const PropertyPriority& priority) {
  for (const auto& [rank, pid] : priority.ranked()) {
    const auto it = record.dates.find(pid);
    if (it == record.dates.end()) continue;
    const auto year = ParseDateYear(it->second);
    if (!year) {
      throw DataError("entity " + record.qid + ": unparseable date '" + it->second +
                      "' for property " + pid);
    }
    return year;
  }
  return std::nullopt;
}

// --- taxonomy -----------------------------------------------------------------

std::string CanonicalType(std::string_view type) {
  type = Trim(type);
  if (type.size() > 2 && (type[0] == 'B' || type[0] == 'I') && type[1] == '-') {
    type.remove_prefix(2);
  }
  return "B-" + std::string(type);
}

TypeTaxonomy::TypeTaxonomy(std::map<std::string, std::set<std::string>> children) {
  for (auto& [parent, subs] : children) {
    auto& dst = children_[CanonicalType(parent)];
    for (const auto& s : subs) dst.insert(CanonicalType(s));
  }
  for (const auto& [parent, subs] : children_) {
    for (const auto& s : subs) parents_[s].insert(parent);
  }
  // Reject cycles: no type may reach itself through its ancestors.
  std::map<std::string, int> state;  // 1 = on stack, 2 = done
  std::function<void(const std::string&)> visit = [&](const std::string& t) {
    state[t] = 1;
    for (const auto& p : Parents(t)) {
      const int s = state[p];
      if (s == 1) throw DataError("type taxonomy has a cycle through '" + p + "'");
      if (s == 0) visit(p);
    }
    state[t] = 2;
  };
  for (const auto& [child, ps] : parents_) {
    if (state[child] == 0) visit(child);
  }
}

const TypeTaxonomy& TypeTaxonomy::Builtin() {
  static const TypeTaxonomy kTaxonomy({
      {"B-event", {"B-concert", "B-festival"}},
      {"B-facility", {"B-street", "B-road", "B-park"}},
      {"B-building",
       {"B-theatre", "B-university", "B-worship-place", "B-museum", "B-college", "B-company",
        "B-school", "B-hall"}},
      {"B-language", {}},
      {"B-organization",
       {"B-theatre", "B-university", "B-worship-place", "B-museum", "B-college", "B-company",
        "B-school", "B-empire", "B-government-organization", "B-religious-group", "B-band"}},
      {"B-person", {}},
      {"B-publication", {"B-book", "B-magazine", "B-newspaper", "B-journal"}},
      {"B-work-of-art", {"B-music", "B-opera", "B-symphony", "B-book", "B-song"}},
      {"B-location",
       {"B-park", "B-hall", "B-city", "B-city-district", "B-continent", "B-country", "B-county",
        "B-local-region", "B-mountain", "B-road", "B-square", "B-country-region", "B-province",
        "B-island"}},
  });
  return kTaxonomy;
}

TypeTaxonomy TypeTaxonomy::FromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("taxonomy must be a JSON object of parent -> [children]");
  std::map<std::string, std::set<std::string>> children;
  for (const auto& [parent, subs] : j.items()) {
    if (!subs.is_array()) throw DataError("taxonomy entry '" + parent + "' is not an array");
    auto& dst = children[parent];
    for (const auto& s : subs) dst.insert(s.get<std::string>());
  }
  return TypeTaxonomy(std::move(children));
}

TypeTaxonomy TypeTaxonomy::Load(const std::string& path) {
  const std::string text = ReadFile(path, "taxonomy");
  try {
    return FromJson(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

const std::set<std::string>& TypeTaxonomy::Parents(const std::string& type) const {
  static const std::set<std::string> kNone;
  const auto it = parents_.find(type);
  return it == parents_.end() ? kNone : it->second;
}

std::set<std::string> ExpandTypes(const std::string& type, const TypeTaxonomy& tax) {
  std::set<std::string> out{type};
  std::vector<std::string> stack{type};
  while (!stack.empty()) {
    const std::string t = std::move(stack.back());
    stack.pop_back();
    for (const auto& p : tax.Parents(t)) {
      if (out.insert(p).second) stack.push_back(p);
    }
  }
  return out;
}

std::set<std::string> ExpandTypes(const std::set<std::string>& types, const TypeTaxonomy& tax) {
  std::set<std::string> out;
  for (const auto& t : types) out.merge(ExpandTypes(t, tax));
  return out;
}

bool TypesCompatible(const std::set<std::string>& a, const std::set<std::string>& b,
                     const TypeTaxonomy& tax) {
  std::set<std::string> ca;
  std::set<std::string> cb;
  for (const auto& t : a) ca.insert(CanonicalType(t));
  for (const auto& t : b) cb.insert(CanonicalType(t));
  const auto ea = ExpandTypes(ca, tax);
  const auto eb = ExpandTypes(cb, tax);
  for (const auto& t : ea) {
    if (eb.count(t)) return true;
  }
  return false;
}

// --- embeddings ---------------------------------------------------------------

EmbeddingIndex::EmbeddingIndex(std::size_t dimension, std::vector<float> values, NormMode mode)
    : dimension_(dimension), values_(std::move(values)), mode_(mode) {
  if (dimension_ == 0) {
    if (!values_.empty()) throw DataError("embedding index with dimension 0 has values");
    return;
  }
  if (values_.size() % dimension_ != 0) {
    throw DataError("embedding values are not a multiple of the dimension");
  }
  if (mode_ == NormMode::kUnit) {
    for (std::size_t i = 0; i < size(); ++i) {
      const auto row = Row(i);
      const double norm = std::sqrt(Dot(row, row));
      if (std::abs(norm - 1.0) > 1e-6) {
        throw DataError("embedding row " + std::to_string(i) + " has norm " +
                        std::to_string(norm) + " in unit mode");
      }
    }
  }
}

EmbeddingIndex EmbeddingIndex::FromRows(const std::vector<std::vector<float>>& rows, NormMode mode) {
  if (rows.empty()) return EmbeddingIndex(0, {}, mode);
  const std::size_t dim = rows.front().size();
  std::vector<float> values;
  values.reserve(rows.size() * dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim) {
      throw DataError("embedding row " + std::to_string(i) + " has length " +
                      std::to_string(rows[i].size()) + ", expected " + std::to_string(dim));
    }
    values.insert(values.end(), rows[i].begin(), rows[i].end());
  }
  return EmbeddingIndex(dim, std::move(values), mode);
}

EmbeddingIndex EmbeddingIndex::Decode(std::string_view bytes) {
  if (bytes.size() < kHeaderSize || bytes.substr(0, 8) != kMagic) {
    throw DataError("embeddings: missing HELIXEMB header");
  }
  const std::uint32_t count = ReadU32(bytes.data() + 8);
  const std::uint32_t dim = ReadU32(bytes.data() + 12);
  const auto mode_byte = static_cast<std::uint8_t>(bytes[16]);
  if (mode_byte > 1) throw DataError("embeddings: unknown norm mode " + std::to_string(mode_byte));
  const std::uint64_t expected = kHeaderSize + std::uint64_t{count} * dim * 4;
  if (bytes.size() != expected) {
    throw DataError("embeddings: header declares " + std::to_string(count) + "x" +
                    std::to_string(dim) + " floats (" + std::to_string(expected) +
                    " bytes) but file has " + std::to_string(bytes.size()) + " bytes");
  }
  if (count > 0 && dim == 0) throw DataError("embeddings: zero dimension with non-zero count");
  std::vector<float> values(std::size_t{count} * dim);
  const char* p = bytes.data() + kHeaderSize;
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(values.data(), p, values.size() * 4);
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = ReadF32(p + 4 * i);
  }
  return EmbeddingIndex(dim, std::move(values), static_cast<NormMode>(mode_byte));
}

EmbeddingIndex EmbeddingIndex::Load(const std::string& path) {
  try {
    return Decode(ReadFile(path, "embeddings"));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string EmbeddingIndex::Encode() const {
  std::string out(kMagic);
  WriteU32(out, static_cast<std::uint32_t>(size()));
  WriteU32(out, static_cast<std::uint32_t>(dimension_));
  out.push_back(static_cast<char>(mode_));
  for (float f : values_) WriteU32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

void EmbeddingIndex::Save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write embeddings file '" + path + "'");
  const std::string bytes = Encode();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::span<const float> EmbeddingIndex::Row(std::size_t id) const {
  if (id >= size()) {
    throw DataError("embedding id " + std::to_string(id) + " out of range (" +
                    std::to_string(size()) + " rows)");
  }
  return {values_.data() + id * dimension_, dimension_};
}

double Dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

double Cosine(std::span<const float> a, std::span<const float> b) {
  const double na = Dot(a, a);
  const double nb = Dot(b, b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return Dot(a, b) / std::sqrt(na * nb);
}

double Similarity(const EmbeddingIndex& index, std::size_t a, std::size_t b) {
  return Dot(index.Row(a), index.Row(b));
}

// --- knowledge base -------------------------------------------------------------

KnowledgeBase::KnowledgeBase(std::vector<EntityRecord> entities, EmbeddingIndex embeddings,
                             TypeTaxonomy taxonomy, PropertyPriority priority)
    : entities_(std::move(entities)),
      embeddings_(std::move(embeddings)),
      taxonomy_(std::move(taxonomy)),
      priority_(std::move(priority)) {
  years_.reserve(entities_.size());
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    EntityRecord& e = entities_[i];
    if (e.qid == kNil) {
      if (!e.wikidata_types.empty() || !e.ner_types.empty() || !e.dates.empty() ||
          e.popularity != 0) {
        throw DataError("NIL record must have no types, no dates and popularity 0");
      }
    } else if (!IsQid(e.qid)) {
      throw DataError("invalid QID '" + e.qid + "'");
    }
    if (e.popularity < 0) throw DataError("entity " + e.qid + ": negative popularity");
    if (!by_qid_.emplace(e.qid, i).second) throw DataError("duplicate QID " + e.qid);
    if (e.embedding_id && *e.embedding_id >= embeddings_.size()) {
      throw DataError("entity " + e.qid + " references missing embedding " +
                      std::to_string(*e.embedding_id));
    }
    for (auto it = e.dates.begin(); it != e.dates.end();) {
      if (!priority_.Contains(it->first)) {
        warnings_.push_back("entity " + e.qid + ": ignoring date property " + it->first);
        it = e.dates.erase(it);
      } else {
        ++it;
      }
    }
    years_.push_back(ResolveEntityDate(e, priority_));
    std::set<std::string> keys;
    keys.insert(FoldKey(e.label));
    for (const auto& a : e.aliases) keys.insert(FoldKey(a));
    keys.erase(std::string{});
    for (const auto& k : keys) by_alias_[k].push_back(i);
  }
}

std::optional<std::size_t> KnowledgeBase::Find(std::string_view qid) const {
  const auto it = by_qid_.find(std::string(qid));
  if (it == by_qid_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> KnowledgeBase::LookupAlias(std::string_view surface) const {
  const auto it = by_alias_.find(FoldKey(surface));
  if (it == by_alias_.end()) return {};
  return it->second;
}

EntityRecord EntityFromJson(const nlohmann::json& j) {
  EntityRecord e;
  e.qid = j.at("qid").get<std::string>();
  e.label = j.value("label", std::string{});
  e.aliases = j.value("aliases", std::vector<std::string>{});
  for (const auto& t : j.value("wikidata_types", std::vector<std::string>{})) {
    e.wikidata_types.insert(t);
  }
  for (const auto& t : j.value("ner_types", std::vector<std::string>{})) e.ner_types.insert(t);
  if (j.contains("dates") && !j.at("dates").is_null()) {
    for (const auto& [pid, v] : j.at("dates").items()) {
      if (v.is_number_integer()) {
        e.dates[pid] = std::to_string(v.get<std::int64_t>());
      } else if (v.is_string()) {
        e.dates[pid] = v.get<std::string>();
      } else {
        throw DataError("entity " + e.qid + ": date for " + pid + " must be a string or integer");
      }
    }
  }
  e.popularity = j.value("popularity", std::int64_t{0});
  if (j.contains("embedding_id") && !j.at("embedding_id").is_null()) {
    const auto id = j.at("embedding_id").get<std::int64_t>();
    if (id < 0) throw DataError("entity " + e.qid + ": negative embedding_id");
    e.embedding_id = static_cast<std::size_t>(id);
  }
  return e;
}

nlohmann::json EntityToJson(const EntityRecord& e) {
  nlohmann::json j = {
      {"qid", e.qid},
      {"label", e.label},
      {"aliases", e.aliases},
      {"wikidata_types", e.wikidata_types},
      {"ner_types", e.ner_types},
      {"dates", e.dates},
      {"popularity", e.popularity},
  };
  j["embedding_id"] = e.embedding_id ? nlohmann::json(*e.embedding_id) : nlohmann::json();
  return j;
}

std::vector<EntityRecord> ReadEntities(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open entities file '" + path + "'");
  std::vector<EntityRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    try {
      out.push_back(EntityFromJson(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what(), path);
    } catch (const DataError& e) {
      throw ParseError(line_no, e.what(), path);
    }
  }
  return out;
}

KnowledgeBase LoadKb(const std::string& entities_path, const std::string& embeddings_path,
                     const std::string& taxonomy_path) {
  auto entities = entities_path.empty() ? std::vector<EntityRecord>{} : ReadEntities(entities_path);
  EmbeddingIndex index =
      embeddings_path.empty() ? EmbeddingIndex{} : EmbeddingIndex::Load(embeddings_path);
  TypeTaxonomy taxonomy =
      taxonomy_path.empty() ? TypeTaxonomy::Builtin() : TypeTaxonomy::Load(taxonomy_path);
  return KnowledgeBase(std::move(entities), std::move(index), std::move(taxonomy));
}

}  // namespace histel
