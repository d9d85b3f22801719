#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "histel/corpus.hpp"
#include "histel/dynamics.hpp"
#include "histel/evalrep.hpp"
#include "histel/kbstore.hpp"
#include "histel/nilpred.hpp"
#include "histel/retrieval.hpp"

namespace histel {

inline constexpr std::string_view kVersion = "0.3.0";

enum class Linker { kEld, kEldStatic };

std::string_view LinkerName(Linker l);
Linker ParseLinker(std::string_view name);  // "eld" | "eld-static"

struct RunConfig {
  std::string corpus_path;
  std::string entities_path;
  std::string embeddings_path;
  std::string taxonomy_path;  // empty: builtin taxonomy
  std::string mentions_path;  // context embedding per mention, corpus order
  std::string senses_path;    // optional sense inventory
  ConstraintSet constraints;
  Linker linker = Linker::kEld;
  NilRule nil_rule;
  int k = 10;
  DynamicsConfig dynamics;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string output_dir = "out";

  // Relative paths resolve against `base_dir`.
  static RunConfig FromJson(const nlohmann::json& j, const std::string& base_dir = {});
  static RunConfig Load(const std::string& path);
  nlohmann::json ToJson() const;
  // Throws ConfigError listing every problem found.
  void Validate() const;
};

// 64-bit FNV-1a.
std::uint64_t Fnv1a(std::string_view bytes);

struct LinkOutput {
  std::vector<Prediction> predictions;
  std::vector<CandidateSet> candidates;  // after constraints, corpus order
  std::vector<bool> nil_offered;
  // Per game, in corpus order: "doc:sentence" and the max-delta trace.
  std::vector<std::pair<std::string, std::vector<double>>> traces;
  nlohmann::json metadata;
};

// Deterministic for any `config.jobs`. mention_embeddings must have one row
// per mention unless the KB is empty.
LinkOutput LinkCorpus(const RunConfig& config, const std::vector<Document>& docs,
                      const KnowledgeBase& kb, const EmbeddingIndex& mention_embeddings,
                      const SenseInventory* senses = nullptr);

// CSV "sentence,iteration,max_delta".
std::string TraceCsv(const LinkOutput& out);

nlohmann::json RunMetadata(const RunConfig& config, const KnowledgeBase& kb);

}  // namespace histel
