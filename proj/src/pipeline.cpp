#include "histel/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <map>

#include "histel/errors.hpp"
#include "histel/kernels.hpp"
#include "histel/text.hpp"

namespace histel {

namespace fs = std::filesystem;

std::string_view LinkerName(Linker l) { return l == Linker::kEld ? "eld" : "eld-static"; }

Linker ParseLinker(std::string_view name) {
  std::string n = ToLowerAscii(Trim(name));
  std::replace(n.begin(), n.end(), '_', '-');
  if (n == "eld") return Linker::kEld;
  if (n == "eld-static") return Linker::kEldStatic;
  throw ConfigError("unknown linker '" + std::string(name) + "' (eld|eld-static)");
}

namespace {

std::string Resolve(const nlohmann::json& j, const char* key, const std::string& base) {
  const std::string v = j.value(key, std::string{});
  if (v.empty() || base.empty() || fs::path(v).is_absolute()) return v;
  return (fs::path(base) / v).lexically_normal().string();
}

InitMode ParseInit(const std::string& s) {
  if (s == "uniform") return InitMode::kUniform;
  if (s == "prior") return InitMode::kPrior;
  throw ConfigError("unknown dynamics init '" + s + "' (uniform|prior)");
}

}  // namespace

RunConfig RunConfig::FromJson(const nlohmann::json& j, const std::string& base_dir) {
  RunConfig c;
  try {
    c.corpus_path = Resolve(j, "corpus", base_dir);
    c.entities_path = Resolve(j, "entities", base_dir);
    c.embeddings_path = Resolve(j, "embeddings", base_dir);
    c.taxonomy_path = Resolve(j, "taxonomy", base_dir);
    c.mentions_path = Resolve(j, "mentions", base_dir);
    c.senses_path = Resolve(j, "senses", base_dir);
    c.constraints = ConstraintSet::Parse(j.value("constraints", std::string{}));
    c.linker = ParseLinker(j.value("linker", std::string("eld")));
    if (j.contains("nil_rule_file")) {
      c.nil_rule = NilRule::Load(Resolve(j, "nil_rule_file", base_dir));
    } else if (j.contains("nil")) {
      c.nil_rule = NilRule::Parse(j.at("nil").get<std::string>());
    }
    c.k = j.value("k", c.k);
    c.seed = j.value("seed", c.seed);
    c.jobs = j.value("jobs", c.jobs);
    c.output_dir = Resolve(j, "out", base_dir);
    if (c.output_dir.empty()) c.output_dir = "out";
    if (j.contains("dynamics")) {
      const auto& d = j.at("dynamics");
      c.dynamics.tol = d.value("tol", c.dynamics.tol);
      c.dynamics.max_iter = d.value("max_iter", c.dynamics.max_iter);
      if (d.contains("init")) c.dynamics.init = ParseInit(d.at("init").get<std::string>());
      c.dynamics.nil_strategy = d.value("nil_strategy", c.dynamics.nil_strategy);
      c.dynamics.nil_kappa = d.value("nil_kappa", c.dynamics.nil_kappa);
      c.dynamics.adjacency_threshold =
          d.value("adjacency_threshold", c.dynamics.adjacency_threshold);
      c.dynamics.prior_temperature = d.value("prior_temperature", c.dynamics.prior_temperature);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return FromJson(j, fs::path(path).parent_path().string());
}

nlohmann::json RunConfig::ToJson() const {
  nlohmann::json j;
  j["corpus"] = corpus_path;
  j["entities"] = entities_path;
  j["embeddings"] = embeddings_path;
  j["taxonomy"] = taxonomy_path;
  j["mentions"] = mentions_path;
  j["senses"] = senses_path;
  j["constraints"] = constraints.ToString();
  j["linker"] = LinkerName(linker);
  j["nil_rule"] = nil_rule.ToJson();
  j["k"] = k;
  j["seed"] = seed;
  j["out"] = output_dir;
  j["dynamics"] = {{"tol", dynamics.tol},
                   {"max_iter", dynamics.max_iter},
                   {"init", dynamics.init == InitMode::kPrior ? "prior" : "uniform"},
                   {"nil_strategy", dynamics.nil_strategy},
                   {"nil_kappa", dynamics.nil_kappa},
                   {"adjacency_threshold", dynamics.adjacency_threshold},
                   {"prior_temperature", dynamics.prior_temperature}};
  return j;
}

void RunConfig::Validate() const {
  std::vector<std::string> problems;
  if (k < 1) problems.push_back("k must be >= 1");
  if (jobs < 1) problems.push_back("jobs must be >= 1");
  if (!(dynamics.tol > 0.0)) problems.push_back("dynamics.tol must be > 0");
  if (dynamics.max_iter < 1) problems.push_back("dynamics.max_iter must be >= 1");
  if (!(dynamics.prior_temperature > 0.0)) problems.push_back("dynamics.prior_temperature must be > 0");
  if (!(nil_rule.tau >= 0.0 && nil_rule.tau <= 1.0)) problems.push_back("NIL threshold must be in [0, 1]");
  if (corpus_path.empty()) problems.push_back("no corpus given");
  const bool has_entities = !entities_path.empty();
  if (has_entities && embeddings_path.empty()) problems.push_back("entities given without embeddings");
  if (has_entities && mentions_path.empty()) problems.push_back("entities given without mention embeddings");
  for (const auto& [what, path] : {std::pair{"corpus", corpus_path},
                                   {"entities", entities_path},
                                   {"embeddings", embeddings_path},
                                   {"taxonomy", taxonomy_path},
                                   {"mentions", mentions_path},
                                   {"senses", senses_path}}) {
    if (!path.empty() && !fs::is_regular_file(path)) {
      problems.push_back(std::string(what) + " file '" + path + "' does not exist");
    }
  }
  if (problems.empty()) return;
  std::string msg = "invalid configuration:";
  for (const auto& p : problems) msg += "\n  - " + p;
  throw ConfigError(msg);
}

std::uint64_t Fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

nlohmann::json RunMetadata(const RunConfig& config, const KnowledgeBase& kb) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(Fnv1a(config.ToJson().dump())));
  const bool unit = kb.embeddings().norm_mode() == NormMode::kUnit;
  return {{"tool", "histel"},
          {"version", kVersion},
          {"config_hash", hash},
          {"seed", config.seed},
          {"linker", LinkerName(config.linker)},
          {"constraints", config.constraints.ToString()},
          {"nil_rule", config.nil_rule.ToString()},
          {"k", config.k},
          {"score_normalization", unit ? "shifted-cosine" : "min-max"}};
}

namespace {

struct SentenceWork {
  const Sentence* sentence = nullptr;
  std::vector<std::size_t> mentions;  // indices into the flat mention list
};

struct MentionResult {
  Prediction prediction;
  CandidateSet candidates;
  bool nil_offered = false;
};

const EntityRecord* ChosenEntity(const KnowledgeBase& kb, const CandidateSet& cs,
                                 const std::string& qid) {
  for (const auto& c : cs.candidates) {
    if (c.qid == qid) return &kb.entity(c.entity);
  }
  return nullptr;
}

void ApplyNilRule(const RunConfig& config, const KnowledgeBase& kb, MentionResult& r) {
  auto& p = r.prediction;
  if (config.nil_rule.kind == NilKind::kAlwaysNil) {
    p.predicted = std::string(kNil);
    p.heuristic = std::string(NilKindName(NilKind::kAlwaysNil));
    return;
  }
  if (p.predicted == kNil) return;
  std::vector<double> raw;
  for (const Candidate* c : r.candidates.Survivors()) raw.push_back(c->score);
  const ScoreVector s(NormalizeScores(raw, kb.embeddings().norm_mode() == NormMode::kUnit));
  const EntityRecord* e = ChosenEntity(kb, r.candidates, p.predicted);
  const std::string label = e ? e->label : std::string{};
  if (PredictNil(config.nil_rule, NilInput{&s, r.candidates.mention.surface, label})) {
    p.predicted = std::string(kNil);
    p.heuristic = std::string(NilKindName(config.nil_rule.kind));
  }
}

}  // namespace

LinkOutput LinkCorpus(const RunConfig& config, const std::vector<Document>& docs,
                      const KnowledgeBase& kb, const EmbeddingIndex& mention_embeddings,
                      const SenseInventory* senses) {
  const auto mentions = ExtractMentions(docs);
  if (!kb.empty()) {
    if (mention_embeddings.size() != mentions.size()) {
      throw DataError("mention embeddings hold " + std::to_string(mention_embeddings.size()) +
                      " rows for " + std::to_string(mentions.size()) + " mentions");
    }
    if (mention_embeddings.size() > 0 &&
        mention_embeddings.dimension() != kb.embeddings().dimension()) {
      throw DataError("mention and entity embeddings differ in dimension");
    }
  }

  // Group mentions by sentence; mentions are already in corpus order.
  std::vector<SentenceWork> work;
  {
    std::map<std::pair<std::string, int>, std::size_t> slot;
    std::map<std::string, const Document*> by_id;
    for (const auto& d : docs) by_id.emplace(d.document_id, &d);
    for (std::size_t i = 0; i < mentions.size(); ++i) {
      const auto& m = mentions[i];
      const auto key = std::pair{m.document_id, m.sentence_index};
      auto [it, inserted] = slot.try_emplace(key, work.size());
      if (inserted) {
        work.push_back(SentenceWork{&by_id.at(m.document_id)->sentences.at(m.sentence_index), {}});
      }
      work[it->second].mentions.push_back(i);
    }
  }

  auto context = [&](std::size_t i) -> std::span<const float> {
    if (kb.empty() || mention_embeddings.size() == 0) return {};
    return mention_embeddings.Row(i);
  };

  std::vector<MentionResult> results(mentions.size());
  std::vector<std::vector<double>> traces(work.size());
  kernels::ParallelFor(work.size(), config.jobs, [&](std::size_t w) {
    const auto& sw = work[w];
    std::vector<CandidateSet> sets;
    sets.reserve(sw.mentions.size());
    for (std::size_t i : sw.mentions) {
      const auto& m = mentions[i];
      sets.push_back(ApplyConstraints(Retrieve(m, context(i), kb, config.k), config.constraints,
                                      kb, m.document_date));
    }

    // Mentions without any strategy cannot join the game.
    std::vector<MentionInput> inputs;
    std::vector<std::size_t> player_of(sets.size(), SIZE_MAX);
    const bool nil_strategy = config.linker == Linker::kEld && config.dynamics.nil_strategy;
    for (std::size_t s = 0; s < sets.size(); ++s) {
      if (!nil_strategy && sets[s].Survivors().empty()) continue;
      player_of[s] = inputs.size();
      inputs.push_back(MentionInput{&sets[s], context(sw.mentions[s])});
    }

    std::optional<Game> game;
    DynamicsResult dyn;
    if (config.linker == Linker::kEld && !inputs.empty()) {
      game = BuildGame(*sw.sentence, inputs, kb, senses, config.dynamics);
      dyn = RunDynamics(*game, config.dynamics);
      traces[w] = dyn.trace;
    }

    for (std::size_t s = 0; s < sets.size(); ++s) {
      MentionResult& r = results[sw.mentions[s]];
      LinkDecision d;
      if (player_of[s] == SIZE_MAX) {
        d = SelectLinkStatic(sets[s], true);
      } else if (game) {
        // Mention players come first, in input order.
        d = SelectLink(*game, dyn.x, player_of[s]);
      } else {
        d = SelectLinkStatic(sets[s], true);
      }
      r.prediction = Prediction{sets[s].mention.Id(), d.predicted, d.score, d.heuristic,
                                sets[s].FilteredCount()};
      r.nil_offered = nil_strategy;
      r.candidates = std::move(sets[s]);
      ApplyNilRule(config, kb, r);
    }
  });

  LinkOutput out;
  out.metadata = RunMetadata(config, kb);
  for (std::size_t w = 0; w < work.size(); ++w) {
    if (traces[w].empty()) continue;
    const auto& m = mentions[work[w].mentions.front()];
    out.traces.emplace_back(m.document_id + ":" + std::to_string(m.sentence_index),
                            std::move(traces[w]));
  }
  for (auto& r : results) {
    out.predictions.push_back(std::move(r.prediction));
    out.candidates.push_back(std::move(r.candidates));
    out.nil_offered.push_back(r.nil_offered);
  }
  return out;
}

std::string TraceCsv(const LinkOutput& out) {
  std::string csv = "sentence,iteration,max_delta\n";
  char buf[64];
  for (const auto& [id, trace] : out.traces) {
    for (std::size_t i = 0; i < trace.size(); ++i) {
      std::snprintf(buf, sizeof buf, ",%zu,%.17g\n", i + 1, trace[i]);
      csv += id + buf;
    }
  }
  return csv;
}

}  // namespace histel
