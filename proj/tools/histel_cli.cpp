// histel: command-line front end for the linking toolkit.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "histel/corpus.hpp"
#include "histel/errors.hpp"
#include "histel/evalrep.hpp"
#include "histel/kbstore.hpp"
#include "histel/nilpred.hpp"
#include "histel/pipeline.hpp"
#include "histel/text.hpp"

namespace fs = std::filesystem;
using namespace histel;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitData = 2;

void WriteFile(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

std::string JsonLines(const std::vector<nlohmann::json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

void RequireFile(const std::string& what, const std::string& path) {
  if (path.empty()) throw ConfigError("missing --" + what);
  if (!fs::is_regular_file(path)) throw ConfigError(what + " file '" + path + "' does not exist");
}

// KB for analysis commands: embeddings are optional, and without them the
// entities' embedding references are dropped.
KnowledgeBase AnalysisKb(const std::string& entities, const std::string& embeddings,
                         const std::string& taxonomy) {
  if (!embeddings.empty()) return LoadKb(entities, embeddings, taxonomy);
  auto records = entities.empty() ? std::vector<EntityRecord>{} : ReadEntities(entities);
  for (auto& r : records) r.embedding_id.reset();
  return KnowledgeBase(std::move(records), EmbeddingIndex{},
                       taxonomy.empty() ? TypeTaxonomy::Builtin() : TypeTaxonomy::Load(taxonomy));
}

// --- stats --------------------------------------------------------------------------

struct StatsArgs {
  std::string corpus;
  std::string out;
};

int RunStats(const StatsArgs& a) {
  RequireFile("corpus", a.corpus);
  const auto stats = ComputeStats(ReadConlluFile(a.corpus));
  const std::string text = StatsToText(stats);
  std::cout << text;
  if (!a.out.empty()) {
    WriteFile(fs::path(a.out) / "stats.json", StatsToJson(stats).dump(2) + "\n");
    WriteFile(fs::path(a.out) / "stats.txt", text);
  }
  return 0;
}

// --- link ---------------------------------------------------------------------------

struct LinkArgs {
  std::string config;
  std::string corpus, entities, embeddings, taxonomy, mentions, senses;
  std::string constraints, nil, nil_rule_file, linker, out;
  std::optional<int> k, jobs;
  std::optional<std::uint64_t> seed;
  bool nil_strategy = false;
  bool trace = false;
};

RunConfig BuildRunConfig(const LinkArgs& a) {
  RunConfig c = a.config.empty() ? RunConfig{} : RunConfig::Load(a.config);
  auto override_str = [](std::string& dst, const std::string& v) {
    if (!v.empty()) dst = v;
  };
  override_str(c.corpus_path, a.corpus);
  override_str(c.entities_path, a.entities);
  override_str(c.embeddings_path, a.embeddings);
  override_str(c.taxonomy_path, a.taxonomy);
  override_str(c.mentions_path, a.mentions);
  override_str(c.senses_path, a.senses);
  override_str(c.output_dir, a.out);
  if (!a.constraints.empty()) c.constraints = ConstraintSet::Parse(a.constraints);
  if (!a.linker.empty()) c.linker = ParseLinker(a.linker);
  if (!a.nil_rule_file.empty()) c.nil_rule = NilRule::Load(a.nil_rule_file);
  if (!a.nil.empty()) c.nil_rule = NilRule::Parse(a.nil);
  if (a.k) c.k = *a.k;
  if (a.jobs) c.jobs = *a.jobs;
  if (a.seed) c.seed = *a.seed;
  if (a.nil_strategy) c.dynamics.nil_strategy = true;
  c.Validate();
  return c;
}

int RunLink(const LinkArgs& a) {
  const RunConfig c = BuildRunConfig(a);
  const auto docs = ReadConlluFile(c.corpus_path);
  const KnowledgeBase kb = LoadKb(c.entities_path, c.embeddings_path, c.taxonomy_path);
  for (const auto& w : kb.warnings()) std::cerr << "warning: " << w << '\n';
  const EmbeddingIndex mentions =
      c.mentions_path.empty() ? EmbeddingIndex{} : EmbeddingIndex::Load(c.mentions_path);
  std::optional<SenseInventory> senses;
  if (!c.senses_path.empty()) senses = SenseInventory::Load(c.senses_path);

  const LinkOutput out = LinkCorpus(c, docs, kb, mentions, senses ? &*senses : nullptr);

  std::vector<nlohmann::json> preds, cands;
  for (std::size_t i = 0; i < out.predictions.size(); ++i) {
    preds.push_back(PredictionToJson(out.predictions[i]));
    cands.push_back(CandidateSetToJson(out.candidates[i], out.nil_offered[i]));
  }
  const fs::path dir(c.output_dir);
  WriteFile(dir / "predictions.jsonl", JsonLines(preds));
  WriteFile(dir / "candidates.jsonl", JsonLines(cands));
  nlohmann::json run = out.metadata;
  run["config"] = c.ToJson();
  WriteFile(dir / "run.json", run.dump(2) + "\n");
  if (a.trace) WriteFile(dir / "trace.csv", TraceCsv(out));
  std::cout << "linked " << out.predictions.size() << " mentions -> " << dir.string() << '\n';
  return 0;
}

// --- eval ---------------------------------------------------------------------------

struct EvalArgs {
  std::string predictions, corpus, entities, embeddings, taxonomy, candidates, out;
};

int RunEval(const EvalArgs& a) {
  RequireFile("predictions", a.predictions);
  RequireFile("corpus", a.corpus);
  if (!a.entities.empty()) RequireFile("entities", a.entities);
  if (!a.candidates.empty()) RequireFile("candidates", a.candidates);
  const auto gold = ExtractMentions(ReadConlluFile(a.corpus));
  const auto preds = ReadPredictions(a.predictions);
  const EvalResult r = Score(preds, gold);

  std::optional<PlausibilityResult> plaus;
  if (!a.entities.empty()) {
    const KnowledgeBase kb = AnalysisKb(a.entities, a.embeddings, a.taxonomy);
    plaus = PlausibilityScore(preds, gold, kb);
  }
  std::optional<ErrorBreakdown> breakdown;
  if (!a.candidates.empty()) breakdown = BreakdownErrors(preds, gold, ReadCandidateDump(a.candidates));

  nlohmann::json report;
  report["tool"] = "histel";
  report["version"] = kVersion;
  report["predictions"] = a.predictions;
  if (const fs::path run = fs::path(a.predictions).parent_path() / "run.json"; fs::exists(run)) {
    std::ifstream in(run);
    report["run"] = nlohmann::json::parse(in, nullptr, false);
  }
  report["eval"] = EvalResultToJson(r);
  if (plaus) report["plausibility"] = PlausibilityToJson(*plaus);
  if (breakdown) report["errors"] = BreakdownToJson(*breakdown);
  const std::string text = EvalReportText(r, plaus, breakdown);
  std::cout << text;
  if (!a.out.empty()) {
    WriteFile(fs::path(a.out) / "eval.json", report.dump(2) + "\n");
    WriteFile(fs::path(a.out) / "eval.txt", text);
  }
  return 0;
}

// --- iaa ----------------------------------------------------------------------------

struct IaaArgs {
  std::vector<std::string> files;
  std::string mode = "nec";
  std::string out;
};

using TokenKey = std::tuple<std::string, std::size_t, std::size_t>;

std::map<TokenKey, std::string> TokenLabels(const std::string& path, bool link_mode) {
  std::map<TokenKey, std::string> out;
  for (const auto& d : ReadConlluFile(path)) {
    for (std::size_t s = 0; s < d.sentences.size(); ++s) {
      const auto& toks = d.sentences[s].tokens;
      for (std::size_t t = 0; t < toks.size(); ++t) {
        std::string label;
        if (link_mode) {
          label = toks[t].link.value_or("_");
        } else {
          label = toks[t].iob;
        }
        out[{d.document_id, s, t}] = label;
      }
    }
  }
  return out;
}

int RunIaa(const IaaArgs& a) {
  if (a.mode != "nec" && a.mode != "link") throw ConfigError("--mode must be nec or link");
  std::vector<std::map<TokenKey, std::string>> coders;
  for (const auto& f : a.files) {
    RequireFile("annotations", f);
    coders.push_back(TokenLabels(f, a.mode == "link"));
  }
  std::map<TokenKey, std::vector<std::optional<std::string>>> units;
  for (std::size_t c = 0; c < coders.size(); ++c) {
    for (const auto& [key, label] : coders[c]) {
      auto& u = units[key];
      u.resize(coders.size());
      u[c] = label;
    }
  }
  std::vector<std::vector<std::optional<std::string>>> rows;
  for (auto& [key, u] : units) {
    u.resize(coders.size());
    rows.push_back(std::move(u));
  }
  const double alpha = KrippendorffAlpha(rows);
  nlohmann::json report{{"tool", "histel"}, {"version", kVersion}, {"mode", a.mode},
                        {"files", a.files}, {"units", rows.size()}, {"alpha", alpha}};
  std::cout << "krippendorff alpha (" << a.mode << ", " << rows.size() << " tokens): " << alpha
            << '\n';
  if (!a.out.empty()) WriteFile(fs::path(a.out) / "iaa.json", report.dump(2) + "\n");
  return 0;
}

// --- popularity ---------------------------------------------------------------------

struct PopularityArgs {
  std::string corpus, entities, embeddings, taxonomy, predictions, out;
};

int RunPopularity(const PopularityArgs& a) {
  RequireFile("corpus", a.corpus);
  RequireFile("entities", a.entities);
  const auto gold = ExtractMentions(ReadConlluFile(a.corpus));
  const KnowledgeBase kb = AnalysisKb(a.entities, a.embeddings, a.taxonomy);
  std::vector<std::string> links;
  for (const auto& m : gold) links.push_back(m.gold_link);
  const auto bins = PopularityHistogram(kb, links);
  const std::string csv = HistogramCsv(bins);

  nlohmann::json report{{"tool", "histel"}, {"version", kVersion}};
  if (!a.predictions.empty()) {
    RequireFile("predictions", a.predictions);
    const auto preds = ReadPredictions(a.predictions);
    std::map<std::string, std::string> by_id;
    for (const auto& p : preds) by_id[p.mention_id] = p.predicted;
    std::vector<double> pop, correct;
    for (const auto& m : gold) {
      const auto e = kb.Find(m.gold_link);
      if (m.gold_link == kNil || !e) continue;
      pop.push_back(static_cast<double>(kb.entity(*e).popularity));
      const auto it = by_id.find(m.Id());
      correct.push_back(it != by_id.end() && it->second == m.gold_link ? 1.0 : 0.0);
    }
    report["more_popular_chosen"] = PopularityPreference(preds, gold, kb);
    report["n_pairs"] = pop.size();
    std::optional<SpearmanResult> rho;
    if (pop.size() >= 3) rho = Spearman(pop, correct);
    if (rho) {
      report["spearman"] = {{"rho", rho->rho}, {"p_value", rho->p_value}, {"n", rho->n}};
    } else {
      report["spearman"] = nullptr;
    }
    std::cout << "more popular QID chosen: " << report["more_popular_chosen"].get<double>() << '\n';
    std::cout << "spearman: "
              << (rho ? std::to_string(rho->rho) + " (p=" + std::to_string(rho->p_value) + ")"
                      : std::string("undefined"))
              << '\n';
  }
  std::cout << csv;
  if (!a.out.empty()) {
    WriteFile(fs::path(a.out) / "popularity_histogram.csv", csv);
    WriteFile(fs::path(a.out) / "popularity.json", report.dump(2) + "\n");
  }
  return 0;
}

// --- nil-sweep / nil-train ----------------------------------------------------------

struct NilDevArgs {
  std::string corpus, entities, candidates, predictions, kind = "dev_mean", norm = "unit", out;
  int epochs = 2000;
  double lr = 0.5;
};

// Development items from a linking run made without a NIL rule.
std::vector<SweepItem> DevItems(const NilDevArgs& a) {
  RequireFile("corpus", a.corpus);
  RequireFile("entities", a.entities);
  RequireFile("candidates", a.candidates);
  RequireFile("predictions", a.predictions);
  if (a.norm != "unit" && a.norm != "raw") throw ConfigError("--norm must be unit or raw");
  const auto gold = ExtractMentions(ReadConlluFile(a.corpus));
  const KnowledgeBase kb = AnalysisKb(a.entities, {}, {});
  std::map<std::string, const MentionAnnotation*> gold_by_id;
  for (const auto& m : gold) gold_by_id[m.Id()] = &m;
  std::map<std::string, std::string> pred_by_id;
  for (const auto& p : ReadPredictions(a.predictions)) pred_by_id[p.mention_id] = p.predicted;

  std::vector<SweepItem> items;
  for (const auto& rec : ReadCandidateDump(a.candidates)) {
    const auto g = gold_by_id.find(rec.mention_id);
    if (g == gold_by_id.end()) throw DataError("candidate dump mentions unknown id " + rec.mention_id);
    const auto p = pred_by_id.find(rec.mention_id);
    const std::string predicted = p == pred_by_id.end() ? std::string(kNil) : p->second;
    SweepItem item;
    item.scores = ScoreVector(NormalizeScores(rec.survivor_scores, a.norm == "unit"));
    item.surface = g->second->surface;
    if (const auto e = kb.Find(predicted)) item.label = kb.entity(*e).label;
    item.gold_nil = g->second->gold_link == kNil;
    item.link_correct = predicted == g->second->gold_link && !item.gold_nil;
    items.push_back(std::move(item));
  }
  return items;
}

int RunNilSweep(const NilDevArgs& a) {
  const auto kind = ParseNilKind(a.kind);
  if (!kind) throw ConfigError("unknown NIL rule '" + a.kind + "'");
  const auto items = DevItems(a);
  const SweepResult best = SweepTau(*kind, items);
  NilRule rule;
  rule.kind = *kind;
  rule.tau = best.tau;
  std::cout << rule.ToString() << "  dev f1 " << best.f1 << '\n';
  if (!a.out.empty()) {
    nlohmann::json j = rule.ToJson();
    j["dev_f1"] = best.f1;
    WriteFile(fs::path(a.out) / "nil_rule.json", j.dump(2) + "\n");
  }
  return 0;
}

int RunNilTrain(const NilDevArgs& a) {
  const auto items = DevItems(a);
  LogisticData data;
  for (const auto& it : items) {
    data.x.push_back(NilFeatures(it.scores, it.surface, it.label));
    data.y.push_back(it.gold_nil ? 1 : 0);
  }
  const TrainResult t = LogisticTrain(data, a.epochs, a.lr);
  for (const auto& w : t.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << t.rule.ToJson().dump() << '\n';
  if (!a.out.empty()) WriteFile(fs::path(a.out) / "nil_rule.json", t.rule.ToJson().dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"histel: entity linking for historical documents"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  StatsArgs stats;
  auto* s = app.add_subcommand("stats", "Corpus statistics");
  s->add_option("corpus", stats.corpus, "CoNLL-U corpus")->required();
  s->add_option("--out", stats.out, "Report directory");

  LinkArgs link;
  auto* l = app.add_subcommand("link", "Link every mention of a corpus");
  l->add_option("--config", link.config, "Run configuration (JSON); flags win");
  l->add_option("--corpus", link.corpus);
  l->add_option("--entities", link.entities, "Entity JSONL");
  l->add_option("--embeddings", link.embeddings, "Entity embedding file");
  l->add_option("--taxonomy", link.taxonomy, "Type taxonomy JSON");
  l->add_option("--mentions", link.mentions, "Mention context embedding file");
  l->add_option("--senses", link.senses, "Sense inventory JSONL");
  l->add_option("--constraints", link.constraints, "phi_d,phi_t | phi_d | phi_t | none");
  l->add_option("--nil", link.nil, "KIND[:TAU], e.g. dev_mean:0.022 or always-nil");
  l->add_option("--nil-rule", link.nil_rule_file, "Trained NIL rule file");
  l->add_option("--linker", link.linker, "eld | eld-static");
  l->add_option("--k", link.k, "Retrieval depth");
  l->add_option("--jobs", link.jobs, "Worker threads");
  l->add_option("--seed", link.seed);
  l->add_option("--out", link.out, "Output directory");
  l->add_flag("--nil-strategy", link.nil_strategy, "Offer NIL as a game strategy");
  l->add_flag("--trace", link.trace, "Write per-iteration dynamics deltas to trace.csv");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Score predictions against gold links");
  e->add_option("--predictions", eval.predictions)->required();
  e->add_option("--corpus", eval.corpus)->required();
  e->add_option("--entities", eval.entities, "Entity JSONL (plausibility block)");
  e->add_option("--embeddings", eval.embeddings);
  e->add_option("--taxonomy", eval.taxonomy);
  e->add_option("--candidates", eval.candidates, "Candidate dump (error breakdown)");
  e->add_option("--out", eval.out);

  IaaArgs iaa;
  auto* i = app.add_subcommand("iaa", "Krippendorff's alpha between annotation files");
  i->add_option("files", iaa.files, "Two or more CoNLL-U files")->required()->expected(2, -1);
  i->add_option("--mode", iaa.mode, "nec | link");
  i->add_option("--out", iaa.out);

  PopularityArgs pop;
  auto* p = app.add_subcommand("popularity", "Popularity histogram and correlation");
  p->add_option("--corpus", pop.corpus)->required();
  p->add_option("--entities", pop.entities)->required();
  p->add_option("--embeddings", pop.embeddings);
  p->add_option("--taxonomy", pop.taxonomy);
  p->add_option("--predictions", pop.predictions);
  p->add_option("--out", pop.out);

  NilDevArgs sweep;
  auto* sw = app.add_subcommand("nil-sweep", "Pick a NIL threshold on a development split");
  NilDevArgs train;
  auto* tr = app.add_subcommand("nil-train", "Train the logistic NIL classifier on a development split");
  for (auto [cmd, args] : {std::pair{sw, &sweep}, std::pair{tr, &train}}) {
    cmd->add_option("--corpus", args->corpus, "Development corpus")->required();
    cmd->add_option("--entities", args->entities)->required();
    cmd->add_option("--candidates", args->candidates, "Candidate dump of a run without NIL rule")
        ->required();
    cmd->add_option("--predictions", args->predictions)->required();
    cmd->add_option("--norm", args->norm, "Score normalisation of the run: unit | raw");
    cmd->add_option("--out", args->out);
  }
  sw->add_option("--kind", sweep.kind, "fixed | dev_top | dev_median | dev_mean | levenshtein | ...");
  tr->add_option("--epochs", train.epochs);
  tr->add_option("--lr", train.lr);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*s) return RunStats(stats);
    if (*l) return RunLink(link);
    if (*e) return RunEval(eval);
    if (*i) return RunIaa(iaa);
    if (*p) return RunPopularity(pop);
    if (*sw) return RunNilSweep(sweep);
    if (*tr) return RunNilTrain(train);
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitData;
  }
  return 0;
}
