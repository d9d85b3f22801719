#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace histel {

// One token line: surface TAB iob TAB link [TAB noisy].
struct Token {
  std::string surface;
  std::string iob = "O";            // "O", "B-<type>" or "I-<type>"
  std::optional<std::string> link;  // QID or "NIL"; absent is written as "_"
  std::optional<bool> noisy;        // optional fourth column

  bool operator==(const Token&) const = default;
};

struct Sentence {
  std::string text;
  std::vector<Token> tokens;

  bool operator==(const Sentence&) const = default;
};

struct Document {
  std::string document_id;
  int document_date = 0;  // publication year
  std::vector<Sentence> sentences;

  bool operator==(const Document&) const = default;
};

struct MentionAnnotation {
  std::string document_id;
  int document_date = 0;
  int sentence_index = 0;  // within the document
  int token_begin = 0;     // [token_begin, token_end)
  int token_end = 0;
  std::string surface;
  std::string ner_type;   // without the B-/I- prefix
  std::string gold_link;  // QID or NIL
  std::optional<bool> noisy;
  bool known_type = true;  // false when ner_type is outside the type inventory

  // Stable identifier used by prediction and candidate files.
  std::string Id() const;
};

struct CorpusStats {
  long n_docs = 0;
  long n_sentences = 0;
  long n_tokens = 0;
  double avg_tokens_per_sentence = 0.0;  // rounded to one decimal
  long n_mentions_all = 0;
  long n_mentions_unique = 0;
  double nil_share_all = 0.0;
  double nil_share_unique = 0.0;
  double noisy_share = 0.0;
  std::map<std::string, long> type_histogram;
};

// Parses the CoNLL-U style release layout. Throws ParseError (with the line
// number) on malformed IOB runs, missing metadata or non-tab separators.
std::vector<Document> ParseConllu(std::string_view text);
std::vector<Document> ReadConlluFile(const std::string& path);

// Inverse of ParseConllu on the in-memory model. Validates every document
// before producing any output.
std::string SerializeConllu(const std::vector<Document>& docs);

// Throws DataError describing the first invariant violation, if any.
void ValidateDocument(const Document& doc);

// Mentions in corpus order (document, sentence, span start).
std::vector<MentionAnnotation> ExtractMentions(const std::vector<Document>& docs);

CorpusStats ComputeStats(const std::vector<Document>& docs);
nlohmann::json StatsToJson(const CorpusStats& stats);
std::string StatsToText(const CorpusStats& stats);

// Entity types used in the benchmark annotation inventory.
bool IsKnownNerType(std::string_view type);

}  // namespace histel
