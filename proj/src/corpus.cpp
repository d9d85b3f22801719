#include "histel/corpus.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "histel/errors.hpp"
#include "histel/text.hpp"

namespace histel {

namespace {

constexpr std::array<std::string_view, 58> kNerTypes = {
    "person", "city", "music", "organization", "work-of-art", "country",
    "building", "opera", "theatre", "worship-place", "publication", "book",
    "road", "company", "school", "city-district", "magazine", "event",
    "festival", "street", "mountain", "university", "government-organization",
    "college", "facility", "local-region", "county", "continent", "journal",
    "square", "song", "concert", "location", "river", "museum", "newspaper",
    "country-region", "symphony", "religious-group", "thing", "family",
    "language", "band", "province", "island", "park", "empire", "hotel",
    "scholarship", "institution", "village", "town", "books",
    "person (fictional character)", "lake", "hall", "society", "military",
};

enum class TagKind { kOutside, kBegin, kInside, kInvalid };

struct Tag {
  TagKind kind = TagKind::kInvalid;
  std::string_view type;
};

Tag SplitTag(std::string_view iob) {
  if (iob == "O") return {TagKind::kOutside, {}};
  if (iob.size() > 2 && iob[1] == '-') {
    if (iob[0] == 'B') return {TagKind::kBegin, iob.substr(2)};
    if (iob[0] == 'I') return {TagKind::kInside, iob.substr(2)};
  }
  return {};
}

bool IsLinkValue(std::string_view link) { return link == kNil || IsQid(link); }

// Checks one token against its predecessor in the sentence. Returns an
// error message, or an empty string when the token is well formed.
std::string CheckToken(const Token& token, const Token* prev) {
  if (token.surface.empty()) return "empty token";
  if (token.surface.find_first_of("\t\n\r") != std::string::npos) {
    return "token contains a tab or newline";
  }
  const Tag tag = SplitTag(token.iob);
  switch (tag.kind) {
    case TagKind::kInvalid:
      return "invalid IOB tag '" + token.iob + "'";
    case TagKind::kOutside:
      if (token.link) return "O token carries link '" + *token.link + "'";
      return {};
    case TagKind::kBegin:
    case TagKind::kInside:
      break;
  }
  if (!token.link) return "entity token '" + token.surface + "' has no link";
  if (!IsLinkValue(*token.link)) return "invalid link '" + *token.link + "'";
  if (tag.kind == TagKind::kInside) {
    if (prev == nullptr) return "I- tag at sentence start";
    const Tag prev_tag = SplitTag(prev->iob);
    if (prev_tag.kind == TagKind::kOutside) return "I- tag after O";
    if (prev_tag.type != tag.type) {
      return "I-" + std::string(tag.type) + " continues a " + std::string(prev_tag.type) +
             " span";
    }
    if (prev->link != token.link) return "link changes inside an entity span";
  }
  return {};
}

std::optional<bool> ParseNoisy(std::string_view v, std::size_t line) {
  if (v == "_") return std::nullopt;
  const std::string s = ToLowerAscii(v);
  if (s == "1" || s == "true" || s == "yes" || s == "y" || s == "noisy") return true;
  if (s == "0" || s == "false" || s == "no" || s == "n" || s == "clean") return false;
  throw ParseError(line, "invalid noisy flag '" + std::string(v) + "'");
}

std::optional<int> ParseYear(std::string_view v) {
  v = Trim(v);
  std::size_t n = 0;
  while (n < v.size() && v[n] >= '0' && v[n] <= '9') ++n;
  if (n == 0) return std::nullopt;
  // Bare year or the year of an ISO date.
  if (n != v.size() && v[n] != '-') return std::nullopt;
  int year = 0;
  std::from_chars(v.data(), v.data() + n, year);
  if (year <= 0) return std::nullopt;
  return year;
}

// Splits "#key:value" or "# key = value".
bool SplitMetadata(std::string_view line, std::string_view& key, std::string_view& value) {
  std::string_view body = line.substr(1);
  std::size_t i = 0;
  while (i < body.size() && body[i] == ' ') ++i;
  body = body.substr(i);
  const auto sep = body.find_first_of(":=");
  if (sep == std::string_view::npos) return false;
  key = Trim(body.substr(0, sep));
  value = body.substr(sep + 1);
  if (!value.empty() && value.front() == ' ') value.remove_prefix(1);
  while (!value.empty() && (value.back() == '\r' || value.back() == '\n')) value.remove_suffix(1);
  return true;
}

class Reader {
 public:
  std::vector<Document> Read(std::string_view text) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(pos, end - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      ++line_no;
      Consume(line, line_no);
      if (end == text.size()) break;
      pos = end + 1;
    }
    Flush(line_no);
    return std::move(docs_);
  }

 private:
  void Consume(std::string_view line, std::size_t line_no) {
    if (Trim(line).empty()) {
      Flush(line_no);
      return;
    }
    if (line.front() == '#' && line.find('\t') == std::string_view::npos) {
      std::string_view key;
      std::string_view value;
      if (!SplitMetadata(line, key, value)) return;  // free comment
      if (key != "document_id" && key != "document_date" && key != "sent_text") return;
      if (!sentence_.tokens.empty()) Flush(line_no);
      if (key == "document_id") {
        doc_id_ = std::string(Trim(value));
        date_.reset();
        date_line_ = 0;
      } else if (key == "document_date") {
        const auto year = ParseYear(value);
        if (!year) throw ParseError(line_no, "invalid #document_date '" + std::string(value) + "'");
        date_ = *year;
        date_line_ = line_no;
      } else {
        sentence_.text = std::string(value);
      }
      return;
    }
    if (line.find('\t') == std::string_view::npos) {
      throw ParseError(line_no, line.find(' ') != std::string_view::npos
                                    ? "columns must be tab-separated"
                                    : "expected 3 tab-separated columns");
    }
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 3 && cols.size() != 4) {
      throw ParseError(line_no, "expected 3 or 4 tab-separated columns, got " +
                                    std::to_string(cols.size()));
    }
    if (sentence_.tokens.empty()) first_token_line_ = line_no;
    Token token;
    token.surface = std::string(cols[0]);
    token.iob = std::string(cols[1]);
    if (cols[2] != "_") token.link = std::string(cols[2]);
    if (cols.size() == 4) token.noisy = ParseNoisy(cols[3], line_no);
    const Token* prev = sentence_.tokens.empty() ? nullptr : &sentence_.tokens.back();
    if (auto err = CheckToken(token, prev); !err.empty()) throw ParseError(line_no, err);
    sentence_.tokens.push_back(std::move(token));
  }

  void Flush(std::size_t line_no) {
    if (sentence_.tokens.empty()) {
      sentence_.text.clear();
      return;
    }
    if (doc_id_.empty()) {
      throw ParseError(first_token_line_, "sentence has no #document_id");
    }
    if (!date_) {
      throw ParseError(first_token_line_, "document '" + doc_id_ + "' has no #document_date");
    }
    auto [it, inserted] = index_.try_emplace(doc_id_, docs_.size());
    if (inserted) {
      docs_.push_back(Document{doc_id_, *date_, {}});
    } else if (docs_[it->second].document_date != *date_) {
      throw ParseError(date_line_ ? date_line_ : line_no,
                       "document '" + doc_id_ + "' has conflicting dates");
    }
    docs_[it->second].sentences.push_back(std::move(sentence_));
    sentence_ = Sentence{};
  }

  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> index_;
  std::string doc_id_;
  std::optional<int> date_;
  std::size_t date_line_ = 0;
  std::size_t first_token_line_ = 0;
  Sentence sentence_;
};

}  // namespace

std::string MentionAnnotation::Id() const {
  return document_id + ":" + std::to_string(sentence_index) + ":" + std::to_string(token_begin) +
         "-" + std::to_string(token_end);
}

bool IsKnownNerType(std::string_view type) {
  for (auto t : kNerTypes) {
    if (t == type) return true;
  }
  return false;
}

std::vector<Document> ParseConllu(std::string_view text) { return Reader().Read(text); }

std::vector<Document> ReadConlluFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return ParseConllu(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.detail(), path);
  }
}

void ValidateDocument(const Document& doc) {
  const std::string where = "document '" + doc.document_id + "'";
  if (doc.document_id.empty()) throw DataError("document with empty document_id");
  if (doc.document_id.find_first_of("\t\r\n") != std::string::npos) {
    throw DataError(where + ": document_id contains a tab or newline");
  }
  if (doc.document_date <= 0) throw DataError(where + ": document_date must be a positive year");
  if (doc.sentences.empty()) throw DataError(where + ": no sentences");
  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    const Sentence& sent = doc.sentences[s];
    const std::string swhere = where + ", sentence " + std::to_string(s);
    if (sent.text.find_first_of("\r\n") != std::string::npos) {
      throw DataError(swhere + ": sentence text contains a newline");
    }
    if (sent.tokens.empty()) throw DataError(swhere + ": no tokens");
    for (std::size_t t = 0; t < sent.tokens.size(); ++t) {
      const Token* prev = t == 0 ? nullptr : &sent.tokens[t - 1];
      if (auto err = CheckToken(sent.tokens[t], prev); !err.empty()) {
        throw DataError(swhere + ", token " + std::to_string(t) + ": " + err);
      }
    }
  }
}

std::string SerializeConllu(const std::vector<Document>& docs) {
  std::set<std::string> ids;
  for (const auto& doc : docs) {
    ValidateDocument(doc);
    if (!ids.insert(doc.document_id).second) {
      throw DataError("duplicate document_id '" + doc.document_id + "'");
    }
  }
  std::string out;
  for (const auto& doc : docs) {
    const std::string date = std::to_string(doc.document_date);
    for (const auto& sent : doc.sentences) {
      out += "#document_id:" + doc.document_id + "\n";
      out += "#document_date:" + date + "\n";
      out += "#sent_text:" + sent.text + "\n";
      bool fourth = false;
      for (const auto& tok : sent.tokens) fourth = fourth || tok.noisy.has_value();
      for (const auto& tok : sent.tokens) {
        out += tok.surface;
        out += '\t';
        out += tok.iob;
        out += '\t';
        out += tok.link ? *tok.link : "_";
        if (fourth) {
          out += '\t';
          out += tok.noisy ? (*tok.noisy ? "1" : "0") : "_";
        }
        out += '\n';
      }
      out += '\n';
    }
  }
  return out;
}

std::vector<MentionAnnotation> ExtractMentions(const std::vector<Document>& docs) {
  std::vector<MentionAnnotation> mentions;
  for (const auto& doc : docs) {
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      const auto& tokens = doc.sentences[s].tokens;
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        const Tag tag = SplitTag(tokens[t].iob);
        if (tag.kind != TagKind::kBegin) continue;
        MentionAnnotation m;
        m.document_id = doc.document_id;
        m.document_date = doc.document_date;
        m.sentence_index = static_cast<int>(s);
        m.token_begin = static_cast<int>(t);
        m.ner_type = std::string(tag.type);
        m.known_type = IsKnownNerType(m.ner_type);
        m.gold_link = tokens[t].link.value_or(std::string(kNil));
        m.noisy = tokens[t].noisy;
        m.surface = tokens[t].surface;
        std::size_t e = t + 1;
        while (e < tokens.size() && SplitTag(tokens[e].iob).kind == TagKind::kInside) {
          m.surface += ' ';
          m.surface += tokens[e].surface;
          ++e;
        }
        m.token_end = static_cast<int>(e);
        mentions.push_back(std::move(m));
      }
    }
  }
  return mentions;
}

CorpusStats ComputeStats(const std::vector<Document>& docs) {
  CorpusStats st;
  st.n_docs = static_cast<long>(docs.size());
  for (const auto& doc : docs) {
    st.n_sentences += static_cast<long>(doc.sentences.size());
    for (const auto& sent : doc.sentences) st.n_tokens += static_cast<long>(sent.tokens.size());
  }
  if (st.n_sentences > 0) {
    const double avg = static_cast<double>(st.n_tokens) / static_cast<double>(st.n_sentences);
    st.avg_tokens_per_sentence = std::round(avg * 10.0) / 10.0;
  }
  const auto mentions = ExtractMentions(docs);
  st.n_mentions_all = static_cast<long>(mentions.size());
  long nil_all = 0;
  long noisy = 0;
  std::set<std::pair<std::string, std::string>> unique;
  for (const auto& m : mentions) {
    if (m.gold_link == kNil) ++nil_all;
    if (m.noisy.value_or(false)) ++noisy;
    unique.emplace(FoldKey(m.surface), m.gold_link);
    ++st.type_histogram[m.ner_type];
  }
  st.n_mentions_unique = static_cast<long>(unique.size());
  long nil_unique = 0;
  for (const auto& [surface, link] : unique) {
    if (link == kNil) ++nil_unique;
  }
  if (st.n_mentions_all > 0) {
    st.nil_share_all = static_cast<double>(nil_all) / static_cast<double>(st.n_mentions_all);
    st.noisy_share = static_cast<double>(noisy) / static_cast<double>(st.n_mentions_all);
  }
  if (st.n_mentions_unique > 0) {
    st.nil_share_unique = static_cast<double>(nil_unique) / static_cast<double>(st.n_mentions_unique);
  }
  return st;
}

nlohmann::json StatsToJson(const CorpusStats& st) {
  return {
      {"n_docs", st.n_docs},
      {"n_sentences", st.n_sentences},
      {"n_tokens", st.n_tokens},
      {"avg_tokens_per_sentence", st.avg_tokens_per_sentence},
      {"n_mentions_all", st.n_mentions_all},
      {"n_mentions_unique", st.n_mentions_unique},
      {"nil_share_all", st.nil_share_all},
      {"nil_share_unique", st.nil_share_unique},
      {"noisy_share", st.noisy_share},
      {"type_histogram", st.type_histogram},
  };
}

std::string StatsToText(const CorpusStats& st) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(1);
  os << "documents             " << st.n_docs << "\n"
     << "sentences             " << st.n_sentences << "\n"
     << "tokens                " << st.n_tokens << "\n"
     << "avg tokens/sentence   " << st.avg_tokens_per_sentence << "\n";
  os.precision(2);
  os << "mentions (all)        " << st.n_mentions_all << "\n"
     << "mentions (unique)     " << st.n_mentions_unique << "\n"
     << "NIL share (all)       " << st.nil_share_all << "\n"
     << "NIL share (unique)    " << st.nil_share_unique << "\n"
     << "noisy share           " << st.noisy_share << "\n"
     << "types                 " << st.type_histogram.size() << "\n";
  return os.str();
}

}  // namespace histel
