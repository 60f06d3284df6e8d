#ifndef MTAUG_CORPUS_HPP
#define MTAUG_CORPUS_HPP

// Utterances, entity catalogs, word vectors and token frequency tables,
// plus their file formats.

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/uscript.h>
#include <unicode/unistr.h>
#include <unicode/locid.h>

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mtaug/common.hpp"

namespace mtaug {

struct EntitySpan {
  std::size_t start = 0;  // inclusive token index
  std::size_t end = 0;    // exclusive token index
  std::string entity_type;

  std::size_t length() const { return end - start; }
  bool contains(std::size_t i) const { return i >= start && i < end; }
  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
};

struct Utterance {
  std::string id;
  TokenList tokens;
  std::vector<EntitySpan> entities;
  std::optional<std::string> scenario;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct CatalogEntry {
  TokenList surface;
  double weight = 1.0;
};

struct Catalog {
  std::string entity_type;
  std::vector<CatalogEntry> entries;

  double total_weight() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.weight;
    return s;
  }
};

using CatalogMap = std::map<std::string, Catalog>;

class WordVectorTable {
 public:
  WordVectorTable() = default;
  explicit WordVectorTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  bool empty() const { return vectors_.empty(); }

  const std::vector<double>* find(const std::string& token) const {
    auto it = vectors_.find(token);
    return it == vectors_.end() ? nullptr : &it->second;
  }

  /// Returns false if the token was already present (the new value wins).
  bool insert(std::string token, std::vector<double> vec) {
    if (vec.size() != dim_) {
      throw DataError("word vector for '" + token + "' has dimension " +
                      std::to_string(vec.size()) + ", expected " + std::to_string(dim_));
    }
    auto [it, fresh] = vectors_.insert_or_assign(std::move(token), std::move(vec));
    return fresh;
  }

  /// Copy with every vector multiplied by `c`.
  WordVectorTable scaled(double c) const {
    WordVectorTable out(dim_);
    for (const auto& [tok, v] : vectors_) {
      std::vector<double> w(v);
      for (double& x : w) x *= c;
      out.vectors_.emplace(tok, std::move(w));
    }
    return out;
  }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

/// Token counts with additive smoothing:
///   relfreq(w) = (count(w) + alpha) / (N + alpha * V).
class FrequencyTable {
 public:
  FrequencyTable() = default;

  FrequencyTable(std::unordered_map<std::string, std::uint64_t> counts, double alpha,
                 std::size_t pseudo_vocab = 0)
      : counts_(std::move(counts)), alpha_(alpha) {
    if (alpha < 0.0) throw ConfigError("smoothing alpha must be >= 0");
    std::size_t distinct = 0;
    for (const auto& [tok, c] : counts_) {
      total_ += c;
      if (c > 0) {
        ++distinct;
        max_count_ = std::max(max_count_, c);
      }
    }
    vocab_size_ = distinct + (alpha > 0.0 ? pseudo_vocab : 0);
  }

  std::uint64_t count(const std::string& w) const {
    auto it = counts_.find(w);
    return it == counts_.end() ? 0 : it->second;
  }
  std::uint64_t total() const { return total_; }
  std::size_t vocab_size() const { return vocab_size_; }
  double alpha() const { return alpha_; }
  const std::unordered_map<std::string, std::uint64_t>& counts() const { return counts_; }

  double relfreq(const std::string& w) const {
    const double denom = static_cast<double>(total_) + alpha_ * static_cast<double>(vocab_size_);
    if (denom <= 0.0) return 0.0;
    return (static_cast<double>(count(w)) + alpha_) / denom;
  }

  /// Largest smoothed relative frequency over the observed vocabulary.
  double max_relfreq() const {
    const double denom = static_cast<double>(total_) + alpha_ * static_cast<double>(vocab_size_);
    if (denom <= 0.0) return 0.0;
    return (static_cast<double>(max_count_) + alpha_) / denom;
  }

 private:
  std::unordered_map<std::string, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
  std::uint64_t max_count_ = 0;
  std::size_t vocab_size_ = 0;
  double alpha_ = 0.0;
};

namespace detail {

inline const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || n == nullptr) {
    throw InvariantError("ICU NFC normalizer unavailable");
  }
  return *n;
}

// A token is Latin when it has at least one Latin letter and no letters
// from any other script. Digits and punctuation are script-neutral.
inline bool is_latin_token(const icu::UnicodeString& tok) {
  bool latin = false;
  for (int32_t i = 0; i < tok.length();) {
    const UChar32 c = tok.char32At(i);
    i += U16_LENGTH(c);
    if (!u_isalpha(c)) continue;
    UErrorCode status = U_ZERO_ERROR;
    const UScriptCode sc = uscript_getScript(c, &status);
    if (U_FAILURE(status)) return false;
    if (sc == USCRIPT_COMMON || sc == USCRIPT_INHERITED) continue;
    if (sc != USCRIPT_LATIN) return false;
    latin = true;
  }
  return latin;
}

inline std::string to_utf8(const icu::UnicodeString& s) {
  std::string out;
  s.toUTF8String(out);
  return out;
}

}  // namespace detail

/// NFC-normalizes `raw_text`, splits on Unicode whitespace and lowercases
/// Latin-script tokens. Other scripts pass through untouched.
inline TokenList normalize_tokens(std::string_view raw_text) {
  TokenList out;
  if (raw_text.empty()) return out;
  const auto& norm = detail::nfc();
  UErrorCode status = U_ZERO_ERROR;
  const icu::UnicodeString text = norm.normalize(
      icu::UnicodeString::fromUTF8(icu::StringPiece(raw_text.data(),
                                                    static_cast<int32_t>(raw_text.size()))),
      status);
  if (U_FAILURE(status)) throw DataError("NFC normalization failed");

  auto flush = [&](icu::UnicodeString& tok) {
    if (tok.isEmpty()) return;
    if (detail::is_latin_token(tok)) {
      tok.toLower(icu::Locale::getRoot());
      UErrorCode st = U_ZERO_ERROR;
      tok = norm.normalize(tok, st);
      if (U_FAILURE(st)) throw DataError("NFC normalization failed");
    }
    out.push_back(detail::to_utf8(tok));
    tok.remove();
  };

  icu::UnicodeString tok;
  for (int32_t i = 0; i < text.length();) {
    const UChar32 c = text.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      flush(tok);
    } else {
      tok.append(c);
    }
  }
  flush(tok);
  return out;
}

/// Normalizes each token of an already tokenized list.
inline TokenList normalize_token_list(const TokenList& tokens) {
  TokenList out;
  for (const auto& t : tokens) {
    auto parts = normalize_tokens(t);
    out.insert(out.end(), parts.begin(), parts.end());
  }
  return out;
}

/// Checks span bounds, emptiness and pairwise overlap. Throws DataError
/// naming `what` on violation.
inline void validate_spans(const std::vector<EntitySpan>& spans, std::size_t n_tokens,
                           const std::string& what) {
  std::vector<const EntitySpan*> sorted;
  for (const auto& s : spans) {
    if (s.start >= s.end) {
      throw DataError(what + ": empty entity span [" + std::to_string(s.start) + "," +
                      std::to_string(s.end) + ")");
    }
    if (s.end > n_tokens) {
      throw DataError(what + ": entity span [" + std::to_string(s.start) + "," +
                      std::to_string(s.end) + ") exceeds " + std::to_string(n_tokens) +
                      " tokens");
    }
    sorted.push_back(&s);
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const EntitySpan* a, const EntitySpan* b) { return a->start < b->start; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->start < sorted[i - 1]->end) {
      throw DataError(what + ": overlapping entity spans [" + std::to_string(sorted[i - 1]->start) +
                      "," + std::to_string(sorted[i - 1]->end) + ") and [" +
                      std::to_string(sorted[i]->start) + "," + std::to_string(sorted[i]->end) +
                      ")");
    }
  }
}

inline void validate_utterance(const Utterance& u) {
  const std::string what = "utterance '" + u.id + "'";
  if (u.tokens.empty()) throw DataError(what + ": no tokens");
  for (const auto& t : u.tokens) {
    if (t.empty()) throw DataError(what + ": empty token");
  }
  validate_spans(u.entities, u.tokens.size(), what);
}

inline std::vector<EntitySpan> parse_entities(const nlohmann::json& arr, const std::string& what) {
  std::vector<EntitySpan> spans;
  if (!arr.is_array()) throw DataError(what + ": \"entities\" must be an array");
  for (const auto& e : arr) {
    if (!e.is_object() || !e.contains("start") || !e.contains("end") || !e.contains("type")) {
      throw DataError(what + ": entity needs start, end and type");
    }
    const auto start = e.at("start").get<long long>();
    const auto end = e.at("end").get<long long>();
    if (start < 0 || end < 0) throw DataError(what + ": negative entity index");
    spans.push_back({static_cast<std::size_t>(start), static_cast<std::size_t>(end),
                     e.at("type").get<std::string>()});
  }
  return spans;
}

inline nlohmann::json entities_to_json(const std::vector<EntitySpan>& spans) {
  auto arr = nlohmann::json::array();
  for (const auto& s : spans) {
    arr.push_back({{"start", s.start}, {"end", s.end}, {"type", s.entity_type}});
  }
  return arr;
}

/// Parses one Utterance JSONL record. `line_no` is 1-based and names the
/// utterance when the record carries no id.
inline Utterance parse_utterance(std::string_view line, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
  }
  const std::string where = "line " + std::to_string(line_no);
  if (!j.is_object()) throw DataError(where + ": expected a JSON object");
  try {
    Utterance u;
    u.id = j.contains("id") ? j.at("id").get<std::string>() : "line-" + std::to_string(line_no);
    const bool has_tokens = j.contains("tokens");
    const bool has_text = j.contains("text");
    if (has_tokens == has_text) {
      throw DataError(where + ": exactly one of \"tokens\" or \"text\" is required");
    }
    if (has_tokens) {
      u.tokens = j.at("tokens").get<TokenList>();
    } else {
      u.tokens = normalize_tokens(j.at("text").get<std::string>());
    }
    if (j.contains("entities")) u.entities = parse_entities(j.at("entities"), where);
    if (j.contains("scenario") && !j.at("scenario").is_null()) {
      u.scenario = j.at("scenario").get<std::string>();
    }
    validate_utterance(u);
    return u;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + ": " + e.what());
  }
}

inline std::vector<Utterance> read_utterances(std::istream& in) {
  std::vector<Utterance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_utterance(line, line_no));
  }
  return out;
}

inline std::vector<Utterance> load_utterances(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open utterance file " + path);
  try {
    return read_utterances(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline nlohmann::json utterance_to_json(const Utterance& u) {
  nlohmann::json j;
  j["id"] = u.id;
  j["tokens"] = u.tokens;
  j["entities"] = entities_to_json(u.entities);
  if (u.scenario) j["scenario"] = *u.scenario;
  return j;
}

inline void write_utterances(std::ostream& out, const std::vector<Utterance>& utts) {
  for (const auto& u : utts) out << utterance_to_json(u).dump() << '\n';
}

inline void write_utterances(const std::string& path, const std::vector<Utterance>& utts) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  write_utterances(out, utts);
}

inline std::vector<TokenList> token_lists(const std::vector<Utterance>& utts) {
  std::vector<TokenList> out;
  out.reserve(utts.size());
  for (const auto& u : utts) out.push_back(u.tokens);
  return out;
}

/// Catalog JSONL: {"type": str, "surface": [str], "weight": float?}.
inline CatalogMap read_catalogs(std::istream& in) {
  CatalogMap out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "catalog line " + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      CatalogEntry entry;
      entry.surface = j.at("surface").get<TokenList>();
      entry.weight = j.value("weight", 1.0);
      if (entry.surface.empty()) throw DataError(where + ": empty surface");
      if (!(entry.weight > 0.0) || !std::isfinite(entry.weight)) {
        throw DataError(where + ": weight must be positive");
      }
      const auto type = j.at("type").get<std::string>();
      auto& cat = out[type];
      cat.entity_type = type;
      cat.entries.push_back(std::move(entry));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return out;
}

inline CatalogMap load_catalogs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open catalog file " + path);
  return read_catalogs(in);
}

namespace detail {

struct VectorFileHeader {
  std::size_t count = 0;
  std::size_t dim = 0;
};

inline VectorFileHeader parse_vector_header(std::istream& in, const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(what + ": missing header line");
  std::istringstream hs(line);
  long long count = -1, dim = -1;
  std::string extra;
  if (!(hs >> count >> dim) || (hs >> extra) || count < 0 || dim <= 0) {
    throw DataError(what + ": line 1: header must be \"count dim\"");
  }
  return {static_cast<std::size_t>(count), static_cast<std::size_t>(dim)};
}

// Reads "<key> v1 ... v_dim" rows and calls sink(key, values, line_no).
template <typename Sink>
void read_vector_rows(std::istream& in, const VectorFileHeader& hdr, const std::string& what,
                      Sink&& sink) {
  std::string line;
  std::size_t line_no = 1;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_whitespace(line);
    if (fields.size() != hdr.dim + 1) {
      throw DataError(what + ": line " + std::to_string(line_no) + ": expected " +
                      std::to_string(hdr.dim) + " values, found " +
                      std::to_string(fields.empty() ? 0 : fields.size() - 1));
    }
    std::vector<double> vec(hdr.dim);
    for (std::size_t d = 0; d < hdr.dim; ++d) {
      const std::string& f = fields[d + 1];
      char* endp = nullptr;
      vec[d] = std::strtod(f.c_str(), &endp);
      if (endp != f.c_str() + f.size() || !std::isfinite(vec[d])) {
        throw DataError(what + ": line " + std::to_string(line_no) + ": bad number '" + f + "'");
      }
    }
    ++rows;
    if (rows > hdr.count) {
      throw DataError(what + ": line " + std::to_string(line_no) + ": more rows than the " +
                      std::to_string(hdr.count) + " declared");
    }
    sink(fields[0], std::move(vec), line_no);
  }
  if (rows != hdr.count) {
    throw DataError(what + ": header declares " + std::to_string(hdr.count) + " rows, found " +
                    std::to_string(rows));
  }
}

}  // namespace detail

/// Word vectors in the word2vec text layout. Duplicate tokens keep the
/// later row and log a warning.
inline WordVectorTable read_word_vectors(std::istream& in, const std::string& what = "word vectors") {
  const auto hdr = detail::parse_vector_header(in, what);
  WordVectorTable table(hdr.dim);
  detail::read_vector_rows(in, hdr, what,
                           [&](const std::string& tok, std::vector<double> v, std::size_t line_no) {
                             if (!table.insert(tok, std::move(v))) {
                               log::warn(what + ": line " + std::to_string(line_no) +
                                         ": duplicate token '" + tok + "', later row wins");
                             }
                           });
  if (table.empty()) throw DataError(what + ": no vectors");
  return table;
}

inline WordVectorTable load_word_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open word vector file " + path);
  return read_word_vectors(in, path);
}

inline FrequencyTable build_frequency_table(const std::vector<TokenList>& corpus, double alpha,
                                            std::size_t pseudo_vocab = 0) {
  if (corpus.empty()) throw DataError("frequency table needs a non-empty corpus");
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& sent : corpus) {
    for (const auto& t : sent) ++counts[t];
  }
  return FrequencyTable(std::move(counts), alpha, pseudo_vocab);
}

inline FrequencyTable build_frequency_table(const std::vector<Utterance>& corpus, double alpha,
                                            std::size_t pseudo_vocab = 0) {
  return build_frequency_table(token_lists(corpus), alpha, pseudo_vocab);
}

}  // namespace mtaug

#endif  // MTAUG_CORPUS_HPP
