#ifndef MTAUG_POSTEDIT_HPP
#define MTAUG_POSTEDIT_HPP

// Attention-argmax alignment and the post-editing transforms applied to raw
// MT output: entity copy-over, entity resampling from local catalogs, and
// simulated code-mixing.

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtaug/common.hpp"
#include "mtaug/corpus.hpp"

namespace mtaug {

/// Row-stochastic decoder attention: one row per target token, one column
/// per source token.
class AttentionMatrix {
 public:
  AttentionMatrix() = default;
  AttentionMatrix(std::size_t rows, std::size_t cols, std::vector<double> weights)
      : rows_(rows), cols_(cols), w_(std::move(weights)) {
    if (rows_ == 0 || cols_ == 0) throw DataError("attention matrix must be at least 1x1");
    if (w_.size() != rows_ * cols_) throw DataError("attention matrix size mismatch");
    for (double x : w_) {
      if (!(x >= 0.0 && x <= 1.0)) throw DataError("attention weight outside [0, 1]");
    }
  }

  static AttentionMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw DataError("attention matrix has no rows");
    const std::size_t cols = rows.front().size();
    std::vector<double> flat;
    flat.reserve(rows.size() * cols);
    for (const auto& r : rows) {
      if (r.size() != cols) throw DataError("attention rows differ in length");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return AttentionMatrix(rows.size(), cols, std::move(flat));
  }

  static AttentionMatrix identity(std::size_t n) {
    std::vector<double> w(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) w[i * n + i] = 1.0;
    return AttentionMatrix(n, n, std::move(w));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double at(std::size_t i, std::size_t j) const { return w_[i * cols_ + j]; }

  std::vector<std::vector<double>> to_rows() const {
    std::vector<std::vector<double>> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i].assign(w_.begin() + static_cast<std::ptrdiff_t>(i * cols_),
                                                          w_.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols_));
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> w_;
};

struct TranslationHypothesis {
  TokenList source_tokens;
  TokenList target_tokens;
  std::vector<double> token_logprobs;  // natural log, one per target token
  AttentionMatrix attention;

  double mt_score() const {
    double s = 0.0;
    for (double lp : token_logprobs) s += lp;
    return s;
  }
};

inline void validate_hypothesis(const TranslationHypothesis& h, const std::string& what) {
  if (h.target_tokens.empty()) throw DataError(what + ": empty target");
  if (h.source_tokens.empty()) throw DataError(what + ": empty source");
  if (h.token_logprobs.size() != h.target_tokens.size()) {
    throw DataError(what + ": " + std::to_string(h.token_logprobs.size()) + " log-probabilities for " +
                    std::to_string(h.target_tokens.size()) + " target tokens");
  }
  for (double lp : h.token_logprobs) {
    if (!(lp <= 0.0)) throw DataError(what + ": token log-probability must be <= 0");
  }
  if (h.attention.rows() != h.target_tokens.size() || h.attention.cols() != h.source_tokens.size()) {
    throw DataError(what + ": attention is " + std::to_string(h.attention.rows()) + "x" +
                    std::to_string(h.attention.cols()) + ", expected " +
                    std::to_string(h.target_tokens.size()) + "x" + std::to_string(h.source_tokens.size()));
  }
}

/// One source utterance with its n-best translations (rank order).
struct TranslationRecord {
  std::string id;
  TokenList source_tokens;
  std::vector<EntitySpan> entities;  // source-side annotations, optional
  std::vector<TranslationHypothesis> hypotheses;
};

/// Target position -> aligned source position.
using Alignment = std::vector<std::size_t>;

/// a(i) = argmax_j attention[i][j], ties to the lowest source index.
/// Rows must sum to 1 within [0.9, 1.1].
inline Alignment extract_alignment(const AttentionMatrix& att) {
  Alignment a(att.rows());
  for (std::size_t i = 0; i < att.rows(); ++i) {
    double sum = 0.0;
    std::size_t best = 0;
    for (std::size_t j = 0; j < att.cols(); ++j) {
      sum += att.at(i, j);
      if (att.at(i, j) > att.at(i, best)) best = j;
    }
    if (sum < 0.9 || sum > 1.1) {
      throw DataError("attention row " + std::to_string(i) + " sums to " + fixed(sum, 4));
    }
    a[i] = best;
  }
  return a;
}

/// Target tokens after editing, with entity spans and an alignment that
/// stays total over the edited positions.
struct EditedTokens {
  TokenList tokens;
  std::vector<EntitySpan> spans;
  Alignment alignment;

  bool in_span(std::size_t i) const {
    return std::any_of(spans.begin(), spans.end(), [&](const EntitySpan& s) { return s.contains(i); });
  }
};

struct CopyOverResult {
  EditedTokens edited;
  std::vector<EntitySpan> unaligned;  // source spans no target token aligned to
};

/// Copies source entities verbatim into the translation. For every source
/// span, the minimal contiguous run of target positions aligned into it is
/// replaced by the span's source tokens. Spans without aligned positions
/// are left out and reported.
inline CopyOverResult ne_copy_over(const TranslationHypothesis& hyp, const std::vector<EntitySpan>& entities,
                                   const Alignment& alignment) {
  if (alignment.size() != hyp.target_tokens.size()) {
    throw DataError("alignment length differs from target length");
  }
  validate_spans(entities, hyp.source_tokens.size(), "source entities");
  std::vector<EntitySpan> ordered(entities);
  std::sort(ordered.begin(), ordered.end(),
            [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });

  struct Run {
    std::size_t begin, end;  // target positions [begin, end)
    const EntitySpan* span;
  };
  CopyOverResult res;
  std::vector<Run> runs;
  for (const auto& span : ordered) {
    std::size_t lo = SIZE_MAX, hi = 0;
    for (std::size_t i = 0; i < alignment.size(); ++i) {
      if (span.contains(alignment[i])) {
        lo = std::min(lo, i);
        hi = std::max(hi, i + 1);
      }
    }
    if (lo == SIZE_MAX) {
      res.unaligned.push_back(span);
      continue;
    }
    runs.push_back({lo, hi, &span});
  }
  std::sort(runs.begin(), runs.end(), [](const Run& a, const Run& b) { return a.begin < b.begin; });
  auto span_str = [](const EntitySpan& s) {
    return s.entity_type + "[" + std::to_string(s.start) + "," + std::to_string(s.end) + ")";
  };
  for (std::size_t k = 1; k < runs.size(); ++k) {
    if (runs[k].begin < runs[k - 1].end) {
      throw DataError("entity copy-over: replacement runs of " + span_str(*runs[k - 1].span) + " and " +
                      span_str(*runs[k].span) + " overlap in the target");
    }
  }

  auto& out = res.edited;
  std::size_t r = 0;
  for (std::size_t i = 0; i < hyp.target_tokens.size();) {
    if (r < runs.size() && runs[r].begin == i) {
      const EntitySpan& s = *runs[r].span;
      const std::size_t pos = out.tokens.size();
      for (std::size_t j = s.start; j < s.end; ++j) {
        out.tokens.push_back(hyp.source_tokens[j]);
        out.alignment.push_back(j);
      }
      out.spans.push_back({pos, out.tokens.size(), s.entity_type});
      i = runs[r].end;
      ++r;
    } else {
      out.tokens.push_back(hyp.target_tokens[i]);
      out.alignment.push_back(alignment[i]);
      ++i;
    }
  }
  return res;
}

/// Samples one catalog entry with probability weight / total weight.
inline const CatalogEntry& sample_entry(const Catalog& cat, SplitMix64& rng) {
  const double total = cat.total_weight();
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (const auto& e : cat.entries) {
    acc += e.weight;
    if (u < acc) return e;
  }
  return cat.entries.back();
}

/// Replaces each entity's surface with a catalog draw. Spans whose type has
/// no catalog stay unchanged (with a warning). The random stream depends
/// only on (seed, utterance id).
inline EditedTokens ne_resample(const EditedTokens& in, const CatalogMap& catalogs, std::uint64_t seed,
                                const std::string& utterance_id) {
  if (in.spans.empty()) return in;
  auto rng = item_stream(seed, utterance_id, "ne_resample");
  std::vector<EntitySpan> ordered(in.spans);
  std::sort(ordered.begin(), ordered.end(),
            [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });
  EditedTokens out;
  std::size_t i = 0;
  for (const auto& span : ordered) {
    for (; i < span.start; ++i) {
      out.tokens.push_back(in.tokens[i]);
      out.alignment.push_back(in.alignment[i]);
    }
    const std::size_t pos = out.tokens.size();
    auto it = catalogs.find(span.entity_type);
    if (it == catalogs.end() || it->second.entries.empty()) {
      log::warn("utterance '" + utterance_id + "': no catalog for entity type '" + span.entity_type +
                "', span kept");
      for (std::size_t j = span.start; j < span.end; ++j) {
        out.tokens.push_back(in.tokens[j]);
        out.alignment.push_back(in.alignment[j]);
      }
    } else {
      const auto& entry = sample_entry(it->second, rng);
      for (const auto& t : entry.surface) {
        out.tokens.push_back(t);
        out.alignment.push_back(in.alignment[span.start]);
      }
    }
    out.spans.push_back({pos, out.tokens.size(), span.entity_type});
    i = span.end;
  }
  for (; i < in.tokens.size(); ++i) {
    out.tokens.push_back(in.tokens[i]);
    out.alignment.push_back(in.alignment[i]);
  }
  return out;
}

/// Retention probability of source token s:
///   p(s) = p_max * relfreq(s) / max_w relfreq(w).
inline double code_mix_probability(const std::string& source_token, const FrequencyTable& freq, double p_max) {
  const double top = freq.max_relfreq();
  if (top <= 0.0) return 0.0;
  return std::min(1.0, p_max * freq.relfreq(source_token) / top);
}

/// Replaces target tokens outside entity spans by their aligned source
/// token with probability p(source token). Sentence length is unchanged.
inline EditedTokens simulate_code_mix(const EditedTokens& in, const TokenList& source_tokens,
                                      const FrequencyTable& freq, double p_max, std::uint64_t seed,
                                      const std::string& utterance_id, std::size_t* replaced = nullptr) {
  if (!(p_max >= 0.0 && p_max <= 1.0)) {
    throw ConfigError("code-mix p_max must lie in [0, 1], got " + std::to_string(p_max));
  }
  if (in.alignment.size() != in.tokens.size()) throw DataError("alignment length differs from token count");
  auto rng = item_stream(seed, utterance_id, "code_mix");
  EditedTokens out = in;
  std::size_t n = 0;
  for (std::size_t i = 0; i < out.tokens.size(); ++i) {
    if (in.in_span(i)) continue;
    const std::size_t a = in.alignment[i];
    if (a >= source_tokens.size()) throw DataError("alignment points past the source sentence");
    const std::string& s = source_tokens[a];
    const double p = code_mix_probability(s, freq, p_max);
    if (rng.uniform() < p) {
      if (out.tokens[i] != s) ++n;
      out.tokens[i] = s;
    }
  }
  if (replaced) *replaced = n;
  return out;
}

struct PostEditConfig {
  bool ne_copy = true;
  bool ne_resample = true;
  bool code_mix = true;
  double p_max = 0.5;
  std::uint64_t seed = 42;
};

struct PostEditResult {
  std::string id;
  EditedTokens edited;
  std::vector<std::string> edits;  // applied transforms, in order
  std::size_t unaligned_entities = 0;
  std::size_t code_mixed_tokens = 0;
};

/// Applies the enabled transforms in order: copy-over, resampling, code-mix.
inline PostEditResult postedit_hypothesis(const std::string& id, const TranslationHypothesis& hyp,
                                          const std::vector<EntitySpan>& entities, const CatalogMap& catalogs,
                                          const FrequencyTable* freq, const PostEditConfig& cfg) {
  PostEditResult res;
  res.id = id;
  const Alignment align = extract_alignment(hyp.attention);
  if (cfg.ne_copy) {
    auto co = ne_copy_over(hyp, entities, align);
    res.edited = std::move(co.edited);
    res.unaligned_entities = co.unaligned.size();
    res.edits.push_back("ne_copy");
  } else {
    res.edited.tokens = hyp.target_tokens;
    res.edited.alignment = align;
  }
  if (cfg.ne_resample) {
    res.edited = ne_resample(res.edited, catalogs, cfg.seed, id);
    res.edits.push_back("ne_resample");
  }
  if (cfg.code_mix) {
    if (!freq) throw ConfigError("code-mixing needs a transcribed-corpus frequency table");
    res.edited = simulate_code_mix(res.edited, hyp.source_tokens, *freq, cfg.p_max, cfg.seed, id,
                                   &res.code_mixed_tokens);
    res.edits.push_back("code_mix");
  }
  return res;
}

// ---------------------------------------------------------------------------
// Translation JSONL

inline TranslationRecord parse_translation(std::string_view line, std::size_t line_no) {
  const std::string where = "translation line " + std::to_string(line_no);
  try {
    const auto j = nlohmann::json::parse(line);
    TranslationRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.source_tokens = j.at("source_tokens").get<TokenList>();
    if (j.contains("entities")) rec.entities = parse_entities(j.at("entities"), where);
    validate_spans(rec.entities, rec.source_tokens.size(), where);
    const auto& hyps = j.at("hypotheses");
    if (!hyps.is_array() || hyps.empty()) throw DataError(where + ": needs at least one hypothesis");
    for (std::size_t k = 0; k < hyps.size(); ++k) {
      const auto& h = hyps[k];
      TranslationHypothesis hyp;
      hyp.source_tokens = rec.source_tokens;
      hyp.target_tokens = h.at("target_tokens").get<TokenList>();
      hyp.token_logprobs = h.at("token_logprobs").get<std::vector<double>>();
      hyp.attention = AttentionMatrix::from_rows(h.at("attention").get<std::vector<std::vector<double>>>());
      validate_hypothesis(hyp, where + " hypothesis " + std::to_string(k));
      rec.hypotheses.push_back(std::move(hyp));
    }
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + ": " + e.what());
  }
}

inline std::vector<TranslationRecord> read_translations(std::istream& in) {
  std::vector<TranslationRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_translation(line, line_no));
  }
  return out;
}

inline std::vector<TranslationRecord> load_translations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open translation file " + path);
  try {
    return read_translations(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline nlohmann::json translation_to_json(const TranslationRecord& rec) {
  nlohmann::json j;
  j["id"] = rec.id;
  j["source_tokens"] = rec.source_tokens;
  if (!rec.entities.empty()) j["entities"] = entities_to_json(rec.entities);
  auto hyps = nlohmann::json::array();
  for (const auto& h : rec.hypotheses) {
    hyps.push_back({{"target_tokens", h.target_tokens},
                    {"token_logprobs", h.token_logprobs},
                    {"attention", h.attention.to_rows()}});
  }
  j["hypotheses"] = std::move(hyps);
  return j;
}

/// Edited output: the Utterance schema plus provenance of the edits.
inline nlohmann::json edited_to_json(const PostEditResult& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["tokens"] = r.edited.tokens;
  j["entities"] = entities_to_json(r.edited.spans);
  j["provenance"] = {{"edits", r.edits}};
  return j;
}

}  // namespace mtaug

#endif  // MTAUG_POSTEDIT_HPP
