#ifndef MTAUG_ADAPT_HPP
#define MTAUG_ADAPT_HPP

// Domain adaptation of translation output: n-best rescoring with an
// in-domain LM, percentile filtering, and synthetic parallel pairs for an
// external finetuning job.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "mtaug/common.hpp"
#include "mtaug/corpus.hpp"
#include "mtaug/ngram_lm.hpp"
#include "mtaug/postedit.hpp"

namespace mtaug {

using NBestList = TranslationRecord;

struct RescoreConfig {
  double lm_weight = 0.3;
  bool length_normalize = true;
};

enum class FilterMetric { kMtScore, kSlmScore };

inline FilterMetric parse_filter_metric(const std::string& s) {
  if (s == "mt_score" || s == "mt") return FilterMetric::kMtScore;
  if (s == "slm_score" || s == "slm") return FilterMetric::kSlmScore;
  throw ConfigError("unknown filter metric '" + s + "' (mt_score, slm_score)");
}

inline const char* metric_name(FilterMetric m) {
  return m == FilterMetric::kMtScore ? "mt_score" : "slm_score";
}

struct FilterConfig {
  FilterMetric metric = FilterMetric::kSlmScore;
  double keep_fraction = 0.75;
  bool length_normalize = true;
};

/// MT decoder score in natural log, optionally averaged per target token.
inline double mt_term(const TranslationHypothesis& h, bool length_normalize) {
  const double s = h.mt_score();
  return length_normalize ? s / static_cast<double>(h.token_logprobs.size()) : s;
}

/// LM score of the target side converted to natural log, optionally
/// averaged per predicted position (tokens plus end marker).
template <SentenceScorer M>
double lm_term(const M& lm, const TokenList& target, bool length_normalize) {
  const double ln = log_prob(lm, target) * std::numbers::ln10;
  return length_normalize ? ln / static_cast<double>(target.size() + 1) : ln;
}

struct RescoreResult {
  std::size_t chosen = 0;  // index into the n-best list
  std::vector<double> mt;
  std::vector<double> lm;
  std::vector<double> combined;
};

/// combined(h) = (1 - w) * mt(h) + w * lm(h); the highest score wins and
/// ties go to the better original rank.
template <SentenceScorer M>
RescoreResult rescore(const NBestList& nbest, const M& lm, const RescoreConfig& cfg) {
  if (!(cfg.lm_weight >= 0.0 && cfg.lm_weight <= 1.0)) {
    throw ConfigError("LM weight must lie in [0, 1], got " + std::to_string(cfg.lm_weight));
  }
  if (nbest.hypotheses.empty()) throw DataError("n-best list '" + nbest.id + "' is empty");
  RescoreResult r;
  for (const auto& h : nbest.hypotheses) {
    const double mt = mt_term(h, cfg.length_normalize);
    const double lmv = lm_term(lm, h.target_tokens, cfg.length_normalize);
    r.mt.push_back(mt);
    r.lm.push_back(lmv);
    r.combined.push_back((1.0 - cfg.lm_weight) * mt + cfg.lm_weight * lmv);
  }
  for (std::size_t i = 1; i < r.combined.size(); ++i) {
    if (r.combined[i] > r.combined[r.chosen]) r.chosen = i;
  }
  return r;
}

struct ScoredItem {
  std::string id;
  double score = 0.0;
};

struct FilterResult {
  std::vector<std::string> retained;  // best first
  std::vector<ScoredItem> scores;     // input order
};

/// Keeps the ceil(fraction * n) best-scoring translations; equal scores
/// are ordered by id.
inline FilterResult filter_translations(const std::vector<std::pair<std::string, TranslationHypothesis>>& items,
                                        const FilterConfig& cfg, const ScorerHandle* lm = nullptr,
                                        unsigned jobs = 1) {
  if (cfg.metric == FilterMetric::kSlmScore && lm == nullptr) {
    throw ConfigError("slm_score filtering needs an in-domain language model");
  }
  FilterResult res;
  if (items.empty()) {
    nearest_rank_count(cfg.keep_fraction, 0);  // still validates the fraction
    return res;
  }
  const std::size_t keep = nearest_rank_count(cfg.keep_fraction, items.size());
  res.scores.resize(items.size());
  parallel_for(items.size(), jobs, [&](std::size_t i) {
    const auto& [id, h] = items[i];
    const double s = cfg.metric == FilterMetric::kMtScore ? mt_term(h, cfg.length_normalize)
                                                          : lm_term(*lm, h.target_tokens, cfg.length_normalize);
    res.scores[i] = {id, s};
  });
  std::vector<ScoredItem> ranked(res.scores);
  std::stable_sort(ranked.begin(), ranked.end(), [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  for (std::size_t i = 0; i < keep; ++i) res.retained.push_back(ranked[i].id);
  return res;
}

struct ParallelPair {
  std::string id;
  TokenList source;
  TokenList target;
};

/// Pairs each source utterance with its edited translation by id, in
/// source order. Ids present on only one side are reported together.
inline std::vector<ParallelPair> build_synthetic_parallel(
    const std::vector<Utterance>& sources, const std::vector<std::pair<std::string, TokenList>>& translations) {
  std::map<std::string, const TokenList*> by_id;
  for (const auto& [id, toks] : translations) {
    if (!by_id.emplace(id, &toks).second) throw DataError("duplicate translation id '" + id + "'");
  }
  std::vector<std::string> orphans;
  std::set<std::string> source_ids;
  std::vector<ParallelPair> out;
  for (const auto& u : sources) {
    source_ids.insert(u.id);
    auto it = by_id.find(u.id);
    if (it == by_id.end()) {
      orphans.push_back("source:" + u.id);
      continue;
    }
    out.push_back({u.id, u.tokens, *it->second});
  }
  for (const auto& [id, toks] : translations) {
    if (!source_ids.count(id)) orphans.push_back("translation:" + id);
  }
  if (!orphans.empty()) {
    std::string msg = "unpaired ids:";
    for (const auto& o : orphans) msg += " " + o;
    throw DataError(msg);
  }
  return out;
}

inline void write_parallel_tsv(std::ostream& out, const std::vector<ParallelPair>& pairs) {
  for (const auto& p : pairs) out << join_tokens(p.source) << '\t' << join_tokens(p.target) << '\n';
}

inline std::vector<std::pair<TokenList, TokenList>> read_parallel_tsv(std::istream& in) {
  std::vector<std::pair<TokenList, TokenList>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw DataError("parallel TSV line " + std::to_string(line_no) + ": expected exactly one tab");
    }
    out.emplace_back(split_whitespace(std::string_view(line).substr(0, tab)),
                     split_whitespace(std::string_view(line).substr(tab + 1)));
  }
  return out;
}

}  // namespace mtaug

#endif  // MTAUG_ADAPT_HPP
