#ifndef MTAUG_NGRAM_LM_HPP
#define MTAUG_NGRAM_LM_HPP

// Katz back-off n-gram models with Good-Turing discounting, ARPA I/O and
// EM-tuned static linear interpolation.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtaug/common.hpp"

namespace mtaug {

using WordId = std::uint32_t;
using NGram = std::vector<WordId>;

inline constexpr const char* kBos = "<s>";
inline constexpr const char* kEos = "</s>";
inline constexpr const char* kUnk = "<unk>";

/// Log10 value written for events that are never predicted (sentence start).
inline constexpr double kNeverLog10 = -99.0;

struct NGramHash {
  std::size_t operator()(const NGram& g) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (WordId w : g) {
      h ^= w;
      h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

class KatzModel;
class Vocabulary;
inline KatzModel read_arpa(std::istream& in);

class Vocabulary {
 public:
  static constexpr WordId kBosId = 0;
  static constexpr WordId kEosId = 1;
  static constexpr WordId kUnkId = 2;

  Vocabulary() {
    add_raw(kBos);
    add_raw(kEos);
    add_raw(kUnk);
  }

  /// Adds a training token. Sentence markers appearing as ordinary tokens
  /// are folded into the unknown word.
  WordId add(const std::string& w) {
    if (w == kBos || w == kEos) return kUnkId;
    auto it = index_.find(w);
    if (it != index_.end()) return it->second;
    return add_raw(w);
  }

  /// Id of `w`, or the unknown-word id when out of vocabulary.
  WordId lookup(const std::string& w) const {
    if (w == kBos || w == kEos) return kUnkId;
    auto it = index_.find(w);
    return it == index_.end() ? kUnkId : it->second;
  }

  bool contains(const std::string& w) const { return index_.count(w) != 0; }
  const std::string& word(WordId id) const { return words_.at(id); }
  std::size_t size() const { return words_.size(); }

  /// Number of predictable words (everything except the sentence start).
  std::size_t predicted_size() const { return words_.size() - 1; }

 private:
  friend class KatzModel;
  friend KatzModel read_arpa(std::istream& in);
  WordId add_raw(const std::string& w) {
    const auto id = static_cast<WordId>(words_.size());
    words_.push_back(w);
    index_.emplace(w, id);
    return id;
  }

  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> index_;
};

/// Raw n-gram counts of orders 1..order. Sentences are padded with
/// order-1 sentence-start markers and one end marker; an n-gram is counted
/// once for every predicted position it ends at.
struct NGramCounts {
  int order = 0;
  Vocabulary vocab;
  std::vector<std::unordered_map<NGram, std::uint64_t, NGramHash>> by_order;  // [n-1]
  std::uint64_t token_count = 0;

  std::uint64_t count(const NGram& g) const {
    if (g.empty() || static_cast<int>(g.size()) > order) return 0;
    const auto& tbl = by_order[g.size() - 1];
    auto it = tbl.find(g);
    return it == tbl.end() ? 0 : it->second;
  }

  /// Verifies that, for every context h whose last word is predicted,
  /// the continuation counts of h do not exceed count(h).
  bool consistent() const {
    for (int n = 2; n <= order; ++n) {
      std::unordered_map<NGram, std::uint64_t, NGramHash> cont;
      for (const auto& [g, c] : by_order[n - 1]) {
        if (c == 0) return false;
        NGram h(g.begin(), g.end() - 1);
        cont[h] += c;
      }
      for (const auto& [h, total] : cont) {
        if (h.back() == Vocabulary::kBosId) continue;
        if (total > count(h)) return false;
      }
    }
    return true;
  }
};

inline NGramCounts count_ngrams(const std::vector<TokenList>& corpus, int order) {
  if (order < 1) throw ConfigError("n-gram order must be >= 1");
  NGramCounts counts;
  counts.order = order;
  counts.by_order.resize(static_cast<std::size_t>(order));
  std::vector<WordId> padded;
  NGram key;
  for (const auto& sent : corpus) {
    padded.assign(static_cast<std::size_t>(order - 1), Vocabulary::kBosId);
    for (const auto& tok : sent) padded.push_back(counts.vocab.add(tok));
    padded.push_back(Vocabulary::kEosId);
    counts.token_count += sent.size();
    for (std::size_t i = static_cast<std::size_t>(order - 1); i < padded.size(); ++i) {
      for (int n = 1; n <= order; ++n) {
        key.assign(padded.begin() + static_cast<std::ptrdiff_t>(i + 1 - n),
                   padded.begin() + static_cast<std::ptrdiff_t>(i + 1));
        ++counts.by_order[n - 1][key];
      }
    }
  }
  return counts;
}

struct KatzOptions {
  int order = 4;
  int gt_max = 5;  // Good-Turing discounting applies to counts 1..gt_max
  /// Lower bound on the mass left for unseen words in any distribution,
  /// including the unknown word's unigram probability.
  double min_unseen_mass = 1e-7;
};

/// Katz discount coefficients d_r for r = 0..gt_max (index 0 unused).
/// A count value whose estimate is undefined or falls outside (0, 1) is
/// left undiscounted.
inline std::vector<double> good_turing_discounts(const std::map<std::uint64_t, std::uint64_t>& coc,
                                                 int gt_max) {
  std::vector<double> d(static_cast<std::size_t>(gt_max) + 1, 1.0);
  auto n_of = [&](std::uint64_t r) -> double {
    auto it = coc.find(r);
    return it == coc.end() ? 0.0 : static_cast<double>(it->second);
  };
  const double n1 = n_of(1);
  if (n1 == 0.0) return d;
  const double k = static_cast<double>(gt_max);
  const double common = (k + 1.0) * n_of(static_cast<std::uint64_t>(gt_max) + 1) / n1;
  if (common >= 1.0) return d;
  for (int r = 1; r <= gt_max; ++r) {
    const double nr = n_of(static_cast<std::uint64_t>(r));
    if (nr == 0.0) continue;
    const double rstar = (r + 1.0) * n_of(static_cast<std::uint64_t>(r) + 1) / nr;
    const double dr = (rstar / r - common) / (1.0 - common);
    if (dr > 0.0 && dr < 1.0) d[static_cast<std::size_t>(r)] = dr;
  }
  return d;
}

class KatzModel;
inline KatzModel train_katz(const std::vector<TokenList>& corpus, const KatzOptions& opts);
inline KatzModel read_arpa(std::istream& in);

/// A back-off n-gram model in ARPA form: log10 probabilities for stored
/// n-grams and log10 back-off weights for stored contexts. Immutable once
/// built; safe for concurrent scoring.
class KatzModel {
 public:
  struct Entry {
    double log_prob = kNeverLog10;
    double log_bow = 0.0;
    bool has_bow = false;
  };
  using Table = std::unordered_map<NGram, Entry, NGramHash>;

  KatzModel() = default;

  int order() const { return order_; }
  bool empty() const { return order_ == 0; }
  const Vocabulary& vocab() const { return vocab_; }
  const Table& table(int n) const { return tables_.at(static_cast<std::size_t>(n - 1)); }

  std::size_t ngram_count(int n) const { return table(n).size(); }

  /// log10 P(w | history). Only the last order-1 history words matter;
  /// `max_order` restricts the lookup to lower orders.
  double cond_log10(std::span<const WordId> history, WordId w, int max_order = 0) const {
    const int top = max_order > 0 ? std::min(max_order, order_) : order_;
    const std::size_t ctx_len = std::min<std::size_t>(history.size(), static_cast<std::size_t>(top - 1));
    const auto ctx = history.subspan(history.size() - ctx_len);
    NGram key;
    key.reserve(ctx_len + 1);
    double bow_sum = 0.0;
    for (std::size_t h = ctx_len + 1; h-- > 0;) {
      // h = context length under consideration
      key.assign(ctx.end() - static_cast<std::ptrdiff_t>(h), ctx.end());
      key.push_back(w);
      const auto& tbl = tables_[h];
      if (auto it = tbl.find(key); it != tbl.end()) return bow_sum + it->second.log_prob;
      if (h > 0) {
        key.pop_back();
        const auto& ctbl = tables_[h - 1];
        if (auto it = ctbl.find(key); it != ctbl.end() && it->second.has_bow) {
          bow_sum += it->second.log_bow;
        }
      }
    }
    throw InvariantError("word id " + std::to_string(w) + " has no unigram entry");
  }

  /// Word ids of a sentence, out-of-vocabulary tokens mapped to <unk>.
  std::vector<WordId> map_tokens(const TokenList& tokens) const {
    std::vector<WordId> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(vocab_.lookup(t));
    return ids;
  }

  /// log10 probability of every predicted position: each token, then the
  /// end marker. The history starts with order-1 sentence-start markers.
  std::vector<double> position_log10(const TokenList& tokens) const {
    require_trained();
    std::vector<WordId> hist(static_cast<std::size_t>(order_ - 1), Vocabulary::kBosId);
    std::vector<double> out;
    out.reserve(tokens.size() + 1);
    auto step = [&](WordId w) {
      out.push_back(cond_log10(hist, w));
      if (!hist.empty()) {
        std::rotate(hist.begin(), hist.begin() + 1, hist.end());
        hist.back() = w;
      }
    };
    for (const auto& t : tokens) step(vocab_.lookup(t));
    step(Vocabulary::kEosId);
    return out;
  }

  /// Every context h with a stored distribution: the empty context plus
  /// each stored n-gram carrying a back-off weight.
  std::vector<NGram> contexts() const {
    std::vector<NGram> out{NGram{}};
    for (int n = 1; n < order_; ++n) {
      for (const auto& [g, e] : table(n)) {
        if (e.has_bow) out.push_back(g);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  void require_trained() const {
    if (empty()) throw DataError("language model is empty (never trained or loaded)");
  }

 private:
  friend KatzModel train_katz(const std::vector<TokenList>& corpus, const KatzOptions& opts);
  friend KatzModel read_arpa(std::istream& in);

  int order_ = 0;
  Vocabulary vocab_;
  std::vector<Table> tables_;  // [n-1]
};

/// Trains a Katz back-off model. Discounted estimates come from per-order
/// Good-Turing count-of-counts; back-off weights renormalize each context.
inline KatzModel train_katz(const std::vector<TokenList>& corpus, const KatzOptions& opts) {
  if (opts.order < 1) throw ConfigError("n-gram order must be >= 1");
  if (opts.gt_max < 1) throw ConfigError("Good-Turing cutoff must be >= 1");
  if (corpus.empty()) throw DataError("cannot train a language model on an empty corpus");
  NGramCounts counts = count_ngrams(corpus, opts.order);
  if (counts.token_count == 0) throw DataError("training corpus has zero tokens");

  KatzModel m;
  m.order_ = opts.order;
  m.vocab_ = counts.vocab;
  m.tables_.resize(static_cast<std::size_t>(opts.order));
  const std::size_t n_pred = m.vocab_.predicted_size();
  const double floor_mass = opts.min_unseen_mass;

  auto count_of_counts = [](const auto& tbl) {
    std::map<std::uint64_t, std::uint64_t> coc;
    for (const auto& [g, c] : tbl) ++coc[c];
    return coc;
  };
  auto discounted = [&](const std::vector<double>& d, std::uint64_t c) {
    return c <= static_cast<std::uint64_t>(opts.gt_max) ? d[c] * static_cast<double>(c)
                                                        : static_cast<double>(c);
  };

  // Unigrams. The unseen vocabulary (the unknown word unless it occurred
  // in training) gets the Good-Turing zero-count mass N1 / N.
  {
    const auto& uni = counts.by_order[0];
    const auto coc = count_of_counts(uni);
    const auto d = good_turing_discounts(coc, opts.gt_max);
    double total = 0.0;
    for (const auto& [g, c] : uni) total += static_cast<double>(c);
    std::vector<std::pair<WordId, double>> seen;
    double seen_mass = 0.0;
    for (const auto& [g, c] : uni) {
      const double p = discounted(d, c) / total;
      seen.emplace_back(g[0], p);
      seen_mass += p;
    }
    const std::size_t n_unseen = n_pred - seen.size();
    double scale = 1.0;
    double unseen_each = 0.0;
    if (n_unseen == 0) {
      scale = 1.0 / seen_mass;
    } else {
      const auto n1 = coc.count(1) ? static_cast<double>(coc.at(1)) : 0.0;
      // Capped at one half: with only singletons the estimate would be 1.
      const double left = std::clamp(n1 / total, floor_mass, 0.5);
      scale = (1.0 - left) / seen_mass;
      unseen_each = left / static_cast<double>(n_unseen);
    }
    auto& tbl = m.tables_[0];
    for (const auto& [w, p] : seen) tbl[NGram{w}].log_prob = std::log10(p * scale);
    for (WordId w = 1; w < m.vocab_.size(); ++w) {
      if (!tbl.count(NGram{w})) tbl[NGram{w}].log_prob = std::log10(unseen_each);
    }
    tbl[NGram{Vocabulary::kBosId}].log_prob = kNeverLog10;
  }

  for (int n = 2; n <= opts.order; ++n) {
    const auto& raw = counts.by_order[static_cast<std::size_t>(n - 1)];
    const auto d = good_turing_discounts(count_of_counts(raw), opts.gt_max);
    std::vector<std::pair<NGram, std::uint64_t>> sorted(raw.begin(), raw.end());
    std::sort(sorted.begin(), sorted.end());
    auto& tbl = m.tables_[static_cast<std::size_t>(n - 1)];
    auto& ctx_tbl = m.tables_[static_cast<std::size_t>(n - 2)];

    std::size_t i = 0;
    while (i < sorted.size()) {
      std::size_t j = i;
      const auto same_ctx = [&](const NGram& a, const NGram& b) {
        return std::equal(a.begin(), a.end() - 1, b.begin(), b.end() - 1);
      };
      double ctx_total = 0.0;
      while (j < sorted.size() && same_ctx(sorted[i].first, sorted[j].first)) {
        ctx_total += static_cast<double>(sorted[j].second);
        ++j;
      }
      const NGram ctx(sorted[i].first.begin(), sorted[i].first.end() - 1);
      const std::span<const WordId> lower_hist(ctx.data() + 1, ctx.size() - 1);

      double seen_mass = 0.0;
      double lower_seen = 0.0;
      std::vector<double> probs;
      probs.reserve(j - i);
      for (std::size_t k = i; k < j; ++k) {
        const double p = discounted(d, sorted[k].second) / ctx_total;
        probs.push_back(p);
        seen_mass += p;
        lower_seen += std::pow(10.0, m.cond_log10(lower_hist, sorted[k].first.back(), n - 1));
      }
      const std::size_t n_unseen = n_pred - (j - i);
      double scale = 1.0;
      double log_bow = 0.0;
      if (n_unseen == 0) {
        scale = 1.0 / seen_mass;
      } else {
        const double left = std::max(1.0 - seen_mass, floor_mass);
        scale = (1.0 - left) / seen_mass;
        double denom = 1.0 - lower_seen;
        if (denom < 1e-6) {
          // Cancellation guard: sum the unseen lower-order mass directly.
          std::vector<bool> is_seen(m.vocab_.size(), false);
          for (std::size_t k = i; k < j; ++k) is_seen[sorted[k].first.back()] = true;
          denom = 0.0;
          for (WordId w = 1; w < m.vocab_.size(); ++w) {
            if (!is_seen[w]) denom += std::pow(10.0, m.cond_log10(lower_hist, w, n - 1));
          }
        }
        if (!(denom > 0.0)) throw InvariantError("zero back-off denominator");
        log_bow = std::log10(left / denom);
      }
      for (std::size_t k = i; k < j; ++k) {
        tbl[sorted[k].first].log_prob = std::log10(probs[k - i] * scale);
      }
      auto& ce = ctx_tbl[ctx];  // creates sentence-start-only contexts
      ce.has_bow = true;
      ce.log_bow = log_bow;
      i = j;
    }
  }
  return m;
}

inline KatzModel train_katz(const std::vector<TokenList>& corpus, int order = 4, int gt_max = 5) {
  KatzOptions o;
  o.order = order;
  o.gt_max = gt_max;
  return train_katz(corpus, o);
}

/// Anything that yields per-position log10 probabilities for a sentence.
template <typename M>
concept SentenceScorer = requires(const M& m, const TokenList& t) {
  { m.position_log10(t) } -> std::convertible_to<std::vector<double>>;
};

/// Total log10 probability of one sentence (tokens plus end marker).
template <SentenceScorer M>
double log_prob(const M& model, const TokenList& tokens) {
  const auto pos = model.position_log10(tokens);
  double s = 0.0;
  for (double v : pos) s += v;
  return s;
}

struct CorpusScore {
  double log10_sum = 0.0;
  std::size_t positions = 0;

  double perplexity() const {
    return std::pow(10.0, -log10_sum / static_cast<double>(positions));
  }
};

/// Scores a corpus. Sentences may be scored on several threads; the sum is
/// always reduced in corpus order.
template <SentenceScorer M>
CorpusScore score_corpus(const M& model, const std::vector<TokenList>& corpus, unsigned jobs = 1) {
  std::vector<double> per_sentence(corpus.size(), 0.0);
  parallel_for(corpus.size(), jobs, [&](std::size_t i) { per_sentence[i] = log_prob(model, corpus[i]); });
  CorpusScore s;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    s.log10_sum += per_sentence[i];
    s.positions += corpus[i].size() + 1;
  }
  return s;
}

template <SentenceScorer M>
double perplexity(const M& model, const std::vector<TokenList>& corpus, unsigned jobs = 1) {
  if (corpus.empty()) throw DataError("perplexity needs a non-empty corpus");
  return score_corpus(model, corpus, jobs).perplexity();
}

// ---------------------------------------------------------------------------
// Interpolation

enum class ComponentRole { kTranscribed, kTranslated };

inline const char* role_name(ComponentRole r) {
  return r == ComponentRole::kTranscribed ? "transcribed" : "translated";
}

/// Any sentence scorer behind a shared immutable handle.
class ScorerHandle {
 public:
  template <SentenceScorer M>
  explicit ScorerHandle(std::shared_ptr<const M> m)
      : fn_([m](const TokenList& t) { return m->position_log10(t); }) {}

  std::vector<double> position_log10(const TokenList& t) const { return fn_(t); }

 private:
  std::function<std::vector<double>(const TokenList&)> fn_;
};

struct MixtureComponent {
  ScorerHandle model;
  ComponentRole role = ComponentRole::kTranscribed;
};

/// Static linear mixture: P(w|h) = sum_i weight_i * P_i(w|h) at every
/// predicted position.
class InterpolatedModel {
 public:
  InterpolatedModel(std::vector<MixtureComponent> components, std::vector<double> weights,
                    double floor = 0.0)
      : components_(std::move(components)), weights_(std::move(weights)), floor_(floor) {
    if (components_.empty() || components_.size() != weights_.size()) {
      throw ConfigError("mixture needs one weight per component");
    }
    double s = 0.0;
    for (double w : weights_) {
      if (w < 0.0) throw ConfigError("mixture weights must be non-negative");
      s += w;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ConfigError("mixture weights must sum to 1");
  }

  const std::vector<MixtureComponent>& components() const { return components_; }
  const std::vector<double>& weights() const { return weights_; }
  double floor() const { return floor_; }

  double role_weight(ComponentRole r) const {
    double s = 0.0;
    for (std::size_t i = 0; i < components_.size(); ++i) {
      if (components_[i].role == r) s += weights_[i];
    }
    return s;
  }

  std::vector<double> position_log10(const TokenList& tokens) const {
    std::vector<double> mix(tokens.size() + 1, 0.0);
    for (std::size_t i = 0; i < components_.size(); ++i) {
      const auto pos = components_[i].model.position_log10(tokens);
      for (std::size_t t = 0; t < mix.size(); ++t) mix[t] += weights_[i] * std::pow(10.0, pos[t]);
    }
    for (double& v : mix) v = std::log10(v);
    return mix;
  }

 private:
  std::vector<MixtureComponent> components_;
  std::vector<double> weights_;
  double floor_ = 0.0;
};

struct EmOptions {
  double floor = 0.25;            // minimum total weight of translated components
  double tolerance = 1e-6;        // stop when log-likelihood gain per position falls below
  int max_iterations = 100;
};

struct EmResult {
  std::vector<double> weights;
  std::vector<double> log_likelihood;  // natural log; initial value then one per iteration
  int iterations = 0;
  bool vertex_selected = false;  // a single-component solution beat the EM fixpoint
  bool clamped = false;          // the floor was active
};

/// Natural-log likelihood of the mixture over a probability matrix
/// (positions x components, linear probabilities).
inline double mixture_log_likelihood(const std::vector<std::vector<double>>& probs,
                                     std::span<const double> weights) {
  double ll = 0.0;
  for (const auto& row : probs) {
    double p = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) p += weights[i] * row[i];
    ll += std::log(p);
  }
  return ll;
}

/// Raises the total translated weight to `floor` if it falls short,
/// rescaling the remaining components proportionally. Returns true when
/// clamping happened.
inline bool apply_floor(std::vector<double>& weights, std::span<const ComponentRole> roles,
                        double floor) {
  double translated = 0.0;
  std::size_t n_translated = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (roles[i] == ComponentRole::kTranslated) {
      translated += weights[i];
      ++n_translated;
    }
  }
  if (n_translated == 0 || translated >= floor) return false;
  const double rest = 1.0 - translated;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (roles[i] == ComponentRole::kTranslated) {
      weights[i] = translated > 0.0 ? weights[i] * (floor / translated)
                                    : floor / static_cast<double>(n_translated);
    } else {
      weights[i] = rest > 0.0 ? weights[i] * ((1.0 - floor) / rest) : 0.0;
    }
  }
  if (n_translated == 1) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (roles[i] == ComponentRole::kTranslated) weights[i] = floor;
    }
  }
  return true;
}

/// EM over per-position component probabilities, starting from uniform
/// weights, followed by the floor constraint on translated components.
inline EmResult tune_weights(const std::vector<std::vector<double>>& probs,
                             std::span<const ComponentRole> roles, const EmOptions& opts) {
  if (!(opts.floor >= 0.0 && opts.floor < 1.0)) {
    throw ConfigError("floor weight must lie in [0, 1), got " + std::to_string(opts.floor));
  }
  const std::size_t k = roles.size();
  if (k < 2) throw ConfigError("interpolation needs at least two components");
  if (probs.empty()) throw DataError("tuning corpus is empty");
  for (const auto& row : probs) {
    if (row.size() != k) throw InvariantError("probability row width differs from component count");
  }
  const double positions = static_cast<double>(probs.size());

  EmResult res;
  res.weights.assign(k, 1.0 / static_cast<double>(k));
  double ll = mixture_log_likelihood(probs, res.weights);
  res.log_likelihood.push_back(ll);
  std::vector<double> acc(k);
  for (int it = 0; it < opts.max_iterations; ++it) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (const auto& row : probs) {
      double p = 0.0;
      for (std::size_t i = 0; i < k; ++i) p += res.weights[i] * row[i];
      for (std::size_t i = 0; i < k; ++i) acc[i] += res.weights[i] * row[i] / p;
    }
    for (std::size_t i = 0; i < k; ++i) res.weights[i] = acc[i] / positions;
    const double next = mixture_log_likelihood(probs, res.weights);
    res.log_likelihood.push_back(next);
    ++res.iterations;
    const double gain = (next - ll) / positions;
    ll = next;
    if (gain < opts.tolerance) break;
  }

  // EM only approaches a boundary optimum asymptotically; a single
  // component is always feasible, so take it if it scores strictly better.
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> vertex(k, 0.0);
    vertex[i] = 1.0;
    const double v = mixture_log_likelihood(probs, vertex);
    if (v > ll) {
      ll = v;
      res.weights = vertex;
      res.vertex_selected = true;
    }
  }
  res.clamped = apply_floor(res.weights, roles, opts.floor);
  return res;
}

/// Tunes mixture weights on `tuning_corpus` to minimize its perplexity,
/// then applies the translated-component floor.
inline InterpolatedModel tune_interpolation(std::vector<MixtureComponent> components,
                                            const std::vector<TokenList>& tuning_corpus,
                                            const EmOptions& opts, unsigned jobs = 1,
                                            EmResult* trace = nullptr) {
  if (components.size() < 2) throw ConfigError("interpolation needs at least two components");
  if (tuning_corpus.empty()) throw DataError("tuning corpus is empty");
  std::vector<std::vector<std::vector<double>>> per_sentence(tuning_corpus.size());
  parallel_for(tuning_corpus.size(), jobs, [&](std::size_t s) {
    const auto& sent = tuning_corpus[s];
    std::vector<std::vector<double>> rows(sent.size() + 1, std::vector<double>(components.size()));
    for (std::size_t i = 0; i < components.size(); ++i) {
      const auto pos = components[i].model.position_log10(sent);
      for (std::size_t t = 0; t < rows.size(); ++t) rows[t][i] = std::pow(10.0, pos[t]);
    }
    per_sentence[s] = std::move(rows);
  });
  std::vector<std::vector<double>> probs;
  for (auto& rows : per_sentence) {
    for (auto& r : rows) probs.push_back(std::move(r));
  }
  std::vector<ComponentRole> roles;
  for (const auto& c : components) roles.push_back(c.role);
  EmResult res = tune_weights(probs, roles, opts);
  InterpolatedModel model(std::move(components), res.weights, opts.floor);
  if (trace) *trace = std::move(res);
  return model;
}

// ---------------------------------------------------------------------------
// ARPA serialization

inline void write_arpa(std::ostream& out, const KatzModel& model) {
  model.require_trained();
  const auto& vocab = model.vocab();
  out << "\n\\data\\\n";
  for (int n = 1; n <= model.order(); ++n) {
    out << "ngram " << n << "=" << model.ngram_count(n) << "\n";
  }
  for (int n = 1; n <= model.order(); ++n) {
    out << "\n\\" << n << "-grams:\n";
    std::vector<const std::pair<const NGram, KatzModel::Entry>*> rows;
    for (const auto& kv : model.table(n)) rows.push_back(&kv);
    std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->first < b->first; });
    for (const auto* kv : rows) {
      out << fixed(kv->second.log_prob) << '\t';
      for (std::size_t i = 0; i < kv->first.size(); ++i) {
        if (i) out << ' ';
        out << vocab.word(kv->first[i]);
      }
      if (kv->second.has_bow) out << '\t' << fixed(kv->second.log_bow);
      out << '\n';
    }
  }
  out << "\n\\end\\\n";
}

inline void write_arpa(const std::string& path, const KatzModel& model) {
  model.require_trained();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  write_arpa(out, model);
}

inline KatzModel read_arpa(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  auto fail = [&](const std::string& msg) -> DataError {
    return DataError("ARPA line " + std::to_string(line_no) + ": " + msg);
  };

  while (next_line() && line != "\\data\\") {
  }
  if (line != "\\data\\") throw DataError("ARPA: missing \\data\\ section");

  std::vector<std::size_t> declared;
  while (next_line()) {
    if (line.empty()) {
      if (!declared.empty()) break;
      continue;
    }
    if (line.rfind("ngram ", 0) != 0) break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw fail("malformed count line");
    const int n = std::stoi(line.substr(6, eq - 6));
    if (n != static_cast<int>(declared.size()) + 1) throw fail("n-gram orders must be listed in order");
    declared.push_back(static_cast<std::size_t>(std::stoull(line.substr(eq + 1))));
  }
  if (declared.empty()) throw DataError("ARPA: no n-gram counts declared");

  KatzModel m;
  m.order_ = static_cast<int>(declared.size());
  m.tables_.resize(declared.size());
  // Unigram section defines the vocabulary; reserved words keep their ids.
  m.vocab_ = Vocabulary();
  std::vector<std::vector<std::pair<std::vector<std::string>, KatzModel::Entry>>> sections(
      declared.size());

  for (std::size_t n = 1; n <= declared.size(); ++n) {
    const std::string header = "\\" + std::to_string(n) + "-grams:";
    while (line.empty() || line != header) {
      if (!line.empty() && line != header) throw fail("expected " + header);
      if (!next_line()) throw DataError("ARPA: truncated before " + header);
    }
    auto& rows = sections[n - 1];
    while (next_line()) {
      if (line.empty()) break;
      if (line[0] == '\\') break;
      const auto fields = split_whitespace(line);
      if (fields.size() != n + 1 && fields.size() != n + 2) {
        throw fail("expected " + std::to_string(n) + " words with probability and optional back-off");
      }
      KatzModel::Entry e;
      try {
        e.log_prob = std::stod(fields[0]);
        if (fields.size() == n + 2) {
          e.log_bow = std::stod(fields[n + 1]);
          e.has_bow = true;
        }
      } catch (const std::exception&) {
        throw fail("bad number");
      }
      rows.emplace_back(std::vector<std::string>(fields.begin() + 1, fields.begin() + 1 + static_cast<std::ptrdiff_t>(n)), e);
    }
    if (rows.size() != declared[n - 1]) {
      throw DataError("ARPA: " + std::to_string(n) + "-gram section lists " +
                      std::to_string(rows.size()) + " entries but header declares " +
                      std::to_string(declared[n - 1]));
    }
  }
  while (line.empty()) {
    if (!next_line()) break;
  }
  if (line != "\\end\\") throw DataError("ARPA: missing \\end\\ marker (truncated file?)");

  for (const auto& [words, e] : sections[0]) {
    if (words[0] != kBos && words[0] != kEos && words[0] != kUnk) m.vocab_.add_raw(words[0]);
  }
  if (!std::any_of(sections[0].begin(), sections[0].end(),
                   [](const auto& r) { return r.first[0] == kUnk; })) {
    throw DataError("ARPA: unigram section lacks " + std::string(kUnk));
  }
  for (std::size_t n = 0; n < sections.size(); ++n) {
    for (const auto& [words, e] : sections[n]) {
      NGram key;
      for (const auto& w : words) {
        if (w == kBos) {
          key.push_back(Vocabulary::kBosId);
        } else if (w == kEos) {
          key.push_back(Vocabulary::kEosId);
        } else {
          auto it = m.vocab_.index_.find(w);
          if (it == m.vocab_.index_.end()) {
            throw DataError("ARPA: word '" + w + "' missing from unigram section");
          }
          key.push_back(it->second);
        }
      }
      m.tables_[n][key] = e;
    }
  }
  if (!m.tables_[0].count(NGram{Vocabulary::kEosId})) {
    throw DataError("ARPA: unigram section lacks " + std::string(kEos));
  }
  return m;
}

inline KatzModel read_arpa(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ARPA file " + path);
  try {
    return read_arpa(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace mtaug

#endif  // MTAUG_NGRAM_LM_HPP
