#ifndef MTAUG_TOOLS_FIXTURE_GEN_HPP
#define MTAUG_TOOLS_FIXTURE_GEN_HPP

// Synthetic bootstrapping fixture: a small Devanagari-script "in-domain"
// language with per-scenario Markov chains, code-mixed English keywords and
// Latin-script entity names; English source utterances with entity spans;
// noisy n-best translations with attention; catalogs; word vectors; and an
// MT training corpus for selection.
//
// The translations are drawn from the same chains as the in-domain data
// but with "translationese" noise, so they cover held-out vocabulary while
// fitting worse than in-domain text. That gives a low EM-optimal translated
// weight and a larger gain at small in-domain volumes.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtaug/mtaug.hpp"

namespace mtaug::fixture {

struct Options {
  std::uint64_t seed = 7;
  std::size_t transcribed = 2000;
  std::size_t tuning = 300;
  std::size_t test = 300;
  std::size_t translations = 3000;
  std::size_t mt_corpus = 400;
  std::size_t nbest = 3;
  std::size_t scenarios = 6;
  std::size_t content_words = 40;  // per scenario
  std::size_t function_words = 15;
  std::size_t translationese_words = 80;
  double noise = 0.35;       // per-token translationese substitution rate
  double entity_rate = 0.3;  // fraction of utterances carrying an entity
  std::size_t vector_dim = 16;
};

struct Paths {
  std::filesystem::path dir, transcribed, tuning, test, translations, sources, catalogs, word_vectors, mt_corpus, config;
};

namespace detail {

inline const std::vector<std::string>& english_keywords() {
  static const std::vector<std::string> w = {"play", "song", "music", "alarm", "set", "weather",
                                             "news", "timer", "light", "volume", "next", "stop"};
  return w;
}

inline const std::vector<std::string>& english_fillers() {
  static const std::vector<std::string> w = {"please", "the", "to", "me", "a", "for", "on", "some", "my", "now"};
  return w;
}

class Builder {
 public:
  Builder(const Options& o) : o_(o), rng_(o.seed) {}

  std::string devanagari_word() {
    static const std::vector<std::string> cons = {"क", "ख", "ग", "ज", "त", "द", "न", "प", "ब", "म", "य", "र", "ल", "स", "ह"};
    static const std::vector<std::string> vow = {"", "ा", "ि", "ी", "ु", "े", "ो"};
    for (;;) {
      std::string w;
      const std::size_t syl = 2 + rng_.below(2);
      for (std::size_t i = 0; i < syl; ++i) w += cons[rng_.below(cons.size())] + vow[rng_.below(vow.size())];
      if (used_.insert(w).second) return w;
    }
  }

  std::string latin_word() {
    static const std::string cons = "bdfgklmnprstvz", vow = "aeiou";
    for (;;) {
      std::string w;
      const std::size_t syl = 2 + rng_.below(2);
      for (std::size_t i = 0; i < syl; ++i) {
        w += cons[rng_.below(cons.size())];
        w += vow[rng_.below(vow.size())];
      }
      if (used_.insert(w).second) return w;
    }
  }

  void build_language() {
    for (std::size_t i = 0; i < o_.function_words; ++i) function_.push_back(devanagari_word());
    for (std::size_t i = 0; i < o_.translationese_words; ++i) translationese_.push_back(devanagari_word());
    for (const auto& k : english_keywords()) used_.insert(k);
    for (const auto& k : english_fillers()) used_.insert(k);
    chains_.resize(o_.scenarios);
    for (std::size_t s = 0; s < o_.scenarios; ++s) {
      auto& ch = chains_[s];
      ch.vocab = function_;
      for (std::size_t i = 0; i < o_.content_words; ++i) ch.vocab.push_back(devanagari_word());
      // Two English keywords per scenario appear code-mixed.
      ch.vocab.push_back(english_keywords()[(2 * s) % english_keywords().size()]);
      ch.vocab.push_back(english_keywords()[(2 * s + 1) % english_keywords().size()]);
      ch.next.resize(ch.vocab.size() + 1);  // last row = sentence start
      // Each word ranks its successors with its own permutation; successor
      // probabilities follow a Zipf law over that ranking.
      double acc = 0.0;
      for (std::size_t r = 1; r <= ch.vocab.size(); ++r) {
        ch.zipf_cdf.push_back(acc += std::pow(static_cast<double>(r), -1.3));
      }
      for (double& x : ch.zipf_cdf) x /= acc;
      for (auto& succ : ch.next) {
        succ.resize(ch.vocab.size());
        for (std::size_t i = 0; i < succ.size(); ++i) succ[i] = i;
        for (std::size_t i = succ.size(); i > 1; --i) std::swap(succ[i - 1], succ[rng_.below(i)]);
      }
    }
    for (std::size_t i = 0; i < 30; ++i) add_entity("song", 1 + rng_.below(3));
    for (std::size_t i = 0; i < 20; ++i) add_entity("artist", 2);
  }

  TokenList chain_sentence(std::size_t s) {
    const auto& ch = chains_[s];
    TokenList out;
    std::size_t prev = ch.vocab.size();
    for (;;) {
      const std::size_t w = ch.next[prev][zipf_draw(ch.zipf_cdf)];
      out.push_back(ch.vocab[w]);
      prev = w;
      if (out.size() >= 10 || (out.size() >= 3 && rng_.uniform() < 0.2)) break;
    }
    return out;
  }

  struct Entity {
    std::string type;
    TokenList surface;
  };

  const Entity& random_entity() { return entities_[rng_.below(entities_.size())]; }

  Utterance in_domain_utterance(const std::string& id) {
    Utterance u;
    u.id = id;
    const std::size_t s = rng_.below(o_.scenarios);
    u.scenario = "scenario" + std::to_string(s);
    u.tokens = chain_sentence(s);
    if (rng_.uniform() < o_.entity_rate) {
      const auto& e = random_entity();
      const std::size_t at = rng_.below(u.tokens.size() + 1);
      u.tokens.insert(u.tokens.begin() + static_cast<std::ptrdiff_t>(at), e.surface.begin(), e.surface.end());
      u.entities.push_back({at, at + e.surface.size(), e.type});
    }
    return u;
  }

  std::string noise_word() { return translationese_[rng_.below(translationese_.size())]; }

  // One source utterance plus its n-best translations.
  std::pair<Utterance, TranslationRecord> translation(const std::string& id) {
    Utterance src;
    src.id = id;
    const std::size_t s = rng_.below(o_.scenarios);
    const std::size_t len = 2 + rng_.below(4);
    for (std::size_t i = 0; i < len; ++i) {
      src.tokens.push_back(rng_.uniform() < 0.5 ? english_keywords()[rng_.below(english_keywords().size())]
                                                : english_fillers()[rng_.below(english_fillers().size())]);
    }
    const bool has_entity = rng_.uniform() < 0.5;
    std::size_t e_start = 0, e_len = 0;
    if (has_entity) {
      const auto& e = random_entity();
      e_start = rng_.below(src.tokens.size() + 1);
      e_len = e.surface.size();
      src.tokens.insert(src.tokens.begin() + static_cast<std::ptrdiff_t>(e_start), e.surface.begin(), e.surface.end());
      src.entities.push_back({e_start, e_start + e_len, e.type});
    }

    TranslationRecord rec;
    rec.id = id;
    rec.source_tokens = src.tokens;
    TokenList base = chain_sentence(s);
    for (auto& t : base) {
      if (rng_.uniform() < o_.noise) t = noise_word();
    }
    std::size_t t_start = 0;
    if (has_entity) {
      t_start = rng_.below(base.size() + 1);
      TokenList garbled;
      for (std::size_t i = 0; i < e_len; ++i) garbled.push_back(noise_word());
      base.insert(base.begin() + static_cast<std::ptrdiff_t>(t_start), garbled.begin(), garbled.end());
    }
    std::vector<std::size_t> plain_src;
    for (std::size_t j = 0; j < src.tokens.size(); ++j) {
      if (!has_entity || j < e_start || j >= e_start + e_len) plain_src.push_back(j);
    }
    for (std::size_t k = 0; k < o_.nbest; ++k) {
      TranslationHypothesis h;
      h.source_tokens = src.tokens;
      h.target_tokens = base;
      if (k > 0) {
        // Lower-ranked hypotheses: one more noisy token outside the entity.
        const std::size_t pos = rng_.below(base.size());
        if (!has_entity || pos < t_start || pos >= t_start + e_len) h.target_tokens[pos] = noise_word();
      }
      const std::size_t m = src.tokens.size();
      std::vector<std::vector<double>> att;
      for (std::size_t i = 0; i < h.target_tokens.size(); ++i) {
        std::size_t peak;
        if (has_entity && i >= t_start && i < t_start + e_len) {
          peak = e_start + (i - t_start);
        } else {
          peak = plain_src[rng_.below(plain_src.size())];
        }
        std::vector<double> row(m, m > 1 ? 0.4 / static_cast<double>(m - 1) : 0.0);
        row[peak] = m > 1 ? 0.6 : 1.0;
        att.push_back(std::move(row));
        h.token_logprobs.push_back(-(0.05 + 1.2 * rng_.uniform()) - 0.2 * static_cast<double>(k));
      }
      h.attention = AttentionMatrix::from_rows(att);
      rec.hypotheses.push_back(std::move(h));
    }
    return {std::move(src), std::move(rec)};
  }

  Utterance out_of_domain_utterance(const std::string& id) {
    Utterance u;
    u.id = id;
    const std::size_t len = 3 + rng_.below(6);
    for (std::size_t i = 0; i < len; ++i) u.tokens.push_back(noise_word());
    return u;
  }

  void write_catalogs(std::ostream& os) const {
    for (const auto& e : entities_) {
      os << nlohmann::json{{"type", e.type}, {"surface", e.surface}, {"weight", 1.0}}.dump() << '\n';
    }
  }

  // In-domain words cluster around one mean, translationese around another.
  void write_word_vectors(std::ostream& os) {
    std::vector<std::pair<std::string, bool>> words;
    std::set<std::string> seen;
    auto add = [&](const std::string& w, bool in) {
      if (seen.insert(w).second) words.emplace_back(w, in);
    };
    for (const auto& ch : chains_) {
      for (const auto& w : ch.vocab) add(w, true);
    }
    for (const auto& w : translationese_) add(w, false);
    os << words.size() << ' ' << o_.vector_dim << '\n';
    for (const auto& [w, in] : words) {
      os << w;
      for (std::size_t d = 0; d < o_.vector_dim; ++d) {
        const double centre = (d % 2 == 0) == in ? 1.0 : -1.0;
        os << ' ' << fixed(centre + (rng_.uniform() - 0.5), 6);
      }
      os << '\n';
    }
  }

 private:
  struct Chain {
    std::vector<std::string> vocab;
    std::vector<std::vector<std::size_t>> next;
    std::vector<double> zipf_cdf;
  };

  std::size_t zipf_draw(const std::vector<double>& cdf) {
    const double u = rng_.uniform();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
  }

  void add_entity(const std::string& type, std::size_t len) {
    Entity e{type, {}};
    for (std::size_t i = 0; i < len; ++i) e.surface.push_back(latin_word());
    entities_.push_back(std::move(e));
  }

  Options o_;
  SplitMix64 rng_;
  std::set<std::string> used_;
  std::vector<std::string> function_, translationese_;
  std::vector<Chain> chains_;
  std::vector<Entity> entities_;
};

inline std::string pad_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%06zu", prefix, i);
  return buf;
}

}  // namespace detail

/// Writes every fixture file plus a config.ini (paths relative to `dir`)
/// that runs the combined configuration.
inline Paths generate(const std::filesystem::path& dir, const Options& o = {}) {
  std::filesystem::create_directories(dir);
  Paths p;
  p.dir = dir;
  p.transcribed = dir / "transcribed.jsonl";
  p.tuning = dir / "tuning.jsonl";
  p.test = dir / "test.jsonl";
  p.translations = dir / "translations.jsonl";
  p.sources = dir / "sources.jsonl";
  p.catalogs = dir / "catalogs.jsonl";
  p.word_vectors = dir / "word_vectors.txt";
  p.mt_corpus = dir / "mt_corpus.jsonl";
  p.config = dir / "config.ini";

  detail::Builder b(o);
  b.build_language();
  auto utterances = [&](const char* prefix, std::size_t n) {
    std::vector<Utterance> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(b.in_domain_utterance(detail::pad_id(prefix, i)));
    return out;
  };
  write_utterances(p.transcribed.string(), utterances("tr-", o.transcribed));
  write_utterances(p.tuning.string(), utterances("tune-", o.tuning));
  write_utterances(p.test.string(), utterances("test-", o.test));
  {
    std::vector<Utterance> sources;
    std::ofstream tr(p.translations);
    for (std::size_t i = 0; i < o.translations; ++i) {
      auto [src, rec] = b.translation(detail::pad_id("mt-", i));
      tr << translation_to_json(rec).dump() << '\n';
      sources.push_back(std::move(src));
    }
    write_utterances(p.sources.string(), sources);
  }
  {
    std::vector<Utterance> mt;
    for (std::size_t i = 0; i < o.mt_corpus; ++i) {
      mt.push_back(i % 2 == 0 ? b.in_domain_utterance(detail::pad_id("corpus-", i))
                              : b.out_of_domain_utterance(detail::pad_id("corpus-", i)));
      mt.back().scenario.reset();
    }
    write_utterances(p.mt_corpus.string(), mt);
  }
  {
    std::ofstream os(p.catalogs);
    b.write_catalogs(os);
  }
  {
    std::ofstream os(p.word_vectors);
    b.write_word_vectors(os);
  }
  std::ofstream cfg(p.config);
  cfg << "[paths]\n"
         "transcribed = transcribed.jsonl\n"
         "translations = translations.jsonl\n"
         "sources = sources.jsonl\n"
         "catalogs = catalogs.jsonl\n"
         "word_vectors = word_vectors.txt\n"
         "mt_corpus = mt_corpus.jsonl\n"
         "tuning = tuning.jsonl\n"
         "test = test.jsonl\n"
         "\n[stages]\nselect = true\nrescore = true\npostedit = true\nfilter = true\n"
         "\n[lm]\norder = 4\ngt_max = 5\n"
         "\n[interpolate]\nfloor = 0\n"
         "\n[select]\nmethod = sif\nfraction = 0.25\n"
         "\n[postedit]\np_max = 0.5\n"
         "\n[rescore]\nlm_weight = 0.3\n"
         "\n[filter]\nmetric = slm_score\nkeep_fraction = 0.75\n"
         "\n[run]\nseed = "
      << o.seed << "\n";
  return p;
}

}  // namespace mtaug::fixture

#endif  // MTAUG_TOOLS_FIXTURE_GEN_HPP
