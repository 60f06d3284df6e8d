#ifndef MTAUG_PIPELINE_HPP
#define MTAUG_PIPELINE_HPP

// End-to-end orchestration: selection, rescoring, post-editing, filtering,
// LM building, interpolation and evaluation, plus the floor-weight and
// data-volume sweeps.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "mtaug/adapt.hpp"
#include "mtaug/common.hpp"
#include "mtaug/corpus.hpp"
#include "mtaug/embed.hpp"
#include "mtaug/evalkit.hpp"
#include "mtaug/ngram_lm.hpp"
#include "mtaug/postedit.hpp"
#include "mtaug/select.hpp"

namespace mtaug {

namespace fs = std::filesystem;

struct PipelinePaths {
  std::string transcribed;     // in-domain transcriptions (Utterance JSONL)
  std::string translations;    // n-best translations (translation JSONL)
  std::string catalogs;        // local entity catalogs (Catalog JSONL)
  std::string word_vectors;    // for average / SIF selection
  std::string tuning;          // held-out in-domain set for weight tuning
  std::string test;            // evaluation set
  std::string sources;         // optional: source utterances with entity annotations
  std::string mt_corpus;       // optional: target side of the MT training corpus (selection candidates)
  std::string in_embeddings;   // external embeddings of the in-domain set
  std::string out_embeddings;  // external embeddings of the MT training corpus
};

struct StageToggles {
  bool select = false;
  bool rescore = false;
  bool postedit = true;
  bool filter = false;
};

struct PipelineConfig {
  PipelinePaths paths;
  StageToggles stages;
  KatzOptions lm;
  double floor = 0.25;
  EmbeddingMethod select_method = EmbeddingMethod::kSif;
  double select_fraction = 0.25;
  SifParams sif;
  bool l2_normalize = false;
  PostEditConfig postedit;
  double freq_alpha = 1.0;
  RescoreConfig rescore;
  FilterConfig filter;
  std::uint64_t seed = 42;
  unsigned jobs = 1;
  std::string out_dir = "out";
};

// ---------------------------------------------------------------------------
// Configuration file: INI-style sections with key = value entries.

using ConfigMap = std::map<std::string, std::string>;

inline ConfigMap read_config_map(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ConfigMap out;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      out[section] = body.data();
      continue;
    }
    for (const auto& [key, val] : body) out[section + "." + key] = val.data();
  }
  return out;
}

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key " + key + ": expected a boolean, got '" + v + "'");
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": expected a number, got '" + v + "'");
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long d = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": expected an integer, got '" + v + "'");
  }
}

}  // namespace detail

/// Interprets a flat "section.key" map. Relative paths resolve against
/// `base_dir`. Unknown keys are rejected.
inline PipelineConfig config_from_map(const ConfigMap& m, const fs::path& base_dir = {}) {
  PipelineConfig c;
  auto path_of = [&](const std::string& v) {
    if (v.empty()) return v;
    fs::path p(v);
    return (p.is_absolute() || base_dir.empty() ? p : base_dir / p).lexically_normal().string();
  };
  using namespace detail;
  const std::map<std::string, std::function<void(const std::string&, const std::string&)>> setters = {
      {"paths.transcribed", [&](auto&, auto& v) { c.paths.transcribed = path_of(v); }},
      {"paths.translations", [&](auto&, auto& v) { c.paths.translations = path_of(v); }},
      {"paths.catalogs", [&](auto&, auto& v) { c.paths.catalogs = path_of(v); }},
      {"paths.word_vectors", [&](auto&, auto& v) { c.paths.word_vectors = path_of(v); }},
      {"paths.tuning", [&](auto&, auto& v) { c.paths.tuning = path_of(v); }},
      {"paths.test", [&](auto&, auto& v) { c.paths.test = path_of(v); }},
      {"paths.sources", [&](auto&, auto& v) { c.paths.sources = path_of(v); }},
      {"paths.mt_corpus", [&](auto&, auto& v) { c.paths.mt_corpus = path_of(v); }},
      {"paths.in_embeddings", [&](auto&, auto& v) { c.paths.in_embeddings = path_of(v); }},
      {"paths.out_embeddings", [&](auto&, auto& v) { c.paths.out_embeddings = path_of(v); }},
      {"stages.select", [&](auto& k, auto& v) { c.stages.select = parse_bool(k, v); }},
      {"stages.rescore", [&](auto& k, auto& v) { c.stages.rescore = parse_bool(k, v); }},
      {"stages.postedit", [&](auto& k, auto& v) { c.stages.postedit = parse_bool(k, v); }},
      {"stages.filter", [&](auto& k, auto& v) { c.stages.filter = parse_bool(k, v); }},
      {"lm.order", [&](auto& k, auto& v) { c.lm.order = static_cast<int>(parse_int(k, v)); }},
      {"lm.gt_max", [&](auto& k, auto& v) { c.lm.gt_max = static_cast<int>(parse_int(k, v)); }},
      {"interpolate.floor", [&](auto& k, auto& v) { c.floor = parse_double(k, v); }},
      {"select.method", [&](auto&, auto& v) { c.select_method = parse_method(v); }},
      {"select.fraction", [&](auto& k, auto& v) { c.select_fraction = parse_double(k, v); }},
      {"select.sif_a", [&](auto& k, auto& v) { c.sif.a = parse_double(k, v); }},
      {"select.l2_normalize", [&](auto& k, auto& v) { c.l2_normalize = parse_bool(k, v); }},
      {"postedit.ne_copy", [&](auto& k, auto& v) { c.postedit.ne_copy = parse_bool(k, v); }},
      {"postedit.ne_resample", [&](auto& k, auto& v) { c.postedit.ne_resample = parse_bool(k, v); }},
      {"postedit.code_mix", [&](auto& k, auto& v) { c.postedit.code_mix = parse_bool(k, v); }},
      {"postedit.p_max", [&](auto& k, auto& v) { c.postedit.p_max = parse_double(k, v); }},
      {"postedit.freq_alpha", [&](auto& k, auto& v) { c.freq_alpha = parse_double(k, v); }},
      {"rescore.lm_weight", [&](auto& k, auto& v) { c.rescore.lm_weight = parse_double(k, v); }},
      {"rescore.length_normalize", [&](auto& k, auto& v) { c.rescore.length_normalize = parse_bool(k, v); }},
      {"filter.metric", [&](auto&, auto& v) { c.filter.metric = parse_filter_metric(v); }},
      {"filter.keep_fraction", [&](auto& k, auto& v) { c.filter.keep_fraction = parse_double(k, v); }},
      {"filter.length_normalize", [&](auto& k, auto& v) { c.filter.length_normalize = parse_bool(k, v); }},
      {"run.seed", [&](auto& k, auto& v) { c.seed = static_cast<std::uint64_t>(parse_int(k, v)); }},
      {"run.jobs", [&](auto& k, auto& v) { c.jobs = static_cast<unsigned>(std::max(1LL, parse_int(k, v))); }},
      {"run.out", [&](auto&, auto& v) { c.out_dir = v; }},
  };
  for (const auto& [k, v] : m) {
    auto it = setters.find(k);
    if (it == setters.end()) throw ConfigError("unknown config key '" + k + "'");
    it->second(k, v);
  }
  c.postedit.seed = c.seed;
  return c;
}

inline ConfigMap load_config_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return read_config_map(in);
}

/// Checks parameter ranges and that every file the enabled stages need
/// exists.
inline void validate_config(const PipelineConfig& c) {
  auto need = [](const std::string& p, const char* key) {
    if (p.empty()) throw ConfigError(std::string("config: ") + key + " is required");
    if (!fs::exists(p)) throw ConfigError(std::string("config: ") + key + " points to missing file " + p);
  };
  need(c.paths.transcribed, "paths.transcribed");
  need(c.paths.translations, "paths.translations");
  need(c.paths.tuning, "paths.tuning");
  need(c.paths.test, "paths.test");
  if (c.stages.postedit && c.postedit.ne_resample) need(c.paths.catalogs, "paths.catalogs");
  if (!c.paths.sources.empty()) need(c.paths.sources, "paths.sources");
  if (c.stages.select) {
    if (c.select_method == EmbeddingMethod::kExternal) {
      need(c.paths.in_embeddings, "paths.in_embeddings");
      need(c.paths.out_embeddings, "paths.out_embeddings");
    } else {
      need(c.paths.word_vectors, "paths.word_vectors");
      need(c.paths.mt_corpus, "paths.mt_corpus");
    }
  }
  if (c.lm.order < 1) throw ConfigError("lm.order must be >= 1");
  if (c.lm.gt_max < 1) throw ConfigError("lm.gt_max must be >= 1");
  if (!(c.floor >= 0.0 && c.floor < 1.0)) throw ConfigError("interpolate.floor must lie in [0, 1)");
  if (!(c.select_fraction > 0.0 && c.select_fraction <= 1.0)) throw ConfigError("select.fraction must lie in (0, 1]");
  if (!(c.sif.a > 0.0)) throw ConfigError("select.sif_a must be positive");
  if (!(c.postedit.p_max >= 0.0 && c.postedit.p_max <= 1.0)) throw ConfigError("postedit.p_max must lie in [0, 1]");
  if (c.freq_alpha < 0.0) throw ConfigError("postedit.freq_alpha must be >= 0");
  if (!(c.rescore.lm_weight >= 0.0 && c.rescore.lm_weight <= 1.0)) throw ConfigError("rescore.lm_weight must lie in [0, 1]");
  if (!(c.filter.keep_fraction > 0.0 && c.filter.keep_fraction <= 1.0)) {
    throw ConfigError("filter.keep_fraction must lie in (0, 1]");
  }
}

// ---------------------------------------------------------------------------
// Artifacts

/// Files written by a run. Unless committed, they are deleted when the
/// writer goes out of scope, so a failed run leaves no partial output.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }
  ArtifactWriter(const ArtifactWriter&) = delete;
  ArtifactWriter& operator=(const ArtifactWriter&) = delete;
  ~ArtifactWriter() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& p : written_) fs::remove(p, ec);
  }

  const fs::path& dir() const { return dir_; }

  template <typename Fn>
  void write(const std::string& name, Fn&& fn) {
    const fs::path p = dir_ / name;
    written_.push_back(p);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write " + p.string());
    fn(out);
    if (!out) throw DataError("write failed: " + p.string());
  }

  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
  bool committed_ = false;
};

/// Runs `fn`, prefixing any error with the stage name. The error class is
/// kept so the exit code stays meaningful.
template <typename Fn>
auto in_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError("stage " + stage + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError("stage " + stage + ": " + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError("stage " + stage + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Stages

struct Inputs {
  std::vector<Utterance> transcribed;
  std::vector<TranslationRecord> translations;
  std::vector<TokenList> tuning;
  std::vector<TokenList> test;
  CatalogMap catalogs;
  std::vector<Utterance> sources;
};

inline Inputs load_inputs(const PipelineConfig& c) {
  return in_stage("load", [&] {
    Inputs in;
    in.transcribed = load_utterances(c.paths.transcribed);
    if (in.transcribed.empty()) throw DataError("transcribed corpus is empty");
    in.translations = load_translations(c.paths.translations);
    if (in.translations.empty()) throw DataError("translation file is empty");
    in.tuning = token_lists(load_utterances(c.paths.tuning));
    in.test = token_lists(load_utterances(c.paths.test));
    if (in.tuning.empty()) throw DataError("tuning set is empty");
    if (in.test.empty()) throw DataError("test set is empty");
    if (!c.paths.catalogs.empty()) in.catalogs = load_catalogs(c.paths.catalogs);
    if (!c.paths.sources.empty()) in.sources = load_utterances(c.paths.sources);
    return in;
  });
}

struct StageCounts {
  std::size_t transcribed = 0;
  std::size_t translations = 0;
  std::size_t selection_candidates = 0;
  std::size_t selected = 0;
  std::size_t rescored_changed = 0;
  std::size_t edited = 0;
  std::size_t unaligned_entities = 0;
  std::size_t code_mixed_tokens = 0;
  std::size_t retained = 0;
};

/// Output of everything upstream of interpolation.
struct Components {
  std::shared_ptr<const KatzModel> transcribed_lm;
  std::shared_ptr<const KatzModel> translated_lm;
  std::vector<PostEditResult> final_translations;  // retained, input order
  StageCounts counts;
};

struct RunReport {
  StageCounts counts;
  std::vector<std::size_t> ngrams_transcribed;
  std::vector<std::size_t> ngrams_translated;
  double weight_transcribed = 0.0;
  double weight_translated = 0.0;
  int em_iterations = 0;
  double ppl_tuning_transcribed = 0.0;
  double ppl_tuning_translated = 0.0;
  double ppl_tuning_interpolated = 0.0;
  double ppl_test_transcribed = 0.0;
  double ppl_test_translated = 0.0;
  double ppl_test_interpolated = 0.0;
  std::vector<std::pair<std::string, double>> stage_seconds;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::vector<SentenceEmbedding> embed_corpus(const std::vector<Utterance>& utts, EmbeddingMethod method,
                                                   const WordVectorTable& table, const FrequencyTable* freq,
                                                   const SifParams& sif, unsigned jobs) {
  std::vector<SentenceEmbedding> out;
  if (method == EmbeddingMethod::kAverage) {
    out.resize(utts.size());
    parallel_for(utts.size(), jobs, [&](std::size_t i) { out[i] = embed_average(utts[i].tokens, table, utts[i].id); });
  } else {
    std::vector<std::string> ids;
    for (const auto& u : utts) ids.push_back(u.id);
    out = embed_sif(token_lists(utts), table, *freq, sif, ids, jobs);
  }
  return out;
}

}  // namespace detail

/// Selection of MT training sentences. Writes the score dump and the list
/// of selected ids; returns the selected count.
inline std::size_t run_selection(const PipelineConfig& c, const std::vector<Utterance>& in_domain,
                                 ArtifactWriter* out, StageCounts& counts) {
  std::vector<SentenceEmbedding> in_emb, out_emb;
  if (c.select_method == EmbeddingMethod::kExternal) {
    in_emb = import_external_embeddings(c.paths.in_embeddings);
    out_emb = import_external_embeddings(c.paths.out_embeddings);
  } else {
    const auto table = load_word_vectors(c.paths.word_vectors);
    const auto mt = load_utterances(c.paths.mt_corpus);
    if (c.select_method == EmbeddingMethod::kAverage) {
      in_emb = detail::embed_corpus(in_domain, c.select_method, table, nullptr, c.sif, c.jobs);
      out_emb = detail::embed_corpus(mt, c.select_method, table, nullptr, c.sif, c.jobs);
    } else {
      // One SIF batch over both sets so they share the removed direction.
      std::vector<Utterance> both(in_domain);
      both.insert(both.end(), mt.begin(), mt.end());
      const auto freq = build_frequency_table(both, c.freq_alpha);
      auto all = detail::embed_corpus(both, c.select_method, table, &freq, c.sif, c.jobs);
      in_emb.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(in_domain.size()));
      out_emb.assign(all.begin() + static_cast<std::ptrdiff_t>(in_domain.size()), all.end());
    }
  }
  if (c.l2_normalize) {
    for (auto& e : in_emb) l2_normalize(e.vector);
    for (auto& e : out_emb) l2_normalize(e.vector);
  }
  std::vector<Vector> iv, ov;
  for (const auto& e : in_emb) iv.push_back(e.vector);
  for (const auto& e : out_emb) ov.push_back(e.vector);
  const auto centroids = compute_centroids(iv, ov);
  const auto scores = score_candidates(out_emb, centroids, c.jobs);
  const auto ids = select_top_fraction(scores, c.select_fraction);
  if (out) {
    out->write("selection_scores.tsv", [&](std::ostream& os) { write_scores_tsv(os, scores); });
    out->write("selected_ids.txt", [&](std::ostream& os) { write_id_list(os, ids); });
  }
  counts.selection_candidates = scores.size();
  counts.selected = ids.size();
  return ids.size();
}

/// Rescoring, post-editing, filtering and the two component LMs.
inline Components build_components(const PipelineConfig& c, const Inputs& in,
                                   const std::vector<Utterance>& transcribed, ArtifactWriter* out) {
  Components comp;
  auto& counts = comp.counts;
  counts.transcribed = transcribed.size();
  counts.translations = in.translations.size();
  const auto corpus = token_lists(transcribed);

  comp.transcribed_lm = in_stage("lm_build", [&] {
    return std::make_shared<const KatzModel>(train_katz(corpus, c.lm));
  });
  const ScorerHandle in_domain_lm(comp.transcribed_lm);

  // Rescoring picks one hypothesis per record; disabled keeps the top-1.
  std::vector<std::size_t> chosen(in.translations.size(), 0);
  if (c.stages.rescore) {
    in_stage("rescore", [&] {
      std::vector<RescoreResult> results(in.translations.size());
      parallel_for(in.translations.size(), c.jobs, [&](std::size_t i) {
        try {
          results[i] = rescore(in.translations[i], *comp.transcribed_lm, c.rescore);
        } catch (const DataError& e) {
          throw DataError("id " + in.translations[i].id + ": " + e.what());
        }
      });
      for (std::size_t i = 0; i < results.size(); ++i) {
        chosen[i] = results[i].chosen;
        if (chosen[i] != 0) ++counts.rescored_changed;
      }
      if (out) {
        out->write("rescore.tsv", [&](std::ostream& os) {
          os << "id\tchosen_rank\tcombined_score\n";
          for (std::size_t i = 0; i < results.size(); ++i) {
            os << in.translations[i].id << '\t' << chosen[i] << '\t' << fixed(results[i].combined[chosen[i]]) << '\n';
          }
        });
      }
    });
  }

  // Post-editing.
  std::map<std::string, const Utterance*> source_by_id;
  for (const auto& u : in.sources) source_by_id.emplace(u.id, &u);
  const FrequencyTable freq = build_frequency_table(corpus, c.freq_alpha);
  std::vector<PostEditResult> edited(in.translations.size());
  in_stage("postedit", [&] {
    parallel_for(in.translations.size(), c.jobs, [&](std::size_t i) {
      const auto& rec = in.translations[i];
      const auto& hyp = rec.hypotheses[chosen[i]];
      if (!c.stages.postedit) {
        edited[i].id = rec.id;
        edited[i].edited.tokens = hyp.target_tokens;
        edited[i].edited.alignment.assign(hyp.target_tokens.size(), 0);
        return;
      }
      const std::vector<EntitySpan>* ents = &rec.entities;
      if (auto it = source_by_id.find(rec.id); it != source_by_id.end() && rec.entities.empty()) {
        if (it->second->tokens != rec.source_tokens) {
          throw DataError("id " + rec.id + ": source utterance tokens differ from translation source");
        }
        ents = &it->second->entities;
      }
      try {
        edited[i] = postedit_hypothesis(rec.id, hyp, *ents, in.catalogs, &freq, c.postedit);
      } catch (const DataError& e) {
        throw DataError("id " + rec.id + ": " + e.what());
      }
    });
    for (const auto& e : edited) {
      counts.unaligned_entities += e.unaligned_entities;
      counts.code_mixed_tokens += e.code_mixed_tokens;
    }
    counts.edited = c.stages.postedit ? edited.size() : 0;
    if (out && !in.sources.empty()) {
      std::vector<Utterance> srcs;
      std::vector<std::pair<std::string, TokenList>> tr;
      for (const auto& e : edited) {
        tr.emplace_back(e.id, e.edited.tokens);
        if (auto it = source_by_id.find(e.id); it != source_by_id.end()) srcs.push_back(*it->second);
      }
      const auto pairs = build_synthetic_parallel(srcs, tr);
      out->write("parallel.tsv", [&](std::ostream& os) { write_parallel_tsv(os, pairs); });
    }
  });

  // Filtering.
  std::set<std::string> keep;
  if (c.stages.filter) {
    in_stage("filter", [&] {
      std::vector<std::pair<std::string, TranslationHypothesis>> items;
      items.reserve(edited.size());
      for (std::size_t i = 0; i < edited.size(); ++i) {
        TranslationHypothesis h = in.translations[i].hypotheses[chosen[i]];
        h.target_tokens = edited[i].edited.tokens;  // the LM judges the edited text
        items.emplace_back(edited[i].id, std::move(h));
      }
      const auto res = filter_translations(items, c.filter, &in_domain_lm, c.jobs);
      keep.insert(res.retained.begin(), res.retained.end());
      if (out) {
        out->write("filter_scores.tsv", [&](std::ostream& os) {
          for (const auto& s : res.scores) os << s.id << '\t' << metric_name(c.filter.metric) << '\t' << fixed(s.score) << '\n';
        });
        out->write("retained_ids.txt", [&](std::ostream& os) { write_id_list(os, res.retained); });
      }
    });
  }
  for (auto& e : edited) {
    if (!c.stages.filter || keep.count(e.id)) comp.final_translations.push_back(std::move(e));
  }
  counts.retained = comp.final_translations.size();

  comp.translated_lm = in_stage("lm_build", [&] {
    std::vector<TokenList> tr;
    for (const auto& e : comp.final_translations) tr.push_back(e.edited.tokens);
    return std::make_shared<const KatzModel>(train_katz(tr, c.lm));
  });
  if (out) {
    out->write("edited.jsonl", [&](std::ostream& os) {
      for (const auto& e : comp.final_translations) os << edited_to_json(e).dump() << '\n';
    });
    out->write("transcribed.arpa", [&](std::ostream& os) { write_arpa(os, *comp.transcribed_lm); });
    out->write("translated.arpa", [&](std::ostream& os) { write_arpa(os, *comp.translated_lm); });
  }
  return comp;
}

inline std::vector<MixtureComponent> mixture_of(const Components& comp) {
  return {{ScorerHandle(comp.transcribed_lm), ComponentRole::kTranscribed},
          {ScorerHandle(comp.translated_lm), ComponentRole::kTranslated}};
}

inline void write_run_report(std::ostream& os, const RunReport& r) {
  os << "metric\tvalue\n";
  auto row = [&](const std::string& k, const std::string& v) { os << k << '\t' << v << '\n'; };
  row("transcribed_sentences", std::to_string(r.counts.transcribed));
  row("translations", std::to_string(r.counts.translations));
  row("selection_candidates", std::to_string(r.counts.selection_candidates));
  row("selected", std::to_string(r.counts.selected));
  row("rescored_changed", std::to_string(r.counts.rescored_changed));
  row("edited", std::to_string(r.counts.edited));
  row("unaligned_entities", std::to_string(r.counts.unaligned_entities));
  row("code_mixed_tokens", std::to_string(r.counts.code_mixed_tokens));
  row("retained", std::to_string(r.counts.retained));
  for (std::size_t n = 0; n < r.ngrams_transcribed.size(); ++n) {
    row("ngrams_transcribed_" + std::to_string(n + 1), std::to_string(r.ngrams_transcribed[n]));
  }
  for (std::size_t n = 0; n < r.ngrams_translated.size(); ++n) {
    row("ngrams_translated_" + std::to_string(n + 1), std::to_string(r.ngrams_translated[n]));
  }
  row("weight_transcribed", fixed(r.weight_transcribed));
  row("weight_translated", fixed(r.weight_translated));
  row("em_iterations", std::to_string(r.em_iterations));
  row("ppl_tuning_transcribed", fixed(r.ppl_tuning_transcribed, 4));
  row("ppl_tuning_translated", fixed(r.ppl_tuning_translated, 4));
  row("ppl_tuning_interpolated", fixed(r.ppl_tuning_interpolated, 4));
  row("ppl_test_transcribed", fixed(r.ppl_test_transcribed, 4));
  row("ppl_test_translated", fixed(r.ppl_test_translated, 4));
  row("ppl_test_interpolated", fixed(r.ppl_test_interpolated, 4));
}

/// Full pipeline: select -> rescore -> postedit -> filter -> LM build ->
/// interpolate -> evaluate. Artifacts go to c.out_dir; on failure the
/// files written so far are removed.
inline RunReport run_pipeline(const PipelineConfig& c) {
  validate_config(c);
  ArtifactWriter out(c.out_dir);
  RunReport rep;
  auto t0 = std::chrono::steady_clock::now();
  const Inputs in = load_inputs(c);
  rep.stage_seconds.emplace_back("load", detail::seconds_since(t0));

  if (c.stages.select) {
    t0 = std::chrono::steady_clock::now();
    in_stage("select", [&] { run_selection(c, in.transcribed, &out, rep.counts); });
    rep.stage_seconds.emplace_back("select", detail::seconds_since(t0));
  }
  t0 = std::chrono::steady_clock::now();
  const Components comp = build_components(c, in, in.transcribed, &out);
  rep.stage_seconds.emplace_back("translate_and_build", detail::seconds_since(t0));
  const std::size_t selected = rep.counts.selected, candidates = rep.counts.selection_candidates;
  rep.counts = comp.counts;
  rep.counts.selected = selected;
  rep.counts.selection_candidates = candidates;

  t0 = std::chrono::steady_clock::now();
  EmOptions em;
  em.floor = c.floor;
  EmResult trace;
  const InterpolatedModel mix =
      in_stage("interpolate", [&] { return tune_interpolation(mixture_of(comp), in.tuning, em, c.jobs, &trace); });
  rep.stage_seconds.emplace_back("interpolate", detail::seconds_since(t0));
  rep.weight_transcribed = mix.role_weight(ComponentRole::kTranscribed);
  rep.weight_translated = mix.role_weight(ComponentRole::kTranslated);
  rep.em_iterations = trace.iterations;

  t0 = std::chrono::steady_clock::now();
  in_stage("evaluate", [&] {
    rep.ppl_tuning_transcribed = perplexity(*comp.transcribed_lm, in.tuning, c.jobs);
    rep.ppl_tuning_translated = perplexity(*comp.translated_lm, in.tuning, c.jobs);
    rep.ppl_tuning_interpolated = perplexity(mix, in.tuning, c.jobs);
    rep.ppl_test_transcribed = perplexity(*comp.transcribed_lm, in.test, c.jobs);
    rep.ppl_test_translated = perplexity(*comp.translated_lm, in.test, c.jobs);
    rep.ppl_test_interpolated = perplexity(mix, in.test, c.jobs);
  });
  rep.stage_seconds.emplace_back("evaluate", detail::seconds_since(t0));
  for (int n = 1; n <= comp.transcribed_lm->order(); ++n) rep.ngrams_transcribed.push_back(comp.transcribed_lm->ngram_count(n));
  for (int n = 1; n <= comp.translated_lm->order(); ++n) rep.ngrams_translated.push_back(comp.translated_lm->ngram_count(n));

  out.write("report.tsv", [&](std::ostream& os) { write_run_report(os, rep); });
  // Wall-clock times vary between runs, so they live apart from the report.
  out.write("timings.tsv", [&](std::ostream& os) {
    os << "stage\tseconds\n";
    for (const auto& [s, t] : rep.stage_seconds) os << s << '\t' << fixed(t, 3) << '\n';
  });
  out.commit();
  return rep;
}

// ---------------------------------------------------------------------------
// Sweeps

struct FloorSweepRow {
  double floor = 0.0;
  double tuning_ppl = 0.0;
  double test_ppl = 0.0;
  double weight_transcribed = 0.0;
  double weight_translated = 0.0;
};

/// One interpolation tail per floor over shared upstream components.
inline std::vector<FloorSweepRow> sweep_floor(const PipelineConfig& c, const std::vector<double>& floors) {
  for (double f : floors) {
    if (!(f >= 0.0 && f < 1.0)) throw ConfigError("floor " + std::to_string(f) + " outside [0, 1)");
  }
  validate_config(c);
  const Inputs in = load_inputs(c);
  const Components comp = build_components(c, in, in.transcribed, nullptr);
  std::vector<FloorSweepRow> rows;
  for (double f : floors) {
    EmOptions em;
    em.floor = f;
    const auto mix = in_stage("interpolate", [&] { return tune_interpolation(mixture_of(comp), in.tuning, em, c.jobs); });
    rows.push_back({f, perplexity(mix, in.tuning, c.jobs), perplexity(mix, in.test, c.jobs),
                    mix.role_weight(ComponentRole::kTranscribed), mix.role_weight(ComponentRole::kTranslated)});
  }
  return rows;
}

inline void write_floor_sweep(std::ostream& os, const std::vector<FloorSweepRow>& rows) {
  os << "floor\ttuning_ppl\ttest_ppl\tweight_transcribed\tweight_translated\n";
  for (const auto& r : rows) {
    os << fixed(r.floor, 4) << '\t' << fixed(r.tuning_ppl, 4) << '\t' << fixed(r.test_ppl, 4) << '\t'
       << fixed(r.weight_transcribed) << '\t' << fixed(r.weight_translated) << '\n';
  }
}

struct VolumeSweepRow {
  std::size_t volume = 0;
  double baseline_ppl = 0.0;
  double augmented_ppl = 0.0;
  double ppl_reduction_pct = 0.0;
  double weight_translated = 0.0;
};

/// Nested subsets of the transcribed corpus: one seeded shuffle, then
/// prefixes of each requested size. Every volume reruns the upstream stages
/// with only that much in-domain data.
inline std::vector<VolumeSweepRow> sweep_volume(const PipelineConfig& c, const std::vector<std::size_t>& volumes) {
  validate_config(c);
  const Inputs in = load_inputs(c);
  for (std::size_t v : volumes) {
    if (v == 0 || v > in.transcribed.size()) {
      throw ConfigError("volume " + std::to_string(v) + " outside [1, " + std::to_string(in.transcribed.size()) + "]");
    }
  }
  std::vector<Utterance> shuffled = in.transcribed;
  seeded_shuffle(shuffled, c.seed);
  std::vector<VolumeSweepRow> rows;
  for (std::size_t v : volumes) {
    const std::vector<Utterance> subset(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(v));
    const Components comp = build_components(c, in, subset, nullptr);
    EmOptions em;
    em.floor = c.floor;
    const auto mix = in_stage("interpolate", [&] { return tune_interpolation(mixture_of(comp), in.tuning, em, c.jobs); });
    VolumeSweepRow r;
    r.volume = v;
    r.baseline_ppl = perplexity(*comp.transcribed_lm, in.test, c.jobs);
    r.augmented_ppl = perplexity(mix, in.test, c.jobs);
    r.ppl_reduction_pct = 100.0 * (r.baseline_ppl - r.augmented_ppl) / r.baseline_ppl;
    r.weight_translated = mix.role_weight(ComponentRole::kTranslated);
    rows.push_back(r);
  }
  return rows;
}

inline void write_volume_sweep(std::ostream& os, const std::vector<VolumeSweepRow>& rows) {
  os << "volume\tbaseline_ppl\taugmented_ppl\tppl_reduction_pct\tweight_translated\n";
  for (const auto& r : rows) {
    os << r.volume << '\t' << fixed(r.baseline_ppl, 4) << '\t' << fixed(r.augmented_ppl, 4) << '\t'
       << fixed(r.ppl_reduction_pct, 4) << '\t' << fixed(r.weight_translated) << '\n';
  }
}

}  // namespace mtaug

#endif  // MTAUG_PIPELINE_HPP
