// mtaug: command-line driver for the augmentation pipeline and its stages.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "mtaug/mtaug.hpp"

namespace {

using namespace mtaug;

struct Globals {
  std::string config;
  std::optional<long long> seed;
  std::optional<unsigned> jobs;
  std::optional<std::string> out;
  std::vector<std::string> overrides;  // section.key=value
  bool verbose = false;
};

PipelineConfig resolve_config(const Globals& g) {
  ConfigMap m;
  fs::path base;
  if (!g.config.empty()) {
    m = load_config_map(g.config);
    base = fs::absolute(g.config).parent_path();
  }
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + kv + "'");
    m[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (g.seed) m["run.seed"] = std::to_string(*g.seed);
  if (g.jobs) m["run.jobs"] = std::to_string(*g.jobs);
  if (g.out) m["run.out"] = *g.out;
  auto c = config_from_map(m, base);
  return c;
}

std::string pick(const std::string& flag, const std::string& from_config, const char* name) {
  const std::string& v = flag.empty() ? from_config : flag;
  if (v.empty()) throw ConfigError(std::string("missing --") + name);
  return v;
}

template <typename Fn>
void write_out(const PipelineConfig& c, const std::string& name, Fn&& fn) {
  fs::create_directories(c.out_dir);
  const fs::path p = fs::path(c.out_dir) / name;
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DataError("cannot write " + p.string());
  fn(os);
  log::info("wrote " + p.string());
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(detail::parse_double("list", item));
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = detail::parse_int("list", item);
    if (v < 0) throw ConfigError("negative volume " + item);
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::vector<std::pair<std::string, TranslationHypothesis>> top_hypotheses(const std::vector<TranslationRecord>& recs) {
  std::vector<std::pair<std::string, TranslationHypothesis>> items;
  for (const auto& r : recs) items.emplace_back(r.id, r.hypotheses.front());
  return items;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Translation-based LM data augmentation for low-resource speech recognition"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "random seed (default 42)");
  app.add_option("--jobs", g.jobs, "worker threads per stage")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output directory");
  app.add_option("--set", g.overrides, "override a config key: section.key=value");
  app.add_flag("-v,--verbose", g.verbose, "log progress to stderr");

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "run every enabled stage and evaluate");
  std::optional<double> floor_flag;
  pipeline->add_option("--floor", floor_flag, "floor on the translated component weight");

  // sweeps
  auto* sweep_floor_cmd = app.add_subcommand("sweep-floor", "interpolate at several floor weights");
  std::string floors = "0.1,0.25,0.4";
  sweep_floor_cmd->add_option("--floors", floors, "comma-separated floors in [0,1)");
  auto* sweep_volume_cmd = app.add_subcommand("sweep-volume", "vary the amount of in-domain data");
  std::string volumes;
  sweep_volume_cmd->add_option("--volumes", volumes, "comma-separated corpus sizes")->required();

  // train-lm
  auto* train = app.add_subcommand("train-lm", "train a Katz back-off model and write ARPA");
  std::string train_in, train_out = "model.arpa";
  int order = 0, gt_max = 0;
  train->add_option("--input", train_in, "utterance JSONL (default: paths.transcribed)");
  train->add_option("--output", train_out, "ARPA file name inside --out");
  train->add_option("--order", order, "n-gram order");
  train->add_option("--gt-max", gt_max, "Good-Turing cutoff k");

  // interpolate
  auto* interp = app.add_subcommand("interpolate", "EM-tune mixture weights of two ARPA models");
  std::string lm_transcribed, lm_translated, tuning_in, eval_in;
  interp->add_option("--transcribed", lm_transcribed, "transcribed-data ARPA")->required()->check(CLI::ExistingFile);
  interp->add_option("--translated", lm_translated, "translated-data ARPA")->required()->check(CLI::ExistingFile);
  interp->add_option("--tuning", tuning_in, "tuning utterances (default: paths.tuning)");
  interp->add_option("--eval", eval_in, "optional evaluation utterances");
  interp->add_option("--floor", floor_flag, "floor on the translated weight");

  // embed
  auto* embed = app.add_subcommand("embed", "sentence embeddings (average or sif)");
  std::string embed_in, embed_method = "sif", vectors_in, embed_out = "embeddings.txt";
  double freq_alpha = -1.0;
  embed->add_option("--input", embed_in, "utterance JSONL")->required();
  embed->add_option("--method", embed_method, "average | sif");
  embed->add_option("--vectors", vectors_in, "word vectors (default: paths.word_vectors)");
  embed->add_option("--output", embed_out, "file name inside --out");
  embed->add_option("--alpha", freq_alpha, "add-alpha smoothing of word frequencies");

  // select
  auto* select = app.add_subcommand("select", "rank MT training sentences by relative centroid distance");
  std::string sel_in, sel_out;
  double fraction = -1.0;
  select->add_option("--in-domain", sel_in, "in-domain embeddings")->required()->check(CLI::ExistingFile);
  select->add_option("--candidates", sel_out, "out-of-domain embeddings")->required()->check(CLI::ExistingFile);
  select->add_option("--fraction", fraction, "fraction to keep");

  // postedit
  auto* postedit = app.add_subcommand("postedit", "entity copy-over, resampling and code-mixing");
  std::string pe_translations, pe_catalogs, pe_sources, pe_corpus;
  double p_max = -1.0;
  bool no_copy = false, no_resample = false, no_mix = false;
  postedit->add_option("--translations", pe_translations, "translation JSONL (top hypothesis is edited)");
  postedit->add_option("--catalogs", pe_catalogs, "entity catalogs");
  postedit->add_option("--sources", pe_sources, "source utterances carrying entity spans");
  postedit->add_option("--corpus", pe_corpus, "in-domain corpus for code-mix frequencies");
  postedit->add_option("--p-max", p_max, "maximum code-mix probability");
  postedit->add_flag("--no-copy", no_copy, "skip entity copy-over");
  postedit->add_flag("--no-resample", no_resample, "skip entity resampling");
  postedit->add_flag("--no-code-mix", no_mix, "skip code-mixing");

  // rescore
  auto* rescore_cmd = app.add_subcommand("rescore", "pick the best n-best hypothesis with an in-domain LM");
  std::string rs_translations, rs_lm;
  double lm_weight = -1.0;
  rescore_cmd->add_option("--translations", rs_translations, "translation JSONL");
  rescore_cmd->add_option("--lm", rs_lm, "in-domain ARPA")->required()->check(CLI::ExistingFile);
  rescore_cmd->add_option("--lm-weight", lm_weight, "LM interpolation weight w");

  // filter
  auto* filter_cmd = app.add_subcommand("filter", "keep the best-scoring fraction of translations");
  std::string ft_translations, ft_lm, ft_metric;
  double keep = -1.0;
  filter_cmd->add_option("--translations", ft_translations, "translation JSONL (top hypothesis)");
  filter_cmd->add_option("--lm", ft_lm, "in-domain ARPA (slm_score)");
  filter_cmd->add_option("--metric", ft_metric, "mt_score | slm_score");
  filter_cmd->add_option("--keep-fraction", keep, "fraction to keep");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "perplexity, WER, BLEU and scenario reports");
  evaluate->require_subcommand(1);
  auto* ev_ppl = evaluate->add_subcommand("ppl", "perplexity of an ARPA model on utterances");
  std::string ev_lm, ev_corpus;
  ev_ppl->add_option("--lm", ev_lm, "ARPA model")->required()->check(CLI::ExistingFile);
  ev_ppl->add_option("--corpus", ev_corpus, "utterance JSONL")->required()->check(CLI::ExistingFile);
  auto* ev_wer = evaluate->add_subcommand("wer", "corpus WER of hypotheses against references");
  std::string ev_ref, ev_hyp;
  ev_wer->add_option("--ref", ev_ref, "reference utterances")->required()->check(CLI::ExistingFile);
  ev_wer->add_option("--hyp", ev_hyp, "hypothesis utterances (matched by id)")->required()->check(CLI::ExistingFile);
  auto* ev_bleu = evaluate->add_subcommand("bleu", "corpus BLEU");
  bool smooth = false;
  int max_n = 4;
  ev_bleu->add_option("--ref", ev_ref, "reference utterances")->required()->check(CLI::ExistingFile);
  ev_bleu->add_option("--hyp", ev_hyp, "hypothesis utterances (matched by id)")->required()->check(CLI::ExistingFile);
  ev_bleu->add_option("--max-n", max_n, "highest n-gram order");
  ev_bleu->add_flag("--smooth", smooth, "add-one smoothing");
  auto* ev_scen = evaluate->add_subcommand("scenarios", "per-scenario WERR, contribution and Pearson");
  std::string ev_scen_in;
  ev_scen->add_option("--input", ev_scen_in, "scenario TSV")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  log::level() = g.verbose ? log::Level::kInfo : log::Level::kWarn;

  try {
    PipelineConfig c = resolve_config(g);
    if (floor_flag) c.floor = *floor_flag;

    if (*pipeline) {
      const auto rep = run_pipeline(c);
      write_run_report(std::cout, rep);
    } else if (*sweep_floor_cmd) {
      const auto rows = sweep_floor(c, parse_double_list(floors));
      write_out(c, "sweep_floor.tsv", [&](std::ostream& os) { write_floor_sweep(os, rows); });
      write_floor_sweep(std::cout, rows);
    } else if (*sweep_volume_cmd) {
      const auto rows = sweep_volume(c, parse_size_list(volumes));
      write_out(c, "sweep_volume.tsv", [&](std::ostream& os) { write_volume_sweep(os, rows); });
      write_volume_sweep(std::cout, rows);
    } else if (*train) {
      KatzOptions opts = c.lm;
      if (order > 0) opts.order = order;
      if (gt_max > 0) opts.gt_max = gt_max;
      const auto corpus = token_lists(load_utterances(pick(train_in, c.paths.transcribed, "input")));
      const auto model = train_katz(corpus, opts);
      write_out(c, train_out, [&](std::ostream& os) { write_arpa(os, model); });
      std::cout << "order\tngrams\n";
      for (int n = 1; n <= model.order(); ++n) std::cout << n << '\t' << model.ngram_count(n) << '\n';
    } else if (*interp) {
      auto a = std::make_shared<const KatzModel>(read_arpa(lm_transcribed));
      auto b = std::make_shared<const KatzModel>(read_arpa(lm_translated));
      const auto tuning = token_lists(load_utterances(pick(tuning_in, c.paths.tuning, "tuning")));
      EmOptions em;
      em.floor = c.floor;
      EmResult trace;
      const auto mix = tune_interpolation({{ScorerHandle(a), ComponentRole::kTranscribed},
                                           {ScorerHandle(b), ComponentRole::kTranslated}},
                                          tuning, em, c.jobs, &trace);
      std::cout << "metric\tvalue\n"
                << "weight_transcribed\t" << fixed(mix.role_weight(ComponentRole::kTranscribed)) << '\n'
                << "weight_translated\t" << fixed(mix.role_weight(ComponentRole::kTranslated)) << '\n'
                << "em_iterations\t" << trace.iterations << '\n'
                << "vertex_selected\t" << (trace.vertex_selected ? 1 : 0) << '\n'
                << "floor_clamped\t" << (trace.clamped ? 1 : 0) << '\n'
                << "ppl_tuning\t" << fixed(perplexity(mix, tuning, c.jobs), 4) << '\n';
      if (!eval_in.empty()) {
        std::cout << "ppl_eval\t" << fixed(perplexity(mix, token_lists(load_utterances(eval_in)), c.jobs), 4) << '\n';
      }
    } else if (*embed) {
      const auto method = parse_method(embed_method);
      if (method == EmbeddingMethod::kExternal) throw ConfigError("embed computes average or sif; import external vectors directly");
      const auto utts = load_utterances(embed_in);
      const auto table = load_word_vectors(pick(vectors_in, c.paths.word_vectors, "vectors"));
      std::vector<SentenceEmbedding> embs;
      if (method == EmbeddingMethod::kAverage) {
        for (const auto& u : utts) embs.push_back(embed_average(u.tokens, table, u.id));
      } else {
        std::vector<std::string> ids;
        for (const auto& u : utts) ids.push_back(u.id);
        const auto freq = build_frequency_table(utts, freq_alpha >= 0.0 ? freq_alpha : c.freq_alpha);
        embs = embed_sif(token_lists(utts), table, freq, c.sif, ids, c.jobs);
      }
      write_out(c, embed_out, [&](std::ostream& os) { write_embeddings(os, embs); });
    } else if (*select) {
      auto in_emb = import_external_embeddings(sel_in);
      auto out_emb = import_external_embeddings(sel_out);
      std::vector<Vector> iv, ov;
      for (const auto& e : in_emb) iv.push_back(e.vector);
      for (const auto& e : out_emb) ov.push_back(e.vector);
      const auto scores = score_candidates(out_emb, compute_centroids(iv, ov), c.jobs);
      const auto ids = select_top_fraction(scores, fraction > 0.0 ? fraction : c.select_fraction);
      write_out(c, "selection_scores.tsv", [&](std::ostream& os) { write_scores_tsv(os, scores); });
      write_out(c, "selected_ids.txt", [&](std::ostream& os) { write_id_list(os, ids); });
      std::cout << "candidates\tselected\n" << scores.size() << '\t' << ids.size() << '\n';
    } else if (*postedit) {
      PostEditConfig pc = c.postedit;
      if (p_max >= 0.0) pc.p_max = p_max;
      if (no_copy) pc.ne_copy = false;
      if (no_resample) pc.ne_resample = false;
      if (no_mix) pc.code_mix = false;
      const auto recs = load_translations(pick(pe_translations, c.paths.translations, "translations"));
      CatalogMap catalogs;
      if (pc.ne_resample) catalogs = load_catalogs(pick(pe_catalogs, c.paths.catalogs, "catalogs"));
      std::map<std::string, Utterance> sources;
      const std::string src_path = pe_sources.empty() ? c.paths.sources : pe_sources;
      if (!src_path.empty()) {
        for (auto& u : load_utterances(src_path)) sources.emplace(u.id, std::move(u));
      }
      std::optional<FrequencyTable> freq;
      if (pc.code_mix) freq = build_frequency_table(load_utterances(pick(pe_corpus, c.paths.transcribed, "corpus")), c.freq_alpha);
      std::vector<PostEditResult> results(recs.size());
      parallel_for(recs.size(), c.jobs, [&](std::size_t i) {
        const auto& r = recs[i];
        const std::vector<EntitySpan>* ents = &r.entities;
        if (auto it = sources.find(r.id); it != sources.end() && r.entities.empty()) ents = &it->second.entities;
        try {
          results[i] = postedit_hypothesis(r.id, r.hypotheses.front(), *ents, catalogs, freq ? &*freq : nullptr, pc);
        } catch (const DataError& e) {
          throw DataError("id " + r.id + ": " + e.what());
        }
      });
      write_out(c, "edited.jsonl", [&](std::ostream& os) {
        for (const auto& r : results) os << edited_to_json(r).dump() << '\n';
      });
      std::size_t unaligned = 0, mixed = 0;
      for (const auto& r : results) {
        unaligned += r.unaligned_entities;
        mixed += r.code_mixed_tokens;
      }
      std::cout << "edited\tunaligned_entities\tcode_mixed_tokens\n"
                << results.size() << '\t' << unaligned << '\t' << mixed << '\n';
    } else if (*rescore_cmd) {
      RescoreConfig rc = c.rescore;
      if (lm_weight >= 0.0) rc.lm_weight = lm_weight;
      const auto lm = read_arpa(rs_lm);
      const auto recs = load_translations(pick(rs_translations, c.paths.translations, "translations"));
      std::vector<RescoreResult> res(recs.size());
      parallel_for(recs.size(), c.jobs, [&](std::size_t i) { res[i] = rescore(recs[i], lm, rc); });
      write_out(c, "rescore.tsv", [&](std::ostream& os) {
        os << "id\tchosen_rank\tcombined_score\n";
        for (std::size_t i = 0; i < recs.size(); ++i) {
          os << recs[i].id << '\t' << res[i].chosen << '\t' << fixed(res[i].combined[res[i].chosen]) << '\n';
        }
      });
    } else if (*filter_cmd) {
      FilterConfig fc = c.filter;
      if (!ft_metric.empty()) fc.metric = parse_filter_metric(ft_metric);
      if (keep > 0.0) fc.keep_fraction = keep;
      std::optional<ScorerHandle> lm;
      if (!ft_lm.empty()) lm.emplace(std::make_shared<const KatzModel>(read_arpa(ft_lm)));
      const auto recs = load_translations(pick(ft_translations, c.paths.translations, "translations"));
      const auto res = filter_translations(top_hypotheses(recs), fc, lm ? &*lm : nullptr, c.jobs);
      write_out(c, "filter_scores.tsv", [&](std::ostream& os) {
        for (const auto& s : res.scores) os << s.id << '\t' << metric_name(fc.metric) << '\t' << fixed(s.score) << '\n';
      });
      write_out(c, "retained_ids.txt", [&](std::ostream& os) { write_id_list(os, res.retained); });
      std::cout << "input\tretained\n" << recs.size() << '\t' << res.retained.size() << '\n';
    } else if (*evaluate) {
      if (*ev_ppl) {
        const auto lm = read_arpa(ev_lm);
        const auto corpus = token_lists(load_utterances(ev_corpus));
        const auto s = score_corpus(lm, corpus, c.jobs);
        std::cout << "sentences\tpredicted_tokens\tlog10_prob\tperplexity\n"
                  << corpus.size() << '\t' << s.positions << '\t' << fixed(s.log10_sum, 4) << '\t'
                  << fixed(perplexity(lm, corpus, c.jobs), 4) << '\n';
      } else if (*ev_wer || *ev_bleu) {
        const auto refs = load_utterances(ev_ref);
        std::map<std::string, TokenList> hyps;
        for (auto& u : load_utterances(ev_hyp)) hyps.emplace(u.id, std::move(u.tokens));
        std::vector<TokenList> h, r;
        for (const auto& u : refs) {
          auto it = hyps.find(u.id);
          if (it == hyps.end()) throw DataError("no hypothesis for reference id '" + u.id + "'");
          h.push_back(it->second);
          r.push_back(u.tokens);
        }
        if (*ev_wer) {
          std::size_t s = 0, d = 0, ins = 0, n = 0;
          for (std::size_t i = 0; i < r.size(); ++i) {
            const auto w = wer(r[i], h[i]);
            s += w.substitutions;
            d += w.deletions;
            ins += w.insertions;
            n += w.reference_length;
          }
          std::cout << "wer\tsubstitutions\tdeletions\tinsertions\treference_tokens\n"
                    << fixed(n ? 100.0 * static_cast<double>(s + d + ins) / static_cast<double>(n) : 0.0, 4) << '\t'
                    << s << '\t' << d << '\t' << ins << '\t' << n << '\n';
        } else {
          std::cout << "bleu\n" << fixed(corpus_bleu(h, r, {max_n, smooth}), 4) << '\n';
        }
      } else {
        std::ifstream in(ev_scen_in);
        const auto rep = scenario_report(read_scenario_inputs(in));
        write_out(c, "scenario_report.tsv", [&](std::ostream& os) { write_scenario_report(os, rep); });
        write_scenario_report(std::cout, rep);
      }
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const InvariantError& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
