#ifndef MTAUG_EVALKIT_HPP
#define MTAUG_EVALKIT_HPP

// Evaluation metrics: corpus BLEU, WER and relative WER reduction, Pearson
// correlation with an exact two-tailed p-value, and the per-scenario
// breakdown report.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mtaug/common.hpp"

namespace mtaug {

struct BleuOptions {
  int max_n = 4;
  bool smooth = false;  // add-one smoothing of every n-gram precision
};

/// Corpus-level BLEU in [0, 100] with a single reference per hypothesis.
/// Orders for which no hypothesis has any n-gram are left out of the
/// geometric mean; a zero precision gives 0 unless smoothing is on.
inline double corpus_bleu(const std::vector<TokenList>& hyps, const std::vector<TokenList>& refs,
                          const BleuOptions& opts = {}) {
  if (hyps.size() != refs.size()) {
    throw DataError("BLEU: " + std::to_string(hyps.size()) + " hypotheses for " +
                    std::to_string(refs.size()) + " references");
  }
  if (opts.max_n < 1) throw ConfigError("BLEU max_n must be >= 1");
  const auto n_max = static_cast<std::size_t>(opts.max_n);
  std::vector<double> matches(n_max, 0.0), totals(n_max, 0.0);
  double hyp_len = 0.0, ref_len = 0.0;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    const auto& h = hyps[s];
    const auto& r = refs[s];
    hyp_len += static_cast<double>(h.size());
    ref_len += static_cast<double>(r.size());
    for (std::size_t n = 1; n <= n_max; ++n) {
      std::map<TokenList, int> ref_counts;
      for (std::size_t i = 0; i + n <= r.size(); ++i) ++ref_counts[TokenList(r.begin() + i, r.begin() + i + n)];
      std::map<TokenList, int> hyp_counts;
      for (std::size_t i = 0; i + n <= h.size(); ++i) ++hyp_counts[TokenList(h.begin() + i, h.begin() + i + n)];
      for (const auto& [g, c] : hyp_counts) {
        auto it = ref_counts.find(g);
        matches[n - 1] += std::min(c, it == ref_counts.end() ? 0 : it->second);
        totals[n - 1] += c;
      }
    }
  }
  if (hyp_len == 0.0) return 0.0;
  double log_sum = 0.0;
  int used = 0;
  for (std::size_t n = 0; n < n_max; ++n) {
    if (totals[n] == 0.0) continue;
    double p;
    if (opts.smooth) {
      p = (matches[n] + 1.0) / (totals[n] + 1.0);
    } else {
      if (matches[n] == 0.0) return 0.0;
      p = matches[n] / totals[n];
    }
    log_sum += std::log(p);
    ++used;
  }
  if (used == 0) return 0.0;
  const double bp = hyp_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
  return std::min(100.0, 100.0 * bp * std::exp(log_sum / used));
}

struct WerResult {
  double rate = 0.0;
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference_length = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
};

/// Unit-cost Levenshtein alignment. Among minimum-edit alignments the one
/// with the most substitutions (fewest insertions plus deletions) is
/// reported, which makes the S/D/I split unique.
inline WerResult wer(const TokenList& reference, const TokenList& hypothesis) {
  if (reference.empty()) throw DataError("WER needs a non-empty reference");
  const std::size_t n = reference.size(), m = hypothesis.size();
  struct Cost {
    std::size_t edits, indels;
    bool operator<(const Cost& o) const { return edits != o.edits ? edits < o.edits : indels < o.indels; }
  };
  std::vector<Cost> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = {j, j};
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = {i, i};
    for (std::size_t j = 1; j <= m; ++j) {
      const bool same = reference[i - 1] == hypothesis[j - 1];
      Cost diag{prev[j - 1].edits + (same ? 0 : 1), prev[j - 1].indels};
      Cost del{prev[j].edits + 1, prev[j].indels + 1};
      Cost ins{cur[j - 1].edits + 1, cur[j - 1].indels + 1};
      cur[j] = std::min({diag, del, ins});
    }
    std::swap(prev, cur);
  }
  const Cost best = prev[m];
  WerResult r;
  r.reference_length = n;
  // D - I = n - m and D + I = indels.
  r.deletions = (best.indels + n - m) / 2;
  r.insertions = best.indels - r.deletions;
  r.substitutions = best.edits - best.indels;
  r.rate = static_cast<double>(best.edits) / static_cast<double>(n);
  return r;
}

/// Relative WER reduction in percent; negative when the new system is worse.
inline double werr(double baseline_wer, double new_wer) {
  if (!(baseline_wer > 0.0)) throw DataError("WERR needs a positive baseline WER");
  if (new_wer < 0.0) throw DataError("WER cannot be negative");
  return 100.0 * (baseline_wer - new_wer) / baseline_wer;
}

/// Share of the combined WERR attributable to adaptation, in percent.
inline double adaptation_contribution(double postedit_werr, double combined_werr) {
  if (!(combined_werr > 0.0)) throw DataError("adaptation contribution needs a positive combined WERR");
  return 100.0 * (combined_werr - postedit_werr) / combined_werr;
}

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw InvariantError("incomplete beta continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw DataError("incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
  return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

struct PearsonResult {
  double r = 0.0;
  double p_two_tailed = 1.0;
};

/// Sample Pearson correlation with a two-tailed p-value from Student's t
/// with n - 2 degrees of freedom.
inline PearsonResult pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DataError("pearson: series differ in length");
  const std::size_t n = x.size();
  if (n < 3) throw DataError("pearson: need at least 3 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("pearson: zero variance");
  PearsonResult res;
  res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  const double one_minus = 1.0 - res.r * res.r;
  if (one_minus <= 0.0) {
    res.p_two_tailed = 0.0;
    return res;
  }
  const double t2 = res.r * res.r * df / one_minus;
  res.p_two_tailed = std::clamp(regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t2)), 0.0, 1.0);
  return res;
}

// ---------------------------------------------------------------------------
// Scenario breakdown

enum class Coverage { kLow, kModerate, kHigh };

inline Coverage parse_coverage(const std::string& s) {
  if (s == "low") return Coverage::kLow;
  if (s == "moderate") return Coverage::kModerate;
  if (s == "high") return Coverage::kHigh;
  throw DataError("unknown coverage '" + s + "' (low, moderate, high)");
}

inline const char* coverage_name(Coverage c) {
  switch (c) {
    case Coverage::kLow: return "low";
    case Coverage::kModerate: return "moderate";
    case Coverage::kHigh: return "high";
  }
  return "?";
}

struct ScenarioInput {
  std::string scenario;
  Coverage coverage = Coverage::kModerate;
  double postedit_werr = 0.0;  // percent
  double combined_werr = 0.0;  // percent
  double ne_percent = 0.0;

  /// Builds a row from raw WERs (baseline, post-editing only, combined)
  /// and the entity token share of the scenario's test utterances.
  static ScenarioInput from_wers(std::string scenario, Coverage coverage, double baseline_wer,
                                 double postedit_wer, double combined_wer, double ne_tokens,
                                 double total_tokens) {
    if (!(total_tokens > 0.0)) throw DataError("scenario '" + scenario + "': no tokens");
    return {std::move(scenario), coverage, werr(baseline_wer, postedit_wer), werr(baseline_wer, combined_wer),
            100.0 * ne_tokens / total_tokens};
  }
};

struct ScenarioRow {
  std::string scenario;
  double postedit_werr = 0.0;
  double combined_werr = 0.0;
  double adaptation_contribution = 0.0;
  double ne_percent = 0.0;
  Coverage coverage = Coverage::kModerate;
};

struct ScenarioReport {
  std::vector<ScenarioRow> rows;
  std::optional<PearsonResult> combined_vs_ne;
  std::optional<PearsonResult> postedit_vs_ne;
  std::string correlation_note;  // set when the correlation is undefined
};

inline ScenarioReport scenario_report(const std::vector<ScenarioInput>& inputs) {
  if (inputs.size() < 2) throw DataError("scenario report needs at least two scenarios");
  ScenarioReport rep;
  std::vector<double> comb, post, ne;
  for (const auto& in : inputs) {
    rep.rows.push_back({in.scenario, in.postedit_werr, in.combined_werr,
                        adaptation_contribution(in.postedit_werr, in.combined_werr), in.ne_percent, in.coverage});
    comb.push_back(in.combined_werr);
    post.push_back(in.postedit_werr);
    ne.push_back(in.ne_percent);
  }
  try {
    rep.combined_vs_ne = pearson(comb, ne);
    rep.postedit_vs_ne = pearson(post, ne);
  } catch (const DataError& e) {
    const std::string what = e.what();
    rep.correlation_note = what.find("zero variance") != std::string::npos ? "undefined (zero variance)"
                                                                           : "undefined (too few scenarios)";
  }
  return rep;
}

inline void write_scenario_report(std::ostream& out, const ScenarioReport& rep) {
  out << "scenario\tpostedit_werr\tcombined_werr\tadaptation_contribution\tne_percent\tcoverage\n";
  for (const auto& r : rep.rows) {
    out << r.scenario << '\t' << fixed(r.postedit_werr, 2) << '\t' << fixed(r.combined_werr, 2) << '\t'
        << fixed(r.adaptation_contribution, 2) << '\t' << fixed(r.ne_percent, 2) << '\t'
        << coverage_name(r.coverage) << '\n';
  }
  if (rep.combined_vs_ne) {
    out << "pearson_r=" << fixed(rep.combined_vs_ne->r) << " p=" << fixed(rep.combined_vs_ne->p_two_tailed) << '\n';
    out << "postedit_pearson_r=" << fixed(rep.postedit_vs_ne->r)
        << " p=" << fixed(rep.postedit_vs_ne->p_two_tailed) << '\n';
  } else {
    out << "pearson_r=" << rep.correlation_note << '\n';
  }
}

/// Reads scenario rows from TSV with a header. Two layouts are accepted:
///   scenario coverage postedit_werr combined_werr ne_percent
///   scenario coverage baseline_wer postedit_wer combined_wer ne_tokens total_tokens
inline std::vector<ScenarioInput> read_scenario_inputs(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("scenario file is empty");
  const auto header = [&] {
    TokenList cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, '\t')) cols.push_back(c);
    return cols;
  }();
  const bool werr_layout = header == TokenList{"scenario", "coverage", "postedit_werr", "combined_werr", "ne_percent"};
  const bool wer_layout = header == TokenList{"scenario", "coverage", "baseline_wer", "postedit_wer",
                                              "combined_wer", "ne_tokens", "total_tokens"};
  if (!werr_layout && !wer_layout) throw DataError("scenario file: unrecognized header");
  std::vector<ScenarioInput> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    TokenList f;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, '\t')) f.push_back(c);
    if (f.size() != header.size()) {
      throw DataError("scenario file line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " columns");
    }
    try {
      if (werr_layout) {
        out.push_back({f[0], parse_coverage(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4])});
      } else {
        out.push_back(ScenarioInput::from_wers(f[0], parse_coverage(f[1]), std::stod(f[2]), std::stod(f[3]),
                                               std::stod(f[4]), std::stod(f[5]), std::stod(f[6])));
      }
    } catch (const std::invalid_argument&) {
      throw DataError("scenario file line " + std::to_string(line_no) + ": bad number");
    }
  }
  return out;
}

}  // namespace mtaug

#endif  // MTAUG_EVALKIT_HPP
