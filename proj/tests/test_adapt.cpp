#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numbers>
#include <sstream>

#include "test_util.hpp"

using namespace mtaug;

namespace {

// Scorer with a fixed per-position log10 probability per sentence.
struct TableScorer {
  std::map<std::string, double> per_position;
  std::vector<double> position_log10(const TokenList& t) const {
    auto it = per_position.find(join_tokens(t));
    const double v = it == per_position.end() ? -5.0 : it->second;
    return std::vector<double>(t.size() + 1, v);
  }
};

TranslationHypothesis hyp(const TokenList& tgt, double per_token_ln) {
  const TokenList src = {"s"};
  std::vector<std::vector<double>> rows(tgt.size(), std::vector<double>{1.0});
  return {src, tgt, std::vector<double>(tgt.size(), per_token_ln), AttentionMatrix::from_rows(rows)};
}

}  // namespace

TEST(Rescore, CombinedArithmetic) {
  // mt = -1 per token; lm chosen so the natural-log per-position value is -2.
  TableScorer lm{{{"a b", -2.0 / std::numbers::ln10}}};
  NBestList nb{"x", {"s"}, {}, {hyp({"a", "b"}, -1.0)}};
  const auto r = rescore(nb, lm, {0.3, true});
  EXPECT_NEAR(r.mt[0], -1.0, 1e-12);
  EXPECT_NEAR(r.lm[0], -2.0, 1e-12);
  EXPECT_NEAR(r.combined[0], -1.3, 1e-12);
}

TEST(Rescore, ZeroWeightKeepsTopMt) {
  TableScorer lm{{{"b", -0.01}}};
  NBestList nb{"x", {"s"}, {}, {hyp({"a"}, -0.5), hyp({"b"}, -0.6)}};
  EXPECT_EQ(rescore(nb, lm, {0.0, true}).chosen, 0u);
  EXPECT_EQ(rescore(nb, lm, {1.0, true}).chosen, 1u);
  EXPECT_THROW(rescore(nb, lm, {1.5, true}), ConfigError);
  NBestList empty{"e", {"s"}, {}, {}};
  EXPECT_THROW(rescore(empty, lm, {}), DataError);
}

TEST(Rescore, FiveBestFlipMatchesBruteForce) {
  TableScorer lm{{{"h0", -3.0}, {"h1", -2.5}, {"h2", -2.8}, {"h3 x", -0.2}, {"h4", -2.0}}};
  NBestList nb{"x", {"s"}, {}, {hyp({"h0"}, -0.1), hyp({"h1"}, -0.3), hyp({"h2"}, -0.4), hyp({"h3", "x"}, -0.6),
                                 hyp({"h4"}, -0.9)}};
  EXPECT_EQ(rescore(nb, lm, {0.0, true}).chosen, 0u);
  const auto r = rescore(nb, lm, {0.3, true});
  std::size_t best = 0;
  double best_v = -1e300;
  for (std::size_t i = 0; i < nb.hypotheses.size(); ++i) {
    const auto& h = nb.hypotheses[i];
    const double mt = h.mt_score() / double(h.target_tokens.size());
    const double lmv = lm.per_position.at(join_tokens(h.target_tokens)) * std::log(10.0);
    const double c = 0.7 * mt + 0.3 * lmv;
    EXPECT_NEAR(r.combined[i], c, 1e-12);
    if (c > best_v) best_v = c, best = i;
  }
  EXPECT_EQ(r.chosen, best);
  EXPECT_EQ(best, 3u);
}

TEST(Rescore, TiesGoToBetterRank) {
  TableScorer lm{{{"a", -1.0}, {"b", -1.0}}};
  NBestList nb{"x", {"s"}, {}, {hyp({"a"}, -0.5), hyp({"b"}, -0.5)}};
  EXPECT_EQ(rescore(nb, lm, {0.4, true}).chosen, 0u);
}

TEST(Rescore, DominanceOnRandomPairs) {
  SplitMix64 r(6);
  for (int t = 0; t < 500; ++t) {
    const double mtb = -r.uniform() * 3, lmb = -r.uniform() * 3;
    const double mta = std::min(0.0, mtb + r.uniform() * 0.5), lma = lmb + r.uniform() * 0.5 + 1e-6;
    TableScorer lm{{{"A", lma}, {"B", lmb}}};
    NBestList nb{"x", {"s"}, {}, {hyp({"B"}, mtb), hyp({"A"}, mta)}};
    const double w = 0.01 + 0.98 * r.uniform();
    const auto res = rescore(nb, lm, {w, true});
    ASSERT_GT(res.combined[1], res.combined[0]);
    ASSERT_EQ(res.chosen, 1u);
  }
}

TEST(Rescore, RawSumsWithoutNormalization) {
  TableScorer lm{{{"a b c", -1.0}}};
  NBestList nb{"x", {"s"}, {}, {hyp({"a", "b", "c"}, -0.5)}};
  const auto r = rescore(nb, lm, {0.5, false});
  EXPECT_NEAR(r.mt[0], -1.5, 1e-12);
  EXPECT_NEAR(r.lm[0], -4.0 * std::log(10.0), 1e-12);
}

TEST(Filter, SpecExamples) {
  std::vector<std::pair<std::string, TranslationHypothesis>> items = {
      {"d", hyp({"x"}, -4)}, {"a", hyp({"x"}, -1)}, {"c", hyp({"x"}, -3)}, {"b", hyp({"x"}, -2)}};
  FilterConfig cfg{FilterMetric::kMtScore, 0.75, true};
  EXPECT_EQ(filter_translations(items, cfg).retained, (std::vector<std::string>{"a", "b", "c"}));
  cfg.keep_fraction = 1.0;
  EXPECT_EQ(filter_translations(items, cfg).retained.size(), 4u);
  cfg.keep_fraction = 0.0;
  EXPECT_THROW(filter_translations(items, cfg), ConfigError);
  FilterConfig slm{FilterMetric::kSlmScore, 0.5, true};
  EXPECT_THROW(filter_translations(items, slm), ConfigError);
}

TEST(Filter, SlmMetricUsesModel) {
  auto lm = std::make_shared<const TableScorer>(TableScorer{{{"good", -0.1}, {"bad", -3.0}}});
  ScorerHandle handle(lm);
  std::vector<std::pair<std::string, TranslationHypothesis>> items = {{"1", hyp({"bad"}, -0.01)},
                                                                      {"2", hyp({"good"}, -2.0)}};
  const auto r = filter_translations(items, {FilterMetric::kSlmScore, 0.5, true}, &handle);
  EXPECT_EQ(r.retained, (std::vector<std::string>{"2"}));
  EXPECT_NEAR(r.scores[0].score, -3.0 * std::log(10.0), 1e-12);
}

TEST(Filter, MatchesSortOracleAndIsMonotone) {
  SplitMix64 r(8);
  std::vector<std::pair<std::string, TranslationHypothesis>> items;
  for (int i = 0; i < 500; ++i) {
    const std::size_t len = 1 + r.below(6);
    items.emplace_back("i" + std::to_string(i), hyp(TokenList(len, "t"), -std::floor(r.uniform() * 40) / 10.0));
  }
  std::vector<std::pair<double, std::string>> oracle;
  for (const auto& [id, h] : items) oracle.emplace_back(-h.mt_score() / double(h.target_tokens.size()), id);
  std::sort(oracle.begin(), oracle.end());
  const auto res = filter_translations(items, {FilterMetric::kMtScore, 0.65, true}, nullptr, 4);
  ASSERT_EQ(res.retained.size(), 325u);
  for (std::size_t i = 0; i < 325; ++i) EXPECT_EQ(res.retained[i], oracle[i].second);

  std::vector<std::string> prev;
  for (double f : {0.1, 0.3, 0.5, 0.9, 1.0}) {
    auto cur = filter_translations(items, {FilterMetric::kMtScore, f, true}).retained;
    EXPECT_EQ(cur.size(), nearest_rank_count(f, 500));
    std::sort(cur.begin(), cur.end());
    EXPECT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
    prev = cur;
  }
}

TEST(Parallel, PairsInSourceOrderAndRoundTrip) {
  std::vector<Utterance> src = {{"u1", {"play", "it"}, {}, {}}, {"u2", {"stop"}, {}, {}}};
  std::vector<std::pair<std::string, TokenList>> tr = {{"u2", {"roko"}}, {"u1", {"chalao", "ise"}}};
  const auto pairs = build_synthetic_parallel(src, tr);
  std::stringstream ss;
  write_parallel_tsv(ss, pairs);
  EXPECT_EQ(ss.str(), "play it\tchalao ise\nstop\troko\n");
  const auto back = read_parallel_tsv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].first, src[0].tokens);
  EXPECT_EQ(back[0].second, tr[1].second);
}

TEST(Parallel, OrphansNamed) {
  std::vector<Utterance> src = {{"u1", {"a"}, {}, {}}};
  std::vector<std::pair<std::string, TokenList>> tr = {{"u9", {"b"}}};
  try {
    build_synthetic_parallel(src, tr);
    FAIL();
  } catch (const DataError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("u1"), std::string::npos);
    EXPECT_NE(m.find("u9"), std::string::npos);
  }
  std::istringstream bad("no tab here\n");
  EXPECT_THROW(read_parallel_tsv(bad), DataError);
}

TEST(Adapt, KatzModelAsRescorer) {
  const auto m = train_katz(testutil::corpus({"play the song", "play the song", "play a song"}), 3);
  NBestList nb{"x", {"s"}, {}, {hyp({"song", "the", "play"}, -0.2), hyp({"play", "the", "song"}, -0.3)}};
  EXPECT_EQ(rescore(nb, m, {0.5, true}).chosen, 1u);
}
