#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "test_util.hpp"

using namespace mtaug;
using testutil::cond_prob;
using testutil::context_mass;
using testutil::corpus;
using testutil::toks;

// ---------------------------------------------------------------- counting

TEST(CountNgrams, PadsWithSentenceMarkers) {
  const auto c = count_ngrams(corpus({"a b"}), 3);
  const auto a = c.vocab.lookup("a"), b = c.vocab.lookup("b");
  const WordId bos = Vocabulary::kBosId, eos = Vocabulary::kEosId;
  EXPECT_EQ(c.count({bos, bos, a}), 1u);
  EXPECT_EQ(c.count({bos, a, b}), 1u);
  EXPECT_EQ(c.count({a, b, eos}), 1u);
  EXPECT_EQ(c.count({a}), 1u);
  EXPECT_EQ(c.count({eos}), 1u);
  EXPECT_EQ(c.count({bos}), 0u);  // the start marker is never predicted
  EXPECT_EQ(c.token_count, 2u);
}

TEST(CountNgrams, ConsistentOnRandomCorpora) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto c = count_ngrams(testutil::random_corpus(seed, 200, 30), 4);
    EXPECT_TRUE(c.consistent());
  }
}

TEST(Vocabulary, SentenceMarkersInTextFoldToUnknown) {
  Vocabulary v;
  EXPECT_EQ(v.add("<s>"), Vocabulary::kUnkId);
  EXPECT_EQ(v.add("</s>"), Vocabulary::kUnkId);
  EXPECT_EQ(v.lookup("never-seen"), Vocabulary::kUnkId);
  const auto id = v.add("x");
  EXPECT_EQ(v.lookup("x"), id);
}

// ------------------------------------------------------------- discounting

TEST(GoodTuring, DiscountFormulaAndFallback) {
  // N1=10, N2=4, N3=2, N4=1 with k=3: A = 4*N4/N1 = 0.4.
  std::map<std::uint64_t, std::uint64_t> coc{{1, 10}, {2, 4}, {3, 2}, {4, 1}};
  const auto d = good_turing_discounts(coc, 3);
  const double A = 0.4;
  EXPECT_NEAR(d[1], ((2.0 * 4 / 10) / 1 - A) / (1 - A), 1e-12);  // 0.8/1 -> 0.666..
  EXPECT_NEAR(d[2], ((3.0 * 2 / 4) / 2 - A) / (1 - A), 1e-12);   // 0.75 -> 0.5833..
  // r = 3: r* = 4*1/2 = 2, 2/3 = 0.667 -> (0.667-0.4)/0.6 = 0.444
  EXPECT_NEAR(d[3], ((4.0 * 1 / 2) / 3 - A) / (1 - A), 1e-12);

  // Missing N_{r+1} gives d_r = 0 -> no discount for that value.
  std::map<std::uint64_t, std::uint64_t> sparse{{1, 5}, {3, 2}};
  const auto d2 = good_turing_discounts(sparse, 2);
  EXPECT_EQ(d2[1], 1.0);
  EXPECT_EQ(d2[2], 1.0);
}

// ------------------------------------------------------------ Katz golden

// Corpus {"a b", "a c", "a b"}, order 2, k = 5, worked by hand:
//   unigram tokens a:3 b:2 c:1 </s>:3, N = 9. Count-of-counts N1=1 N2=1 N3=2
//   give d_1 = 2, d_2 = 3 (both outside (0,1)) and d_3 = 0, so no unigram is
//   discounted. P(<unk>) = N1/N = 1/9 and the seen words share 8/9.
//   bigram counts (<s> a):3 (a b):2 (a c):1 (b </s>):2 (c </s>):1.
//   Bigram count-of-counts N1=2 N2=2 N3=1, A = 6*N6/N1 = 0:
//   d_1 = 2*2/2 = 2 -> 1, d_2 = 3*1/(2*2) = 0.75, d_3 = 0 -> 1.
//   P(b|a) = 0.75*2/3 = 0.5, P(c|a) = 1/3, left-over 1/6.
//   bow(a) = (1/6) / (1 - P(b) - P(c)) = (1/6) / (1 - 24/81) = 81/342.
TEST(KatzGolden, ThreeSentenceCorpus) {
  const auto m = train_katz(corpus({"a b", "a c", "a b"}), 2, 5);
  EXPECT_NEAR(cond_prob(m, {"a"}, "b"), 0.500000, 5e-7);
  EXPECT_NEAR(cond_prob(m, {"a"}, "c"), 0.333333, 5e-7);
  EXPECT_NEAR(cond_prob(m, {}, "a"), 24.0 / 81.0, 5e-7);
  EXPECT_NEAR(cond_prob(m, {}, "<unk>"), 1.0 / 9.0, 5e-7);
  const double bow_a = 81.0 / 342.0;
  EXPECT_NEAR(cond_prob(m, {"a"}, "a"), bow_a * 24.0 / 81.0, 5e-7);
  EXPECT_NEAR(cond_prob(m, {"a"}, "</s>"), bow_a * 24.0 / 81.0, 5e-7);
  EXPECT_NEAR(cond_prob(m, {"b"}, "</s>"), 0.75, 5e-7);
  // Context c saw one event with no discount: only the floor is left over.
  EXPECT_NEAR(cond_prob(m, {"c"}, "</s>"), 1.0 - 1e-7, 1e-12);
  for (const auto& ctx : m.contexts()) EXPECT_NEAR(context_mass(m, ctx), 1.0, 1e-9);
}

TEST(Katz, RepeatedSentenceNormalizesAndFavoursMajority) {
  std::vector<TokenList> c(10, toks("a a a"));
  const auto m = train_katz(c, 2, 5);
  const double sum = cond_prob(m, {"a"}, "a") + cond_prob(m, {"a"}, "</s>") + cond_prob(m, {"a"}, "<unk>");
  EXPECT_NEAR(sum, 1.0, 1e-6);
  EXPECT_GT(cond_prob(m, {"a"}, "a"), cond_prob(m, {"a"}, "</s>"));
}

TEST(Katz, NormalizesOverEveryContext) {
  for (int order : {1, 2, 3, 4}) {
    const auto m = train_katz(testutil::random_corpus(11 + order, 300, 25), order, 5);
    for (const auto& ctx : m.contexts()) {
      ASSERT_NEAR(context_mass(m, ctx), 1.0, 1e-6) << "order " << order;
    }
  }
}

TEST(Katz, ProbabilitiesInUnitInterval) {
  const auto m = train_katz(testutil::random_corpus(3, 200, 20), 3, 5);
  for (int n = 1; n <= 3; ++n) {
    for (const auto& [g, e] : m.table(n)) {
      if (g.back() == Vocabulary::kBosId) continue;  // start marker placeholder
      EXPECT_LE(e.log_prob, 0.0);
      EXPECT_GT(e.log_prob, -50.0);
    }
  }
}

TEST(Katz, UnseenHistoryBacksOffToUnigram) {
  const auto m = train_katz(corpus({"a b c", "b c a"}), 3, 5);
  // "c c" never occurs as a history.
  const double lp = std::log10(cond_prob(m, {"c", "c"}, "a"));
  EXPECT_TRUE(std::isfinite(lp));
}

TEST(Katz, ErrorsOnEmptyInput) {
  EXPECT_THROW(train_katz({}, 2, 5), DataError);
  EXPECT_THROW(train_katz({TokenList{}, TokenList{}}, 2, 5), DataError);
  EXPECT_THROW(train_katz(corpus({"a"}), 0, 5), ConfigError);
  EXPECT_THROW(train_katz(corpus({"a"}), 2, 0), ConfigError);
}

// ------------------------------------------------------------------ scoring

TEST(LogProb, SingleWordModel) {
  const auto m = train_katz(corpus({"a"}), 2, 5);
  const double expect = std::log10(cond_prob(m, {"<s>"}, "a")) + std::log10(cond_prob(m, {"a"}, "</s>"));
  EXPECT_NEAR(log_prob(m, toks("a")), expect, 1e-12);
  EXPECT_TRUE(std::isfinite(log_prob(m, toks("a"))));
}

TEST(LogProb, OovMatchesUnknownToken) {
  const auto m = train_katz(corpus({"a b", "b a"}), 3, 5);
  EXPECT_DOUBLE_EQ(log_prob(m, toks("a zzz b")), log_prob(m, toks("a <unk> b")));
}

TEST(LogProb, SentencesAreIndependent) {
  const auto m = train_katz(testutil::random_corpus(5, 100, 10), 3, 5);
  const auto s1 = toks("w1 w2 w3"), s2 = toks("w0 w4");
  const auto both = score_corpus(m, {s1, s2});
  EXPECT_NEAR(both.log10_sum, log_prob(m, s1) + log_prob(m, s2), 1e-12);
  EXPECT_EQ(both.positions, 7u);
}

TEST(LogProb, EmptySentenceScoresEndMarkerOnly) {
  const auto m = train_katz(corpus({"a"}), 2, 5);
  EXPECT_NEAR(log_prob(m, {}), std::log10(cond_prob(m, {"<s>"}, "</s>")), 1e-12);
}

TEST(LogProb, UntrainedModelIsAnError) {
  KatzModel m;
  EXPECT_THROW(log_prob(m, toks("a")), DataError);
}

// --------------------------------------------------------------- perplexity

namespace {

KatzModel arpa_model(const std::string& text) {
  std::istringstream in(text);
  return read_arpa(in);
}

// Unigram ARPA model with the given (word, probability) pairs.
std::string unigram_arpa(const std::vector<std::pair<std::string, double>>& probs) {
  std::ostringstream os;
  os << "\\data\\\nngram 1=" << probs.size() + 1 << "\n\n\\1-grams:\n-99\t<s>\n";
  for (const auto& [w, p] : probs) os << std::log10(p) << '\t' << w << '\n';
  os << "\n\\end\\\n";
  return os.str();
}

}  // namespace

TEST(Perplexity, NearDeterministicModelBelowTwo) {
  std::vector<TokenList> c(20, toks("a a a a"));
  const auto m = train_katz(c, 2, 5);
  EXPECT_LT(perplexity(m, c), 2.0);
}

TEST(Perplexity, UniformModelMatchesVocabularySize) {
  const std::size_t V = 50;
  const double eps = 1e-3;
  std::vector<std::pair<std::string, double>> probs{{"</s>", eps}, {"<unk>", eps}};
  for (std::size_t i = 0; i < V; ++i) probs.emplace_back("w" + std::to_string(i), (1.0 - 2 * eps) / V);
  const auto m = arpa_model(unigram_arpa(probs));
  SplitMix64 rng(9);
  std::vector<TokenList> text;
  for (int s = 0; s < 20; ++s) {
    TokenList t;
    for (int i = 0; i < 200; ++i) t.push_back("w" + std::to_string(rng.below(V)));
    text.push_back(t);
  }
  EXPECT_NEAR(perplexity(m, text), static_cast<double>(V), 0.05 * V);
}

TEST(Perplexity, EmptyCorpusIsAnError) {
  const auto m = train_katz(corpus({"a"}), 2, 5);
  EXPECT_THROW(perplexity(m, {}), DataError);
}

TEST(Perplexity, ParallelScoringIsBitIdentical) {
  const auto m = train_katz(testutil::random_corpus(21, 300, 40), 4, 5);
  const auto eval = testutil::random_corpus(22, 500, 45);
  const double a = perplexity(m, eval, 1), b = perplexity(m, eval, 4);
  EXPECT_EQ(a, b);
}

// ------------------------------------------------------------ interpolation

namespace {

std::shared_ptr<const KatzModel> shared_arpa(const std::vector<std::pair<std::string, double>>& probs) {
  return std::make_shared<const KatzModel>(arpa_model(unigram_arpa(probs)));
}

std::vector<MixtureComponent> two(std::shared_ptr<const KatzModel> a, std::shared_ptr<const KatzModel> b) {
  return {{ScorerHandle(a), ComponentRole::kTranscribed}, {ScorerHandle(b), ComponentRole::kTranslated}};
}

}  // namespace

TEST(Interpolation, DegenerateWeightsReproduceComponent) {
  auto a = std::make_shared<const KatzModel>(train_katz(testutil::random_corpus(1, 200, 20), 3, 5));
  auto b = std::make_shared<const KatzModel>(train_katz(testutil::random_corpus(2, 200, 20), 3, 5));
  const auto eval = testutil::random_corpus(3, 50, 20);
  InterpolatedModel mix(two(a, b), {1.0, 0.0});
  EXPECT_NEAR(perplexity(mix, eval), perplexity(*a, eval), 1e-9);
}

TEST(Interpolation, WeightsMustFormSimplex) {
  auto a = shared_arpa({{"</s>", 0.5}, {"<unk>", 0.5}});
  EXPECT_THROW(InterpolatedModel(two(a, a), {0.7, 0.7}), ConfigError);
  EXPECT_THROW(InterpolatedModel(two(a, a), {1.2, -0.2}), ConfigError);
  EXPECT_THROW(InterpolatedModel(two(a, a), {1.0}), ConfigError);
}

TEST(Interpolation, TunesTowardsBetterComponent) {
  auto uniform = shared_arpa({{"a", 0.45}, {"b", 0.45}, {"</s>", 0.0999}, {"<unk>", 0.0001}});
  auto peaked = shared_arpa({{"a", 0.81}, {"b", 0.09}, {"</s>", 0.0999}, {"<unk>", 0.0001}});
  std::vector<TokenList> tuning(10, toks("a a a a"));
  EmOptions o;
  o.floor = 0.0;
  const auto mix = tune_interpolation(two(uniform, peaked), tuning, o);
  EXPECT_NEAR(mix.role_weight(ComponentRole::kTranslated), 1.0, 1e-3);
}

TEST(Interpolation, IdenticalComponentsKeepUniformWeights) {
  auto a = std::make_shared<const KatzModel>(train_katz(testutil::random_corpus(4, 100, 10), 2, 5));
  EmOptions o;
  o.floor = 0.0;
  EmResult trace;
  const auto mix = tune_interpolation(two(a, a), testutil::random_corpus(5, 30, 10), o, 1, &trace);
  EXPECT_DOUBLE_EQ(mix.weights()[0], 0.5);
  EXPECT_DOUBLE_EQ(mix.weights()[1], 0.5);
}

TEST(Interpolation, FloorOutOfRangeIsConfigError) {
  auto a = shared_arpa({{"a", 0.5}, {"</s>", 0.4}, {"<unk>", 0.1}});
  EmOptions o;
  o.floor = 1.0;
  EXPECT_THROW(tune_interpolation(two(a, a), {toks("a")}, o), ConfigError);
  o.floor = -0.1;
  EXPECT_THROW(tune_interpolation(two(a, a), {toks("a")}, o), ConfigError);
}

namespace {

std::vector<std::vector<double>> random_prob_matrix(SplitMix64& rng, std::size_t T) {
  std::vector<std::vector<double>> p(T, std::vector<double>(2));
  const double bias = rng.uniform();
  for (auto& row : p) {
    row[0] = 0.01 + rng.uniform() * bias;
    row[1] = 0.01 + rng.uniform() * (1.0 - bias);
  }
  return p;
}

}  // namespace

TEST(TuneWeights, MonotoneAndMatchesGrid) {
  SplitMix64 rng(77);
  const std::vector<ComponentRole> roles{ComponentRole::kTranscribed, ComponentRole::kTranslated};
  for (int inst = 0; inst < 10; ++inst) {
    const auto probs = random_prob_matrix(rng, 200);
    EmOptions o;
    o.floor = 0.0;
    const auto r = tune_weights(probs, roles, o);
    for (std::size_t i = 1; i < r.log_likelihood.size(); ++i) {
      EXPECT_GE(r.log_likelihood[i], r.log_likelihood[i - 1] - 1e-9);
    }
    double best_w = 0.0, best_ll = -INFINITY;
    for (int g = 0; g <= 1000; ++g) {
      const double w = g / 1000.0;
      const std::vector<double> ws{1.0 - w, w};
      const double ll = mixture_log_likelihood(probs, ws);
      if (ll > best_ll) {
        best_ll = ll;
        best_w = w;
      }
    }
    EXPECT_NEAR(r.weights[1], best_w, 0.01);
  }
}

TEST(TuneWeights, FloorClampIsExactAndInactiveFloorChangesNothing) {
  SplitMix64 rng(5);
  const std::vector<ComponentRole> roles{ComponentRole::kTranscribed, ComponentRole::kTranslated};
  // Component 0 far better: the free optimum puts little weight on 1.
  std::vector<std::vector<double>> probs(100, std::vector<double>(2));
  for (auto& row : probs) {
    row[0] = 0.5 + 0.4 * rng.uniform();
    row[1] = 0.05 * rng.uniform() + 0.001;
  }
  EmOptions free;
  free.floor = 0.0;
  const auto r0 = tune_weights(probs, roles, free);
  ASSERT_LT(r0.weights[1], 0.25);
  EmOptions floored;
  floored.floor = 0.25;
  const auto r1 = tune_weights(probs, roles, floored);
  EXPECT_EQ(r1.weights[1], 0.25);
  EXPECT_TRUE(r1.clamped);
  EXPECT_NEAR(r1.weights[0] + r1.weights[1], 1.0, 1e-12);

  EmOptions low;
  low.floor = r0.weights[1] / 2.0;
  const auto r2 = tune_weights(probs, roles, low);
  EXPECT_FALSE(r2.clamped);
  EXPECT_EQ(r2.weights, r0.weights);
}

TEST(ApplyFloor, ScalesRemainingComponentsProportionally) {
  std::vector<double> w{0.6, 0.3, 0.1};
  const std::vector<ComponentRole> roles{ComponentRole::kTranscribed, ComponentRole::kTranscribed,
                                         ComponentRole::kTranslated};
  EXPECT_TRUE(apply_floor(w, roles, 0.4));
  EXPECT_EQ(w[2], 0.4);
  EXPECT_NEAR(w[0] / w[1], 2.0, 1e-12);
  EXPECT_NEAR(w[0] + w[1] + w[2], 1.0, 1e-12);
}

TEST(Interpolation, MixtureBoundPerPositionAndSentence) {
  auto a = std::make_shared<const KatzModel>(train_katz(testutil::random_corpus(31, 200, 20), 3, 5));
  auto b = std::make_shared<const KatzModel>(train_katz(testutil::random_corpus(32, 200, 25), 3, 5));
  const std::vector<double> w{0.7, 0.3};
  InterpolatedModel mix(two(a, b), w);
  for (const auto& s : testutil::random_corpus(33, 50, 25)) {
    const auto pm = mix.position_log10(s), pa = a->position_log10(s), pb = b->position_log10(s);
    for (std::size_t t = 0; t < pm.size(); ++t) {
      EXPECT_GE(pm[t], std::log10(w[0]) + pa[t] - 1e-12);
      EXPECT_GE(pm[t], std::log10(w[1]) + pb[t] - 1e-12);
    }
    // Summed over T positions the bound carries T copies of log w.
    const double T = static_cast<double>(pm.size());
    EXPECT_GE(log_prob(mix, s), T * std::log10(w[0]) + log_prob(*a, s) - 1e-9);
    EXPECT_GE(log_prob(mix, s), T * std::log10(w[1]) + log_prob(*b, s) - 1e-9);
  }
}

TEST(Interpolation, FloorZeroNeverWorseThanEitherComponent) {
  auto a = std::make_shared<const KatzModel>(train_katz(testutil::random_corpus(41, 300, 20), 3, 5));
  auto b = std::make_shared<const KatzModel>(train_katz(testutil::random_corpus(42, 30, 20), 3, 5));
  const auto tuning = testutil::random_corpus(43, 100, 20);
  EmOptions o;
  o.floor = 0.0;
  const auto mix = tune_interpolation(two(a, b), tuning, o);
  const double pm = perplexity(mix, tuning);
  EXPECT_LE(pm, perplexity(*a, tuning) + 1e-9);
  EXPECT_LE(pm, perplexity(*b, tuning) + 1e-9);
}

// --------------------------------------------------------------------- ARPA

TEST(Arpa, RoundTripPreservesScores) {
  const auto m = train_katz(corpus({"a b", "a c", "a b"}), 2, 5);
  std::stringstream ss;
  write_arpa(ss, m);
  const auto back = read_arpa(ss);
  EXPECT_EQ(back.order(), 2);
  for (const auto& s : testutil::random_corpus(8, 20, 4)) {
    TokenList t;
    for (const auto& w : s) t.push_back(w == "w0" ? "a" : w == "w1" ? "b" : w == "w2" ? "c" : "zz");
    EXPECT_NEAR(log_prob(back, t), log_prob(m, t), 1e-4);
  }
}

TEST(Arpa, RoundTripIsAFixpointOfText) {
  const auto m = train_katz(testutil::random_corpus(12, 200, 20), 3, 5);
  std::stringstream a, b;
  write_arpa(a, m);
  const auto back = read_arpa(a);
  write_arpa(b, back);
  std::stringstream a2;
  write_arpa(a2, m);
  // Re-reading and re-writing reproduces the same n-gram lines in some order.
  auto lines = [](const std::string& s) {
    std::vector<std::string> v;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) v.push_back(l);
    std::sort(v.begin(), v.end());
    return v;
  };
  EXPECT_EQ(lines(a2.str()), lines(b.str()));
}

TEST(Arpa, CountMismatchIsAnError) {
  const std::string text =
      "\\data\\\nngram 1=3\nngram 2=5\n\n\\1-grams:\n-0.3\t</s>\n-0.3\t<unk>\n-0.3\ta\t0\n\n"
      "\\2-grams:\n-0.1\ta a\n-0.1\ta </s>\n-0.1\ta <unk>\n-0.1\t<unk> a\n\n\\end\\\n";
  std::istringstream in(text);
  EXPECT_THROW(read_arpa(in), DataError);
}

TEST(Arpa, TruncatedFileIsAnError) {
  const auto m = train_katz(corpus({"a b"}), 2, 5);
  std::stringstream ss;
  write_arpa(ss, m);
  const std::string full = ss.str();
  std::istringstream cut(full.substr(0, full.size() - 8));
  EXPECT_THROW(read_arpa(cut), DataError);
}

TEST(Arpa, EmptyModelCannotBeWritten) {
  KatzModel m;
  std::stringstream ss;
  EXPECT_THROW(write_arpa(ss, m), DataError);
}

TEST(Arpa, HeaderCountsMatchTables) {
  const auto m = train_katz(testutil::random_corpus(13, 100, 15), 3, 5);
  std::stringstream ss;
  write_arpa(ss, m);
  const std::string s = ss.str();
  for (int n = 1; n <= 3; ++n) {
    EXPECT_NE(s.find("ngram " + std::to_string(n) + "=" + std::to_string(m.ngram_count(n))), std::string::npos);
  }
}
