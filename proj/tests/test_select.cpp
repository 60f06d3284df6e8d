#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "test_util.hpp"

using namespace mtaug;

namespace {

std::vector<Vector> rand_vecs(std::uint64_t seed, std::size_t n, std::size_t dim, double shift) {
  SplitMix64 r(seed);
  std::vector<Vector> out(n, Vector(dim));
  for (auto& v : out)
    for (auto& x : v) x = r.uniform() + shift;
  return out;
}

std::vector<SentenceEmbedding> as_embeddings(const std::vector<Vector>& vs) {
  std::vector<SentenceEmbedding> out;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "s%04zu", i);
    out.push_back({id, vs[i], EmbeddingMethod::kExternal, false});
  }
  return out;
}

}  // namespace

TEST(Centroids, SpecExamples) {
  const auto c = compute_centroids({{0, 0}, {2, 2}}, {{5, 1}});
  EXPECT_EQ(c.c_in, (Vector{1, 1}));
  EXPECT_EQ(c.c_out, (Vector{5, 1}));
  EXPECT_EQ(c.dim, 2u);
  EXPECT_THROW(compute_centroids({}, {{1}}), DataError);
  EXPECT_THROW(compute_centroids({{1, 2}}, {{1}}), DataError);
}

TEST(Centroids, MatchesReverseOrderSummation) {
  const auto vs = rand_vecs(3, 100, 6, -0.5);
  const auto c = compute_centroids(vs, vs);
  for (std::size_t d = 0; d < 6; ++d) {
    long double s = 0;
    for (std::size_t i = vs.size(); i-- > 0;) s += vs[i][d];
    EXPECT_NEAR(c.c_in[d], static_cast<double>(s / 100.0L), 1e-12);
  }
}

TEST(Delta, SpecExamples) {
  CentroidPair c{{0, 0}, {3, 4}, 2};
  EXPECT_DOUBLE_EQ(delta_score({0, 0}, c), -5.0);
  EXPECT_DOUBLE_EQ(delta_score({3, 4}, c), 5.0);
  CentroidPair sym{{-1, 0}, {1, 0}, 2};
  EXPECT_DOUBLE_EQ(delta_score({0, 7}, sym), 0.0);
  EXPECT_THROW(delta_score({1, 2, 3}, c), DataError);
}

TEST(Select, SpecExamples) {
  std::vector<SelectionScore> s = {{"a", -2}, {"b", 0}, {"c", 3}, {"d", 5}};
  EXPECT_EQ(select_top_fraction(s, 0.25), (std::vector<std::string>{"a"}));
  EXPECT_EQ(select_top_fraction(s, 1.0).size(), 4u);
  EXPECT_THROW(select_top_fraction(s, 0.0), ConfigError);
  EXPECT_THROW(select_top_fraction(s, 1.1), ConfigError);
  EXPECT_THROW(select_top_fraction({}, 0.5), DataError);
}

TEST(Select, TiesBrokenById) {
  std::vector<SelectionScore> s = {{"z", 1}, {"b", 1}, {"m", 1}, {"a", 2}};
  EXPECT_EQ(select_top_fraction(s, 0.5), (std::vector<std::string>{"b", "m"}));
}

TEST(Select, MatchesFullSortOracle) {
  SplitMix64 r(99);
  std::vector<SelectionScore> s;
  for (int i = 0; i < 1000; ++i) s.push_back({"id" + std::to_string(i), std::floor(r.uniform() * 200.0) / 10.0});
  auto sorted = s;
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return std::tie(a.delta, a.sentence_id) < std::tie(b.delta, b.sentence_id);
  });
  std::vector<std::string> expect;
  for (int i = 0; i < 250; ++i) expect.push_back(sorted[i].sentence_id);
  EXPECT_EQ(select_top_fraction(s, 0.25), expect);
}

TEST(Select, SizeIsNearestRank) {
  std::vector<SelectionScore> s;
  for (int i = 0; i < 37; ++i) s.push_back({std::to_string(i), double(i % 5)});
  for (double f : {0.01, 0.1, 0.33, 0.5, 0.99, 1.0}) {
    EXPECT_EQ(select_top_fraction(s, f).size(), static_cast<std::size_t>(std::ceil(f * 37 - 1e-9)));
  }
}

TEST(DeltaProperties, AntisymmetryTranslationScaling) {
  const auto in = rand_vecs(1, 20, 4, 0.3), out = rand_vecs(2, 30, 4, -0.2);
  const auto cand = rand_vecs(3, 50, 4, 0.0);
  const auto c = compute_centroids(in, out);
  const auto swapped = compute_centroids(out, in);
  const auto base = score_candidates(as_embeddings(cand), c);
  const auto anti = score_candidates(as_embeddings(cand), swapped);
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_EQ(anti[i].delta, -base[i].delta);

  auto shift = [](std::vector<Vector> vs, double k) {
    for (auto& v : vs)
      for (std::size_t d = 0; d < v.size(); ++d) v[d] += k * double(d + 1);
    return vs;
  };
  const auto ct = compute_centroids(shift(in, 3.7), shift(out, 3.7));
  const auto moved = score_candidates(as_embeddings(shift(cand, 3.7)), ct);
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(moved[i].delta, base[i].delta, 1e-9);

  auto scale = [](std::vector<Vector> vs, double k) {
    for (auto& v : vs)
      for (auto& x : v) x *= k;
    return vs;
  };
  const auto cs = compute_centroids(scale(in, 2.5), scale(out, 2.5));
  const auto scaled = score_candidates(as_embeddings(scale(cand, 2.5)), cs);
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(scaled[i].delta, 2.5 * base[i].delta, 1e-9);
  for (double f : {0.1, 0.25, 0.6}) {
    EXPECT_EQ(select_top_fraction(base, f), select_top_fraction(scaled, f));
  }
}

TEST(ScoreCandidates, ParallelMatchesSerial) {
  const auto cand = as_embeddings(rand_vecs(9, 500, 8, 0.0));
  const auto c = compute_centroids(rand_vecs(10, 10, 8, 0.5), rand_vecs(11, 10, 8, -0.5));
  const auto a = score_candidates(cand, c, 1), b = score_candidates(cand, c, 6);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].sentence_id, b[i].sentence_id);
    EXPECT_EQ(a[i].delta, b[i].delta);
  }
}
