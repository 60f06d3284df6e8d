#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <sstream>

#include "test_util.hpp"

using namespace mtaug;

namespace {

WordVectorTable table_of(std::initializer_list<std::pair<const char*, Vector>> rows) {
  WordVectorTable t(rows.begin()->second.size());
  for (const auto& [w, v] : rows) t.insert(w, v);
  return t;
}

// Top eigenvector of sum v v^T from Eigen's self-adjoint solver, sign fixed
// like the code under test.
Eigen::VectorXd eigen_top(const std::vector<Vector>& vs) {
  const auto dim = static_cast<Eigen::Index>(vs.front().size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& v : vs) {
    Eigen::Map<const Eigen::VectorXd> e(v.data(), dim);
    m += e * e.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd u = es.eigenvectors().col(dim - 1);
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (u[i] != 0.0) {
      if (u[i] < 0) u = -u;
      break;
    }
  }
  return u;
}

std::vector<Vector> random_vectors(std::uint64_t seed, std::size_t n, std::size_t dim) {
  SplitMix64 r(seed);
  std::vector<Vector> out(n, Vector(dim));
  for (auto& v : out) {
    for (std::size_t d = 0; d < dim; ++d) v[d] = r.uniform() * 2.0 - 1.0 + (d == 0 ? 1.5 : 0.0);
  }
  return out;
}

struct Quiet {
  Quiet() { log::level() = log::Level::kQuiet; }
  ~Quiet() { log::level() = log::Level::kWarn; }
};

}  // namespace

TEST(EmbedAverage, SpecExamples) {
  const auto t = table_of({{"x", {1, 0}}, {"y", {0, 1}}});
  EXPECT_EQ(embed_average({"x"}, t).vector, (Vector{1, 0}));
  EXPECT_EQ(embed_average({"x", "y"}, t).vector, (Vector{0.5, 0.5}));
  Quiet q;
  const auto z = embed_average({"p", "q"}, t);
  EXPECT_TRUE(z.degenerate);
  EXPECT_EQ(z.vector, (Vector{0, 0}));
  EXPECT_TRUE(embed_average({}, t).degenerate);
}

TEST(EmbedAverage, SkipsOovAndIgnoresOrder) {
  const auto t = table_of({{"x", {1, 2, 3}}, {"y", {-1, 0, 5}}});
  const auto a = embed_average({"x", "oov", "y"}, t).vector;
  const auto b = embed_average({"y", "x"}, t).vector;
  EXPECT_EQ(a, b);
}

TEST(EmbedSif, WeightArithmetic) {
  // Two sentences along orthogonal axes so projection removal keeps the
  // weighted mean visible along the minor axis.
  const double a = 0.25;
  auto freq = build_frequency_table(testutil::corpus({"x y y y"}), 0.0);
  ASSERT_DOUBLE_EQ(freq.relfreq("x"), a);
  const auto t = table_of({{"x", {0, 1}}, {"y", {4, 0}}});
  SifParams p;
  p.a = a;
  Vector u;
  const auto out = embed_sif({{"x"}, {"y"}}, t, freq, p, {}, 1, &u);
  EXPECT_NEAR(u[0], 1.0, 1e-9);
  EXPECT_NEAR(out[0].vector[1], 0.5, 1e-9);  // a / (a + a)
  EXPECT_NEAR(out[1].vector[0], 0.0, 1e-9);
}

TEST(EmbedSif, CollinearInputsVanish) {
  const auto t = table_of({{"x", {1, 0}}, {"y", {3, 0}}});
  const auto freq = build_frequency_table(testutil::corpus({"x y"}), 0.0);
  const auto out = embed_sif({{"x"}, {"y"}, {"x", "y"}}, t, freq);
  for (const auto& e : out) {
    EXPECT_NEAR(e.vector[0], 0.0, 1e-12);
    EXPECT_NEAR(e.vector[1], 0.0, 1e-12);
  }
}

TEST(EmbedSif, RandomBatchMatchesEigenOracle) {
  // 50 sentences over 5-D word vectors.
  SplitMix64 r(11);
  WordVectorTable t(5);
  for (int w = 0; w < 30; ++w) {
    Vector v(5);
    for (auto& x : v) x = r.uniform() * 2.0 - 1.0;
    v[2] += 1.0;
    t.insert("w" + std::to_string(w), v);
  }
  const auto sents = testutil::random_corpus(5, 50, 30);
  const auto freq = build_frequency_table(sents, 0.0);
  SifParams p;
  p.a = 0.05;
  Vector u;
  const auto out = embed_sif(sents, t, freq, p, {}, 1, &u);

  std::vector<Vector> raw;
  for (const auto& s : sents) {
    Vector v(5, 0.0);
    std::size_t n = 0;
    for (const auto& w : s) {
      const double wt = p.a / (p.a + freq.relfreq(w));
      for (int d = 0; d < 5; ++d) v[d] += wt * (*t.find(w))[d];
      ++n;
    }
    for (auto& x : v) x /= static_cast<double>(n);
    raw.push_back(v);
  }
  const auto oracle = eigen_top(raw);
  for (int d = 0; d < 5; ++d) EXPECT_NEAR(u[d], oracle[d], 1e-6);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_LE(std::abs(dot(u, out[i].vector)), 1e-6 * std::max(1e-12, norm2(out[i].vector)) + 1e-15);
    const double pr = dot(u, raw[i]);
    for (int d = 0; d < 5; ++d) EXPECT_NEAR(out[i].vector[d], raw[i][d] - pr * u[d], 1e-9);
  }
}

TEST(EmbedSif, ScalesLinearlyWithWordVectors) {
  const auto sents = testutil::random_corpus(8, 20, 12);
  WordVectorTable t(3);
  SplitMix64 r(2);
  for (int w = 0; w < 12; ++w) t.insert("w" + std::to_string(w), {r.uniform(), r.uniform() - 0.5, 1.0});
  const auto freq = build_frequency_table(sents, 0.0);
  const auto a = embed_sif(sents, t, freq);
  const auto b = embed_sif(sents, t.scaled(3.0), freq);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int d = 0; d < 3; ++d) EXPECT_NEAR(b[i].vector[d], 3.0 * a[i].vector[d], 1e-9);
  }
  const auto avg = embed_average(sents[0], t).vector;
  const auto avg3 = embed_average(sents[0], t.scaled(3.0)).vector;
  for (int d = 0; d < 3; ++d) EXPECT_NEAR(avg3[d], 3.0 * avg[d], 1e-12);
}

TEST(EmbedSif, Errors) {
  const auto t = table_of({{"x", {1, 0}}});
  const auto freq = build_frequency_table(testutil::corpus({"x"}), 0.0);
  EXPECT_THROW(embed_sif({{"x"}}, t, freq), DataError);
  Quiet q;
  EXPECT_THROW(embed_sif({{"p"}, {"q"}}, t, freq), DataError);
  SifParams bad;
  bad.a = 0.0;
  EXPECT_THROW(embed_sif({{"x"}, {"x"}}, t, freq, bad), ConfigError);
}

TEST(EmbedSif, ParallelMatchesSerial) {
  const auto sents = testutil::random_corpus(21, 200, 25);
  WordVectorTable t(4);
  SplitMix64 r(4);
  for (int w = 0; w < 25; ++w) t.insert("w" + std::to_string(w), {r.uniform(), r.uniform(), r.uniform(), 1.0});
  const auto freq = build_frequency_table(sents, 0.0);
  const auto a = embed_sif(sents, t, freq, {}, {}, 1);
  const auto b = embed_sif(sents, t, freq, {}, {}, 4);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].vector, b[i].vector);
}

TEST(PrincipalDirection, SpecExamples) {
  const auto u1 = first_principal_direction({{1, 0}, {-1, 0}, {2, 0}});
  EXPECT_NEAR(u1[0], 1.0, 1e-12);
  EXPECT_NEAR(u1[1], 0.0, 1e-12);
  const auto u2 = first_principal_direction({{3, 0}, {0, 1}});
  EXPECT_NEAR(u2[0], 1.0, 1e-9);
  EXPECT_NEAR(u2[1], 0.0, 1e-9);
  EXPECT_THROW(first_principal_direction({{0, 0}, {0, 0}}), DataError);
}

TEST(PrincipalDirection, RandomMatrixMatchesEigen) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto vs = random_vectors(seed, 10, 4);
    const auto u = first_principal_direction(vs);
    const auto o = eigen_top(vs);
    EXPECT_NEAR(norm2(u), 1.0, 1e-9);
    double c = 0.0;
    for (int d = 0; d < 4; ++d) c += u[d] * o[d];
    EXPECT_LT(std::acos(std::min(1.0, std::abs(c))), 1e-4) << "seed " << seed;
  }
}

TEST(ExternalEmbeddings, FormatAndErrors) {
  std::istringstream one("1 4\ns1 1 2 3 4\n");
  const auto e = read_external_embeddings(one);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0].vector.size(), 4u);
  EXPECT_EQ(e[0].method, EmbeddingMethod::kExternal);

  std::istringstream bad("1 4\ns1 1 2 3\n");
  try {
    read_external_embeddings(bad);
    FAIL();
  } catch (const DataError& err) {
    EXPECT_NE(std::string(err.what()).find("line 2"), std::string::npos);
  }

  std::istringstream three("3 1\nz 1\na 2\nm 3\n");
  const auto t = read_external_embeddings(three);
  EXPECT_EQ(t[0].sentence_id, "z");
  EXPECT_EQ(t[1].sentence_id, "a");
  EXPECT_EQ(t[2].sentence_id, "m");
}

TEST(ExternalEmbeddings, WriteReadRoundTrip) {
  std::vector<SentenceEmbedding> es = {{"a", {0.1, -2.5e-7}, EmbeddingMethod::kSif, false},
                                       {"b", {1.0 / 3.0, 7.0}, EmbeddingMethod::kSif, false}};
  std::stringstream ss;
  write_embeddings(ss, es);
  const auto back = read_external_embeddings(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].vector, es[0].vector);
  EXPECT_EQ(back[1].vector, es[1].vector);
}

TEST(EmbeddingMethod, Parse) {
  EXPECT_EQ(parse_method("sif"), EmbeddingMethod::kSif);
  EXPECT_STREQ(method_name(EmbeddingMethod::kAverage), "average");
  EXPECT_THROW(parse_method("laser"), ConfigError);
}
