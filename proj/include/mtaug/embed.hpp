#ifndef MTAUG_EMBED_HPP
#define MTAUG_EMBED_HPP

// Unsupervised sentence embeddings: plain averaging of word vectors, SIF
// (frequency-weighted average with the first singular direction removed)
// and import of vectors computed by an external encoder.

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "mtaug/common.hpp"
#include "mtaug/corpus.hpp"

namespace mtaug {

using Vector = std::vector<double>;

enum class EmbeddingMethod { kAverage, kSif, kExternal };

inline const char* method_name(EmbeddingMethod m) {
  switch (m) {
    case EmbeddingMethod::kAverage: return "average";
    case EmbeddingMethod::kSif: return "sif";
    case EmbeddingMethod::kExternal: return "external";
  }
  return "?";
}

inline EmbeddingMethod parse_method(const std::string& s) {
  if (s == "average") return EmbeddingMethod::kAverage;
  if (s == "sif") return EmbeddingMethod::kSif;
  if (s == "external") return EmbeddingMethod::kExternal;
  throw ConfigError("unknown embedding method '" + s + "' (average, sif, external)");
}

struct SentenceEmbedding {
  std::string sentence_id;
  Vector vector;
  EmbeddingMethod method = EmbeddingMethod::kAverage;
  bool degenerate = false;  // no in-table tokens; vector is zero
};

struct SifParams {
  double a = 1e-3;
  int max_power_iterations = 100;
  double tol = 1e-9;
};

inline double dot(const Vector& x, const Vector& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(const Vector& x) { return std::sqrt(dot(x, x)); }

inline void l2_normalize(Vector& v) {
  const double n = norm2(v);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
}

namespace detail {

template <typename WeightFn>
Vector weighted_mean(const TokenList& tokens, const WordVectorTable& table, WeightFn&& weight,
                     bool& degenerate) {
  Vector v(table.dim(), 0.0);
  std::size_t used = 0;
  for (const auto& t : tokens) {
    const auto* wv = table.find(t);
    if (!wv) continue;
    const double w = weight(t);
    for (std::size_t d = 0; d < v.size(); ++d) v[d] += w * (*wv)[d];
    ++used;
  }
  degenerate = used == 0;
  if (used > 0) {
    for (double& x : v) x /= static_cast<double>(used);
  }
  return v;
}

}  // namespace detail

/// Mean of the in-table word vectors. Out-of-table tokens are skipped; a
/// sentence with none left yields the zero vector with `degenerate` set.
inline SentenceEmbedding embed_average(const TokenList& tokens, const WordVectorTable& table,
                                       std::string sentence_id = {}) {
  SentenceEmbedding e;
  e.sentence_id = std::move(sentence_id);
  e.method = EmbeddingMethod::kAverage;
  e.vector = detail::weighted_mean(tokens, table, [](const std::string&) { return 1.0; },
                                   e.degenerate);
  if (e.degenerate) log::warn("sentence '" + e.sentence_id + "' has no in-table tokens; zero embedding");
  return e;
}

/// Dominant eigenvector of the uncentered second-moment matrix sum v v^T,
/// by power iteration from the normalized sum of the inputs. The sign is
/// fixed so that the first nonzero coordinate is positive.
inline Vector first_principal_direction(const std::vector<Vector>& vectors, const SifParams& params = {}) {
  if (vectors.empty()) throw DataError("principal direction needs at least one vector");
  const std::size_t dim = vectors.front().size();
  std::vector<double> moment(dim * dim, 0.0);
  Vector sum(dim, 0.0);
  bool any_nonzero = false;
  for (const auto& v : vectors) {
    if (v.size() != dim) throw DataError("principal direction: inconsistent vector dimensions");
    for (std::size_t i = 0; i < dim; ++i) {
      sum[i] += v[i];
      if (v[i] != 0.0) any_nonzero = true;
      for (std::size_t j = 0; j < dim; ++j) moment[i * dim + j] += v[i] * v[j];
    }
  }
  if (!any_nonzero) throw DataError("principal direction of all-zero vectors is undefined");

  Vector x = sum;
  if (norm2(x) == 0.0) {
    // Inputs cancel out; start from the longest input instead.
    const Vector* best = &vectors.front();
    for (const auto& v : vectors) {
      if (norm2(v) > norm2(*best)) best = &v;
    }
    x = *best;
  }
  l2_normalize(x);

  Vector y(dim);
  for (int it = 0; it < params.max_power_iterations; ++it) {
    for (std::size_t i = 0; i < dim; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < dim; ++j) s += moment[i * dim + j] * x[j];
      y[i] = s;
    }
    const double n = norm2(y);
    if (n == 0.0) break;  // start vector lies in the null space
    for (double& v : y) v /= n;
    double change = 0.0;
    for (std::size_t i = 0; i < dim; ++i) change += (y[i] - x[i]) * (y[i] - x[i]);
    x.swap(y);
    if (std::sqrt(change) < params.tol) break;
  }
  for (double v : x) {
    if (v != 0.0) {
      if (v < 0.0) {
        for (double& c : x) c = -c;
      }
      break;
    }
  }
  return x;
}

/// Removes the component along unit vector `u`.
inline Vector remove_projection(const Vector& v, const Vector& u) {
  const double p = dot(u, v);
  Vector out(v);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= p * u[i];
  return out;
}

/// SIF embeddings for a batch. Each sentence is the mean over in-table
/// tokens of a / (a + relfreq(w)) * vec(w); the batch's first principal
/// direction is then projected out of every sentence.
inline std::vector<SentenceEmbedding> embed_sif(const std::vector<TokenList>& sentences,
                                                const WordVectorTable& table,
                                                const FrequencyTable& freq,
                                                const SifParams& params = {},
                                                const std::vector<std::string>& ids = {},
                                                unsigned jobs = 1, Vector* removed = nullptr) {
  if (!(params.a > 0.0)) throw ConfigError("SIF parameter a must be positive");
  if (sentences.size() < 2) throw DataError("SIF needs at least two sentences");
  if (!ids.empty() && ids.size() != sentences.size()) {
    throw InvariantError("SIF: id list length differs from sentence count");
  }
  std::vector<SentenceEmbedding> out(sentences.size());
  parallel_for(sentences.size(), jobs, [&](std::size_t i) {
    auto& e = out[i];
    e.sentence_id = ids.empty() ? std::to_string(i) : ids[i];
    e.method = EmbeddingMethod::kSif;
    e.vector = detail::weighted_mean(
        sentences[i], table,
        [&](const std::string& w) { return params.a / (params.a + freq.relfreq(w)); },
        e.degenerate);
  });
  std::vector<Vector> raw;
  raw.reserve(out.size());
  bool any = false;
  for (const auto& e : out) {
    raw.push_back(e.vector);
    if (!e.degenerate) any = true;
  }
  if (!any) throw DataError("SIF: no sentence has an in-table token");
  for (const auto& e : out) {
    if (e.degenerate) log::warn("sentence '" + e.sentence_id + "' has no in-table tokens; zero embedding");
  }
  bool all_zero = true;
  for (const auto& v : raw) {
    for (double x : v) all_zero = all_zero && x == 0.0;
  }
  if (all_zero) {
    if (removed) removed->assign(table.dim(), 0.0);
    return out;
  }
  const Vector u = first_principal_direction(raw, params);
  parallel_for(out.size(), jobs, [&](std::size_t i) { out[i].vector = remove_projection(out[i].vector, u); });
  if (removed) *removed = u;
  return out;
}

/// Sentence vectors from an external encoder: header "count dim", then
/// "sentence_id v1 ... v_dim" rows. Row order is preserved.
inline std::vector<SentenceEmbedding> read_external_embeddings(std::istream& in,
                                                               const std::string& what = "embeddings") {
  const auto hdr = detail::parse_vector_header(in, what);
  std::vector<SentenceEmbedding> out;
  out.reserve(hdr.count);
  detail::read_vector_rows(in, hdr, what, [&](const std::string& id, Vector v, std::size_t) {
    out.push_back({id, std::move(v), EmbeddingMethod::kExternal, false});
  });
  return out;
}

inline std::vector<SentenceEmbedding> import_external_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file " + path);
  return read_external_embeddings(in, path);
}

/// Writes embeddings in the same layout the importer reads, at full
/// double precision.
inline void write_embeddings(std::ostream& out, const std::vector<SentenceEmbedding>& embs) {
  const std::size_t dim = embs.empty() ? 0 : embs.front().vector.size();
  out << embs.size() << ' ' << (dim == 0 ? 1 : dim) << '\n';
  for (const auto& e : embs) {
    out << e.sentence_id;
    for (double x : e.vector) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), " %.17g", x == 0.0 ? 0.0 : x);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace mtaug

#endif  // MTAUG_EMBED_HPP
