#ifndef MTAUG_SELECT_HPP
#define MTAUG_SELECT_HPP

// In-domain data selection by relative distance to the in-domain and
// out-of-domain centroids:
//   delta(v) = ||v - c_in||_2 - ||v - c_out||_2,   lower = more in-domain.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "mtaug/common.hpp"
#include "mtaug/embed.hpp"

namespace mtaug {

struct CentroidPair {
  Vector c_in;
  Vector c_out;
  std::size_t dim = 0;
};

struct SelectionScore {
  std::string sentence_id;
  double delta = 0.0;
};

inline Vector centroid(const std::vector<Vector>& vecs, const char* which) {
  if (vecs.empty()) throw DataError(std::string(which) + " set is empty");
  const std::size_t dim = vecs.front().size();
  Vector c(dim, 0.0);
  for (const auto& v : vecs) {
    if (v.size() != dim) throw DataError(std::string(which) + " set has mixed dimensions");
    for (std::size_t i = 0; i < dim; ++i) c[i] += v[i];
  }
  for (double& x : c) x /= static_cast<double>(vecs.size());
  return c;
}

inline CentroidPair compute_centroids(const std::vector<Vector>& in_vecs,
                                      const std::vector<Vector>& out_vecs) {
  CentroidPair p;
  p.c_in = centroid(in_vecs, "in-domain");
  p.c_out = centroid(out_vecs, "out-of-domain");
  if (p.c_in.size() != p.c_out.size()) {
    throw DataError("in-domain dimension " + std::to_string(p.c_in.size()) +
                    " differs from out-of-domain dimension " + std::to_string(p.c_out.size()));
  }
  p.dim = p.c_in.size();
  return p;
}

inline double euclidean(const Vector& x, const Vector& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s);
}

inline double delta_score(const Vector& v, const CentroidPair& c) {
  if (v.size() != c.dim) {
    throw DataError("vector dimension " + std::to_string(v.size()) + " differs from centroid dimension " +
                    std::to_string(c.dim));
  }
  return euclidean(v, c.c_in) - euclidean(v, c.c_out);
}

inline std::vector<SelectionScore> score_candidates(const std::vector<SentenceEmbedding>& candidates,
                                                    const CentroidPair& c, unsigned jobs = 1) {
  std::vector<SelectionScore> out(candidates.size());
  parallel_for(candidates.size(), jobs, [&](std::size_t i) {
    out[i] = {candidates[i].sentence_id, delta_score(candidates[i].vector, c)};
  });
  return out;
}

/// Ids of the ceil(fraction * n) lowest-delta sentences; equal deltas are
/// ordered by id.
inline std::vector<std::string> select_top_fraction(std::vector<SelectionScore> scores, double fraction) {
  if (scores.empty()) throw DataError("no selection scores");
  const std::size_t keep = nearest_rank_count(fraction, scores.size());
  auto less = [](const SelectionScore& a, const SelectionScore& b) {
    if (a.delta != b.delta) return a.delta < b.delta;
    return a.sentence_id < b.sentence_id;
  };
  std::partial_sort(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(keep), scores.end(), less);
  std::vector<std::string> ids;
  ids.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) ids.push_back(scores[i].sentence_id);
  return ids;
}

inline void write_scores_tsv(std::ostream& out, const std::vector<SelectionScore>& scores) {
  for (const auto& s : scores) out << s.sentence_id << '\t' << fixed(s.delta, 9) << '\n';
}

inline void write_id_list(std::ostream& out, const std::vector<std::string>& ids) {
  for (const auto& id : ids) out << id << '\n';
}

}  // namespace mtaug

#endif  // MTAUG_SELECT_HPP
