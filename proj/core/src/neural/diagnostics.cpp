#include <cmath>
#include <set>

#include "model_internal.hpp"

namespace mapfw {

SimilarityReport similarity_report_from_encodings(std::span<const std::vector<double>> enc) {
  const int n = static_cast<int>(enc.size());
  auto cosine = [&](int i, int j) {
    double dot = 0.0, ni = 0.0, nj = 0.0;
    for (std::size_t k = 0; k < enc[i].size(); ++k) {
      dot += enc[i][k] * enc[j][k];
      ni += enc[i][k] * enc[i][k];
      nj += enc[j][k] * enc[j][k];
    }
    return (ni > 0.0 && nj > 0.0) ? dot / std::sqrt(ni * nj) : 0.0;
  };

  SimilarityReport r;
  double adj_sum = 0.0, non_sum = 0.0;
  int adj_n = 0, non_n = 0;
  std::vector<double> sims, dists;
  std::set<long long> levels;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Coord a = layout::costmap_offset(i), b = layout::costmap_offset(j);
      const int manhattan = std::abs(a.row - b.row) + std::abs(a.col - b.col);
      const double s = cosine(i, j);
      if (manhattan == 1) {
        adj_sum += s;
        ++adj_n;
      } else {
        non_sum += s;
        ++non_n;
      }
      sims.push_back(s);
      dists.push_back(std::hypot(a.row - b.row, a.col - b.col));
      levels.insert(std::llround(s * 100.0));
    }
  }
  r.adjacent_similarity = adj_n ? adj_sum / adj_n : 0.0;
  r.nonadjacent_similarity = non_n ? non_sum / non_n : 0.0;
  r.distinct_levels = static_cast<int>(levels.size());

  const double m = static_cast<double>(sims.size());
  double ms = 0.0, md = 0.0;
  for (std::size_t k = 0; k < sims.size(); ++k) {
    ms += sims[k];
    md += dists[k];
  }
  ms /= m;
  md /= m;
  double cov = 0.0, vs = 0.0, vd = 0.0;
  for (std::size_t k = 0; k < sims.size(); ++k) {
    cov += (sims[k] - ms) * (dists[k] - md);
    vs += (sims[k] - ms) * (sims[k] - ms);
    vd += (dists[k] - md) * (dists[k] - md);
  }
  // Zero variance (e.g. a constant encoding) has no linear relation.
  r.distance_correlation = (vs > 1e-24 && vd > 0.0) ? cov / std::sqrt(vs * vd) : 0.0;
  return r;
}

SimilarityReport sre_similarity_report(const ModelParams& params) {
  const detail::ModelIndex idx = detail::build_index(params.config);
  const auto w = detail::view(params.values, idx.sre_w);
  const auto b = detail::view(params.values, idx.sre_b);
  std::vector<std::vector<double>> enc(layout::kCostMapTokens);
  for (int k = 0; k < layout::kCostMapTokens; ++k) {
    const Coord off = layout::costmap_offset(k);
    const auto p = polar(off.row, off.col);
    Eigen::RowVectorXd row = p[0] * w.row(0) + p[1] * w.row(1) + p[2] * w.row(2) + b.row(0);
    enc[k].assign(row.data(), row.data() + row.size());
  }
  return similarity_report_from_encodings(enc);
}

}  // namespace mapfw
