#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mapfw/neural.hpp"

namespace mapfw::detail {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const Mat>;
using MutMap = Eigen::Map<Mat>;

struct LayerIndex {
  TensorInfo ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
};

struct ModelIndex {
  TensorInfo tok_emb, sre_w, sre_b;
  std::vector<LayerIndex> layers;
  TensorInfo lnf_g, lnf_b, fast_w, fast_b, slow_w, slow_b;
  std::size_t total = 0;
};

ModelIndex build_index(const ModelConfig& config);

inline ConstMap view(const ParamVector& values, const TensorInfo& t) {
  return ConstMap(values.data() + t.offset, t.rows, t.cols);
}
inline MutMap view(ParamVector& values, const TensorInfo& t) {
  return MutMap(values.data() + t.offset, t.rows, t.cols);
}

struct LayerCache {
  Mat x_in;
  Mat xhat1;
  Eigen::VectorXd rstd1;
  Mat a;
  Mat q, k, v;
  std::vector<Mat> probs;
  Mat attn;
  Mat x_mid;
  Mat xhat2;
  Eigen::VectorXd rstd2;
  Mat c;
  Mat u;
  Mat gelu;
};

struct ForwardCache {
  Mat polar_in;                 // seq_len x 3, zero rows where the encoding is empty
  Eigen::VectorXd sre_mask;     // 1 where the encoding row is populated
  std::vector<LayerCache> layers;
  Mat xhatf;
  Eigen::VectorXd rstdf;
  Mat hidden;                   // final normalized hidden states
  Mat slow_logits;              // seq_len x vocab
  Eigen::RowVectorXd action_logits;
};

// Fills polar_in / sre_mask for an observation.
void sre_inputs(const SreMeta& meta, Mat& polar_in, Eigen::VectorXd& mask);

void forward_cached(const ModelParams& params, const ModelIndex& index, const TokenSeq& tokens,
                    const SreMeta& meta, ForwardCache& cache);

// Accumulates parameter gradients given output gradients.
void backward(const ModelParams& params, const ModelIndex& index, const TokenSeq& tokens,
              const ForwardCache& cache, const Mat& d_slow_logits,
              const Eigen::RowVectorXd& d_action_logits, ParamVector& grad);

}  // namespace mapfw::detail
