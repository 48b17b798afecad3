#include <cmath>
#include <numbers>

#include "mapfw/error.hpp"
#include "mapfw/rng.hpp"
#include "model_internal.hpp"

namespace mapfw {

using detail::ConstMap;
using detail::Mat;
using detail::MutMap;

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.d_model = 32;
  c.n_layers = 2;
  c.n_heads = 4;
  c.ffn_mult = 2;
  c.learning_rate = 1e-3;
  c.batch_size = 16;
  return c;
}

void ModelConfig::validate() const {
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || ffn_mult <= 0) {
    throw Error(ErrorCode::ShapeMismatch, "model dimensions must be positive");
  }
  if (d_model % n_heads != 0) throw Error(ErrorCode::ShapeMismatch, "d_model must be divisible by n_heads");
  if (vocab_size != vocab::kSize) throw Error(ErrorCode::ShapeMismatch, "vocab_size must be 60");
  if (seq_len != layout::kSeqLen) throw Error(ErrorCode::ShapeMismatch, "seq_len must be 256");
  if (batch_size <= 0) throw Error(ErrorCode::BadConfig, "batch_size must be positive");
  if (!(learning_rate >= 0.0)) throw Error(ErrorCode::BadConfig, "learning_rate must be non-negative");
}

bool ModelConfig::same_architecture(const ModelConfig& o) const {
  return d_model == o.d_model && n_layers == o.n_layers && n_heads == o.n_heads &&
         ffn_mult == o.ffn_mult && vocab_size == o.vocab_size && seq_len == o.seq_len &&
         sre_enabled == o.sre_enabled;
}

namespace detail {

ModelIndex build_index(const ModelConfig& c) {
  ModelIndex idx;
  std::size_t offset = 0;
  auto add = [&](std::string name, int rows, int cols) {
    TensorInfo t{std::move(name), offset, rows, cols};
    offset += t.size();
    return t;
  };
  const int d = c.d_model, f = c.ffn_dim(), v = c.vocab_size;
  idx.tok_emb = add("tok_emb", v, d);
  idx.sre_w = add("sre_w", 3, d);
  idx.sre_b = add("sre_b", 1, d);
  for (int l = 0; l < c.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerIndex L;
    L.ln1_g = add(p + "ln1_g", 1, d);
    L.ln1_b = add(p + "ln1_b", 1, d);
    L.wq = add(p + "wq", d, d);
    L.bq = add(p + "bq", 1, d);
    L.wk = add(p + "wk", d, d);
    L.bk = add(p + "bk", 1, d);
    L.wv = add(p + "wv", d, d);
    L.bv = add(p + "bv", 1, d);
    L.wo = add(p + "wo", d, d);
    L.bo = add(p + "bo", 1, d);
    L.ln2_g = add(p + "ln2_g", 1, d);
    L.ln2_b = add(p + "ln2_b", 1, d);
    L.w1 = add(p + "w1", d, f);
    L.b1 = add(p + "b1", 1, f);
    L.w2 = add(p + "w2", f, d);
    L.b2 = add(p + "b2", 1, d);
    idx.layers.push_back(std::move(L));
  }
  idx.lnf_g = add("lnf_g", 1, d);
  idx.lnf_b = add("lnf_b", 1, d);
  idx.fast_w = add("fast_w", d, kNumActions);
  idx.fast_b = add("fast_b", 1, kNumActions);
  idx.slow_w = add("slow_w", d, v);
  idx.slow_b = add("slow_b", 1, v);
  idx.total = offset;
  return idx;
}

}  // namespace detail

std::vector<TensorInfo> param_layout(const ModelConfig& config) {
  const detail::ModelIndex idx = detail::build_index(config);
  std::vector<TensorInfo> out{idx.tok_emb, idx.sre_w, idx.sre_b};
  for (const auto& L : idx.layers) {
    for (const TensorInfo* t : {&L.ln1_g, &L.ln1_b, &L.wq, &L.bq, &L.wk, &L.bk, &L.wv, &L.bv, &L.wo,
                                &L.bo, &L.ln2_g, &L.ln2_b, &L.w1, &L.b1, &L.w2, &L.b2}) {
      out.push_back(*t);
    }
  }
  for (const TensorInfo* t : {&idx.lnf_g, &idx.lnf_b, &idx.fast_w, &idx.fast_b, &idx.slow_w, &idx.slow_b}) {
    out.push_back(*t);
  }
  return out;
}

std::size_t param_count(const ModelConfig& config) { return detail::build_index(config).total; }

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  const detail::ModelIndex idx = detail::build_index(config);
  ModelParams p{config, ParamVector(idx.total, 0.0), 0};
  Rng rng(hash_seed({seed, 0x696e6974ULL}));
  auto normal_fill = [&](const TensorInfo& t, double stddev) {
    for (std::size_t i = 0; i < t.size(); ++i) p.values[t.offset + i] = stddev * rng.normal();
  };
  auto const_fill = [&](const TensorInfo& t, double value) {
    std::fill_n(p.values.begin() + static_cast<std::ptrdiff_t>(t.offset), t.size(), value);
  };
  const double d = config.d_model;
  const double residual_scale = 1.0 / std::sqrt(2.0 * config.n_layers);
  normal_fill(idx.tok_emb, 1.0);
  normal_fill(idx.sre_w, 0.2);
  for (const auto& L : idx.layers) {
    const_fill(L.ln1_g, 1.0);
    const_fill(L.ln2_g, 1.0);
    normal_fill(L.wq, 1.0 / std::sqrt(d));
    normal_fill(L.wk, 1.0 / std::sqrt(d));
    normal_fill(L.wv, 1.0 / std::sqrt(d));
    normal_fill(L.wo, residual_scale / std::sqrt(d));
    normal_fill(L.w1, 1.0 / std::sqrt(d));
    normal_fill(L.w2, residual_scale / std::sqrt(static_cast<double>(config.ffn_dim())));
  }
  const_fill(idx.lnf_g, 1.0);
  normal_fill(idx.fast_w, 1.0 / std::sqrt(d));
  normal_fill(idx.slow_w, 1.0 / std::sqrt(d));
  return p;
}

bool ModelParams::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::array<double, 3> polar(int x, int y) {
  if (x == 0 && y == 0) return {0.0, 0.0, 1.0};
  const double r = std::hypot(static_cast<double>(x), static_cast<double>(y));
  // sin/cos of atan2(y, x), computed directly from the ratios.
  return {r, y / r, x / r};
}

namespace detail {

void sre_inputs(const SreMeta& meta, Mat& polar_in, Eigen::VectorXd& mask) {
  polar_in.setZero(layout::kSeqLen, 3);
  mask.setZero(layout::kSeqLen);
  auto put = [&](int row, Coord c) {
    const auto p = polar(c.row, c.col);
    polar_in.row(row) << p[0], p[1], p[2];
    mask(row) = 1.0;
  };
  for (int k = 0; k < layout::kCostMapTokens; ++k) put(k, layout::costmap_offset(k));
  for (int s = 0; s < layout::kAgentSlots; ++s) {
    const SlotGeometry& g = meta.slots[s];
    if (!g.occupied) continue;
    put(layout::slot_pos(s, 0), g.rel_pos);
    put(layout::slot_pos(s, 1), g.rel_pos);
    put(layout::slot_pos(s, 2), g.rel_goal);
    put(layout::slot_pos(s, 3), g.rel_goal);
    for (int o = 4; o < layout::kSegmentLen; ++o) put(layout::slot_pos(s, o), g.displacement());
  }
}

}  // namespace detail

std::vector<double> sre_encode(const SreMeta& meta, const ModelParams& params) {
  const detail::ModelIndex idx = detail::build_index(params.config);
  if (params.values.size() != idx.total) throw Error(ErrorCode::ShapeMismatch, "parameter vector size");
  Mat polar_in;
  Eigen::VectorXd mask;
  detail::sre_inputs(meta, polar_in, mask);
  Mat enc = polar_in * detail::view(params.values, idx.sre_w);
  enc += mask * detail::view(params.values, idx.sre_b);
  return {enc.data(), enc.data() + enc.size()};
}

namespace detail {

namespace {

using Arr = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kLayerNormEps = 1e-5;
const double kGeluC = std::sqrt(2.0 / std::numbers::pi);

void layernorm_forward(const Mat& x, const ConstMap& g, const ConstMap& b, Mat& xhat,
                       Eigen::VectorXd& rstd, Mat& y) {
  const auto n = x.rows();
  xhat.resize(n, x.cols());
  rstd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x.row(i).mean();
    xhat.row(i) = x.row(i).array() - mu;
    const double var = xhat.row(i).squaredNorm() / static_cast<double>(x.cols());
    rstd(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) *= rstd(i);
  }
  y = (xhat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
}

void layernorm_backward(const Mat& dy, const Mat& xhat, const Eigen::VectorXd& rstd, const ConstMap& g,
                        MutMap dg, MutMap db, Mat& dx) {
  dg.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  db.row(0) += dy.colwise().sum();
  const Mat dxhat = dy.array().rowwise() * g.row(0).array();
  dx.resize(dy.rows(), dy.cols());
  const double inv_d = 1.0 / static_cast<double>(dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double m1 = dxhat.row(i).sum() * inv_d;
    const double m2 = dxhat.row(i).dot(xhat.row(i)) * inv_d;
    dx.row(i) = rstd(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
  }
}

void softmax_rows(Mat& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double m = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - m).exp();
    s.row(i) /= s.row(i).sum();
  }
}

}  // namespace

void forward_cached(const ModelParams& params, const ModelIndex& idx, const TokenSeq& tokens,
                    const SreMeta& meta, ForwardCache& cache) {
  const ModelConfig& cfg = params.config;
  const auto& P = params.values;
  if (P.size() != idx.total) throw Error(ErrorCode::ShapeMismatch, "parameter vector size");
  const int n = layout::kSeqLen;
  const int d = cfg.d_model;
  const int dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const ConstMap emb = view(P, idx.tok_emb);
  Mat x(n, d);
  for (int k = 0; k < n; ++k) {
    if (tokens[k] >= cfg.vocab_size) throw Error(ErrorCode::ShapeMismatch, "token id out of range");
    x.row(k) = emb.row(tokens[k]);
  }
  if (cfg.sre_enabled) {
    sre_inputs(meta, cache.polar_in, cache.sre_mask);
    x.noalias() += cache.polar_in * view(P, idx.sre_w);
    x.noalias() += cache.sre_mask * view(P, idx.sre_b);
  }

  cache.layers.resize(cfg.n_layers);
  for (int l = 0; l < cfg.n_layers; ++l) {
    const LayerIndex& L = idx.layers[l];
    LayerCache& lc = cache.layers[l];
    lc.x_in = x;
    layernorm_forward(lc.x_in, view(P, L.ln1_g), view(P, L.ln1_b), lc.xhat1, lc.rstd1, lc.a);
    lc.q.noalias() = lc.a * view(P, L.wq);
    lc.q.rowwise() += view(P, L.bq).row(0);
    lc.k.noalias() = lc.a * view(P, L.wk);
    lc.k.rowwise() += view(P, L.bk).row(0);
    lc.v.noalias() = lc.a * view(P, L.wv);
    lc.v.rowwise() += view(P, L.bv).row(0);
    lc.probs.resize(cfg.n_heads);
    lc.attn.resize(n, d);
    for (int h = 0; h < cfg.n_heads; ++h) {
      Mat& s = lc.probs[h];
      s.noalias() = lc.q.middleCols(h * dh, dh) * lc.k.middleCols(h * dh, dh).transpose();
      s *= scale;
      softmax_rows(s);
      lc.attn.middleCols(h * dh, dh).noalias() = s * lc.v.middleCols(h * dh, dh);
    }
    lc.x_mid = lc.x_in;
    lc.x_mid.noalias() += lc.attn * view(P, L.wo);
    lc.x_mid.rowwise() += view(P, L.bo).row(0);

    layernorm_forward(lc.x_mid, view(P, L.ln2_g), view(P, L.ln2_b), lc.xhat2, lc.rstd2, lc.c);
    lc.u.noalias() = lc.c * view(P, L.w1);
    lc.u.rowwise() += view(P, L.b1).row(0);
    const auto u = lc.u.array();
    lc.gelu = (0.5 * u * (1.0 + (kGeluC * (u + 0.044715 * u.cube())).tanh())).matrix();
    x = lc.x_mid;
    x.noalias() += lc.gelu * view(P, L.w2);
    x.rowwise() += view(P, L.b2).row(0);
  }

  layernorm_forward(x, view(P, idx.lnf_g), view(P, idx.lnf_b), cache.xhatf, cache.rstdf, cache.hidden);
  cache.slow_logits.noalias() = cache.hidden * view(P, idx.slow_w);
  cache.slow_logits.rowwise() += view(P, idx.slow_b).row(0);
  cache.action_logits = cache.hidden.row(n - 1) * view(P, idx.fast_w) + view(P, idx.fast_b).row(0);
  if (!cache.slow_logits.allFinite() || !cache.action_logits.allFinite()) {
    throw Error(ErrorCode::NonFiniteActivation, "non-finite logits");
  }
}

void backward(const ModelParams& params, const ModelIndex& idx, const TokenSeq& tokens,
              const ForwardCache& cache, const Mat& d_slow, const Eigen::RowVectorXd& d_action,
              ParamVector& grad) {
  const ModelConfig& cfg = params.config;
  const auto& P = params.values;
  const int n = layout::kSeqLen;
  const int dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  view(grad, idx.slow_w).noalias() += cache.hidden.transpose() * d_slow;
  view(grad, idx.slow_b).row(0) += d_slow.colwise().sum();
  Mat dh_final = d_slow * view(P, idx.slow_w).transpose();
  view(grad, idx.fast_w).noalias() += cache.hidden.row(n - 1).transpose() * d_action;
  view(grad, idx.fast_b).row(0) += d_action;
  dh_final.row(n - 1) += d_action * view(P, idx.fast_w).transpose();

  Mat dx;
  layernorm_backward(dh_final, cache.xhatf, cache.rstdf, view(P, idx.lnf_g), view(grad, idx.lnf_g),
                     view(grad, idx.lnf_b), dx);

  Mat tmp, d_gelu, du, dc, d_attn, dq, dk, dv, dp, ds, da;
  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const LayerIndex& L = idx.layers[l];
    const LayerCache& lc = cache.layers[l];

    // feed-forward block
    view(grad, L.w2).noalias() += lc.gelu.transpose() * dx;
    view(grad, L.b2).row(0) += dx.colwise().sum();
    d_gelu.noalias() = dx * view(P, L.w2).transpose();
    {
      const auto u = lc.u.array();
      const auto inner = kGeluC * (u + 0.044715 * u.cube());
      const Arr t = inner.tanh();
      const Arr deriv =
          0.5 * (1.0 + t) + 0.5 * u * (1.0 - t.square()) * kGeluC * (1.0 + 3.0 * 0.044715 * u.square());
      du = (d_gelu.array() * deriv).matrix();
    }
    view(grad, L.w1).noalias() += lc.c.transpose() * du;
    view(grad, L.b1).row(0) += du.colwise().sum();
    dc.noalias() = du * view(P, L.w1).transpose();
    layernorm_backward(dc, lc.xhat2, lc.rstd2, view(P, L.ln2_g), view(grad, L.ln2_g), view(grad, L.ln2_b), tmp);
    dx += tmp;  // now d x_mid

    // attention block
    view(grad, L.wo).noalias() += lc.attn.transpose() * dx;
    view(grad, L.bo).row(0) += dx.colwise().sum();
    d_attn.noalias() = dx * view(P, L.wo).transpose();
    dq.resize(n, cfg.d_model);
    dk.resize(n, cfg.d_model);
    dv.resize(n, cfg.d_model);
    for (int h = 0; h < cfg.n_heads; ++h) {
      const Mat& prob = lc.probs[h];
      const auto d_out = d_attn.middleCols(h * dh, dh);
      dp.noalias() = d_out * lc.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh).noalias() = prob.transpose() * d_out;
      const Eigen::VectorXd row_dot = (dp.array() * prob.array()).rowwise().sum();
      ds = (prob.array() * (dp.colwise() - row_dot).array()).matrix();
      ds *= scale;
      dq.middleCols(h * dh, dh).noalias() = ds * lc.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh).noalias() = ds.transpose() * lc.q.middleCols(h * dh, dh);
    }
    view(grad, L.wq).noalias() += lc.a.transpose() * dq;
    view(grad, L.bq).row(0) += dq.colwise().sum();
    view(grad, L.wk).noalias() += lc.a.transpose() * dk;
    view(grad, L.bk).row(0) += dk.colwise().sum();
    view(grad, L.wv).noalias() += lc.a.transpose() * dv;
    view(grad, L.bv).row(0) += dv.colwise().sum();
    da.noalias() = dq * view(P, L.wq).transpose();
    da.noalias() += dk * view(P, L.wk).transpose();
    da.noalias() += dv * view(P, L.wv).transpose();
    layernorm_backward(da, lc.xhat1, lc.rstd1, view(P, L.ln1_g), view(grad, L.ln1_g), view(grad, L.ln1_b), tmp);
    dx += tmp;  // now d x_in
  }

  MutMap d_emb = view(grad, idx.tok_emb);
  for (int k = 0; k < n; ++k) d_emb.row(tokens[k]) += dx.row(k);
  if (cfg.sre_enabled) {
    view(grad, idx.sre_w).noalias() += cache.polar_in.transpose() * dx;
    view(grad, idx.sre_b).row(0) += cache.sre_mask.transpose() * dx;
  }
}

}  // namespace detail

TokenSeq ForwardOutput::predicted_tokens() const {
  TokenSeq out{};
  const std::size_t v = slow_logits.size() / layout::kSeqLen;
  for (int k = 0; k < layout::kSeqLen; ++k) {
    const double* row = slow_logits.data() + static_cast<std::size_t>(k) * v;
    std::size_t best = 0;
    for (std::size_t j = 1; j < v; ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[k] = static_cast<TokenId>(best);
  }
  return out;
}

ForwardOutput forward(const ModelParams& params, const TokenSeq& tokens, const SreMeta& meta) {
  const detail::ModelIndex idx = detail::build_index(params.config);
  detail::ForwardCache cache;
  detail::forward_cached(params, idx, tokens, meta, cache);
  ForwardOutput out;
  for (int a = 0; a < kNumActions; ++a) out.action_logits[a] = cache.action_logits(a);
  out.slow_logits.assign(cache.slow_logits.data(), cache.slow_logits.data() + cache.slow_logits.size());
  return out;
}

}  // namespace mapfw
