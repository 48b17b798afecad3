#include <algorithm>
#include <cmath>
#include <limits>

#include "mapfw/error.hpp"
#include "model_internal.hpp"

namespace mapfw {

namespace {

// -log softmax(logits)[label], computed in log space.
double nll_from_logits(const double* logits, int n, int label) {
  const double m = *std::max_element(logits, logits + n);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) sum += std::exp(logits[j] - m);
  return m + std::log(sum) - logits[label];
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) sum += (out[j] = std::exp(logits[j] - m));
  for (double& v : out) v /= sum;
  return out;
}

double token_loss(std::span<const double> probs, int label) {
  const double p = probs[static_cast<std::size_t>(label)];
  return p > 0.0 ? -std::log(p) : std::numeric_limits<double>::infinity();
}

std::array<double, layout::kSeqLen> slow_weights(const TrainingSample& sample) {
  std::array<double, layout::kSeqLen> w{};
  for (int k = 0; k < layout::kSeqLen; ++k) {
    if (k < layout::kCostMapTokens) {
      w[k] = 0.5;
    } else if (sample.target_tokens[k] == vocab::kPad) {
      w[k] = 0.0;
    } else if (sample.real_action[k] || sample.estimated_action[k]) {
      w[k] = 1.0;
    } else {
      w[k] = 0.5;
    }
  }
  return w;
}

double fast_loss(std::span<const ActionLogits> logits, std::span<const TrainingSample> batch) {
  if (logits.size() != batch.size() || batch.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "fast_loss needs one logit vector per sample");
  }
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    total += nll_from_logits(logits[b].data(), kNumActions, static_cast<int>(batch[b].target_action));
  }
  return total / static_cast<double>(batch.size());
}

double slow_loss(std::span<const std::vector<double>> slow_logits, std::span<const TrainingSample> batch,
                 int vocab_size) {
  if (slow_logits.size() != batch.size() || batch.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "slow_loss needs one logit matrix per sample");
  }
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (slow_logits[b].size() != static_cast<std::size_t>(layout::kSeqLen) * vocab_size) {
      throw Error(ErrorCode::ShapeMismatch, "slow logits must be 256 x vocab");
    }
    const auto w = slow_weights(batch[b]);
    double weighted = 0.0, wsum = 0.0;
    for (int k = 0; k < layout::kSeqLen; ++k) {
      if (w[k] == 0.0) continue;
      wsum += w[k];
      weighted += w[k] * nll_from_logits(slow_logits[b].data() + static_cast<std::size_t>(k) * vocab_size,
                                         vocab_size, batch[b].target_tokens[k]);
    }
    if (wsum == 0.0) throw Error(ErrorCode::ZeroWeightSum, "sample has no weighted positions");
    total += weighted / wsum;
  }
  return total / static_cast<double>(batch.size());
}

LossBreakdown evaluate_loss(const ModelParams& params, std::span<const TrainingSample> batch) {
  std::vector<ActionLogits> fast(batch.size());
  std::vector<std::vector<double>> slow(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    ForwardOutput out = forward(params, batch[b].input.tokens, batch[b].input.meta);
    fast[b] = out.action_logits;
    slow[b] = std::move(out.slow_logits);
  }
  LossBreakdown l;
  l.fast = fast_loss(fast, batch);
  l.slow = slow_loss(slow, batch, params.config.vocab_size);
  l.total = total_loss(l.fast, l.slow);
  return l;
}

LossBreakdown loss_and_gradient(const ModelParams& params, std::span<const TrainingSample> batch,
                                ParamVector& grad) {
  if (batch.empty()) throw Error(ErrorCode::DatasetEmpty, "empty batch");
  const detail::ModelIndex idx = detail::build_index(params.config);
  grad.assign(idx.total, 0.0);
  const int v = params.config.vocab_size;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  detail::ForwardCache cache;
  detail::Mat d_slow(layout::kSeqLen, v);
  Eigen::RowVectorXd d_action(kNumActions);
  LossBreakdown l;
  for (const TrainingSample& sample : batch) {
    detail::forward_cached(params, idx, sample.input.tokens, sample.input.meta, cache);

    // fast head: mean cross-entropy over the batch
    {
      const double m = cache.action_logits.maxCoeff();
      Eigen::RowVectorXd p = (cache.action_logits.array() - m).exp();
      const double sum = p.sum();
      p /= sum;
      const int label = static_cast<int>(sample.target_action);
      l.fast += (m + std::log(sum) - cache.action_logits(label)) * inv_b;
      d_action = p * inv_b;
      d_action(label) -= inv_b;
    }

    // slow head: weighted mean over positions, normalized per sample
    const auto w = slow_weights(sample);
    double wsum = 0.0;
    for (double x : w) wsum += x;
    if (wsum == 0.0) throw Error(ErrorCode::ZeroWeightSum, "sample has no weighted positions");
    double weighted = 0.0;
    for (int k = 0; k < layout::kSeqLen; ++k) {
      if (w[k] == 0.0) {
        d_slow.row(k).setZero();
        continue;
      }
      const double m = cache.slow_logits.row(k).maxCoeff();
      d_slow.row(k) = (cache.slow_logits.row(k).array() - m).exp();
      const double sum = d_slow.row(k).sum();
      const int label = sample.target_tokens[k];
      weighted += w[k] * (m + std::log(sum) - cache.slow_logits(k, label));
      const double coef = 0.5 * w[k] / wsum * inv_b;
      d_slow.row(k) *= coef / sum;
      d_slow(k, label) -= coef;
    }
    l.slow += weighted / wsum * inv_b;

    detail::backward(params, idx, sample.input.tokens, cache, d_slow, d_action, grad);
  }
  l.total = total_loss(l.fast, l.slow);
  return l;
}

}  // namespace mapfw
