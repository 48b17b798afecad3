#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "mapfw/tokenizer.hpp"

namespace mapfw {

struct ModelConfig {
  int d_model = 64;
  int n_layers = 4;
  int n_heads = 4;
  int ffn_mult = 4;
  int vocab_size = vocab::kSize;
  int seq_len = layout::kSeqLen;
  bool sre_enabled = true;

  double learning_rate = 3e-4;
  int batch_size = 32;
  int warmup_steps = 100;
  std::uint64_t seed = 0;

  // Smaller preset used by the smoke pipelines.
  static ModelConfig toy();

  int head_dim() const { return d_model / n_heads; }
  int ffn_dim() const { return d_model * ffn_mult; }
  void validate() const;

  // Same architecture (shapes and SRE flag); optimizer settings are ignored.
  bool same_architecture(const ModelConfig& other) const;
};

struct TensorInfo {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

std::vector<TensorInfo> param_layout(const ModelConfig& config);
std::size_t param_count(const ModelConfig& config);

// Fixed 64-byte alignment keeps Eigen's vectorized kernels on the same code
// path for every allocation, so results are bit-reproducible.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using ParamVector = std::vector<double, AlignedAllocator<double>>;

// All weights live in one flat vector so the optimizer, gradient checks and
// serialization can treat the model as a single parameter vector.
struct ModelParams {
  ModelConfig config;
  ParamVector values;
  std::int64_t trained_steps = 0;

  static ModelParams init(const ModelConfig& config, std::uint64_t seed);
  bool all_finite() const;
};

using ActionLogits = std::array<double, kNumActions>;

struct ForwardOutput {
  ActionLogits action_logits{};
  std::vector<double> slow_logits;  // seq_len x vocab_size, row-major

  TokenSeq predicted_tokens() const;
};

// [r, sin(theta), cos(theta)] with theta = atan2(y, x); the origin maps to [0, 0, 1].
// Observation coordinates pass x = row offset, y = column offset.
std::array<double, 3> polar(int x, int y);

// seq_len x d_model row-major. Pad slots and the five tail positions are zero rows.
std::vector<double> sre_encode(const SreMeta& meta, const ModelParams& params);

ForwardOutput forward(const ModelParams& params, const TokenSeq& tokens, const SreMeta& meta);

std::vector<double> softmax(std::span<const double> logits);

double token_loss(std::span<const double> probs, int label);

// Per-position slow-head weights for one sample.
std::array<double, layout::kSeqLen> slow_weights(const TrainingSample& sample);

double fast_loss(std::span<const ActionLogits> logits, std::span<const TrainingSample> batch);
double slow_loss(std::span<const std::vector<double>> slow_logits, std::span<const TrainingSample> batch,
                 int vocab_size = vocab::kSize);
constexpr double total_loss(double fast, double slow) { return fast + 0.5 * slow; }

struct LossBreakdown {
  double fast = 0.0;
  double slow = 0.0;
  double total = 0.0;
};

LossBreakdown evaluate_loss(const ModelParams& params, std::span<const TrainingSample> batch);

// Analytic gradient of total_loss over the batch; grad is resized to param_count.
LossBreakdown loss_and_gradient(const ModelParams& params, std::span<const TrainingSample> batch,
                                ParamVector& grad);

struct TrainLogRow {
  std::int64_t step = 0;
  double fast_loss = 0.0;
  double slow_loss = 0.0;
  double total_loss = 0.0;
  double wall_ms = 0.0;
};

struct TrainOptions {
  int steps = 1000;
  std::function<void(const TrainLogRow&)> on_step;
};

struct TrainResult {
  ModelParams params;
  std::vector<TrainLogRow> log;
};

// Mini-batch Adam on total_loss. Passing `resume` continues from its weights
// and step counter; otherwise the model is initialized from config.seed.
TrainResult train(std::span<const TrainingSample> dataset, const ModelConfig& config,
                  const TrainOptions& options, const ModelParams* resume = nullptr);

void write_train_log_csv(const std::string& path, std::span<const TrainLogRow> log);

struct GradCheckResult {
  double max_relative_error = 0.0;
  int projections = 0;
  int parameters_touched = 0;
};

// Compares directional derivatives of the analytic gradient against central
// differences along random directions over sampled parameter subsets.
GradCheckResult grad_check(const ModelParams& params, std::span<const TrainingSample> batch,
                           double epsilon, std::uint64_t seed = 1, int projections = 16,
                           int params_per_projection = 256);

// Same, with a caller-supplied gradient.
GradCheckResult grad_check_against(const ModelParams& params, std::span<const TrainingSample> batch,
                                   std::span<const double> analytic, double epsilon,
                                   std::uint64_t seed = 1, int projections = 16,
                                   int params_per_projection = 256);

struct SimilarityReport {
  double adjacent_similarity = 0.0;
  double nonadjacent_similarity = 0.0;
  double distance_correlation = 0.0;
  int distinct_levels = 0;
};

// Statistics over the 121 cost-map SRE encodings.
SimilarityReport sre_similarity_report(const ModelParams& params);
SimilarityReport similarity_report_from_encodings(std::span<const std::vector<double>> encodings);

inline constexpr std::uint32_t kParamsVersion = 1;

void save_params(const ModelParams& params, const std::string& path);
std::string encode_params(const ModelParams& params);
ModelParams load_params(const std::string& path);
ModelParams decode_params(std::string_view bytes);
// Throws ShapeMismatch when the stored architecture differs from `expected`.
ModelParams load_params(const std::string& path, const ModelConfig& expected);

}  // namespace mapfw
