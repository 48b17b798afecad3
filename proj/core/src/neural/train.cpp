#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "mapfw/error.hpp"
#include "mapfw/rng.hpp"
#include "model_internal.hpp"

namespace mapfw {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.fast) && std::isfinite(l.slow) && std::isfinite(l.total);
}

}  // namespace

TrainResult train(std::span<const TrainingSample> dataset, const ModelConfig& config,
                  const TrainOptions& options, const ModelParams* resume) {
  if (dataset.empty()) throw Error(ErrorCode::DatasetEmpty, "no training samples");
  config.validate();
  TrainResult result;
  if (resume != nullptr) {
    if (!resume->config.same_architecture(config)) {
      throw Error(ErrorCode::ShapeMismatch, "resume params have a different architecture");
    }
    result.params = *resume;
    result.params.config = config;
  } else {
    result.params = ModelParams::init(config, config.seed);
  }
  ModelParams& params = result.params;
  const std::size_t n_params = params.values.size();
  ParamVector m(n_params, 0.0), v(n_params, 0.0), grad;

  Rng rng(hash_seed({config.seed, static_cast<std::uint64_t>(params.trained_steps), 0x64617461ULL}));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  std::vector<TrainingSample> batch;
  batch.reserve(batch_size);
  const auto t0 = std::chrono::steady_clock::now();

  for (int local = 1; local <= options.steps; ++local) {
    batch.clear();
    while (batch.size() < std::min(batch_size, dataset.size())) {
      if (cursor == order.size()) {
        rng.shuffle(std::span<std::size_t>(order));
        cursor = 0;
      }
      batch.push_back(dataset[order[cursor++]]);
    }

    const LossBreakdown loss = loss_and_gradient(params, batch, grad);
    if (!finite(loss)) {
      throw Error(ErrorCode::DivergenceDetected, "non-finite loss at step " + std::to_string(params.trained_steps + 1));
    }

    const std::int64_t global = params.trained_steps + 1;
    const double warm = config.warmup_steps > 0
                            ? std::min(1.0, static_cast<double>(global) / config.warmup_steps)
                            : 1.0;
    const double lr = config.learning_rate * warm;
    const double c1 = 1.0 - std::pow(kBeta1, local);
    const double c2 = 1.0 - std::pow(kBeta2, local);
    for (std::size_t i = 0; i < n_params; ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      params.values[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kAdamEps);
    }
    params.trained_steps = global;

    TrainLogRow row{global, loss.fast, loss.slow, loss.total,
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count()};
    result.log.push_back(row);
    if (options.on_step) options.on_step(row);
  }
  if (!params.all_finite()) throw Error(ErrorCode::DivergenceDetected, "non-finite parameters");
  return result;
}

void write_train_log_csv(const std::string& path, std::span<const TrainLogRow> log) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  out << "step,fast_loss,slow_loss,total_loss,wall_ms\n" << std::setprecision(10);
  for (const auto& r : log) {
    out << r.step << ',' << r.fast_loss << ',' << r.slow_loss << ',' << r.total_loss << ','
        << std::fixed << std::setprecision(1) << r.wall_ms << std::defaultfloat << std::setprecision(10) << '\n';
  }
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path);
}

GradCheckResult grad_check_against(const ModelParams& params, std::span<const TrainingSample> batch,
                                   std::span<const double> analytic, double epsilon, std::uint64_t seed,
                                   int projections, int params_per_projection) {
  const std::size_t n = params.values.size();
  if (analytic.size() != n) throw Error(ErrorCode::ShapeMismatch, "gradient size");
  Rng rng(seed);
  std::vector<std::size_t> indices(n);
  std::iota(indices.begin(), indices.end(), 0);
  std::vector<char> touched(n, 0);

  GradCheckResult result;
  ModelParams probe = params;
  for (int p = 0; p < projections; ++p) {
    const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(params_per_projection), n);
    for (std::size_t i = 0; i < m; ++i) std::swap(indices[i], indices[i + rng.below(n - i)]);
    std::vector<double> dir(m);
    double norm = 0.0;
    for (double& d : dir) norm += (d = rng.normal()) * d;
    norm = std::sqrt(norm);
    double directional = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      dir[i] /= norm;
      directional += analytic[indices[i]] * dir[i];
      touched[indices[i]] = 1;
    }
    auto shifted_loss = [&](double sign) {
      for (std::size_t i = 0; i < m; ++i) probe.values[indices[i]] = params.values[indices[i]] + sign * epsilon * dir[i];
      const double value = evaluate_loss(probe, batch).total;
      for (std::size_t i = 0; i < m; ++i) probe.values[indices[i]] = params.values[indices[i]];
      return value;
    };
    const double numeric = (shifted_loss(1.0) - shifted_loss(-1.0)) / (2.0 * epsilon);
    const double scale = std::max(std::abs(directional), std::abs(numeric));
    const double err = scale > 1e-12 ? std::abs(directional - numeric) / scale : std::abs(directional - numeric);
    result.max_relative_error = std::max(result.max_relative_error, err);
    ++result.projections;
  }
  result.parameters_touched = static_cast<int>(std::count(touched.begin(), touched.end(), 1));
  return result;
}

GradCheckResult grad_check(const ModelParams& params, std::span<const TrainingSample> batch, double epsilon,
                           std::uint64_t seed, int projections, int params_per_projection) {
  ParamVector grad;
  loss_and_gradient(params, batch, grad);
  return grad_check_against(params, batch, grad, epsilon, seed, projections, params_per_projection);
}

}  // namespace mapfw
