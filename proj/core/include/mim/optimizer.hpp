#pragma once

// ADAM and the training loop: every epoch draws a fresh collocation batch,
// evaluates the full-batch loss and gradient, and takes one ADAM step.

#include "mim/losses.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mim::opt {

struct AdamConfig {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// `k` counts completed steps; the bias corrections of a step use k + 1.
struct AdamState {
  AdamConfig config;
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t k = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n, AdamConfig c = {}) : config(c), m(n, 0.0), v(n, 0.0) {}
};

class NonFiniteGradient : public std::runtime_error {
 public:
  NonFiniteGradient(std::uint64_t step, std::size_t index);
  std::uint64_t step() const noexcept { return step_; }
  std::size_t index() const noexcept { return index_; }

 private:
  std::uint64_t step_;
  std::size_t index_;
};

/// One update in place. Throws NonFiniteGradient (state and params untouched)
/// when a gradient entry is not finite.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Points per tape and worker threads for loss evaluation.
struct EvalOptions {
  ad::Index chunk = 256;
  /// 0 reads MIM_THREADS (default 1).
  int threads = 0;
};

int resolve_threads(int requested);

/// Loss and parameter gradient over a batch, split into chunks that are
/// reduced in a fixed order, so the result does not depend on the thread count.
LossGrad loss_and_gradient(const loss::Objective& objective, std::span<const double> params,
                           const loss::Batch& batch, const EvalOptions& options = {});
double loss_value(const loss::Objective& objective, std::span<const double> params,
                  const loss::Batch& batch, const EvalOptions& options = {});

struct TrainConfig {
  std::uint64_t max_epochs = 1000;
  std::uint64_t eval_interval = 100;
  std::uint64_t seed = 1;
  /// Reuse the epoch-0 batch instead of resampling.
  bool freeze_samples = false;
  AdamConfig adam;
  EvalOptions eval;
};

struct EvalRow {
  std::uint64_t epoch = 0;
  double loss = 0.0;
  double rel_l2 = 0.0;
};

struct TrainResult {
  std::vector<EvalRow> rows;
  /// Final parameters, or the last finite ones when the run diverged.
  std::vector<double> params;
  std::uint64_t epochs = 0;
  bool diverged = false;
  std::string message;
  double seconds = 0.0;
  double final_error = 0.0;
};

/// Stream id of the per-epoch sampling RNG: make_rng(seed, {kSamplingStream, epoch}).
inline constexpr std::uint64_t kSamplingStream = 1;

/// Trains from `params`. A row is recorded at epoch 0, every eval_interval
/// epochs and at the last epoch; its loss is that of the parameters before the
/// epoch's step on the epoch's batch. `on_row` sees rows as they are produced.
TrainResult train(const loss::Objective& objective, std::vector<double> params,
                  const ad::Matrix& eval_x, const ad::Matrix& eval_u, const TrainConfig& config,
                  const std::function<void(const EvalRow&)>& on_row = {});

/// Raises the glibc trim and mmap thresholds so per-chunk tapes reuse memory
/// instead of returning it to the kernel. No-op elsewhere; idempotent.
void tune_allocator();

}  // namespace mim::opt
