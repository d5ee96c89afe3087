#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pdenetpp/hybrid_model.hpp"

namespace pdenetpp {

/// ||x - y||_2 / ||y||_2 over all entries. Throws std::invalid_argument when ||y|| = 0.
double relative_l2(const Tensor& x, const Tensor& y);
Var relative_l2(const Var& prediction, const Tensor& target);

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  /// Epochs between learning-rate halvings; 0 means a third of the epochs.
  std::size_t decay_every = 0;
  double lambda = 1e-3;
  std::uint64_t seed = 0;
};

/// (trajectory, step) of the input of a one-step training pair.
struct PairRef {
  std::size_t trajectory;
  std::size_t step;
};

/// Every consecutive pair of a [N, M+1, C, n, n] dataset, trajectory-major.
std::vector<PairRef> one_step_pairs(const Tensor& data);
/// Snapshot [C,n,n] of a [N, M+1, C, n, n] dataset.
Tensor snapshot(const Tensor& data, std::size_t trajectory, std::size_t step);

struct LossValue {
  double total = 0.0;
  double pred = 0.0;
  double reg = 0.0;
  /// d total / d parameter, one entry per parameter (empty if not requested).
  std::vector<Tensor> grads;
};

/// mean_i R(model(U_i), U_{i+1}) + lambda * mean_i L_reg(U_i) over the pairs.
LossValue batch_loss(const HybridModel& model, const Tensor& data, std::span<const PairRef> pairs, double lambda,
                     bool with_gradients);

/// Adaptive-moment optimizer (beta1 0.9, beta2 0.999, eps 1e-8) with bias correction.
class Adam {
 public:
  explicit Adam(const ParamStore& store, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(ParamStore& store, const std::vector<Tensor>& grads, double lr);
  std::size_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct EpochRecord {
  std::size_t epoch;
  double loss;
  double pred_loss;
  double reg_loss;
};

/// Mini-batch training on one-step pairs of `data`. Deterministic in
/// config.seed. Throws NumericalError naming the epoch if the loss is not finite.
std::vector<EpochRecord> train(HybridModel& model, const Tensor& data, const TrainConfig& config,
                               const std::function<void(const EpochRecord&)>& on_epoch = {});

struct Rollout {
  std::vector<Tensor> states;
  /// errors[j-1] = R(U_hat_j, U_j); NaN after a failure.
  std::vector<double> errors;
  /// Per step, true from the first failing step onwards.
  std::vector<bool> failed_flags;
  std::optional<std::size_t> failed_step;
  bool failed() const { return failed_step.has_value(); }
};

/// Autoregressive rollout. With `truth` ([steps+1, C, n, n] or longer), each
/// step is compared against the reference; a step fails when its error
/// exceeds `threshold` or the state is not finite, and the rollout stops there.
Rollout rollout(const StepFn& step, const Tensor& initial, std::size_t steps, const Tensor* truth = nullptr,
                double threshold = 1.0);

struct EvalReport {
  std::vector<std::vector<double>> errors;
  std::vector<std::optional<std::size_t>> failed_step;
  double avg_l2_error = 0.0;
  double sr_percent = 100.0;
  std::size_t n_failed = 0;
};

/// Rolls out every trajectory of `data` from its first snapshot for all
/// recorded steps. Failed trajectories are excluded from avg_l2_error.
EvalReport evaluate(const StepFn& step, const Tensor& data, double threshold = 1.0);

}  // namespace pdenetpp
