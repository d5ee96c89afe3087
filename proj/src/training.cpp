#include "pdenetpp/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "pdenetpp/parallel.hpp"

namespace pdenetpp {

double relative_l2(const Tensor& x, const Tensor& y) {
  if (x.shape() != y.shape()) throw ShapeError("relative_l2: " + to_string(x.shape()) + " vs " + to_string(y.shape()));
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    num += d * d;
    den += y[i] * y[i];
  }
  if (den == 0.0) throw std::invalid_argument("relative_l2: reference has zero norm");
  return std::sqrt(num) / std::sqrt(den);
}

Var relative_l2(const Var& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) {
    throw ShapeError("relative_l2: " + to_string(prediction.shape()) + " vs " + to_string(target.shape()));
  }
  double den = 0.0;
  for (double v : target.data()) den += v * v;
  if (den == 0.0) throw std::invalid_argument("relative_l2: reference has zero norm");
  Var diff = add_const(prediction, Tensor(target.shape(), [&] {
                         std::vector<double> neg(target.begin(), target.end());
                         for (auto& v : neg) v = -v;
                         return neg;
                       }()));
  return scale(l2_norm(diff), 1.0 / std::sqrt(den));
}

std::vector<PairRef> one_step_pairs(const Tensor& data) {
  if (data.rank() != 5) throw ShapeError("expected a [N, M+1, C, n, n] dataset, got " + to_string(data.shape()));
  std::vector<PairRef> pairs;
  for (std::size_t i = 0; i < data.dim(0); ++i) {
    for (std::size_t j = 0; j + 1 < data.dim(1); ++j) pairs.push_back({i, j});
  }
  return pairs;
}

Tensor snapshot(const Tensor& data, std::size_t trajectory, std::size_t step) {
  if (data.rank() != 5) throw ShapeError("expected a [N, M+1, C, n, n] dataset, got " + to_string(data.shape()));
  if (trajectory >= data.dim(0) || step >= data.dim(1)) throw std::out_of_range("snapshot index out of range");
  const std::size_t per = data.dim(2) * data.dim(3) * data.dim(4);
  const std::size_t off = (trajectory * data.dim(1) + step) * per;
  return Tensor({data.dim(2), data.dim(3), data.dim(4)},
                std::vector<double>(data.begin() + off, data.begin() + off + per));
}

LossValue batch_loss(const HybridModel& model, const Tensor& data, std::span<const PairRef> pairs, double lambda,
                     bool with_gradients) {
  if (pairs.empty()) throw std::invalid_argument("loss over an empty batch");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  const std::size_t n = pairs.size();
  const double inv = 1.0 / static_cast<double>(n);
  std::vector<double> pred(n), reg(n);
  std::vector<std::vector<Tensor>> grads(with_gradients ? n : 0);
  parallel_for(n, [&](std::size_t i) {
    Tape tape;
    Binding b(tape, model.params(), with_gradients);
    const Tensor input = snapshot(data, pairs[i].trajectory, pairs[i].step);
    const Tensor target = snapshot(data, pairs[i].trajectory, pairs[i].step + 1);
    const auto out = model.forward(b, tape.constant(input));
    const Var r = relative_l2(out.next, target);
    pred[i] = r.value().item();
    reg[i] = out.reg.value().item();
    if (with_gradients) {
      const Var loss = scale(r + lambda * out.reg, inv);
      grads[i] = b.gradients(tape.backward(loss));
    }
  });
  LossValue lv;
  for (std::size_t i = 0; i < n; ++i) {
    lv.pred += pred[i];
    lv.reg += reg[i];
  }
  lv.pred *= inv;
  lv.reg *= inv;
  lv.total = lv.pred + lambda * lv.reg;
  if (with_gradients) {
    const ParamStore& store = model.params();
    for (std::size_t p = 0; p < store.size(); ++p) {
      std::vector<double> acc(store.value(p).size(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const Tensor& g = grads[i][p];
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += g[k];
      }
      lv.grads.emplace_back(store.value(p).shape(), std::move(acc));
    }
  }
  return lv;
}

Adam::Adam(const ParamStore& store, double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    m_.emplace_back(store.value(i).size(), 0.0);
    v_.emplace_back(store.value(i).size(), 0.0);
  }
}

void Adam::step(ParamStore& store, const std::vector<Tensor>& grads, double lr) {
  if (grads.size() != m_.size() || store.size() != m_.size()) throw std::invalid_argument("Adam: gradient count mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t p = 0; p < m_.size(); ++p) {
    const Tensor& g = grads[p];
    std::vector<double> w = store.value(p).to_vector();
    if (g.size() != w.size()) throw ShapeError("Adam: gradient shape mismatch for " + store.name(p));
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
    store.set(p, Tensor(store.value(p).shape(), std::move(w)));
  }
}

std::vector<EpochRecord> train(HybridModel& model, const Tensor& data, const TrainConfig& config,
                               const std::function<void(const EpochRecord&)>& on_epoch) {
  if (config.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  std::vector<PairRef> pairs = one_step_pairs(data);
  if (pairs.empty()) throw std::invalid_argument("training needs at least one trajectory with two snapshots");
  const std::size_t decay = config.decay_every > 0 ? config.decay_every : std::max<std::size_t>(1, (config.epochs + 2) / 3);
  Adam adam(model.params());
  Rng rng(config.seed);
  std::vector<EpochRecord> history;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.learning_rate * std::pow(0.5, static_cast<double>(epoch / decay));
    std::shuffle(pairs.begin(), pairs.end(), rng);
    EpochRecord rec{epoch, 0.0, 0.0, 0.0};
    try {
      for (std::size_t start = 0; start < pairs.size(); start += config.batch_size) {
        const std::size_t end = std::min(pairs.size(), start + config.batch_size);
        const std::span<const PairRef> batch(pairs.data() + start, end - start);
        LossValue lv = batch_loss(model, data, batch, config.lambda, true);
        if (!std::isfinite(lv.total)) throw NumericalError("non-finite loss");
        const double w = static_cast<double>(batch.size()) / static_cast<double>(pairs.size());
        rec.loss += w * lv.total;
        rec.pred_loss += w * lv.pred;
        rec.reg_loss += w * lv.reg;
        adam.step(model.params(), lv.grads, lr);
      }
    } catch (const NumericalError& e) {
      throw NumericalError("training diverged in epoch " + std::to_string(epoch) + ": " + e.what());
    }
    history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return history;
}

Rollout rollout(const StepFn& step, const Tensor& initial, std::size_t steps, const Tensor* truth, double threshold) {
  Rollout r;
  r.states.push_back(initial);
  if (truth && (truth->rank() != initial.rank() + 1 || truth->dim(0) < steps + 1)) {
    throw ShapeError("rollout reference too short or of the wrong rank");
  }
  const std::size_t per = initial.size();
  auto reference = [&](std::size_t j) {
    return Tensor(initial.shape(),
                  std::vector<double>(truth->begin() + j * per, truth->begin() + (j + 1) * per));
  };
  for (std::size_t j = 1; j <= steps; ++j) {
    if (r.failed()) {
      r.errors.push_back(std::numeric_limits<double>::quiet_NaN());
      r.failed_flags.push_back(true);
      continue;
    }
    std::optional<Tensor> next;
    try {
      next = step(r.states.back());
    } catch (const NumericalError&) {
    }
    const bool finite = next && next->all_finite();
    double err = std::numeric_limits<double>::quiet_NaN();
    if (finite && truth) err = relative_l2(*next, reference(j));
    const bool fail = !finite || (truth && !(err <= threshold));
    if (finite) r.states.push_back(*next);
    if (fail) r.failed_step = j;
    r.errors.push_back(truth ? err : 0.0);
    r.failed_flags.push_back(fail);
  }
  return r;
}

EvalReport evaluate(const StepFn& step, const Tensor& data, double threshold) {
  if (data.rank() != 5) throw ShapeError("expected a [N, M+1, C, n, n] dataset, got " + to_string(data.shape()));
  const std::size_t n = data.dim(0), steps = data.dim(1) - 1;
  const std::size_t per_traj = data.size() / std::max<std::size_t>(n, 1);
  EvalReport rep;
  rep.errors.resize(n);
  rep.failed_step.resize(n);
  parallel_for(n, [&](std::size_t i) {
    Shape ts(data.shape().begin() + 1, data.shape().end());
    const Tensor truth(ts, std::vector<double>(data.begin() + i * per_traj, data.begin() + (i + 1) * per_traj));
    const Rollout r = rollout(step, snapshot(data, i, 0), steps, &truth, threshold);
    rep.errors[i] = r.errors;
    rep.failed_step[i] = r.failed_step;
  });
  // Running means, first over the steps of a trajectory and then across
  // trajectories, so duplicated trajectories leave the average bit-identical.
  double avg = 0.0;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (rep.failed_step[i]) {
      ++rep.n_failed;
      continue;
    }
    double m = 0.0;
    for (std::size_t j = 0; j < rep.errors[i].size(); ++j) m += (rep.errors[i][j] - m) / static_cast<double>(j + 1);
    avg += (m - avg) / static_cast<double>(++kept);
  }
  rep.avg_l2_error = kept > 0 && steps > 0 ? avg : std::numeric_limits<double>::quiet_NaN();
  rep.sr_percent = n > 0 ? 100.0 * static_cast<double>(n - rep.n_failed) / static_cast<double>(n) : 100.0;
  return rep;
}

}  // namespace pdenetpp
