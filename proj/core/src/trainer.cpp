#include "gatets/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace gatets {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
  // base_lr == 0 is allowed: it freezes the parameters exactly.
  if (base_lr < 0.0 || beta1 <= 0.0 || beta2 <= 0.0 || eps <= 0.0) {
    throw ConfigError("train config: rates must be positive");
  }
  if (weight_decay < 0.0) {
    throw ConfigError("train config: weight_decay must be >= 0");
  }
  if (warmup_fraction < 0.0 || warmup_fraction >= 1.0) {
    throw ConfigError("train config: warmup_fraction must lie in [0,1)");
  }
}

namespace {

constexpr uint64_t kShuffleStream = 0x53484653ULL;

// Batch of (context, target) windows as dense tensors.
void fill_batch(const WindowDataset& data, const std::vector<size_t>& order,
                size_t begin, size_t end, Tensor* x, Tensor* y) {
  const int64_t b = static_cast<int64_t>(end - begin);
  *x = Tensor::zeros({b, data.context});
  *y = Tensor::zeros({b, data.horizon});
  for (size_t i = begin; i < end; ++i) {
    const size_t w = order[i];
    std::copy(data.context_ptr(w), data.context_ptr(w) + data.context,
              x->data() + (i - begin) * data.context);
    std::copy(data.target_ptr(w), data.target_ptr(w) + data.horizon,
              y->data() + (i - begin) * data.horizon);
  }
}

AdamWHyper hyper_from(const TrainConfig& config) {
  AdamWHyper h;
  h.beta1 = config.beta1;
  h.beta2 = config.beta2;
  h.eps = config.eps;
  h.weight_decay = config.weight_decay;
  h.base_lr = config.base_lr;
  return h;
}

}  // namespace

Trainer::Trainer(GateTS& model, TrainConfig config,
                 const WindowDataset& train_data, const WindowDataset& val_data)
    : model_(model),
      config_(config),
      train_data_(train_data),
      val_data_(val_data),
      optimizer_(model.parameters(), hyper_from(config)) {
  config_.validate();
  if (train_data_.size() == 0) throw DataError("train: empty training set");
}

ScheduleState Trainer::schedule() const {
  const int64_t steps_per_epoch =
      (static_cast<int64_t>(train_data_.size()) + config_.batch_size - 1) /
      config_.batch_size;
  ScheduleState s;
  s.total_steps = config_.epochs * steps_per_epoch;
  s.warmup_steps = static_cast<int64_t>(
      std::floor(config_.warmup_fraction * static_cast<double>(s.total_steps)));
  s.base_lr = config_.base_lr;
  return s;
}

Checkpoint Trainer::snapshot() const {
  Checkpoint ckpt;
  ckpt.model_config = model_.config();
  ckpt.train_config = config_;
  ckpt.step = step_;
  ckpt.epoch = epoch_;
  const ScheduleState sched = schedule();
  ckpt.total_steps = sched.total_steps;
  ckpt.warmup_steps = sched.warmup_steps;
  ckpt.best_val = best_epoch_ >= 0
                      ? best_val_
                      : std::numeric_limits<double>::quiet_NaN();
  for (NamedParam& np : model_.named_parameters()) {
    Tensor copy = Tensor::from_data(np.tensor.shape(), np.tensor.values());
    ckpt.params.push_back({np.name, copy});
  }
  const OptimizerState& state = optimizer_.state();
  ckpt.adam_m = state.first_moment;
  ckpt.adam_v = state.second_moment;
  return ckpt;
}

const Checkpoint& Trainer::best() const {
  if (best_epoch_ < 0) throw ConfigError("trainer: no best checkpoint yet");
  return best_;
}

void Trainer::restore(const Checkpoint& ckpt) {
  step_ = ckpt.step;
  epoch_ = ckpt.epoch;
  if (std::isfinite(ckpt.best_val)) best_val_ = ckpt.best_val;
  OptimizerState& state = optimizer_.state();
  if (ckpt.adam_m.size() != state.first_moment.size()) {
    throw ShapeError("restore: optimizer state has " +
                     std::to_string(ckpt.adam_m.size()) + " buffers, model has " +
                     std::to_string(state.first_moment.size()));
  }
  for (size_t i = 0; i < ckpt.adam_m.size(); ++i) {
    if (ckpt.adam_m[i].size() != state.first_moment[i].size()) {
      throw ShapeError("restore: moment buffer " + std::to_string(i) +
                       " size mismatch");
    }
  }
  state.first_moment = ckpt.adam_m;
  state.second_moment = ckpt.adam_v;
  state.step = ckpt.step;
}

double Trainer::validation_loss() const {
  if (val_data_.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  NoGradGuard guard;
  double total = 0.0;
  int64_t count = 0;
  std::vector<size_t> order(val_data_.size());
  std::iota(order.begin(), order.end(), size_t{0});
  for (size_t begin = 0; begin < order.size();
       begin += static_cast<size_t>(config_.batch_size)) {
    const size_t end =
        std::min(order.size(), begin + static_cast<size_t>(config_.batch_size));
    Tensor x, y;
    fill_batch(val_data_, order, begin, end, &x, &y);
    RngCtx ctx{false, config_.seed, 0, 0};
    ModelForward out = model_.forward(x, ctx);
    for (int64_t i = 0; i < out.forecast.size(); ++i) {
      const double diff = out.forecast.data()[i] - y.data()[i];
      total += diff * diff;
    }
    count += out.forecast.size();
  }
  return total / static_cast<double>(count);
}

TrainResult Trainer::run(const ProgressFn& progress,
                         int64_t stop_after_epoch) {
  TrainResult result;
  const ScheduleState sched = schedule();
  const size_t n = train_data_.size();
  const int64_t last_epoch = stop_after_epoch < 0
                                 ? config_.epochs
                                 : std::min(stop_after_epoch, config_.epochs);

  for (; epoch_ < last_epoch; ++epoch_) {
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::mt19937_64 shuffle_rng(
        stream_bits(config_.seed, kShuffleStream, static_cast<uint64_t>(epoch_)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    int64_t epoch_batches = 0;
    double last_lr = 0.0;
    UtilizationCounter util(model_.config().n_experts);
    bool diverged = false;

    for (size_t begin = 0; begin < n;
         begin += static_cast<size_t>(config_.batch_size)) {
      const size_t end =
          std::min(n, begin + static_cast<size_t>(config_.batch_size));
      Tensor x, y;
      fill_batch(train_data_, order, begin, end, &x, &y);
      RngCtx ctx{true, config_.seed, static_cast<uint64_t>(step_), 0};
      ModelForward out = model_.forward(x, ctx);
      Tensor loss = mse_loss(out.forecast, y);
      const double loss_value = loss.item();
      if (!std::isfinite(initial_loss_)) initial_loss_ = loss_value;
      if (!std::isfinite(loss_value) ||
          loss_value > 1e6 * std::max(initial_loss_, 1e-300)) {
        diverged = true;
        break;
      }
      util.add(out.routing);
      optimizer_.zero_grad();
      loss.backward();
      last_lr = cosine_lr(step_, sched);
      optimizer_.step(last_lr);
      ++step_;
      epoch_loss += loss_value;
      ++epoch_batches;
      if (progress) progress(epoch_, step_, last_lr, loss_value);
    }

    if (diverged) {
      result.diverged = true;
      break;
    }

    EpochStats stats;
    stats.epoch = epoch_;
    stats.train_loss = epoch_loss / static_cast<double>(epoch_batches);
    stats.val_loss = validation_loss();
    stats.lr = last_lr;
    if (!util.empty()) stats.expert_utilization = util.finish().frequencies;
    result.history.push_back(stats);

    const double val = std::isnan(stats.val_loss) ? stats.train_loss
                                                  : stats.val_loss;
    if (val < best_val_) {
      best_val_ = val;
      best_epoch_ = epoch_;
      best_ = snapshot();
      // snapshot() runs before epoch_ increments; record the completed epoch
      best_.epoch = epoch_ + 1;
    }
    if (config_.patience > 0 && best_epoch_ >= 0 &&
        epoch_ - best_epoch_ >= config_.patience) {
      ++epoch_;
      break;
    }
  }

  result.best_val_loss = best_val_;
  result.best_epoch = best_epoch_;
  result.steps = step_;
  return result;
}

namespace {

struct WindowMetrics {
  std::vector<double> mae, rmse, smape, mase;
};

EvalReport finish_report(const WindowDataset& data, WindowMetrics& wm,
                         int64_t zero_targets, int64_t total_targets,
                         const UtilizationCounter* util) {
  EvalReport report;
  report.split = to_string(data.split);
  report.window_count = static_cast<int64_t>(wm.mae.size());
  auto summarize = [](const std::vector<double>& v) {
    if (v.size() == 1) return MetricSummary{v[0], 0.0};
    const ConfidenceInterval ci = confidence_interval(v);
    return MetricSummary{ci.mean, ci.half_width};
  };
  report.mae = summarize(wm.mae);
  report.rmse = summarize(wm.rmse);
  report.smape = summarize(wm.smape);
  report.mase = summarize(wm.mase);
  report.target_zero_share =
      static_cast<double>(zero_targets) / static_cast<double>(total_targets);
  if (report.target_zero_share > kSmapeZeroShareThreshold) {
    report.smape_suppressed = true;
    report.smape_note = "suppressed (zero-heavy: " +
                        std::to_string(100.0 * report.target_zero_share) +
                        "% exact zeros in targets)";
  }
  if (util && !util->empty()) report.utilization = util->finish();
  return report;
}

}  // namespace

EvalReport evaluate(const GateTS& model, const WindowDataset& data,
                    int64_t batch_size) {
  if (model.config().context != data.context ||
      model.config().horizon != data.horizon) {
    throw ConfigError(
        "evaluate: model expects T=" + std::to_string(model.config().context) +
        " H=" + std::to_string(model.config().horizon) + ", dataset has T=" +
        std::to_string(data.context) + " H=" + std::to_string(data.horizon));
  }
  if (data.size() == 0) throw DataError("evaluate: empty dataset");
  NoGradGuard guard;
  WindowMetrics wm;
  UtilizationCounter util(model.config().n_experts);
  int64_t zero_targets = 0;
  const int64_t horizon = data.horizon;
  std::vector<double> y_nat(horizon), yhat_nat(horizon);
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});
  for (size_t begin = 0; begin < order.size();
       begin += static_cast<size_t>(batch_size)) {
    const size_t end =
        std::min(order.size(), begin + static_cast<size_t>(batch_size));
    Tensor x, y;
    fill_batch(data, order, begin, end, &x, &y);
    RngCtx ctx{false, 0, 0, 0};
    ModelForward out = model.forward(x, ctx);
    util.add(out.routing);
    for (size_t i = begin; i < end; ++i) {
      const double* natural = data.natural->data() + data.starts[i] + data.context;
      const double* pred = out.forecast.data() + (i - begin) * horizon;
      for (int64_t h = 0; h < horizon; ++h) {
        y_nat[h] = natural[h];
        yhat_nat[h] = data.norm.to_natural(pred[h]);
        if (y_nat[h] == 0.0) ++zero_targets;
      }
      wm.mae.push_back(mae(y_nat, yhat_nat));
      wm.rmse.push_back(rmse(y_nat, yhat_nat));
      wm.smape.push_back(smape(y_nat, yhat_nat));
      wm.mase.push_back(mase_with_scale(y_nat, yhat_nat, data.train_naive_mae));
    }
  }
  return finish_report(data, wm, zero_targets,
                       static_cast<int64_t>(data.size()) * horizon, &util);
}

EvalReport evaluate_naive(const WindowDataset& data) {
  if (data.size() == 0) throw DataError("evaluate: empty dataset");
  WindowMetrics wm;
  int64_t zero_targets = 0;
  const int64_t horizon = data.horizon;
  std::vector<double> y_nat(horizon);
  for (size_t i = 0; i < data.size(); ++i) {
    const double* natural_ctx = data.natural->data() + data.starts[i];
    const double* natural_tgt = natural_ctx + data.context;
    const std::vector<double> yhat = naive_forecast(
        std::span<const double>(natural_ctx, static_cast<size_t>(data.context)),
        horizon);
    for (int64_t h = 0; h < horizon; ++h) {
      y_nat[h] = natural_tgt[h];
      if (y_nat[h] == 0.0) ++zero_targets;
    }
    wm.mae.push_back(mae(y_nat, yhat));
    wm.rmse.push_back(rmse(y_nat, yhat));
    wm.smape.push_back(smape(y_nat, yhat));
    wm.mase.push_back(mase_with_scale(y_nat, yhat, data.train_naive_mae));
  }
  return finish_report(data, wm, zero_targets,
                       static_cast<int64_t>(data.size()) * horizon, nullptr);
}

}  // namespace gatets
