#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "gatets/data.hpp"
#include "gatets/metrics.hpp"
#include "gatets/model.hpp"
#include "gatets/optim.hpp"

namespace gatets {

struct TrainConfig {
  int64_t epochs = 50;
  int64_t batch_size = 256;
  double base_lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
  double warmup_fraction = 0.05;  // of total steps, linear ramp
  uint64_t seed = 42;
  int64_t checkpoint_every = 0;  // epochs; 0 = best/final only
  int64_t patience = 0;          // early stop on val MSE; 0 = disabled

  void validate() const;
};

struct EpochStats {
  int64_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;  // last step's learning rate
  std::vector<double> expert_utilization;
};

struct TrainResult {
  std::vector<EpochStats> history;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int64_t best_epoch = -1;
  bool diverged = false;
  int64_t steps = 0;
};

// Self-contained training snapshot: model + optimizer + schedule position.
// Reloading and continuing reproduces the next step bit-exactly.
struct Checkpoint {
  GateTSConfig model_config;
  TrainConfig train_config;
  int64_t step = 0;
  int64_t epoch = 0;  // completed epochs
  int64_t total_steps = 0;
  int64_t warmup_steps = 0;
  double best_val = std::numeric_limits<double>::quiet_NaN();
  std::vector<NamedParam> params;
  std::vector<std::vector<double>> adam_m;  // aligned with params
  std::vector<std::vector<double>> adam_v;
};

// Single-file container: u64-LE header length, JSON header (configs, state,
// tensor manifest with per-tensor checksums), then little-endian float64
// payloads. Save/load round-trips byte-identically.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Builds a model from the checkpoint config and restores parameter values.
// Shape disagreements (e.g. edited config) raise ShapeError.
GateTS model_from_checkpoint(const Checkpoint& ckpt);

using ProgressFn =
    std::function<void(int64_t epoch, int64_t step, double lr, double loss)>;

// Epoch-based loop: seeded shuffle, batched MSE, AdamW with cosine warm-up
// schedule. The MSE is the entire objective; routing receives no auxiliary
// loss.
class Trainer {
 public:
  Trainer(GateTS& model, TrainConfig config, const WindowDataset& train_data,
          const WindowDataset& val_data);

  // Restores optimizer/schedule position from a checkpoint whose parameters
  // are already loaded into the model.
  void restore(const Checkpoint& ckpt);

  // Runs to config.epochs, or pauses once `stop_after_epoch` epochs have
  // completed (the schedule still spans the full config horizon, so a
  // paused run can be checkpointed and resumed bit-exactly).
  TrainResult run(const ProgressFn& progress = nullptr,
                  int64_t stop_after_epoch = -1);

  Checkpoint snapshot() const;     // current state
  const Checkpoint& best() const;  // best-validation snapshot
  bool has_best() const { return best_epoch_ >= 0; }
  ScheduleState schedule() const;

 private:
  double validation_loss() const;

  GateTS& model_;
  TrainConfig config_;
  const WindowDataset& train_data_;
  const WindowDataset& val_data_;
  AdamW optimizer_;
  int64_t step_ = 0;
  int64_t epoch_ = 0;
  double initial_loss_ = std::numeric_limits<double>::quiet_NaN();
  double best_val_ = std::numeric_limits<double>::infinity();
  int64_t best_epoch_ = -1;
  Checkpoint best_;
};

// Eval-mode forward over every window of the split; metrics on
// de-normalized values, routing diagnostics attached.
EvalReport evaluate(const GateTS& model, const WindowDataset& data,
                    int64_t batch_size = 256);

// Same report pipeline fed by the repeat-last-value forecaster.
EvalReport evaluate_naive(const WindowDataset& data);

}  // namespace gatets
