#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gatets/errors.hpp"
#include "gatets/gating.hpp"

namespace gatets {

double mae(std::span<const double> y, std::span<const double> yhat);
double rmse(std::span<const double> y, std::span<const double> yhat);

// Symmetric MAPE in percent: mean of 200*|y-yhat| / (|y|+|yhat|), with 0/0
// terms counted as zero. Range [0, 200].
double smape(std::span<const double> y, std::span<const double> yhat);

// One-step in-sample naive error on the training split (MASE denominator).
double naive_scale(std::span<const double> train_series);

double mase(std::span<const double> y, std::span<const double> yhat,
            std::span<const double> train_series);
double mase_with_scale(std::span<const double> y, std::span<const double> yhat,
                       double scale);

struct ConfidenceInterval {
  double mean = 0.0;
  double half_width = 0.0;
};

// 95% normal-approximation interval of the mean: 1.96 * sample_std / sqrt(n).
ConfidenceInterval confidence_interval(std::span<const double> values);

struct Utilization {
  std::vector<double> frequencies;  // per expert, sums to 1
  int64_t distinct_sets = 0;        // distinct selected index-sets observed
  double entropy = 0.0;             // -sum f ln f over the frequencies
};

// Accumulates routing decisions batch by batch.
class UtilizationCounter {
 public:
  explicit UtilizationCounter(int64_t n_experts);
  void add(const RoutingDecision& decision);
  Utilization finish() const;
  bool empty() const { return total_slots_ == 0; }

 private:
  std::vector<int64_t> counts_;
  std::map<std::vector<int>, int64_t> set_counts_;
  int64_t total_slots_ = 0;
};

struct MetricSummary {
  double mean = 0.0;
  double half_width = 0.0;
};

struct EvalReport {
  std::string split;
  int64_t window_count = 0;
  MetricSummary mae, rmse, smape, mase;
  bool smape_suppressed = false;
  std::string smape_note;  // reason when suppressed
  double target_zero_share = 0.0;
  Utilization utilization;
};

// SMAPE is suppressed when this share of test targets is exactly zero.
inline constexpr double kSmapeZeroShareThreshold = 0.25;

}  // namespace gatets
