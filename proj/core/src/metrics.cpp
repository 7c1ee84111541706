#include "gatets/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace gatets {

namespace {

void check_lengths(std::span<const double> y, std::span<const double> yhat,
                   const char* op) {
  if (y.size() != yhat.size()) {
    throw ShapeError(std::string(op) + ": length mismatch " +
                     std::to_string(y.size()) + " vs " +
                     std::to_string(yhat.size()));
  }
  if (y.empty()) throw ShapeError(std::string(op) + ": empty input");
}

}  // namespace

double mae(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat, "mae");
  double acc = 0.0;
  for (size_t i = 0; i < y.size(); ++i) acc += std::abs(y[i] - yhat[i]);
  return acc / static_cast<double>(y.size());
}

double rmse(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat, "rmse");
  double acc = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - yhat[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(y.size()));
}

double smape(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat, "smape");
  double acc = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    const double denom = std::abs(y[i]) + std::abs(yhat[i]);
    if (denom > 0.0) acc += 200.0 * std::abs(y[i] - yhat[i]) / denom;
  }
  return acc / static_cast<double>(y.size());
}

double naive_scale(std::span<const double> train_series) {
  if (train_series.size() < 2) {
    throw DataError("mase: train series needs at least 2 points");
  }
  double acc = 0.0;
  for (size_t i = 1; i < train_series.size(); ++i) {
    acc += std::abs(train_series[i] - train_series[i - 1]);
  }
  return acc / static_cast<double>(train_series.size() - 1);
}

double mase_with_scale(std::span<const double> y, std::span<const double> yhat,
                       double scale) {
  if (scale <= 0.0) {
    throw NumericError("mase: degenerate naive scale (constant train series)");
  }
  return mae(y, yhat) / scale;
}

double mase(std::span<const double> y, std::span<const double> yhat,
            std::span<const double> train_series) {
  return mase_with_scale(y, yhat, naive_scale(train_series));
}

ConfidenceInterval confidence_interval(std::span<const double> values) {
  const size_t n = values.size();
  if (n < 2) {
    throw DataError("confidence_interval: need at least 2 values");
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : values) {
    const double c = v - mean;
    var += c * c;
  }
  var /= static_cast<double>(n - 1);
  const double half =
      1.96 * std::sqrt(var) / std::sqrt(static_cast<double>(n));
  return {mean, half};
}

UtilizationCounter::UtilizationCounter(int64_t n_experts)
    : counts_(static_cast<size_t>(n_experts), 0) {}

void UtilizationCounter::add(const RoutingDecision& decision) {
  const int64_t k = decision.k;
  const int64_t tokens = static_cast<int64_t>(decision.selected.size()) / k;
  std::vector<int> set(static_cast<size_t>(k));
  for (int64_t t = 0; t < tokens; ++t) {
    for (int64_t j = 0; j < k; ++j) {
      const int e = decision.selected[t * k + j];
      counts_[e] += 1;
      set[j] = e;
    }
    std::sort(set.begin(), set.end());
    set_counts_[set] += 1;
    total_slots_ += k;
  }
}

Utilization UtilizationCounter::finish() const {
  if (total_slots_ == 0) throw DataError("utilization: no decisions recorded");
  Utilization out;
  out.frequencies.resize(counts_.size());
  for (size_t e = 0; e < counts_.size(); ++e) {
    out.frequencies[e] =
        static_cast<double>(counts_[e]) / static_cast<double>(total_slots_);
  }
  out.distinct_sets = static_cast<int64_t>(set_counts_.size());
  for (double f : out.frequencies) {
    if (f > 0.0) out.entropy -= f * std::log(f);
  }
  return out;
}

}  // namespace gatets
