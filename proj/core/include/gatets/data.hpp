#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gatets/errors.hpp"

namespace gatets {

struct RawSeries {
  std::string name;
  std::vector<double> timestamps;  // strictly increasing
  std::vector<double> values;      // meaningful where present[i] != 0
  std::vector<uint8_t> present;

  size_t length() const { return values.size(); }
  size_t missing_count() const;
};

enum class SeriesFormat { csv, tsf };

SeriesFormat series_format_from_string(const std::string& s);

// CSV: optional header, columns (timestamp, value), empty value = missing.
// TSF: Monash archive text format, '?' = missing; the first series is taken.
RawSeries load_series(const std::string& path, SeriesFormat format);

// Last observation carried forward. A missing leading value cannot be
// filled and raises DataError.
std::vector<double> locf_impute(const RawSeries& s,
                                int64_t* imputed_count = nullptr);

// Non-overlapping mean over blocks of `factor`; a trailing partial block is
// dropped.
std::vector<double> aggregate(const std::vector<double>& values,
                              int64_t factor);

struct IndexRange {
  int64_t begin = 0;
  int64_t end = 0;  // exclusive
  int64_t length() const { return end - begin; }
};

struct SplitRanges {
  IndexRange train, val, test;
};

// Contiguous chronological split; boundaries floor-rounded, remainder to
// test.
SplitRanges chronological_split(int64_t length,
                                std::array<double, 3> ratios = {0.8, 0.1,
                                                                0.1});

struct Normalization {
  double mean = 0.0;
  double stddev = 1.0;
  double to_normalized(double v) const { return (v - mean) / stddev; }
  double to_natural(double z) const { return z * stddev + mean; }
};

struct PreparedSeries {
  std::string name;
  std::vector<double> values;  // natural units, gap-free
  Normalization norm;          // fitted on the train segment only
  SplitRanges splits;
  int64_t imputed_count = 0;
  int64_t aggregation_factor = 1;
  double train_naive_mae = 0.0;  // MASE scale: mean |v[t]-v[t-1]| on train
};

// Z-scores against the train segment; errors on a constant train segment.
PreparedSeries standardize(std::vector<double> values,
                           const SplitRanges& splits);

// locf -> aggregate -> split -> standardize, with provenance recorded.
PreparedSeries prepare_series(const RawSeries& raw, int64_t aggregate_factor,
                              std::array<double, 3> ratios = {0.8, 0.1, 0.1});

void save_prepared(const PreparedSeries& series, const std::string& path);
PreparedSeries load_prepared(const std::string& path);

enum class Split { train, val, test };

std::string to_string(Split split);

struct WindowDataset {
  Split split = Split::train;
  int64_t context = 0;
  int64_t horizon = 0;
  int64_t stride = 1;
  std::shared_ptr<const std::vector<double>> series;   // normalized, full
  std::shared_ptr<const std::vector<double>> natural;  // original units
  std::vector<int64_t> starts;
  Normalization norm;
  double train_naive_mae = 0.0;

  size_t size() const { return starts.size(); }
  const double* context_ptr(size_t i) const {
    return series->data() + starts[i];
  }
  const double* target_ptr(size_t i) const {
    return series->data() + starts[i] + context;
  }
};

// Sliding windows with the given stride, confined to one split so no pair
// crosses a split boundary.
WindowDataset make_windows(const PreparedSeries& prepared, Split split,
                           int64_t context, int64_t horizon,
                           int64_t stride = 1);

enum class SynthKind { sine, regime, intermittent };

SynthKind synth_kind_from_string(const std::string& s);

struct SynthOptions {
  double period = 24.0;
  double amplitude = 1.0;
  // Noise scale; negative selects the kind default (sine 0, regime 0.25,
  // intermittent 0).
  double noise = -1.0;
};

// Seed-deterministic synthetic streams: a sine wave, alternating AR regimes
// with distinct spectra, and a zero-night bump train.
RawSeries synth_series(SynthKind kind, int64_t length, uint64_t seed,
                       const SynthOptions& options = {});

}  // namespace gatets
