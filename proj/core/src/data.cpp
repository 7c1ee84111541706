#include "gatets/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace gatets {

size_t RawSeries::missing_count() const {
  size_t n = 0;
  for (uint8_t p : present) n += (p == 0);
  return n;
}

SeriesFormat series_format_from_string(const std::string& s) {
  if (s == "csv") return SeriesFormat::csv;
  if (s == "tsf") return SeriesFormat::tsf;
  throw ConfigError("unknown series format '" + s + "' (expected csv|tsf)");
}

namespace {

std::string strip(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool parse_double(const std::string& s, double* out) {
  try {
    size_t pos = 0;
    *out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

RawSeries load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  RawSeries series;
  series.name = path;
  std::string line;
  size_t line_no = 0;
  double prev_ts = 0.0;
  bool have_prev = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = strip(line);
    if (trimmed.empty()) continue;
    const size_t comma = trimmed.find(',');
    if (comma == std::string::npos) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected 'timestamp,value'");
    }
    const std::string ts_field = strip(trimmed.substr(0, comma));
    const std::string val_field = strip(trimmed.substr(comma + 1));
    double ts = 0.0;
    if (!parse_double(ts_field, &ts)) {
      if (line_no == 1) continue;  // header row
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": bad timestamp '" + ts_field + "'");
    }
    if (have_prev && ts <= prev_ts) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": timestamps not strictly increasing");
    }
    prev_ts = ts;
    have_prev = true;
    series.timestamps.push_back(ts);
    if (val_field.empty()) {
      series.values.push_back(0.0);
      series.present.push_back(0);
    } else {
      double v = 0.0;
      if (!parse_double(val_field, &v)) {
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": bad value '" + val_field + "'");
      }
      series.values.push_back(v);
      series.present.push_back(1);
    }
  }
  if (series.values.empty()) throw DataError(path + ": no data rows");
  return series;
}

RawSeries load_tsf(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  size_t line_no = 0;
  bool in_data = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = strip(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    if (!in_data) {
      if (trimmed.rfind("@data", 0) == 0) in_data = true;
      continue;
    }
    // First series line: "<name>:<start>:v1,v2,?,..."; metadata fields vary
    // by archive, the series is always the last ':'-separated field.
    const size_t last_colon = trimmed.rfind(':');
    RawSeries series;
    series.name = last_colon == std::string::npos
                      ? path
                      : strip(trimmed.substr(0, trimmed.find(':')));
    const std::string payload =
        last_colon == std::string::npos ? trimmed
                                        : trimmed.substr(last_colon + 1);
    std::stringstream ss(payload);
    std::string field;
    while (std::getline(ss, field, ',')) {
      const std::string v = strip(field);
      series.timestamps.push_back(
          static_cast<double>(series.timestamps.size()));
      if (v == "?" || v.empty()) {
        series.values.push_back(0.0);
        series.present.push_back(0);
      } else {
        double x = 0.0;
        if (!parse_double(v, &x)) {
          throw DataError(path + ":" + std::to_string(line_no) +
                          ": bad value '" + v + "'");
        }
        series.values.push_back(x);
        series.present.push_back(1);
      }
    }
    if (series.values.empty()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": empty series");
    }
    return series;
  }
  throw DataError(path + ": no @data section or no series line");
}

}  // namespace

RawSeries load_series(const std::string& path, SeriesFormat format) {
  switch (format) {
    case SeriesFormat::csv: return load_csv(path);
    case SeriesFormat::tsf: return load_tsf(path);
  }
  throw ConfigError("load_series: unreachable format");
}

std::vector<double> locf_impute(const RawSeries& s, int64_t* imputed_count) {
  if (s.values.empty()) throw DataError("locf: empty series");
  if (!s.present.empty() && s.present[0] == 0) {
    throw DataError("locf: leading value is missing and cannot be filled");
  }
  std::vector<double> out(s.values.size());
  int64_t imputed = 0;
  double last = s.values[0];
  for (size_t i = 0; i < s.values.size(); ++i) {
    if (s.present.empty() || s.present[i]) {
      last = s.values[i];
    } else {
      ++imputed;
    }
    out[i] = last;
  }
  if (imputed_count) *imputed_count = imputed;
  return out;
}

std::vector<double> aggregate(const std::vector<double>& values,
                              int64_t factor) {
  if (factor < 1) {
    throw ConfigError("aggregate: factor must be >= 1, got " +
                      std::to_string(factor));
  }
  if (factor == 1) return values;
  const size_t blocks = values.size() / static_cast<size_t>(factor);
  std::vector<double> out(blocks);
  for (size_t b = 0; b < blocks; ++b) {
    double acc = 0.0;
    for (int64_t i = 0; i < factor; ++i) acc += values[b * factor + i];
    out[b] = acc / static_cast<double>(factor);
  }
  return out;
}

SplitRanges chronological_split(int64_t length, std::array<double, 3> ratios) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("chronological_split: ratios must sum to 1");
  }
  const int64_t n_train =
      static_cast<int64_t>(std::floor(ratios[0] * static_cast<double>(length)));
  const int64_t n_val =
      static_cast<int64_t>(std::floor(ratios[1] * static_cast<double>(length)));
  SplitRanges r;
  r.train = {0, n_train};
  r.val = {n_train, n_train + n_val};
  r.test = {n_train + n_val, length};
  return r;
}

PreparedSeries standardize(std::vector<double> values,
                           const SplitRanges& splits) {
  const int64_t n = splits.train.length();
  if (n < 2) throw DataError("standardize: train segment too short");
  double mean = 0.0;
  for (int64_t i = splits.train.begin; i < splits.train.end; ++i)
    mean += values[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (int64_t i = splits.train.begin; i < splits.train.end; ++i) {
    const double c = values[i] - mean;
    var += c * c;
  }
  var /= static_cast<double>(n);
  if (var <= 0.0) {
    throw DataError("standardize: train segment is constant (zero variance)");
  }
  PreparedSeries out;
  out.values = std::move(values);
  out.norm = {mean, std::sqrt(var)};
  out.splits = splits;
  double scale = 0.0;
  for (int64_t i = splits.train.begin + 1; i < splits.train.end; ++i) {
    scale += std::abs(out.values[i] - out.values[i - 1]);
  }
  out.train_naive_mae = scale / static_cast<double>(n - 1);
  return out;
}

PreparedSeries prepare_series(const RawSeries& raw, int64_t aggregate_factor,
                              std::array<double, 3> ratios) {
  int64_t imputed = 0;
  std::vector<double> filled = locf_impute(raw, &imputed);
  std::vector<double> agg = aggregate(filled, aggregate_factor);
  const SplitRanges splits =
      chronological_split(static_cast<int64_t>(agg.size()), ratios);
  PreparedSeries out = standardize(std::move(agg), splits);
  out.name = raw.name;
  out.imputed_count = imputed;
  out.aggregation_factor = aggregate_factor;
  return out;
}

void save_prepared(const PreparedSeries& series, const std::string& path) {
  nlohmann::ordered_json j;
  j["name"] = series.name;
  j["normalization"] = {{"mean", series.norm.mean},
                        {"stddev", series.norm.stddev}};
  j["splits"] = {{"train", {series.splits.train.begin, series.splits.train.end}},
                 {"val", {series.splits.val.begin, series.splits.val.end}},
                 {"test", {series.splits.test.begin, series.splits.test.end}}};
  j["provenance"] = {{"imputed_count", series.imputed_count},
                     {"aggregation_factor", series.aggregation_factor}};
  j["train_naive_mae"] = series.train_naive_mae;
  j["values"] = series.values;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << j.dump(1) << "\n";
}

PreparedSeries load_prepared(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("bad prepared-series file '" + path + "': " + e.what());
  }
  PreparedSeries out;
  try {
    out.name = j.at("name").get<std::string>();
    out.norm.mean = j.at("normalization").at("mean").get<double>();
    out.norm.stddev = j.at("normalization").at("stddev").get<double>();
    auto rng = [&j](const char* key) {
      auto arr = j.at("splits").at(key);
      return IndexRange{arr.at(0).get<int64_t>(), arr.at(1).get<int64_t>()};
    };
    out.splits.train = rng("train");
    out.splits.val = rng("val");
    out.splits.test = rng("test");
    out.imputed_count = j.at("provenance").at("imputed_count").get<int64_t>();
    out.aggregation_factor =
        j.at("provenance").at("aggregation_factor").get<int64_t>();
    out.train_naive_mae = j.at("train_naive_mae").get<double>();
    out.values = j.at("values").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad prepared-series file '" + path + "': " + e.what());
  }
  return out;
}

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

WindowDataset make_windows(const PreparedSeries& prepared, Split split,
                           int64_t context, int64_t horizon, int64_t stride) {
  if (context < 1 || horizon < 1 || stride < 1) {
    throw ConfigError("make_windows: context, horizon, stride must be >= 1");
  }
  IndexRange range;
  switch (split) {
    case Split::train: range = prepared.splits.train; break;
    case Split::val: range = prepared.splits.val; break;
    case Split::test: range = prepared.splits.test; break;
  }
  const int64_t len = range.length();
  if (len < context + horizon) {
    throw DataError("make_windows: split '" + to_string(split) + "' has " +
                    std::to_string(len) + " points, need at least " +
                    std::to_string(context + horizon));
  }
  WindowDataset ds;
  ds.split = split;
  ds.context = context;
  ds.horizon = horizon;
  ds.stride = stride;
  ds.norm = prepared.norm;
  ds.train_naive_mae = prepared.train_naive_mae;
  ds.natural = std::make_shared<std::vector<double>>(prepared.values);
  auto normalized = std::make_shared<std::vector<double>>(prepared.values);
  for (double& v : *normalized) v = prepared.norm.to_normalized(v);
  ds.series = std::move(normalized);
  const int64_t count = (len - context - horizon) / stride + 1;
  ds.starts.reserve(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    ds.starts.push_back(range.begin + i * stride);
  }
  return ds;
}

SynthKind synth_kind_from_string(const std::string& s) {
  if (s == "sine") return SynthKind::sine;
  if (s == "regime") return SynthKind::regime;
  if (s == "intermittent") return SynthKind::intermittent;
  throw ConfigError("unknown synthetic kind '" + s +
                    "' (expected sine|regime|intermittent)");
}

RawSeries synth_series(SynthKind kind, int64_t length, uint64_t seed,
                       const SynthOptions& options) {
  if (length < 1) throw ConfigError("synth_series: length must be >= 1");
  RawSeries out;
  out.timestamps.resize(static_cast<size_t>(length));
  for (int64_t i = 0; i < length; ++i) out.timestamps[i] = i;
  out.values.resize(static_cast<size_t>(length));
  out.present.assign(static_cast<size_t>(length), 1);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  switch (kind) {
    case SynthKind::sine: {
      out.name = "synth-sine";
      const double noise = options.noise < 0.0 ? 0.0 : options.noise;
      const double w = 2.0 * M_PI / options.period;
      for (int64_t t = 0; t < length; ++t) {
        out.values[t] = options.amplitude * std::sin(w * t) +
                        (noise > 0.0 ? noise * gauss(rng) : 0.0);
      }
      break;
    }
    case SynthKind::regime: {
      out.name = "synth-regime";
      const double noise = options.noise < 0.0 ? 0.25 : options.noise;
      // Alternating AR(1) dynamics with poles of opposite sign: a smooth
      // low-frequency regime and a sign-flipping Nyquist regime. Both have
      // the same marginal variance, so only the dynamics reveal the regime,
      // and the optimal one-step map switches sign with it.
      const int64_t block = 96;
      double y = 0.0;
      for (int64_t t = 0; t < length; ++t) {
        const bool smooth = ((t / block) % 2) == 0;
        const double a = smooth ? 0.95 : -0.95;
        y = a * y + noise * gauss(rng);
        out.values[t] = y;
      }
      break;
    }
    case SynthKind::intermittent: {
      out.name = "synth-intermittent";
      const double noise = options.noise < 0.0 ? 0.0 : options.noise;
      // Daily cycle: daylight half-sine bump, exact-zero nights. Bump
      // heights vary day to day, mimicking cloud cover.
      const int64_t day = 24;
      const int64_t daylight = 10;
      std::uniform_real_distribution<double> cloud(0.6, 1.3);
      double height = options.amplitude * cloud(rng);
      for (int64_t t = 0; t < length; ++t) {
        const int64_t hour = t % day;
        if (hour == 0) height = options.amplitude * cloud(rng);
        if (hour < daylight) {
          const double phase = M_PI * static_cast<double>(hour) /
                               static_cast<double>(daylight - 1);
          double v = height * std::sin(phase);
          if (noise > 0.0) v = std::max(0.0, v + noise * gauss(rng));
          out.values[t] = v;
        } else {
          out.values[t] = 0.0;
        }
      }
      break;
    }
  }
  return out;
}

}  // namespace gatets
