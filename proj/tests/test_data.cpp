#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "doctest.h"
#include "gatets/data.hpp"

using namespace gatets;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& contents)
      : path("/tmp/gatets_test_" + name) {
    std::ofstream out(path);
    out << contents;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("load_series: csv basics") {
  TempFile f("basic.csv", "t,v\n1,1.0\n2,2.0\n");
  RawSeries s = load_series(f.path, SeriesFormat::csv);
  REQUIRE(s.length() == 2);
  CHECK(s.values[0] == 1.0);
  CHECK(s.values[1] == 2.0);
  CHECK(s.missing_count() == 0);
}

TEST_CASE("load_series: empty value field marks a missing entry") {
  TempFile f("missing.csv", "1,1.0\n2,\n3,3.0\n");
  RawSeries s = load_series(f.path, SeriesFormat::csv);
  REQUIRE(s.length() == 3);
  CHECK(s.present[0] == 1);
  CHECK(s.present[1] == 0);
  CHECK(s.present[2] == 1);
  CHECK(s.missing_count() == 1);
}

TEST_CASE("load_series: parse errors carry the line number") {
  TempFile f("bad.csv", "1,1.0\n2,zzz\n");
  CHECK_THROWS_WITH_AS(load_series(f.path, SeriesFormat::csv),
                       doctest::Contains(":2"), DataError);
  TempFile g("unordered.csv", "2,1.0\n1,2.0\n");
  CHECK_THROWS_WITH_AS(load_series(g.path, SeriesFormat::csv),
                       doctest::Contains("increasing"), DataError);
  CHECK_THROWS_AS(load_series("/nonexistent/file.csv", SeriesFormat::csv),
                  DataError);
}

TEST_CASE("load_series: tsf series line with missing markers") {
  TempFile f("mini.tsf",
             "# Monash-style archive\n"
             "@relation test\n"
             "@frequency daily\n"
             "@missing true\n"
             "@data\n"
             "T1:1818-01-08 00-00-00:1.0,2.0,?,4.0\n");
  RawSeries s = load_series(f.path, SeriesFormat::tsf);
  REQUIRE(s.length() == 4);
  CHECK(s.values[0] == 1.0);
  CHECK(s.present[2] == 0);
  CHECK(s.name == "T1");
}

TEST_CASE("load_series: row count is reported faithfully") {
  // Stand-in for the advertised-length check on archive files: the loader
  // must not drop or merge rows.
  std::string contents;
  const int rows = 1000;
  for (int i = 0; i < rows; ++i) {
    contents += std::to_string(i) + "," + std::to_string(i % 7) + ".5\n";
  }
  TempFile f("long.csv", contents);
  RawSeries s = load_series(f.path, SeriesFormat::csv);
  CHECK(s.length() == rows);
}

TEST_CASE("locf_impute: fills forward only") {
  RawSeries s;
  s.values = {1, 0, 0, 4};
  s.present = {1, 0, 0, 1};
  s.timestamps = {0, 1, 2, 3};
  int64_t imputed = 0;
  auto filled = locf_impute(s, &imputed);
  CHECK(filled == std::vector<double>{1, 1, 1, 4});
  CHECK(imputed == 2);

  RawSeries clean;
  clean.values = {1, 2};
  clean.present = {1, 1};
  clean.timestamps = {0, 1};
  CHECK(locf_impute(clean) == std::vector<double>{1, 2});

  RawSeries headless;
  headless.values = {0, 1};
  headless.present = {0, 1};
  headless.timestamps = {0, 1};
  CHECK_THROWS_AS(locf_impute(headless), DataError);
}

TEST_CASE("locf_impute: idempotent") {
  std::mt19937_64 rng(3);
  RawSeries s;
  for (int i = 0; i < 200; ++i) {
    s.timestamps.push_back(i);
    s.values.push_back(std::sin(i * 0.1));
    s.present.push_back(i == 0 ? 1 : (rng() % 3 != 0));
  }
  auto once = locf_impute(s);
  RawSeries again;
  again.timestamps = s.timestamps;
  again.values = once;
  again.present.assign(once.size(), 1);
  CHECK(locf_impute(again) == once);
}

TEST_CASE("aggregate: block means, identity, trailing drop") {
  CHECK(aggregate({1, 2, 3, 4}, 2) == std::vector<double>{1.5, 3.5});
  CHECK(aggregate({1, 2, 3}, 1) == std::vector<double>{1, 2, 3});
  CHECK(aggregate({1, 2, 3, 4, 5}, 2).size() == 2);
  CHECK_THROWS_AS(aggregate({1, 2}, 0), ConfigError);
}

TEST_CASE("aggregate: mean of block-aligned aggregation commutes") {
  std::mt19937_64 rng(5);
  std::vector<double> v(600);
  for (double& x : v) x = static_cast<double>(rng() % 1000) / 10.0;
  auto agg = aggregate(v, 6);
  double mean_direct = 0.0, mean_agg = 0.0;
  for (double x : v) mean_direct += x;
  mean_direct /= static_cast<double>(v.size());
  for (double x : agg) mean_agg += x;
  mean_agg /= static_cast<double>(agg.size());
  CHECK(mean_agg == doctest::Approx(mean_direct).epsilon(1e-12));
}

TEST_CASE("chronological_split: boundaries and the remainder rule") {
  SplitRanges r = chronological_split(100);
  CHECK(r.train.begin == 0);
  CHECK(r.train.end == 80);
  CHECK(r.val.begin == 80);
  CHECK(r.val.end == 90);
  CHECK(r.test.begin == 90);
  CHECK(r.test.end == 100);

  SplitRanges odd = chronological_split(101);
  CHECK(odd.train.length() == 80);
  CHECK(odd.val.length() == 10);
  CHECK(odd.test.length() == 11);

  CHECK_THROWS_AS(chronological_split(100, {0.5, 0.2, 0.2}), ConfigError);
}

TEST_CASE("standardize: train statistics only, exact round trip") {
  std::vector<double> values{0, 2, 3, 100};
  SplitRanges splits;
  splits.train = {0, 2};
  splits.val = {2, 3};
  splits.test = {3, 4};
  PreparedSeries p = standardize(values, splits);
  CHECK(p.norm.mean == doctest::Approx(1.0));
  CHECK(p.norm.stddev == doctest::Approx(1.0));
  CHECK(p.norm.to_normalized(3.0) == doctest::Approx(2.0));
  // Values beyond 3 sigma pass through untouched (no clipping).
  CHECK(p.norm.to_normalized(100.0) == doctest::Approx(99.0));
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const double v = static_cast<double>(rng() % 100000) / 7.0 - 5000.0;
    CHECK(std::abs(p.norm.to_natural(p.norm.to_normalized(v)) - v) <
          1e-12 * std::max(1.0, std::abs(v)));
  }

  std::vector<double> constant{5, 5, 5, 5};
  SplitRanges cs = chronological_split(4, {0.5, 0.25, 0.25});
  CHECK_THROWS_AS(standardize(constant, cs), DataError);
}

TEST_CASE("make_windows: counts, alignment, and leakage freedom") {
  std::vector<double> values(10);
  for (int i = 0; i < 10; ++i) values[i] = i;
  SplitRanges splits;
  splits.train = {0, 10};
  splits.val = {10, 10};
  splits.test = {10, 10};
  PreparedSeries p;
  p.values = values;
  p.norm = {0.0, 1.0};
  p.splits = splits;
  p.train_naive_mae = 1.0;

  WindowDataset ds = make_windows(p, Split::train, 4, 2, 1);
  CHECK(ds.size() == 5);  // floor((10-4-2)/1)+1
  // Window i covers values[i..i+4) for context, values[i+4..i+6) as target.
  for (size_t i = 0; i < ds.size(); ++i) {
    CHECK(ds.context_ptr(i)[0] == doctest::Approx(static_cast<double>(i)));
    CHECK(ds.target_ptr(i)[0] == doctest::Approx(static_cast<double>(i + 4)));
  }

  WindowDataset one = make_windows(p, Split::train, 4, 2, 10);
  CHECK(one.size() == 1);

  CHECK_THROWS_WITH_AS(make_windows(p, Split::val, 4, 2, 1),
                       doctest::Contains("val"), DataError);
}

TEST_CASE("make_windows: no pair crosses a split boundary (property)") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const int64_t len = 60 + static_cast<int64_t>(rng() % 200);
    std::vector<double> values(len);
    for (int64_t i = 0; i < len; ++i) {
      values[i] = std::sin(0.3 * static_cast<double>(i)) +
                  0.01 * static_cast<double>(i);
    }
    PreparedSeries p = standardize(values, chronological_split(len));
    const int64_t t = 2 + static_cast<int64_t>(rng() % 6);
    const int64_t h = 1 + static_cast<int64_t>(rng() % 4);
    const int64_t stride = 1 + static_cast<int64_t>(rng() % 3);
    for (Split split : {Split::train, Split::val, Split::test}) {
      IndexRange range = split == Split::train ? p.splits.train
                         : split == Split::val ? p.splits.val
                                               : p.splits.test;
      if (range.length() < t + h) continue;
      WindowDataset ds = make_windows(p, split, t, h, stride);
      const int64_t expect = (range.length() - t - h) / stride + 1;
      CHECK(static_cast<int64_t>(ds.size()) == expect);
      for (int64_t start : ds.starts) {
        CHECK(start >= range.begin);
        CHECK(start + t + h <= range.end);
      }
    }
  }
}

TEST_CASE("prepare_series: pipeline provenance") {
  RawSeries raw;
  for (int i = 0; i < 400; ++i) {
    raw.timestamps.push_back(i);
    raw.values.push_back(std::sin(0.2 * i) + 2.0);
    raw.present.push_back(i % 17 != 3);
  }
  raw.present[0] = 1;
  PreparedSeries p = prepare_series(raw, 2);
  CHECK(p.aggregation_factor == 2);
  CHECK(p.imputed_count > 0);
  CHECK(p.values.size() == 200);
  CHECK(p.train_naive_mae > 0.0);
}

TEST_CASE("prepared series: save/load round trip") {
  RawSeries raw = synth_series(SynthKind::sine, 300, 9);
  PreparedSeries p = prepare_series(raw, 1);
  TempFile f("prep.json", "");
  save_prepared(p, f.path);
  PreparedSeries q = load_prepared(f.path);
  CHECK(q.values == p.values);
  CHECK(q.norm.mean == p.norm.mean);
  CHECK(q.norm.stddev == p.norm.stddev);
  CHECK(q.splits.train.end == p.splits.train.end);
  CHECK(q.train_naive_mae == p.train_naive_mae);
}

TEST_CASE("synth_series: sine is exact with zero noise") {
  SynthOptions opt;
  opt.noise = 0.0;
  opt.period = 24;
  opt.amplitude = 2.0;
  RawSeries s = synth_series(SynthKind::sine, 100, 3, opt);
  for (int t = 0; t < 100; ++t) {
    CHECK(s.values[t] ==
          doctest::Approx(2.0 * std::sin(2.0 * M_PI * t / 24.0)).epsilon(1e-12));
  }
}

TEST_CASE("synth_series: intermittent kind is mostly exact zeros") {
  RawSeries s = synth_series(SynthKind::intermittent, 2400, 5);
  int64_t zeros = 0;
  for (double v : s.values) zeros += (v == 0.0);
  CHECK(static_cast<double>(zeros) / 2400.0 > 0.3);
}

TEST_CASE("synth_series: seed determinism") {
  for (SynthKind kind :
       {SynthKind::sine, SynthKind::regime, SynthKind::intermittent}) {
    RawSeries a = synth_series(kind, 500, 42);
    RawSeries b = synth_series(kind, 500, 42);
    CHECK(a.values == b.values);
    RawSeries c = synth_series(kind, 500, 43);
    if (kind != SynthKind::sine) CHECK(a.values != c.values);
  }
  CHECK_THROWS_AS(synth_series(SynthKind::sine, 0, 1), ConfigError);
  CHECK_THROWS_AS(synth_kind_from_string("fractal"), ConfigError);
}
