#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "gatets/metrics.hpp"
#include "gatets/tensor.hpp"

using namespace gatets;

namespace {

std::vector<double> random_vec(size_t n, std::mt19937_64& rng, double lo = -5,
                               double hi = 5) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

}  // namespace

TEST_CASE("mae: values and loop oracle") {
  std::vector<double> a{0, 2}, b{1, 3};
  CHECK(mae(a, a) == 0.0);
  CHECK(mae(a, b) == doctest::Approx(1.0));
  CHECK_THROWS_AS(mae(a, std::vector<double>{1}), ShapeError);

  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 100; ++rep) {
    auto y = random_vec(32, rng);
    auto yhat = random_vec(32, rng);
    double direct = 0.0;
    for (size_t i = 0; i < y.size(); ++i) direct += std::abs(y[i] - yhat[i]);
    direct /= static_cast<double>(y.size());
    CHECK(std::abs(mae(y, yhat) - direct) < 1e-12);
  }
}

TEST_CASE("rmse: values and the Jensen bound") {
  std::vector<double> z{0, 0};
  CHECK(rmse(z, z) == 0.0);
  CHECK(rmse(z, std::vector<double>{1, 1}) == doctest::Approx(1.0));
  CHECK(rmse(z, std::vector<double>{0, 2}) ==
        doctest::Approx(std::sqrt(2.0)));

  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 200; ++rep) {
    auto y = random_vec(16, rng);
    auto yhat = random_vec(16, rng);
    CHECK(rmse(y, yhat) >= mae(y, yhat) - 1e-15);
  }
}

TEST_CASE("smape: bounds, symmetry, zero conventions") {
  std::vector<double> y{1, 2, 3};
  CHECK(smape(y, y) == 0.0);
  CHECK(smape(std::vector<double>{1}, std::vector<double>{0}) ==
        doctest::Approx(200.0));
  CHECK(smape(std::vector<double>{0}, std::vector<double>{0}) == 0.0);

  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    auto a = random_vec(20, rng);
    auto b = random_vec(20, rng);
    const double s = smape(a, b);
    CHECK(s >= 0.0);
    CHECK(s <= 200.0);
    CHECK(smape(b, a) == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("mase: unit scale and degenerate denominator") {
  std::vector<double> train{0, 1, 2, 3};
  CHECK(mase(std::vector<double>{5}, std::vector<double>{5}, train) == 0.0);
  CHECK(mase(std::vector<double>{5}, std::vector<double>{4}, train) ==
        doctest::Approx(1.0));
  std::vector<double> constant{2, 2, 2};
  CHECK_THROWS_AS(
      mase(std::vector<double>{1}, std::vector<double>{0}, constant),
      NumericError);
  CHECK_THROWS_AS(naive_scale(std::vector<double>{1}), DataError);
}

TEST_CASE("mase: brute-force formula oracle") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 100; ++rep) {
    auto train = random_vec(40, rng);
    auto y = random_vec(8, rng);
    auto yhat = random_vec(8, rng);
    double denom = 0.0;
    for (size_t i = 1; i < train.size(); ++i) {
      denom += std::abs(train[i] - train[i - 1]);
    }
    denom /= static_cast<double>(train.size() - 1);
    double num = 0.0;
    for (size_t i = 0; i < y.size(); ++i) num += std::abs(y[i] - yhat[i]);
    num /= static_cast<double>(y.size());
    CHECK(std::abs(mase(y, yhat, train) - num / denom) < 1e-12);
  }
}

TEST_CASE("mase: invariant under common rescaling") {
  std::mt19937_64 rng(5);
  auto train = random_vec(30, rng);
  auto y = random_vec(6, rng);
  auto yhat = random_vec(6, rng);
  const double base = mase(y, yhat, train);
  for (double c : {0.01, 3.0, 1000.0}) {
    auto scale_all = [c](std::vector<double> v) {
      for (double& x : v) x *= c;
      return v;
    };
    CHECK(mase(scale_all(y), scale_all(yhat), scale_all(train)) ==
          doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("confidence_interval: hand case and scaling law") {
  auto ci = confidence_interval(std::vector<double>{0, 2});
  CHECK(ci.mean == doctest::Approx(1.0));
  // Sample std is sqrt(2); half width 1.96*sqrt(2)/sqrt(2) = 1.96.
  CHECK(ci.half_width == doctest::Approx(1.96));

  auto flat = confidence_interval(std::vector<double>{3, 3, 3, 3});
  CHECK(flat.half_width == 0.0);

  CHECK_THROWS_AS(confidence_interval(std::vector<double>{1}), DataError);

  // Replicating the same values n times shrinks the width as 1/sqrt(n).
  std::mt19937_64 rng(6);
  auto base = random_vec(50, rng);
  std::vector<double> repeated;
  for (int rep = 0; rep < 4; ++rep) {
    repeated.insert(repeated.end(), base.begin(), base.end());
  }
  const double w1 = confidence_interval(base).half_width;
  const double w4 = confidence_interval(repeated).half_width;
  CHECK(w4 == doctest::Approx(w1 / 2.0).epsilon(0.01));
}

TEST_CASE("utilization: single decision and degenerate cases") {
  RoutingDecision d;
  d.k = 2;
  d.selected = {3, 7};
  d.probs = Tensor::zeros({1, 1, 8});
  d.weights = Tensor::zeros({1, 1, 8});
  UtilizationCounter counter(8);
  counter.add(d);
  Utilization u = counter.finish();
  CHECK(u.frequencies[3] == doctest::Approx(0.5));
  CHECK(u.frequencies[7] == doctest::Approx(0.5));
  CHECK(u.distinct_sets == 1);

  // Same pair for every token keeps the distinct-set count at one.
  RoutingDecision many;
  many.k = 2;
  for (int t = 0; t < 100; ++t) {
    many.selected.push_back(1);
    many.selected.push_back(4);
  }
  UtilizationCounter c2(8);
  c2.add(many);
  CHECK(c2.finish().distinct_sets == 1);
  // Order within the slot does not create a new set.
  RoutingDecision swapped;
  swapped.k = 2;
  swapped.selected = {4, 1};
  c2.add(swapped);
  CHECK(c2.finish().distinct_sets == 1);
}

TEST_CASE("utilization: frequencies sum to one and approach uniform") {
  std::mt19937_64 rng(7);
  const int64_t experts = 8, k = 2, tokens = 10000;
  RoutingDecision d;
  d.k = k;
  std::uniform_int_distribution<int> pick(0, experts - 1);
  for (int64_t t = 0; t < tokens; ++t) {
    int a = pick(rng);
    int b = pick(rng);
    while (b == a) b = pick(rng);
    d.selected.push_back(a);
    d.selected.push_back(b);
  }
  UtilizationCounter counter(experts);
  counter.add(d);
  Utilization u = counter.finish();
  double total = 0.0;
  for (double f : u.frequencies) {
    total += f;
    CHECK(std::abs(f - 1.0 / experts) < 0.05);
  }
  CHECK(std::abs(total - 1.0) < 1e-9);
  CHECK(u.entropy > 0.0);
}
