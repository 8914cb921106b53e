#include <doctest.h>

#include <cmath>

#include "ets/metrics.hpp"
#include "ets/rng.hpp"
#include "support/oracles.hpp"

using namespace ets;

namespace {

std::pair<std::vector<double>, std::vector<uint8_t>> random_instance(Rng& rng, int max_n,
                                                                     bool with_ties) {
  const int n = static_cast<int>(rng.uniform_int(4, max_n));
  std::vector<double> scores(n);
  std::vector<uint8_t> labels(n);
  bool has_pos = false, has_neg = false;
  for (int i = 0; i < n; ++i) {
    scores[i] = with_ties ? std::round(rng.uniform() * 8) / 8.0 : rng.uniform();
    labels[i] = rng.uniform() < 0.4 ? 1 : 0;
    has_pos |= labels[i];
    has_neg |= !labels[i];
  }
  if (!has_pos) labels[0] = 1;
  if (!has_neg) labels[n - 1] = 0;
  return {scores, labels};
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("auroc: perfect, inverted and mixed rankings") {
  CHECK(auroc({0.9, 0.8, 0.3, 0.2}, {1, 1, 0, 0}) == 1.0);
  CHECK(auroc({0.2, 0.3, 0.8, 0.9}, {1, 1, 0, 0}) == 0.0);
  // Pair counting: 3 of 4 positive/negative pairs correctly ordered.
  const std::vector<double> s{0.9, 0.6, 0.4, 0.2};
  const std::vector<uint8_t> l{1, 0, 1, 0};
  CHECK(oracle::auroc_pairs(s, l) == 0.75);
  CHECK(auroc(s, l) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("auroc matches pair counting with ties; single class rejected") {
  Rng rng = Rng::seeded(61);
  for (int trial = 0; trial < 100; ++trial) {
    auto [s, l] = random_instance(rng, 200, trial % 2 == 0);
    CHECK(auroc(s, l) == doctest::Approx(oracle::auroc_pairs(s, l)).epsilon(1e-9));
  }
  CHECK_THROWS_AS(auroc({0.1, 0.2}, {1, 1}), Error);
  CHECK_THROWS_AS(auroc({0.1, 0.2}, {0, 0}), Error);
}

TEST_CASE("auroc is invariant under strictly increasing transforms") {
  Rng rng = Rng::seeded(62);
  auto [s, l] = random_instance(rng, 300, true);
  std::vector<double> warped(s.size());
  for (size_t i = 0; i < s.size(); ++i) warped[i] = std::exp(3.0 * s[i]) + 7.0;
  CHECK(auroc(s, l) == auroc(warped, l));  // rank statistic: exact
}

TEST_CASE("average precision: anchored examples") {
  CHECK(average_precision({0.9, 0.1}, {1, 0}) == 1.0);
  // Positive ranked last: P = 0 at rank 1, 0.5 at full recall.
  CHECK(oracle::ap_threshold_walk({0.1, 0.9}, {1, 0}) == 0.5);
  CHECK(average_precision({0.1, 0.9}, {1, 0}) == doctest::Approx(0.5).epsilon(1e-12));
  // All-equal scores: single threshold step, AP = positive fraction.
  CHECK(average_precision({0.4, 0.4, 0.4, 0.4}, {1, 0, 1, 0}) == doctest::Approx(0.5));
  CHECK(average_precision({0.4, 0.4, 0.4, 0.4}, {1, 0, 0, 0}) == doctest::Approx(0.25));
  CHECK_THROWS_AS(average_precision({0.1, 0.2}, {0, 0}), Error);
}

TEST_CASE("average precision matches the threshold-walk oracle") {
  Rng rng = Rng::seeded(63);
  for (int trial = 0; trial < 100; ++trial) {
    auto [s, l] = random_instance(rng, 200, trial % 2 == 0);
    CHECK(average_precision(s, l) ==
          doctest::Approx(oracle::ap_threshold_walk(s, l)).epsilon(1e-9));
  }
}

TEST_CASE("connected components: 8-connectivity") {
  Tensor<Real> m = Tensor<Real>::zeros(1, 1, 4, 4);
  m(0, 0, 0, 0) = 1;
  m(0, 0, 1, 1) = 1;  // diagonal neighbor: same region under 8-connectivity
  m(0, 0, 3, 3) = 1;
  auto regions = connected_components(m);
  CHECK(regions.size() == 2);
  CHECK((regions[0].size() == 2 || regions[1].size() == 2));
}

TEST_CASE("pro: exact prediction and half-covered single region") {
  // Prediction equals ground truth: overlap 1 at FPR 0 everywhere.
  Tensor<Real> mask = Tensor<Real>::zeros(1, 1, 8, 8);
  for (int y = 2; y < 4; ++y)
    for (int x = 2; x < 4; ++x) mask(0, 0, y, x) = 1;
  Tensor<Real> map = mask;
  CHECK(pro({map}, {mask}) == doctest::Approx(1.0).epsilon(1e-12));

  // One 4-pixel region, exactly 2 of its pixels predicted and nothing else.
  Tensor<Real> half = Tensor<Real>::zeros(1, 1, 8, 8);
  half(0, 0, 2, 2) = 1;
  half(0, 0, 2, 3) = 1;
  CHECK(pro({half}, {mask}) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pro matches the dense-threshold oracle on random grids") {
  Rng rng = Rng::seeded(64);
  for (int trial = 0; trial < 25; ++trial) {
    const int H = 4 + static_cast<int>(rng.uniform_int(0, 26));
    Tensor<Real> map(1, 1, H, H);
    for (Eigen::Index i = 0; i < map.size(); ++i)
      map.data()[i] = static_cast<Real>(std::round(rng.uniform() * 64) / 64.0);
    Tensor<Real> mask = Tensor<Real>::zeros(1, 1, H, H);
    const int side = 1 + static_cast<int>(rng.uniform_int(0, H / 2 - 1));
    const int y0 = static_cast<int>(rng.uniform_int(0, H - side));
    const int x0 = static_cast<int>(rng.uniform_int(0, H - side));
    for (int y = y0; y < y0 + side; ++y)
      for (int x = x0; x < x0 + side; ++x) mask(0, 0, y, x) = 1;

    // Same threshold grid as the implementation (all unique values).
    std::vector<double> th;
    for (Eigen::Index i = 0; i < map.size(); ++i) th.push_back(map.data()[i]);
    std::sort(th.begin(), th.end(), std::greater<double>());
    th.erase(std::unique(th.begin(), th.end()), th.end());

    const double ref = oracle::pro_dense({map}, {mask}, th, 0.3);
    CHECK(pro({map}, {mask}) == doctest::Approx(ref).epsilon(1e-6));
  }
}

TEST_CASE("pro handles multi-image sets and argument validation") {
  Rng rng = Rng::seeded(65);
  Tensor<Real> normal_map(1, 1, 8, 8);
  for (Eigen::Index i = 0; i < normal_map.size(); ++i)
    normal_map.data()[i] = static_cast<Real>(rng.uniform() * 0.1);
  Tensor<Real> empty_mask = Tensor<Real>::zeros(1, 1, 8, 8);
  Tensor<Real> mask = Tensor<Real>::zeros(1, 1, 8, 8);
  mask(0, 0, 1, 1) = 1;
  Tensor<Real> map = mask;
  const double v = pro({normal_map, map}, {empty_mask, mask});
  CHECK(v >= 0.0);
  CHECK(v <= 1.0);

  CHECK_THROWS_AS(pro({normal_map}, {empty_mask}), Error);       // no regions
  CHECK_THROWS_AS(pro({map}, {mask}, 0.0), Error);               // bad limit
  CHECK_THROWS_AS(pro({map}, {mask}, 1.5), Error);               // bad limit
}

}  // TEST_SUITE
