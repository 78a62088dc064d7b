#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "chattymaps/validation.hpp"

using namespace chattymaps;

TEST_CASE("weighted level of a uniform 60 dB day") {
  // 14h at 60, 2h at 65, 8h at 70 -> 10 log10((14*1e6 + 2*10^6.5 + 8*1e7)/24)
  REQUIRE(validation::ewl(60, 60, 60) == Catch::Approx(66.2117).margin(1e-3));
}

TEST_CASE("a constant day shifts the level by a fixed offset") {
  double offset = 10.0 * std::log10((14.0 + 2.0 * std::sqrt(10.0) + 80.0) / 24.0);
  for (double v : {20.0, 45.0, 73.5, 100.0})
    REQUIRE(validation::ewl(v, v, v) == Catch::Approx(v + offset).margin(1e-9));
}

TEST_CASE("weighted level reacts to each period") {
  double base = validation::ewl(60, 55, 50);
  REQUIRE(validation::ewl(61, 55, 50) > base);
  REQUIRE(validation::ewl(60, 56, 50) > base);
  REQUIRE(validation::ewl(60, 55, 51) > base);
  // when night dominates the energy a night bump outweighs a day bump
  REQUIRE(validation::ewl(50, 55, 61) > validation::ewl(51, 55, 60));
  // zero penalties and equal periods reduce to the plain level
  REQUIRE(validation::ewl(60, 60, 60, 0, 0) == Catch::Approx(60.0).margin(1e-12));
}

TEST_CASE("default sweep thresholds ascend") {
  auto th = validation::default_thresholds();
  REQUIRE(th.front() == 1);
  REQUIRE(th.back() == 200);
  for (std::size_t i = 1; i < th.size(); ++i) REQUIRE(th[i] > th[i - 1]);
}

TEST_CASE("sweep input validation") {
  std::vector<std::array<double, kSoundCategoryCount>> fr(30);
  std::vector<std::uint64_t> tags(29);
  std::vector<double> metric(30), xs(30), ys(30);
  REQUIRE_THROWS_AS(validation::noise_correlation_sweep(fr, tags, metric, xs, ys), InputError);

  std::vector<std::uint64_t> tags30(30, 5);
  REQUIRE_THROWS_AS(
      validation::noise_correlation_sweep(fr, tags30, metric, xs, ys, {10, 10}),
      InputError);
  REQUIRE_THROWS_AS(
      validation::noise_correlation_sweep(fr, tags30, metric, xs, ys, {25, 10}),
      InputError);
}

TEST_CASE("sweep drops thin thresholds with a warning") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  const std::size_t n = 40;
  std::vector<std::array<double, kSoundCategoryCount>> fr(n);
  std::vector<std::uint64_t> tags(n);
  std::vector<double> metric(n), xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    double t = u(rng);
    fr[i] = {t, 1 - t, 0, 0, 0, 0};
    tags[i] = i < 25 ? 10 : 3;  // 40 at threshold 1, 25 at 10, none at 50
    metric[i] = 50 + 20 * t + u(rng);
    xs[i] = u(rng) * 1000;
    ys[i] = u(rng) * 1000;
  }

  auto res = validation::noise_correlation_sweep(fr, tags, metric, xs, ys, {1, 10, 50});
  // two surviving thresholds, six categories each
  REQUIRE(res.points.size() == 2 * kSoundCategoryCount);
  REQUIRE(res.warnings.size() == 1);
  REQUIRE(res.warnings[0].find("50") != std::string::npos);

  for (const auto& pt : res.points) {
    REQUIRE((pt.threshold == 1 || pt.threshold == 10));
    REQUIRE(pt.n == (pt.threshold == 1 ? 40u : 25u));
    if (pt.category == SoundCategory::transport) {
      REQUIRE(pt.defined);
      REQUIRE(pt.rho > 0.9);  // the metric is built from the transport fraction
    }
    if (pt.category == SoundCategory::music) {
      REQUIRE_FALSE(pt.defined);  // constant zero fraction has no ranks
    }
  }
}

TEST_CASE("sweep counts segments at exactly the threshold") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  const std::size_t n = 24;
  std::vector<std::array<double, kSoundCategoryCount>> fr(n);
  std::vector<std::uint64_t> tags(n, 7);
  std::vector<double> metric(n), xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    double t = u(rng);
    fr[i] = {t, 1 - t, 0, 0, 0, 0};
    metric[i] = t;
    xs[i] = u(rng) * 100;
    ys[i] = u(rng) * 100;
  }
  auto res = validation::noise_correlation_sweep(fr, tags, metric, xs, ys, {7});
  REQUIRE(res.points.size() == kSoundCategoryCount);
  REQUIRE(res.warnings.empty());
  REQUIRE(res.points[0].n == n);

  auto above = validation::noise_correlation_sweep(fr, tags, metric, xs, ys, {8});
  REQUIRE(above.points.empty());
  REQUIRE(above.warnings.size() == 1);
}
