#include <cmath>
#include <memory>
#include <vector>

#include <doctest.h>

#include "dstein/transform.hpp"

using namespace dstein;

namespace {

std::shared_ptr<const DiscreteModel> fig2_categorical() {
  return std::make_shared<const CategoricalModel>(
      std::vector<double>{1.0, 2.0, 3.0, 4.0, 5.0},
      std::vector<double>{0.1, 0.2, 0.25, 0.15, 0.3});
}

}  // namespace

TEST_CASE("standard gaussian base matches the normal cdf and quantile") {
  BaseComponent base;
  CHECK(base.is_std_gaussian());
  for (double x : {-2.0, -0.3, 0.0, 1.4}) {
    CHECK(base.cdf(x) == doctest::Approx(std_normal_cdf(x)).epsilon(1e-12));
    CHECK(base.log_pdf(x) ==
          doctest::Approx(std::log(std_normal_pdf(x))).epsilon(1e-12));
    CHECK(base.quantile(base.cdf(x)) == doctest::Approx(x).epsilon(1e-9));
  }
}

TEST_CASE("mixture base density matches a direct sum of components") {
  BaseComponent mix({0.3, 0.7}, {-2.0, 1.5});
  for (double x : {-3.0, -1.0, 0.0, 2.0}) {
    const double direct = 0.3 * std_normal_pdf(x + 2.0) +
                          0.7 * std_normal_pdf(x - 1.5);
    CHECK(std::exp(mix.log_pdf(x)) == doctest::Approx(direct).epsilon(1e-12));
    const double cdf = 0.3 * std_normal_cdf(x + 2.0) +
                       0.7 * std_normal_cdf(x - 1.5);
    CHECK(mix.cdf(x) == doctest::Approx(cdf).epsilon(1e-12));
  }
}

TEST_CASE("mixture gradient matches finite differences") {
  BaseComponent mix({0.5, 0.5}, {-1.0, 1.0});
  const double eps = 1e-6;
  for (double x : {-2.5, -0.4, 0.0, 1.2, 3.0}) {
    const double fd = (mix.log_pdf(x + eps) - mix.log_pdf(x - eps)) / (2 * eps);
    CHECK(mix.grad_log_pdf(x) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("mixture quantile inverts the cdf") {
  BaseComponent mix({0.2, 0.5, 0.3}, {-3.0, 0.0, 2.0});
  for (double u : {0.001, 0.1, 0.37, 0.5, 0.81, 0.999})
    CHECK(mix.cdf(mix.quantile(u)) == doctest::Approx(u).epsilon(1e-9));
}

TEST_CASE("even partition gives per-cell base mass 1/K") {
  for (int k = 2; k <= 10; ++k) {
    std::vector<double> labels(k);
    for (int i = 0; i < k; ++i) labels[i] = i;
    SUBCASE("gaussian base") {
      BaseDensity base(1);
      EvenPartition partition(base, {labels});
      const auto& b = partition.boundaries(0);
      REQUIRE(static_cast<int>(b.size()) == k - 1);
      double prev = 0.0;
      for (int j = 0; j < k - 1; ++j) {
        const double mass = base.component(0).cdf(b[j]) - prev;
        CHECK(mass == doctest::Approx(1.0 / k).epsilon(1e-9));
        prev = base.component(0).cdf(b[j]);
      }
      CHECK(1.0 - prev == doctest::Approx(1.0 / k).epsilon(1e-9));
    }
    SUBCASE("mixture base") {
      BaseDensity base({BaseComponent({0.4, 0.6}, {-1.5, 2.0})});
      EvenPartition partition(base, {labels});
      const auto& b = partition.boundaries(0);
      double prev = 0.0;
      for (int j = 0; j < k - 1; ++j) {
        const double mass = base.component(0).cdf(b[j]) - prev;
        CHECK(mass == doctest::Approx(1.0 / k).epsilon(1e-9));
        prev = base.component(0).cdf(b[j]);
      }
      CHECK(1.0 - prev == doctest::Approx(1.0 / k).epsilon(1e-9));
    }
  }
}

TEST_CASE("cells are half open with boundaries in the upper cell") {
  BaseDensity base(1);
  EvenPartition partition(base, {{10.0, 20.0, 30.0, 40.0}});
  const auto& b = partition.boundaries(0);
  for (std::size_t j = 0; j < b.size(); ++j) {
    CHECK(partition.cell_index(0, b[j]) == static_cast<int>(j) + 1);
    CHECK(partition.cell_index(0, std::nextafter(b[j], -10.0)) ==
          static_cast<int>(j));
  }
  CHECK(partition.cell_index(0, -100.0) == 0);
  CHECK(partition.cell_index(0, 100.0) == 3);
}

TEST_CASE("label lookup maps labels to cells and rejects strangers") {
  BaseDensity base(1);
  EvenPartition partition(base, {{-1.0, 1.0}});
  CHECK(partition.label_index(0, -1.0) == 0);
  CHECK(partition.label_index(0, 1.0) == 1);
  CHECK_THROWS(partition.label_index(0, 3.0));
}

TEST_CASE("binary gamma is the sign map with sign(0) = +1") {
  auto ising = std::make_shared<const IsingModel>(2, 2, 0.1);
  const ContinuousParameterization cp = make_gaussian_parameterization(ising);
  Vec x(4);
  x << -0.5, 0.0, 2.0, -3.0;
  Vec expected(4);
  expected << -1.0, 1.0, 1.0, -1.0;
  CHECK(cp.gamma(x).isApprox(expected));
}

TEST_CASE("log_pc is the base log pdf plus the discrete log mass") {
  auto model = fig2_categorical();
  const ContinuousParameterization cp = make_gaussian_parameterization(model);
  RandomStream rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    Vec x(1);
    x << 2.0 * rng.normal();
    const double expected =
        cp.base().log_pdf(x) + model->log_mass(cp.gamma(x));
    CHECK(cp.log_pc(x) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("exact sampler matches enumerated cell probabilities") {
  auto model = fig2_categorical();
  const ContinuousParameterization cp = make_gaussian_parameterization(model);
  RandomStream rng(22);
  const int n = 20000;
  std::vector<int> counts(5, 0);
  for (int i = 0; i < n; ++i) {
    const Vec x = cp.sample_exact(rng);
    counts[cp.partition().cell_index(0, x[0])]++;
  }
  const std::vector<double> expected = {0.1, 0.2, 0.25, 0.15, 0.3};
  double chi2 = 0.0;
  for (int k = 0; k < 5; ++k) {
    const double e = n * expected[k];
    chi2 += (counts[k] - e) * (counts[k] - e) / e;
  }
  CHECK(chi2 < 18.47);  // chi-square(4), p = 0.001
}

TEST_CASE("exact samples are uniform in base measure within each cell") {
  auto model = fig2_categorical();
  const ContinuousParameterization cp = make_gaussian_parameterization(model);
  RandomStream rng(23);
  const int n = 5000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec x = cp.sample_exact(rng);
    const int j = cp.partition().cell_index(0, x[0]);
    const double u = cp.base().component(0).cdf(x[0]);
    const double within = u * 5.0 - j;  // cell mass is exactly 1/5
    REQUIRE(within >= 0.0);
    REQUIRE(within <= 1.0);
    sum += within;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("discrete data converts to continuous points in the same cells") {
  auto ising = std::make_shared<const IsingModel>(2, 2, 0.3);
  const ContinuousParameterization cp = make_gaussian_parameterization(ising);
  RandomStream rng(24);
  std::vector<Vec> data;
  for (int i = 0; i < 50; ++i) {
    Vec z(4);
    for (int j = 0; j < 4; ++j) z[j] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    data.push_back(z);
  }
  const std::vector<Vec> continuous = cp.discrete_to_continuous(data, rng);
  REQUIRE(continuous.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    CHECK(cp.gamma(continuous[i]).isApprox(data[i]));
}

TEST_CASE("cell-integrated p_c mass reproduces the categorical target") {
  auto model = fig2_categorical();
  const ContinuousParameterization cp = make_gaussian_parameterization(model);
  const auto& boundaries = cp.partition().boundaries(0);
  // Simpson quadrature of exp(log_pc) over each cell, tails truncated at 10.
  std::vector<double> masses;
  double total = 0.0;
  for (int j = 0; j < 5; ++j) {
    const double lo = j == 0 ? -10.0 : boundaries[j - 1];
    const double hi = j == 4 ? 10.0 : boundaries[j];
    const int steps = 4000;
    const double w = (hi - lo) / steps;
    // Cells are half open, so the shared boundary point belongs to the next
    // cell; clamp the top evaluation just inside.
    const double top = std::nextafter(hi, lo);
    const auto f = [&](double x) {
      Vec v(1);
      v << std::min(x, top);
      return std::exp(cp.log_pc(v));
    };
    double integral = 0.0;
    for (int s = 0; s < steps; ++s) {
      const double a = lo + s * w;
      integral += w / 6.0 * (f(a) + 4.0 * f(a + w / 2) + f(a + w));
    }
    masses.push_back(integral);
    total += integral;
  }
  const std::vector<double> expected = {0.1, 0.2, 0.25, 0.15, 0.3};
  for (int j = 0; j < 5; ++j)
    CHECK(masses[j] / total == doctest::Approx(expected[j]).epsilon(1e-6));
}

TEST_CASE("base-only surrogate score is the base gradient") {
  auto ising = std::make_shared<const IsingModel>(2, 2, 0.2);
  const ContinuousParameterization cp = make_gaussian_parameterization(ising);
  const Surrogate surrogate(cp, SurrogateMode::kBaseOnly);
  Vec x(4);
  x << 0.5, -1.0, 2.0, 0.0;
  CHECK(surrogate.score(x).isApprox(cp.base().grad_log_pdf(x), 1e-12));
  CHECK(surrogate.score(x).isApprox(-x, 1e-12));
}

TEST_CASE("smooth surrogate score matches finite differences") {
  auto ising = std::make_shared<const IsingModel>(2, 2, 0.6);
  const ContinuousParameterization cp = make_gaussian_parameterization(ising);
  const Surrogate surrogate(cp, SurrogateMode::kSmoothRelaxed);
  RandomStream rng(25);
  const double eps = 1e-6;
  for (int trial = 0; trial < 10; ++trial) {
    Vec x(4);
    for (int i = 0; i < 4; ++i) x[i] = 1.5 * rng.normal();
    const Vec score = surrogate.score(x);
    for (int i = 0; i < 4; ++i) {
      Vec xp = x, xm = x;
      xp[i] += eps;
      xm[i] -= eps;
      const double fd =
          (surrogate.log_density(xp) - surrogate.log_density(xm)) / (2 * eps);
      CHECK(score[i] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("custom surrogate forwards the provided callbacks") {
  const Surrogate surrogate = Surrogate::custom(
      [](const Vec& x) { return -x.squaredNorm(); },
      [](const Vec& x) { return Vec(-2.0 * x); });
  Vec x(2);
  x << 1.0, -2.0;
  CHECK(surrogate.log_density(x) == doctest::Approx(-5.0));
  CHECK(surrogate.score(x).isApprox(-2.0 * x));
}
