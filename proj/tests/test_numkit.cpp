#include <atomic>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "dstein/numkit.hpp"

using namespace dstein;

TEST_CASE("random stream is deterministic per seed") {
  RandomStream a(17), b(17), c(18);
  bool all_equal = true, any_differ = false;
  for (int i = 0; i < 100; ++i) {
    const double va = a.uniform(), vb = b.uniform(), vc = c.uniform();
    all_equal = all_equal && va == vb;
    any_differ = any_differ || va != vc;
  }
  CHECK(all_equal);
  CHECK(any_differ);
}

TEST_CASE("spawned streams are unrelated to the parent and each other") {
  RandomStream root(7);
  RandomStream s0 = root.spawn(0), s1 = root.spawn(1);
  RandomStream s0b = RandomStream(7).spawn(0);
  int differ01 = 0;
  bool s0_repeatable = true;
  for (int i = 0; i < 50; ++i) {
    const double v0 = s0.uniform();
    if (v0 != s1.uniform()) ++differ01;
    s0_repeatable = s0_repeatable && v0 == s0b.uniform();
  }
  CHECK(differ01 > 45);
  CHECK(s0_repeatable);
}

TEST_CASE("uniform stays in the open unit interval with the right mean") {
  RandomStream rng(1);
  double sum = 0.0;
  bool in_range = true;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    in_range = in_range && u > 0.0 && u < 1.0;
    sum += u;
  }
  CHECK(in_range);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("uniform(lo, hi) respects its bounds") {
  RandomStream rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-3.0, 5.0);
    REQUIRE(v >= -3.0);
    REQUIRE(v < 5.0);
  }
}

TEST_CASE("normal draws have standard moments") {
  RandomStream rng(3);
  const int n = 40000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(var == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("uniform_int covers its range") {
  RandomStream rng(4);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const std::uint64_t v = rng.uniform_int(7);
    REQUIRE(v < 7);
    counts[v]++;
  }
  for (int k = 0; k < 7; ++k) CHECK(counts[k] > 700);
}

TEST_CASE("normal cdf matches tabulated values") {
  CHECK(std_normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std_normal_cdf(1.959963984540054) ==
        doctest::Approx(0.975).epsilon(1e-10));
  CHECK(std_normal_cdf(-1.0) ==
        doctest::Approx(0.15865525393145707).epsilon(1e-10));
  CHECK(std_normal_cdf(3.0) ==
        doctest::Approx(0.9986501019683699).epsilon(1e-10));
}

TEST_CASE("normal pdf matches the closed form") {
  for (double x : {-2.5, -1.0, 0.0, 0.3, 4.0}) {
    const double expected = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    CHECK(std_normal_pdf(x) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("cdf and quantile are mutually inverse") {
  // Above x ~ 5.5 the cdf saturates toward 1 in double precision, so the
  // round trip is only meaningful below that.
  for (double x = -8.0; x <= 5.5; x += 0.25)
    CHECK(std_normal_quantile(std_normal_cdf(x)) ==
          doctest::Approx(x).epsilon(1e-9));
  for (double u : {1e-10, 1e-4, 0.2, 0.5, 0.77, 1.0 - 1e-4, 1.0 - 1e-10})
    CHECK(std_normal_cdf(std_normal_quantile(u)) ==
          doctest::Approx(u).epsilon(1e-11));
}

TEST_CASE("rbf kernel value matches the closed form") {
  Vec x(2), y(2);
  x << 1.0, 2.0;
  y << -1.0, 0.5;
  const double h = 0.7;
  const double r2 = (x - y).squaredNorm();
  RbfKernel kernel(h);
  CHECK(kernel.eval(x, y) == doctest::Approx(std::exp(-r2 / h)).epsilon(1e-14));
  CHECK(kernel.eval(x, x) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rbf_eval(x, y, h) == doctest::Approx(kernel.eval(x, y)));
}

TEST_CASE("rbf gradient matches central finite differences") {
  RandomStream rng(5);
  const double h = 1.3, eps = 1e-6;
  RbfKernel kernel(h);
  for (int trial = 0; trial < 20; ++trial) {
    Vec x(3), y(3);
    for (int i = 0; i < 3; ++i) {
      x[i] = rng.normal();
      y[i] = rng.normal();
    }
    const Vec g = kernel.grad_first(x, y);
    for (int i = 0; i < 3; ++i) {
      Vec xp = x, xm = x;
      xp[i] += eps;
      xm[i] -= eps;
      const double fd = (kernel.eval(xp, y) - kernel.eval(xm, y)) / (2 * eps);
      CHECK(g[i] == doctest::Approx(fd).epsilon(1e-5));
    }
    CHECK(rbf_grad_first(x, y, h).isApprox(g, 1e-14));
  }
}

TEST_CASE("rbf trace term matches nested finite differences") {
  RandomStream rng(6);
  const double h = 0.9, eps = 1e-4;
  RbfKernel kernel(h);
  for (int trial = 0; trial < 10; ++trial) {
    Vec x(3), y(3);
    for (int i = 0; i < 3; ++i) {
      x[i] = rng.normal();
      y[i] = rng.normal();
    }
    double fd = 0.0;
    for (int i = 0; i < 3; ++i) {
      Vec xp = x, xm = x, yp = y, ym = y;
      xp[i] += eps;
      xm[i] -= eps;
      yp[i] += eps;
      ym[i] -= eps;
      fd += (kernel.eval(xp, yp) - kernel.eval(xp, ym) - kernel.eval(xm, yp) +
             kernel.eval(xm, ym)) /
            (4 * eps * eps);
    }
    CHECK(kernel.trace_term(x, y) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("median bandwidth hand cases") {
  // Two points at distance 3: the only pairwise distance is the median.
  Mat two(2, 1);
  two << 0.0, 3.0;
  CHECK(median_bandwidth(two) ==
        doctest::Approx(9.0 / (2.0 * std::log(3.0))).epsilon(1e-12));

  // Collinear points 0, 1, 2: distances {1, 1, 2}, lower median 1.
  Mat three(3, 1);
  three << 0.0, 1.0, 2.0;
  CHECK(median_bandwidth(three) ==
        doctest::Approx(1.0 / (2.0 * std::log(4.0))).epsilon(1e-12));

  // Identical points degenerate to the floor.
  Mat same = Mat::Constant(5, 2, 1.5);
  CHECK(median_bandwidth(same) == doctest::Approx(1e-6));
}

TEST_CASE("adam first step has unit scaled magnitude") {
  AdamState adam(3, 0.01);
  Vec grad(3);
  grad << 2.0, -0.5, 0.0;
  const Vec inc = adam.update(grad);
  CHECK(inc[0] == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(inc[1] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(inc[2] == doctest::Approx(0.0));
  CHECK(adam.step_count() == 1);
}

TEST_CASE("adam keeps following a constant gradient") {
  AdamState adam(1, 0.1);
  Vec grad(1);
  grad << -4.0;
  double total = 0.0;
  for (int i = 0; i < 50; ++i) total += adam.update(grad)[0];
  CHECK(total < -0.1 * 49 * 0.9);
  CHECK(adam.step_count() == 50);
}

TEST_CASE("parallel_for visits every index exactly once") {
  const std::size_t n = 1000;
  std::vector<std::atomic<int>> hits(n);
  for (auto& h : hits) h = 0;
  parallel_for(n, [&](std::size_t i) { hits[i]++; });
  bool all_once = true;
  for (auto& h : hits) all_once = all_once && h == 1;
  CHECK(all_once);
}
