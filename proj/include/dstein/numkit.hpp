#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace dstein {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Seeded pseudo-random stream. Backed by std::mt19937_64, whose output
// sequence is fixed by the standard, so identical seeds give identical
// draws on every platform. Normal draws go through the inverse CDF so
// they are reproducible too (std::normal_distribution is not portable).
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : gen_(seed), seed_(seed) {}

  // Uniform on the open interval (0, 1).
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);
  // Standard normal via inverse-CDF transform.
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n);
  std::uint64_t raw() { return gen_(); }

  // Derive an independent stream for a sub-task; mixes the child index
  // so (seed, k) pairs give unrelated sequences.
  RandomStream spawn(std::uint64_t k) const;

 private:
  RandomStream(std::uint64_t seed, std::uint64_t k);
  std::mt19937_64 gen_;
  std::uint64_t seed_;
};

// RBF kernel k(x, y) = exp(-|x - y|^2 / h).
struct RbfKernel {
  double bandwidth;  // h > 0

  explicit RbfKernel(double h);

  double eval(const Vec& x, const Vec& y) const;
  // Gradient in the first argument: (-2/h) (x - y) k(x, y).
  Vec grad_first(const Vec& x, const Vec& y) const;
  // div_x div_y k = (2d/h - 4|x-y|^2/h^2) k(x, y), closed form.
  double trace_term(const Vec& x, const Vec& y) const;
};

double rbf_eval(const Vec& x, const Vec& y, double h);
Vec rbf_grad_first(const Vec& x, const Vec& y, double h);

// Median heuristic: h = med^2 / (2 log(n+1)) where med is the (lower)
// median of all pairwise Euclidean distances between particle rows.
// Degenerate zero median falls back to 1e-6.
double median_bandwidth(const Mat& particles);

// Adam optimizer state for a single parameter vector.
class AdamState {
 public:
  AdamState(Eigen::Index dim, double step_size = 1e-4, double beta1 = 0.9,
            double beta2 = 0.999, double eps = 1e-8);

  // Returns the increment for a gradient-ascent step in the direction of
  // `grad` (same sign); first/second moments and step count are advanced.
  Vec update(const Vec& grad);

  std::int64_t step_count() const { return step_count_; }
  double step_size() const { return step_size_; }

 private:
  Vec m_, v_;
  std::int64_t step_count_ = 0;
  double step_size_, beta1_, beta2_, eps_;
};

// Standard normal CDF / quantile, mutually inverse to ~1e-15.
double std_normal_cdf(double x);
double std_normal_pdf(double x);
// Rational approximation refined by one Newton step on the CDF.
// Argument must lie strictly inside (0, 1).
double std_normal_quantile(double u);

// Runs fn(i) for i in [0, n) over a small thread pool. Thread count is
// capped by the DISCRETE_STEIN_THREADS environment variable. Each index
// is processed exactly once; writes must go to per-index slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace dstein
