#include "dstein/numkit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>

namespace dstein {

double RandomStream::uniform() {
  // 53 random bits, shifted into the open unit interval.
  const std::uint64_t bits = gen_() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1p-53;
}

double RandomStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RandomStream::normal() { return std_normal_quantile(uniform()); }

std::uint64_t RandomStream::uniform_int(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
  // Rejection to avoid modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = gen_();
  } while (x >= limit);
  return x % n;
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t k) : gen_(0) {
  // splitmix64 finalizer mixes (seed, k) into an unrelated child seed.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z = z ^ (z >> 31);
  gen_.seed(z);
  seed_ = z;
}

RandomStream RandomStream::spawn(std::uint64_t k) const {
  return RandomStream(seed_, k);
}

RbfKernel::RbfKernel(double h) : bandwidth(h) {
  if (!(h > 0.0)) throw std::invalid_argument("RbfKernel: bandwidth must be positive");
}

namespace {
void check_dims(const Vec& x, const Vec& y, const char* who) {
  if (x.size() != y.size())
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
}
}  // namespace

double RbfKernel::eval(const Vec& x, const Vec& y) const {
  check_dims(x, y, "RbfKernel::eval");
  return std::exp(-(x - y).squaredNorm() / bandwidth);
}

Vec RbfKernel::grad_first(const Vec& x, const Vec& y) const {
  check_dims(x, y, "RbfKernel::grad_first");
  const double k = std::exp(-(x - y).squaredNorm() / bandwidth);
  return (-2.0 / bandwidth) * k * (x - y);
}

double RbfKernel::trace_term(const Vec& x, const Vec& y) const {
  check_dims(x, y, "RbfKernel::trace_term");
  const double sq = (x - y).squaredNorm();
  const double k = std::exp(-sq / bandwidth);
  const double d = static_cast<double>(x.size());
  return (2.0 * d / bandwidth - 4.0 * sq / (bandwidth * bandwidth)) * k;
}

double rbf_eval(const Vec& x, const Vec& y, double h) {
  return RbfKernel(h).eval(x, y);
}

Vec rbf_grad_first(const Vec& x, const Vec& y, double h) {
  return RbfKernel(h).grad_first(x, y);
}

double median_bandwidth(const Mat& particles) {
  const Eigen::Index n = particles.rows();
  if (n < 2)
    throw std::invalid_argument("median_bandwidth: need at least 2 particles");
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      dists.push_back((particles.row(i) - particles.row(j)).norm());
  // Lower median for even counts.
  const std::size_t mid = (dists.size() - 1) / 2;
  std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
  const double med = dists[mid];
  if (med == 0.0) return 1e-6;
  return med * med / (2.0 * std::log(static_cast<double>(n) + 1.0));
}

AdamState::AdamState(Eigen::Index dim, double step_size, double beta1,
                     double beta2, double eps)
    : m_(Vec::Zero(dim)),
      v_(Vec::Zero(dim)),
      step_size_(step_size),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {
  if (!(step_size > 0.0))
    throw std::invalid_argument("AdamState: step size must be positive");
}

Vec AdamState::update(const Vec& grad) {
  if (grad.size() != m_.size())
    throw std::invalid_argument("AdamState::update: dimension mismatch");
  ++step_count_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double t = static_cast<double>(step_count_);
  const Vec mhat = m_ / (1.0 - std::pow(beta1_, t));
  const Vec vhat = v_ / (1.0 - std::pow(beta2_, t));
  return (step_size_ * mhat.array() / (vhat.array().sqrt() + eps_)).matrix();
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

double std_normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0))
    throw std::invalid_argument("std_normal_quantile: argument must be in (0,1)");
  // Acklam's rational approximation, then one Newton step on the CDF.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (u < plow) {
    const double q = std::sqrt(-2.0 * std::log(u));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (u <= 1.0 - plow) {
    const double q = u - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - u));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double pdf = std_normal_pdf(x);
  if (pdf > 0.0) x -= (std_normal_cdf(x) - u) / pdf;
  return x;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  unsigned threads = std::thread::hardware_concurrency();
  if (threads == 0) threads = 1;
  if (const char* env = std::getenv("DISCRETE_STEIN_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) threads = std::min<unsigned>(threads, static_cast<unsigned>(cap));
  }
  threads = std::min<unsigned>(threads, static_cast<unsigned>(n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  std::atomic<std::size_t> next{0};
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace dstein
