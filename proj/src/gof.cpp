#include "dstein/gof.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace dstein {

double kappa_rho(const Vec& x, const Vec& y, const Surrogate& surrogate,
                 const RbfKernel& kernel) {
  const Vec sx = surrogate.score(x);
  const Vec sy = surrogate.score(y);
  if (!sx.allFinite() || !sy.allFinite())
    throw std::runtime_error("kappa_rho: non-finite surrogate score");
  const double h = kernel.bandwidth;
  const Vec diff = x - y;
  const double k = std::exp(-diff.squaredNorm() / h);
  const Vec grad_y = (2.0 / h) * k * diff;   // d/dy exp(-|x-y|^2/h)
  const Vec grad_x = -grad_y;
  const double trace = kernel.trace_term(x, y);
  return sx.dot(sy) * k + sx.dot(grad_y) + sy.dot(grad_x) + trace;
}

Vec gof_weights(const std::vector<Vec>& data,
                const ContinuousParameterization& cp,
                const Surrogate& surrogate) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  Vec logw(n);
  double max_logw = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lpc = cp.log_pc(data[i]);
    if (!std::isfinite(lpc))
      throw std::invalid_argument("gof_weights: point " + std::to_string(i) +
                                  " has zero mass under the null model");
    logw[i] = surrogate.log_density(data[i]) - lpc;
    max_logw = std::max(max_logw, logw[i]);
  }
  Vec w = (logw.array() - max_logw).exp();
  w *= static_cast<double>(n) / w.sum();  // self-normalize to mean 1
  return w;
}

Mat weighted_stein_matrix(const std::vector<Vec>& data,
                          const ContinuousParameterization& cp,
                          const Surrogate& surrogate, const RbfKernel& kernel) {
  const std::size_t n = data.size();
  if (n < 2) throw std::invalid_argument("weighted_stein_matrix: need n >= 2");
  const Vec w = gof_weights(data, cp, surrogate);

  std::vector<Vec> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = surrogate.score(data[i]);

  const double h = kernel.bandwidth;
  Mat a = Mat::Zero(n, n);
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const Vec diff = data[i] - data[j];
      const double sq = diff.squaredNorm();
      const double k = std::exp(-sq / h);
      const double d = static_cast<double>(diff.size());
      const double trace = (2.0 * d / h - 4.0 * sq / (h * h)) * k;
      const double cross = (2.0 / h) * k * (scores[i] - scores[j]).dot(diff);
      const double kappa = scores[i].dot(scores[j]) * k + cross + trace;
      a(i, j) = w[i] * kappa * w[j];
    }
  });
  return a;
}

double gfksd_ustat(const std::vector<Vec>& data,
                   const ContinuousParameterization& cp,
                   const Surrogate& surrogate, const RbfKernel& kernel) {
  const Mat a = weighted_stein_matrix(data, cp, surrogate, kernel);
  const double n = static_cast<double>(data.size());
  return a.sum() / (n * (n - 1.0));
}

std::vector<double> bootstrap_replicates(const Mat& weighted_matrix, int m,
                                         RandomStream& rng) {
  const Eigen::Index n = weighted_matrix.rows();
  if (n < 2 || weighted_matrix.cols() != n)
    throw std::invalid_argument("bootstrap_replicates: bad matrix shape");
  if (m < 1) throw std::invalid_argument("bootstrap_replicates: m must be >= 1");
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> out;
  out.reserve(m);
  Vec v(n);
  for (int rep = 0; rep < m; ++rep) {
    v.setConstant(-inv_n);
    for (Eigen::Index draw = 0; draw < n; ++draw)
      v[static_cast<Eigen::Index>(rng.uniform_int(n))] += inv_n;
    // Diagonal of the matrix is zero, so this is the i != j sum.
    out.push_back(v.dot(weighted_matrix * v));
  }
  return out;
}

GofResult run_gof_test(const std::vector<Vec>& discrete_data,
                       const ContinuousParameterization& null_cp,
                       const GofConfig& config) {
  if (discrete_data.size() < 2)
    throw std::invalid_argument("run_gof_test: need at least 2 data points");
  if (!(config.alpha > 0.0 && config.alpha < 1.0))
    throw std::invalid_argument("run_gof_test: alpha must be in (0,1)");
  if (config.bootstrap_count < 100)
    throw std::invalid_argument("run_gof_test: bootstrap count must be >= 100");

  RandomStream rng(config.seed);
  const std::vector<Vec> x = null_cp.discrete_to_continuous(discrete_data, rng);

  Mat points(x.size(), null_cp.dim());
  for (std::size_t i = 0; i < x.size(); ++i) points.row(i) = x[i].transpose();
  const double h = median_bandwidth(points);

  const Surrogate surrogate(null_cp, config.surrogate_mode);
  const RbfKernel kernel(h);
  const Mat a = weighted_stein_matrix(x, null_cp, surrogate, kernel);
  const double n = static_cast<double>(x.size());

  GofResult result;
  result.statistic = a.sum() / (n * (n - 1.0));
  result.bootstrap = bootstrap_replicates(a, config.bootstrap_count, rng);
  int above = 0;
  for (double s : result.bootstrap)
    if (s > result.statistic) ++above;
  const double m = static_cast<double>(config.bootstrap_count);
  result.p_value = config.smooth_p_value ? (above + 1.0) / (m + 1.0)
                                         : above / m;
  result.alpha = config.alpha;
  result.reject = result.p_value < config.alpha;
  return result;
}

double mmd_hamming(const Mat& sample_a, const Mat& sample_b) {
  if (sample_a.cols() != sample_b.cols())
    throw std::invalid_argument("mmd_hamming: dimension mismatch");
  const Eigen::Index na = sample_a.rows(), nb = sample_b.rows();
  if (na < 2 || nb < 2)
    throw std::invalid_argument("mmd_hamming: need at least 2 points per sample");
  const double d = static_cast<double>(sample_a.cols());
  auto kern = [d](const auto& za, const auto& zb) {
    double mismatches = 0.0;
    for (Eigen::Index c = 0; c < za.size(); ++c)
      if (za[c] != zb[c]) mismatches += 1.0;
    return std::exp(-mismatches / d);
  };
  double within_a = 0.0, within_b = 0.0, cross = 0.0;
  for (Eigen::Index i = 0; i < na; ++i)
    for (Eigen::Index j = 0; j < na; ++j)
      if (i != j) within_a += kern(sample_a.row(i), sample_a.row(j));
  for (Eigen::Index i = 0; i < nb; ++i)
    for (Eigen::Index j = 0; j < nb; ++j)
      if (i != j) within_b += kern(sample_b.row(i), sample_b.row(j));
  for (Eigen::Index i = 0; i < na; ++i)
    for (Eigen::Index j = 0; j < nb; ++j)
      cross += kern(sample_a.row(i), sample_b.row(j));
  return within_a / (na * (na - 1.0)) + within_b / (nb * (nb - 1.0)) -
         2.0 * cross / (static_cast<double>(na) * nb);
}

std::string gof_result_json(const GofResult& r, int n, int m, std::uint64_t seed) {
  nlohmann::json j;
  j["statistic"] = r.statistic;
  j["p_value"] = r.p_value;
  j["reject"] = r.reject;
  j["alpha"] = r.alpha;
  j["m"] = m;
  j["n"] = n;
  j["seed"] = seed;
  return j.dump(2);
}

}  // namespace dstein
