#pragma once

#include <vector>

#include "dstein/transform.hpp"

namespace dstein {

struct GofConfig {
  int bootstrap_count = 1000;
  double alpha = 0.05;
  SurrogateMode surrogate_mode = SurrogateMode::kBaseOnly;
  // Laplace-style (count+1)/(m+1) p-value smoothing; off by default.
  bool smooth_p_value = false;
  std::uint64_t seed = 0;
};

struct GofResult {
  double statistic;
  std::vector<double> bootstrap;
  double p_value;
  bool reject;
  double alpha;
};

// Stein kernel term for the gradient-free KSD:
//   kappa(x, y) = s(x)'k s(y) + s(x)'grad_y k + s(y)'grad_x k + div_x div_y k,
// with s the surrogate score and the trace term in closed form for RBF.
double kappa_rho(const Vec& x, const Vec& y, const Surrogate& surrogate,
                 const RbfKernel& kernel);

// Importance weights w_i = rho(x_i)/p_c(x_i), self-normalized to mean 1
// (unknown constants in rho and p_c make the raw scale arbitrary).
Vec gof_weights(const std::vector<Vec>& data,
                const ContinuousParameterization& cp,
                const Surrogate& surrogate);

// Weighted Stein kernel matrix A_ij = w_i kappa(x_i, x_j) w_j with zero
// diagonal; shared by the U-statistic and the bootstrap.
Mat weighted_stein_matrix(const std::vector<Vec>& data,
                          const ContinuousParameterization& cp,
                          const Surrogate& surrogate, const RbfKernel& kernel);

// U-statistic (1/(n(n-1))) sum_{i != j} A_ij.
double gfksd_ustat(const std::vector<Vec>& data,
                   const ContinuousParameterization& cp,
                   const Surrogate& surrogate, const RbfKernel& kernel);

// m multinomial-bootstrap replicates of the null distribution:
//   S* = sum_{i != j} (u_i/n - 1/n) A_ij (u_j/n - 1/n),
// with (u_1..u_n) multinomial counts of n draws over n cells.
std::vector<double> bootstrap_replicates(const Mat& weighted_matrix, int m,
                                         RandomStream& rng);

// Full test on discrete data: converts the sample to continuous points,
// uses the median-heuristic bandwidth on the converted data, and rejects
// when the fraction of replicates above the statistic is below alpha.
GofResult run_gof_test(const std::vector<Vec>& discrete_data,
                       const ContinuousParameterization& null_cp,
                       const GofConfig& config);

// Unbiased MMD^2 estimate between two discrete samples under the
// exponentiated Hamming kernel k(z, z') = exp(-H(z, z')) with H the
// normalized Hamming distance.
double mmd_hamming(const Mat& sample_a, const Mat& sample_b);

std::string gof_result_json(const GofResult& r, int n, int m, std::uint64_t seed);

}  // namespace dstein
