#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dstein/transform.hpp"

namespace dstein {

enum class WeightScheme { kNormalizedImportance, kRankBased };

struct SamplerConfig {
  int num_particles = 100;
  double step_size = 1e-4;
  int iterations = 500;
  bool use_adam = true;  // plain epsilon scaling when false
  WeightScheme weight_scheme = WeightScheme::kNormalizedImportance;
  std::uint64_t seed = 0;
  double init_mean = 0.0;
  double init_std = 1.0;
  bool record_trace = false;
};

// n particles in d dimensions plus their per-particle Adam states.
class ParticleEnsemble {
 public:
  ParticleEnsemble(Mat positions, double adam_step_size);
  // n draws from N(mean, std^2)^d.
  static ParticleEnsemble gaussian_init(int n, int d, double mean, double std,
                                        RandomStream& rng,
                                        double adam_step_size);

  int size() const { return static_cast<int>(positions_.rows()); }
  int dim() const { return static_cast<int>(positions_.cols()); }
  const Mat& positions() const { return positions_; }
  Mat& positions() { return positions_; }
  int iteration() const { return iteration_; }

  // Applies raw aggregated directions: Adam transform when enabled,
  // otherwise a plain step_size scaling. One row per particle.
  void apply_directions(const Mat& directions, bool use_adam, double step_size);

 private:
  Mat positions_;
  std::vector<AdamState> adam_;
  int iteration_ = 0;
};

struct TraceRow {
  int iteration;
  double bandwidth;
  double weight_entropy;
  double mean_abs_update;
};

struct SamplerResult {
  Mat particles;           // final continuous positions, n x d
  Mat discrete_samples;    // Gamma of each particle, n x d
  std::vector<TraceRow> trace;
};

// One SVGD step on a differentiable target score:
//   delta_i = sum_j [score(x_j) k(x_j, x_i) + grad_{x_j} k(x_j, x_i)]
// with positions advanced by (step/n) * delta_i or its Adam transform.
void svgd_step(ParticleEnsemble& ensemble,
               const std::function<Vec(const Vec&)>& target_score,
               const RbfKernel& kernel, bool use_adam, double step_size);

// One gradient-free SVGD step on p_c with surrogate rho. Importance
// weights w_j = rho(x_j)/p_c(x_j) are computed in the log domain and
// normalized to sum 1 before weighting the interaction sum.
void gf_svgd_step(ParticleEnsemble& ensemble,
                  const ContinuousParameterization& cp,
                  const Surrogate& surrogate, const RbfKernel& kernel,
                  WeightScheme scheme, bool use_adam, double step_size);

// Rank-based weights: gamma_j = n / #{k : mu_k >= mu_j} (ties share the
// count), per the density-ratio rank scheme.
std::vector<double> rank_weights(const std::vector<double>& raw_weights);

// Full run: iterates gf_svgd_step with the median bandwidth recomputed
// every iteration, then discretizes the particles.
SamplerResult run_sampler(const ContinuousParameterization& cp,
                          const Surrogate& surrogate,
                          const SamplerConfig& config);

// Trace / sample CSV writers shared with the baselines module.
void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace);
void write_samples_csv(const std::string& path, const Mat& samples);

}  // namespace dstein
