#include "dstein/sampler.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace dstein {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Pairwise kernel matrix K_ij = exp(-|x_i - x_j|^2 / h).
Mat kernel_matrix(const Mat& x, double h) {
  const Vec sq = x.rowwise().squaredNorm();
  Mat k = -2.0 * (x * x.transpose());
  k.colwise() += sq;
  k.rowwise() += sq.transpose();
  return (-k / h).array().exp();
}

// Aggregated update directions for weighted SVGD:
//   delta_i = sum_j wn_j [score_j K_ij + (2/h)(x_i - x_j) K_ij].
Mat weighted_directions(const Mat& x, const Mat& scores, const Vec& wn,
                        double h) {
  const Mat k = kernel_matrix(x, h);
  const Vec kw = k * wn;                                  // sum_j wn_j K_ij
  Mat delta = k * (scores.array().colwise() * wn.array()).matrix();
  delta += (2.0 / h) * (x.array().colwise() * kw.array()).matrix();
  delta -= (2.0 / h) * (k * (x.array().colwise() * wn.array()).matrix());
  return delta;
}

}  // namespace

ParticleEnsemble::ParticleEnsemble(Mat positions, double adam_step_size)
    : positions_(std::move(positions)) {
  if (positions_.rows() < 1)
    throw std::invalid_argument("ParticleEnsemble: need at least one particle");
  adam_.reserve(positions_.rows());
  for (Eigen::Index i = 0; i < positions_.rows(); ++i)
    adam_.emplace_back(positions_.cols(), adam_step_size);
}

ParticleEnsemble ParticleEnsemble::gaussian_init(int n, int d, double mean,
                                                 double std, RandomStream& rng,
                                                 double adam_step_size) {
  Mat x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = mean + std * rng.normal();
  return ParticleEnsemble(std::move(x), adam_step_size);
}

void ParticleEnsemble::apply_directions(const Mat& directions, bool use_adam,
                                        double step_size) {
  if (directions.rows() != positions_.rows() ||
      directions.cols() != positions_.cols())
    throw std::invalid_argument("apply_directions: shape mismatch");
  for (Eigen::Index i = 0; i < positions_.rows(); ++i) {
    if (!directions.row(i).allFinite())
      throw std::runtime_error("particle " + std::to_string(i) +
                               ": non-finite update direction");
    if (use_adam) {
      positions_.row(i) +=
          adam_[i].update(directions.row(i).transpose()).transpose();
    } else {
      positions_.row(i) += step_size * directions.row(i);
    }
  }
  ++iteration_;
}

void svgd_step(ParticleEnsemble& ensemble,
               const std::function<Vec(const Vec&)>& target_score,
               const RbfKernel& kernel, bool use_adam, double step_size) {
  const Mat& x = ensemble.positions();
  const Eigen::Index n = x.rows();
  Mat scores(n, x.cols());
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vec s = target_score(x.row(j).transpose());
    if (!s.allFinite())
      throw std::runtime_error("particle " + std::to_string(j) +
                               ": non-finite target score");
    scores.row(j) = s.transpose();
  }
  const Vec wn = Vec::Constant(n, 1.0 / static_cast<double>(n));
  const Mat delta = weighted_directions(x, scores, wn, kernel.bandwidth);
  ensemble.apply_directions(delta, use_adam, step_size);
}

std::vector<double> rank_weights(const std::vector<double>& raw_weights) {
  const std::size_t n = raw_weights.size();
  if (n == 0) throw std::invalid_argument("rank_weights: empty input");
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (!std::isfinite(raw_weights[j]) || raw_weights[j] <= 0.0)
      throw std::invalid_argument("rank_weights: weights must be finite and positive");
    std::size_t count = 0;
    for (std::size_t k = 0; k < n; ++k)
      if (raw_weights[k] >= raw_weights[j]) ++count;
    out[j] = static_cast<double>(n) / static_cast<double>(count);
  }
  return out;
}

namespace {

// Normalized importance weights from log rho - log p_c, in the log domain.
// Particles with zero p_c mass get weight zero; throws when all do.
Vec normalized_weights(const ParticleEnsemble& ensemble,
                       const ContinuousParameterization& cp,
                       const Surrogate& surrogate, WeightScheme scheme,
                       double* entropy_out) {
  const Mat& x = ensemble.positions();
  const Eigen::Index n = x.rows();
  Vec logw(n);
  double max_logw = kNegInf;
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vec xj = x.row(j).transpose();
    const double lpc = cp.log_pc(xj);
    logw[j] = (lpc == kNegInf) ? kNegInf : surrogate.log_density(xj) - lpc;
    max_logw = std::max(max_logw, logw[j]);
  }
  if (max_logw == kNegInf)
    throw std::runtime_error("degenerate ensemble: all importance weights are zero");
  Vec w(n);
  for (Eigen::Index j = 0; j < n; ++j)
    w[j] = (logw[j] == kNegInf) ? 0.0 : std::exp(logw[j] - max_logw);

  if (scheme == WeightScheme::kRankBased) {
    std::vector<double> raw(w.data(), w.data() + n);
    for (double& v : raw) v = std::max(v, 1e-300);
    const std::vector<double> gamma = rank_weights(raw);
    for (Eigen::Index j = 0; j < n; ++j) w[j] = gamma[j];
  }
  const double total = w.sum();
  w /= total;
  if (entropy_out) {
    double ent = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (w[j] > 0.0) ent -= w[j] * std::log(w[j]);
    *entropy_out = ent;
  }
  return w;
}

}  // namespace

void gf_svgd_step(ParticleEnsemble& ensemble,
                  const ContinuousParameterization& cp,
                  const Surrogate& surrogate, const RbfKernel& kernel,
                  WeightScheme scheme, bool use_adam, double step_size) {
  const Mat& x = ensemble.positions();
  const Eigen::Index n = x.rows();
  const Vec wn = normalized_weights(ensemble, cp, surrogate, scheme, nullptr);
  Mat scores(n, x.cols());
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vec s = surrogate.score(x.row(j).transpose());
    if (!s.allFinite())
      throw std::runtime_error("particle " + std::to_string(j) +
                               ": non-finite surrogate score");
    scores.row(j) = s.transpose();
  }
  const Mat delta = weighted_directions(x, scores, wn, kernel.bandwidth);
  ensemble.apply_directions(delta, use_adam, step_size);
}

SamplerResult run_sampler(const ContinuousParameterization& cp,
                          const Surrogate& surrogate,
                          const SamplerConfig& config) {
  if (config.iterations < 1)
    throw std::invalid_argument("run_sampler: iterations must be >= 1");
  if (!(config.step_size > 0.0))
    throw std::invalid_argument("run_sampler: step size must be positive");
  if (config.num_particles < 1)
    throw std::invalid_argument("run_sampler: need at least one particle");
  RandomStream rng(config.seed);
  ParticleEnsemble ensemble = ParticleEnsemble::gaussian_init(
      config.num_particles, cp.dim(), config.init_mean, config.init_std, rng,
      config.step_size);

  SamplerResult result;
  for (int it = 0; it < config.iterations; ++it) {
    const double h = config.num_particles >= 2
                         ? median_bandwidth(ensemble.positions())
                         : 1.0;
    const Mat before = config.record_trace ? ensemble.positions() : Mat();
    double entropy = 0.0;
    if (config.record_trace)
      normalized_weights(ensemble, cp, surrogate, config.weight_scheme, &entropy);
    gf_svgd_step(ensemble, cp, surrogate, RbfKernel(h), config.weight_scheme,
                 config.use_adam, config.step_size);
    if (config.record_trace) {
      TraceRow row;
      row.iteration = it + 1;
      row.bandwidth = h;
      row.weight_entropy = entropy;
      row.mean_abs_update =
          (ensemble.positions() - before).cwiseAbs().mean();
      result.trace.push_back(row);
    }
  }
  result.particles = ensemble.positions();
  result.discrete_samples.resize(ensemble.size(), ensemble.dim());
  for (int i = 0; i < ensemble.size(); ++i)
    result.discrete_samples.row(i) =
        cp.gamma(ensemble.positions().row(i).transpose()).transpose();
  return result;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);
  out << "iteration,bandwidth,weight_entropy,mean_abs_update\n";
  char buf[160];
  for (const auto& row : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", row.iteration,
                  row.bandwidth, row.weight_entropy, row.mean_abs_update);
    out << buf;
  }
}

void write_samples_csv(const std::string& path, const Mat& samples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write samples file: " + path);
  char buf[64];
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    for (Eigen::Index j = 0; j < samples.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", samples(i, j));
      out << buf << (j + 1 < samples.cols() ? "," : "\n");
    }
  }
}

}  // namespace dstein
