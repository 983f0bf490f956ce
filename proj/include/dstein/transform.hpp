#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dstein/models.hpp"
#include "dstein/numkit.hpp"

namespace dstein {

// One-dimensional base component: standard Gaussian, or a Gaussian
// mixture with unit component variances.
class BaseComponent {
 public:
  // Standard Gaussian.
  BaseComponent();
  // Mixture of N(mean_i, 1) with the given weights (normalized here).
  BaseComponent(std::vector<double> weights, std::vector<double> means);

  double log_pdf(double x) const;
  double grad_log_pdf(double x) const;
  double cdf(double x) const;
  // Inverse CDF; bisection refined by Newton for mixtures, closed form
  // for the pure Gaussian. u strictly inside (0, 1).
  double quantile(double u) const;

  bool is_std_gaussian() const { return weights_.empty(); }

 private:
  std::vector<double> weights_, means_;  // empty => standard Gaussian
};

// Product base density over d dimensions.
class BaseDensity {
 public:
  // d independent standard Gaussians.
  explicit BaseDensity(int dim);
  explicit BaseDensity(std::vector<BaseComponent> components);

  int dim() const { return static_cast<int>(components_.size()); }
  const BaseComponent& component(int i) const { return components_[i]; }

  double log_pdf(const Vec& x) const;
  Vec grad_log_pdf(const Vec& x) const;

 private:
  std::vector<BaseComponent> components_;
};

// Per-dimension quantile partition of the base into K equal-mass cells.
// Cells are half-open [eta_{i-1}, eta_i); a point equal to a boundary
// belongs to the upper cell.
class EvenPartition {
 public:
  EvenPartition(const BaseDensity& base,
                std::vector<std::vector<double>> state_labels);

  int dim() const { return static_cast<int>(labels_.size()); }
  int num_cells(int d) const { return static_cast<int>(labels_[d].size()); }
  // Interior boundaries for dimension d (K-1 values).
  const std::vector<double>& boundaries(int d) const { return boundaries_[d]; }
  const std::vector<double>& labels(int d) const { return labels_[d]; }

  // Cell index of x in dimension d.
  int cell_index(int d, double x) const;
  // Index of the cell whose label is `label`; throws for unknown labels.
  int label_index(int d, double label) const;

  // Discrete state for a continuous point, concatenated per dimension.
  Vec gamma(const Vec& x) const;

  std::string to_json() const;

 private:
  std::vector<std::vector<double>> boundaries_;
  std::vector<std::vector<double>> labels_;
};

// Base + partition + discrete target: defines the piecewise-continuous
// target log p_c(x) = log p_0(x) + log p_*(Gamma(x)) up to a constant.
class ContinuousParameterization {
 public:
  ContinuousParameterization(BaseDensity base, EvenPartition partition,
                             std::shared_ptr<const DiscreteModel> target);

  int dim() const { return base_.dim(); }
  const BaseDensity& base() const { return base_; }
  const EvenPartition& partition() const { return partition_; }
  const DiscreteModel& target() const { return *target_; }
  const std::shared_ptr<const DiscreteModel>& target_ptr() const { return target_; }

  Vec gamma(const Vec& x) const { return partition_.gamma(x); }
  // Unnormalized; returns -inf for zero-mass cells.
  double log_pc(const Vec& x) const;

  // Exact sampler: enumerates the target (throws above 2^20 states),
  // draws z ~ p_*, then x | z uniform within the cell through the
  // inverse CDF.
  Vec sample_exact(RandomStream& rng) const;
  std::vector<Vec> sample_exact(int n, RandomStream& rng) const;

  // Appendix-C style conversion of observed discrete data to continuous
  // points distributed as the corresponding q_c.
  std::vector<Vec> discrete_to_continuous(const std::vector<Vec>& data,
                                          RandomStream& rng) const;

 private:
  void ensure_enumerated() const;
  BaseDensity base_;
  EvenPartition partition_;
  std::shared_ptr<const DiscreteModel> target_;
  mutable std::shared_ptr<const EnumeratedDistribution> enumerated_;
  mutable std::vector<double> cumulative_;
};

enum class SurrogateMode { kBaseOnly, kSmoothRelaxed };

// Differentiable surrogate rho used in place of the non-differentiable
// p_c. Base-only: rho = p_0. Smooth-relaxed: rho = p_0 * ptilde(sigma(x))
// where ptilde is the model's smooth relaxation.
class Surrogate {
 public:
  Surrogate(const ContinuousParameterization& cp, SurrogateMode mode);

  SurrogateMode mode() const { return mode_; }
  // log rho up to a constant.
  double log_density(const Vec& x) const;
  // Score: gradient of log rho.
  Vec score(const Vec& x) const;

  // Arbitrary differentiable density, used for testing and for running
  // GF-SVGD with an identity surrogate on continuous targets.
  static Surrogate custom(std::function<double(const Vec&)> log_density,
                          std::function<Vec(const Vec&)> score);

 private:
  Surrogate() = default;
  SurrogateMode mode_ = SurrogateMode::kBaseOnly;
  std::function<double(const Vec&)> log_density_;
  std::function<Vec(const Vec&)> score_;
};

// Convenience: parameterization of a model against the d-dimensional
// standard Gaussian base (the sign map when all dimensions are binary).
ContinuousParameterization make_gaussian_parameterization(
    std::shared_ptr<const DiscreteModel> target);

}  // namespace dstein
