#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dstein/numkit.hpp"

namespace dstein {

// A discrete probability model over a finite product support. States are
// stored as real vectors whose entries come from per-dimension label lists
// (e.g. {-1, +1} for spins). log_mass is unnormalized.
class DiscreteModel {
 public:
  virtual ~DiscreteModel() = default;

  virtual int dim() const = 0;
  // Allowed labels for each dimension, strictly increasing.
  virtual const std::vector<std::vector<double>>& state_labels() const = 0;
  virtual double log_mass(const Vec& z) const = 0;

  // Smooth relaxation: value and gradient of a differentiable extension
  // of log_mass to R^d. Models without one return false from has_smooth.
  virtual bool has_smooth() const { return false; }
  virtual std::pair<double, Vec> smooth_log_density(const Vec& x) const;
};

// Binary sigmoid relaxation sigma(t) = 2/(1+exp(-t)) - 1 = tanh(t/2),
// a smooth stand-in for sign(t). sigmoid_pm_deriv is its derivative.
double sigmoid_pm(double t);
double sigmoid_pm_deriv(double t);
// Overflow-safe log(1 + exp(t)).
double log1p_exp(double t);

class CategoricalModel : public DiscreteModel {
 public:
  // states strictly increasing; probs unnormalized positive weights.
  CategoricalModel(std::vector<double> states, std::vector<double> probs);

  int dim() const override { return 1; }
  const std::vector<std::vector<double>>& state_labels() const override {
    return labels_;
  }
  double log_mass(const Vec& z) const override;

  int num_states() const { return static_cast<int>(labels_[0].size()); }
  const std::vector<double>& states() const { return labels_[0]; }
  // Normalized probabilities.
  const std::vector<double>& probs() const { return probs_; }

 private:
  std::vector<std::vector<double>> labels_;
  std::vector<double> probs_;       // normalized
  std::vector<double> log_weight_;  // unnormalized log weights
};

struct IsingEdge {
  int i, j;
  double coupling;
};

// Ising model on a rectangular 4-neighbor grid (non-periodic) or an
// explicit edge list; spins in {-1, +1}, p(z) proportional to
// exp(sum_{(i,j)} sigma_ij z_i z_j).
class IsingModel : public DiscreteModel {
 public:
  IsingModel(int rows, int cols, double coupling);
  IsingModel(int num_sites, std::vector<IsingEdge> edges);

  int dim() const override { return num_sites_; }
  const std::vector<std::vector<double>>& state_labels() const override {
    return labels_;
  }
  double log_mass(const Vec& z) const override;

  bool has_smooth() const override { return true; }
  std::pair<double, Vec> smooth_log_density(const Vec& x) const override;

  // P(z_site = +1 | all other spins).
  double conditional(const Vec& z, int site) const;

  const std::vector<IsingEdge>& edges() const { return edges_; }
  // Model with every coupling multiplied by `factor` (temperature scaling).
  IsingModel scaled_couplings(double factor) const;

 private:
  void build_adjacency();
  int num_sites_;
  std::vector<IsingEdge> edges_;
  std::vector<std::vector<std::pair<int, double>>> neighbors_;
  std::vector<std::vector<double>> labels_;
};

// Bernoulli RBM over visible spins z in {-1,+1}^d with 0/1 hidden units
// summed out: log mass = z.b + sum_k log(1 + exp(W_col_k . z + c_k)).
class BernoulliRbm : public DiscreteModel {
 public:
  BernoulliRbm(Mat weight, Vec visible_bias, Vec hidden_bias);

  int dim() const override { return static_cast<int>(weight_.rows()); }
  const std::vector<std::vector<double>>& state_labels() const override {
    return labels_;
  }
  double log_mass(const Vec& z) const override;

  bool has_smooth() const override { return true; }
  std::pair<double, Vec> smooth_log_density(const Vec& x) const override;

  // P(h_k = 1 | z) for all k; hidden units are 0/1, matching the
  // marginalization in log_mass.
  Vec hidden_conditionals(const Vec& z) const;
  // P(z_i = +1 | h) for all i, h given as 0/1 values.
  Vec visible_conditionals(const Vec& h) const;

  int num_hidden() const { return static_cast<int>(weight_.cols()); }
  const Mat& weight() const { return weight_; }
  const Vec& visible_bias() const { return visible_bias_; }
  const Vec& hidden_bias() const { return hidden_bias_; }

  // Random instance matching the bundled experiment setup: W_ij drawn
  // with the given standard deviation, biases standard normal.
  static BernoulliRbm random(int d, int m, double weight_sd, RandomStream& rng);

 private:
  Mat weight_;  // d x M
  Vec visible_bias_, hidden_bias_;
  std::vector<std::vector<double>> labels_;
};

// Exhaustive enumeration oracle. States are ordered by mixed-radix
// counting with the last dimension fastest and label index 0 as digit 0
// (for spins: -1 maps to bit 0). Throws if the state space exceeds 2^20.
struct EnumeratedDistribution {
  std::vector<Vec> states;
  std::vector<double> probs;  // normalized, same order as states
};

EnumeratedDistribution enumerate_log_mass(const DiscreteModel& model);

// Validates that every entry of z is one of {-1, +1}.
void check_spins(const Vec& z, const char* who);

// JSON model files: {"type": "ising"|"rbm"|"categorical", ...}.
std::unique_ptr<DiscreteModel> load_model_json(const std::string& path);
std::unique_ptr<DiscreteModel> parse_model_json(const std::string& text);

}  // namespace dstein
