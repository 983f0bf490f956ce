#pragma once

#include "dstein/models.hpp"

namespace dstein {

// Single-site Gibbs chain for an Ising model. Sites are resampled in
// ascending index order by default (systematic scan).
class IsingGibbsChain {
 public:
  IsingGibbsChain(const IsingModel& model, Vec initial_state,
                  std::uint64_t seed, bool random_scan = false);

  const Vec& state() const { return state_; }
  int sweeps() const { return sweeps_; }
  void sweep();
  void sweep(int count);

 private:
  const IsingModel* model_;
  Vec state_;
  RandomStream rng_;
  bool random_scan_;
  int sweeps_ = 0;
};

// Block Gibbs chain for a Bernoulli RBM: h | z then z | h per sweep.
// Hidden units are 0/1, visible units are -1/+1.
class RbmGibbsChain {
 public:
  RbmGibbsChain(const BernoulliRbm& model, Vec initial_visible,
                std::uint64_t seed);

  const Vec& visible() const { return visible_; }
  const Vec& hidden() const { return hidden_; }
  int sweeps() const { return sweeps_; }
  void sweep();
  void sweep(int count);

 private:
  const BernoulliRbm* model_;
  Vec visible_, hidden_;
  RandomStream rng_;
  int sweeps_ = 0;
};

// i.i.d. draws from the enumerated normalized distribution (inverse CDF
// on the cumulative table). Throws for state spaces above 2^20.
Mat exact_mc_sample(const DiscreteModel& model, int n, RandomStream& rng);

// n chains advanced `sweeps` sweeps from the given per-chain initial
// states; returns the final state of each chain (one row per chain).
Mat gibbs_sample_ising(const IsingModel& model, const Mat& initial_states,
                       int sweeps, std::uint64_t seed);
Mat gibbs_sample_rbm(const BernoulliRbm& model, const Mat& initial_visible,
                     int sweeps, std::uint64_t seed);

}  // namespace dstein
