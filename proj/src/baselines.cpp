#include "dstein/baselines.hpp"

#include <algorithm>
#include <stdexcept>

namespace dstein {

IsingGibbsChain::IsingGibbsChain(const IsingModel& model, Vec initial_state,
                                 std::uint64_t seed, bool random_scan)
    : model_(&model),
      state_(std::move(initial_state)),
      rng_(seed),
      random_scan_(random_scan) {
  if (static_cast<int>(state_.size()) != model.dim())
    throw std::invalid_argument("IsingGibbsChain: state dimension mismatch");
  check_spins(state_, "IsingGibbsChain");
}

void IsingGibbsChain::sweep() {
  const int d = model_->dim();
  for (int s = 0; s < d; ++s) {
    const int site =
        random_scan_ ? static_cast<int>(rng_.uniform_int(d)) : s;
    const double p = model_->conditional(state_, site);
    state_[site] = rng_.uniform() < p ? 1.0 : -1.0;
  }
  ++sweeps_;
}

void IsingGibbsChain::sweep(int count) {
  for (int i = 0; i < count; ++i) sweep();
}

RbmGibbsChain::RbmGibbsChain(const BernoulliRbm& model, Vec initial_visible,
                             std::uint64_t seed)
    : model_(&model), visible_(std::move(initial_visible)), rng_(seed) {
  if (static_cast<int>(visible_.size()) != model.dim())
    throw std::invalid_argument("RbmGibbsChain: state dimension mismatch");
  check_spins(visible_, "RbmGibbsChain");
  hidden_ = Vec::Constant(model.num_hidden(), 1.0);
}

void RbmGibbsChain::sweep() {
  const Vec ph = model_->hidden_conditionals(visible_);
  for (Eigen::Index k = 0; k < hidden_.size(); ++k)
    hidden_[k] = rng_.uniform() < ph[k] ? 1.0 : 0.0;
  const Vec pz = model_->visible_conditionals(hidden_);
  for (Eigen::Index i = 0; i < visible_.size(); ++i)
    visible_[i] = rng_.uniform() < pz[i] ? 1.0 : -1.0;
  ++sweeps_;
}

void RbmGibbsChain::sweep(int count) {
  for (int i = 0; i < count; ++i) sweep();
}

Mat exact_mc_sample(const DiscreteModel& model, int n, RandomStream& rng) {
  const EnumeratedDistribution table = enumerate_log_mass(model);
  std::vector<double> cumulative(table.probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < table.probs.size(); ++i) {
    acc += table.probs[i];
    cumulative[i] = acc;
  }
  cumulative.back() = 1.0;
  Mat out(n, model.dim());
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const std::size_t pick = static_cast<std::size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), u) -
        cumulative.begin());
    out.row(i) = table.states[std::min(pick, table.states.size() - 1)].transpose();
  }
  return out;
}

Mat gibbs_sample_ising(const IsingModel& model, const Mat& initial_states,
                       int sweeps, std::uint64_t seed) {
  Mat out(initial_states.rows(), initial_states.cols());
  RandomStream root(seed);
  for (Eigen::Index c = 0; c < initial_states.rows(); ++c) {
    IsingGibbsChain chain(model, initial_states.row(c).transpose(),
                          root.spawn(c).raw());
    chain.sweep(sweeps);
    out.row(c) = chain.state().transpose();
  }
  return out;
}

Mat gibbs_sample_rbm(const BernoulliRbm& model, const Mat& initial_visible,
                     int sweeps, std::uint64_t seed) {
  Mat out(initial_visible.rows(), initial_visible.cols());
  RandomStream root(seed);
  for (Eigen::Index c = 0; c < initial_visible.rows(); ++c) {
    RbmGibbsChain chain(model, initial_visible.row(c).transpose(),
                        root.spawn(c).raw());
    chain.sweep(sweeps);
    out.row(c) = chain.visible().transpose();
  }
  return out;
}

}  // namespace dstein
