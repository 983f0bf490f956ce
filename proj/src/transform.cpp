#include "dstein/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace dstein {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// BaseComponent

BaseComponent::BaseComponent() = default;

BaseComponent::BaseComponent(std::vector<double> weights,
                             std::vector<double> means)
    : weights_(std::move(weights)), means_(std::move(means)) {
  if (weights_.empty() || weights_.size() != means_.size())
    throw std::invalid_argument("BaseComponent: weights/means size mismatch");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w > 0.0)) throw std::invalid_argument("BaseComponent: weights must be positive");
    total += w;
  }
  for (double& w : weights_) w /= total;
}

double BaseComponent::log_pdf(double x) const {
  if (is_std_gaussian())
    return -0.5 * x * x - 0.5 * std::log(2.0 * M_PI);
  double acc = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i)
    acc += weights_[i] * std_normal_pdf(x - means_[i]);
  return std::log(acc);
}

double BaseComponent::grad_log_pdf(double x) const {
  if (is_std_gaussian()) return -x;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const double p = weights_[i] * std_normal_pdf(x - means_[i]);
    den += p;
    num += p * -(x - means_[i]);
  }
  return num / den;
}

double BaseComponent::cdf(double x) const {
  if (is_std_gaussian()) return std_normal_cdf(x);
  double acc = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i)
    acc += weights_[i] * std_normal_cdf(x - means_[i]);
  return acc;
}

double BaseComponent::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0))
    throw std::invalid_argument("BaseComponent::quantile: argument must be in (0,1)");
  if (is_std_gaussian()) return std_normal_quantile(u);
  // Bracket across all components, then bisect; finish with Newton.
  double lo = *std::min_element(means_.begin(), means_.end()) - 10.0;
  double hi = *std::max_element(means_.begin(), means_.end()) + 10.0;
  while (cdf(lo) > u) lo -= 10.0;
  while (cdf(hi) < u) hi += 10.0;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < u ? lo : hi) = mid;
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 3; ++it) {
    const double pdf = std::exp(log_pdf(x));
    if (!(pdf > 0.0)) break;
    x -= (cdf(x) - u) / pdf;
  }
  return x;
}

// ---------------------------------------------------------------------------
// BaseDensity

BaseDensity::BaseDensity(int dim) {
  if (dim < 1) throw std::invalid_argument("BaseDensity: dimension must be positive");
  components_.assign(dim, BaseComponent());
}

BaseDensity::BaseDensity(std::vector<BaseComponent> components)
    : components_(std::move(components)) {
  if (components_.empty())
    throw std::invalid_argument("BaseDensity: need at least one dimension");
}

double BaseDensity::log_pdf(const Vec& x) const {
  if (x.size() != dim())
    throw std::invalid_argument("BaseDensity::log_pdf: dimension mismatch");
  double acc = 0.0;
  for (int i = 0; i < dim(); ++i) acc += components_[i].log_pdf(x[i]);
  return acc;
}

Vec BaseDensity::grad_log_pdf(const Vec& x) const {
  if (x.size() != dim())
    throw std::invalid_argument("BaseDensity::grad_log_pdf: dimension mismatch");
  Vec g(dim());
  for (int i = 0; i < dim(); ++i) g[i] = components_[i].grad_log_pdf(x[i]);
  return g;
}

// ---------------------------------------------------------------------------
// EvenPartition

EvenPartition::EvenPartition(const BaseDensity& base,
                             std::vector<std::vector<double>> state_labels)
    : labels_(std::move(state_labels)) {
  if (static_cast<int>(labels_.size()) != base.dim())
    throw std::invalid_argument("EvenPartition: label lists must match base dimension");
  boundaries_.resize(labels_.size());
  for (std::size_t d = 0; d < labels_.size(); ++d) {
    const int K = static_cast<int>(labels_[d].size());
    if (K < 2) throw std::invalid_argument("EvenPartition: need K >= 2 per dimension");
    for (int i = 1; i < K; ++i)
      if (!(labels_[d][i] > labels_[d][i - 1]))
        throw std::invalid_argument("EvenPartition: labels must be strictly increasing");
    boundaries_[d].resize(K - 1);
    for (int i = 1; i < K; ++i)
      boundaries_[d][i - 1] =
          base.component(static_cast<int>(d)).quantile(static_cast<double>(i) / K);
  }
}

int EvenPartition::cell_index(int d, double x) const {
  const auto& b = boundaries_[d];
  // Count of boundaries <= x; boundary points go to the upper cell.
  return static_cast<int>(std::upper_bound(b.begin(), b.end(), x) - b.begin());
}

int EvenPartition::label_index(int d, double label) const {
  const auto& l = labels_[d];
  const auto it = std::find(l.begin(), l.end(), label);
  if (it == l.end())
    throw std::invalid_argument("EvenPartition: unknown state label");
  return static_cast<int>(it - l.begin());
}

Vec EvenPartition::gamma(const Vec& x) const {
  if (x.size() != dim())
    throw std::invalid_argument("EvenPartition::gamma: dimension mismatch");
  Vec z(dim());
  for (int d = 0; d < dim(); ++d) z[d] = labels_[d][cell_index(d, x[d])];
  return z;
}

std::string EvenPartition::to_json() const {
  nlohmann::json j;
  j["boundaries"] = boundaries_;
  j["labels"] = labels_;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// ContinuousParameterization

ContinuousParameterization::ContinuousParameterization(
    BaseDensity base, EvenPartition partition,
    std::shared_ptr<const DiscreteModel> target)
    : base_(std::move(base)),
      partition_(std::move(partition)),
      target_(std::move(target)) {
  if (base_.dim() != target_->dim() || partition_.dim() != target_->dim())
    throw std::invalid_argument(
        "ContinuousParameterization: base/partition/target dimensions differ");
}

double ContinuousParameterization::log_pc(const Vec& x) const {
  const Vec z = partition_.gamma(x);
  const double lm = target_->log_mass(z);
  if (!std::isfinite(lm)) return kNegInf;
  return base_.log_pdf(x) + lm;
}

void ContinuousParameterization::ensure_enumerated() const {
  if (enumerated_) return;
  auto table = std::make_shared<EnumeratedDistribution>(enumerate_log_mass(*target_));
  cumulative_.resize(table->probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < table->probs.size(); ++i) {
    acc += table->probs[i];
    cumulative_[i] = acc;
  }
  cumulative_.back() = 1.0;
  enumerated_ = std::move(table);
}

Vec ContinuousParameterization::sample_exact(RandomStream& rng) const {
  ensure_enumerated();
  const double u = rng.uniform();
  const std::size_t pick = static_cast<std::size_t>(
      std::lower_bound(cumulative_.begin(), cumulative_.end(), u) -
      cumulative_.begin());
  const Vec& z = enumerated_->states[std::min(pick, enumerated_->states.size() - 1)];
  Vec x(dim());
  for (int d = 0; d < dim(); ++d) {
    const int j = partition_.label_index(d, z[d]);
    const int K = partition_.num_cells(d);
    const double y = rng.uniform(static_cast<double>(j) / K,
                                 static_cast<double>(j + 1) / K);
    x[d] = base_.component(d).quantile(y);
  }
  return x;
}

std::vector<Vec> ContinuousParameterization::sample_exact(
    int n, RandomStream& rng) const {
  std::vector<Vec> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(sample_exact(rng));
  return out;
}

std::vector<Vec> ContinuousParameterization::discrete_to_continuous(
    const std::vector<Vec>& data, RandomStream& rng) const {
  std::vector<Vec> out;
  out.reserve(data.size());
  for (const Vec& z : data) {
    if (z.size() != dim())
      throw std::invalid_argument("discrete_to_continuous: dimension mismatch");
    Vec x(dim());
    for (int d = 0; d < dim(); ++d) {
      const int j = partition_.label_index(d, z[d]);
      const int K = partition_.num_cells(d);
      const double y = rng.uniform(static_cast<double>(j) / K,
                                   static_cast<double>(j + 1) / K);
      x[d] = base_.component(d).quantile(y);
    }
    out.push_back(std::move(x));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Surrogate

Surrogate::Surrogate(const ContinuousParameterization& cp, SurrogateMode mode)
    : mode_(mode) {
  const BaseDensity& base = cp.base();
  if (mode == SurrogateMode::kBaseOnly) {
    log_density_ = [base](const Vec& x) { return base.log_pdf(x); };
    score_ = [base](const Vec& x) { return base.grad_log_pdf(x); };
    return;
  }
  if (!cp.target().has_smooth())
    throw std::runtime_error("Surrogate: model has no smooth relaxation");
  auto m = cp.target_ptr();
  log_density_ = [base, m](const Vec& x) {
    return base.log_pdf(x) + m->smooth_log_density(x).first;
  };
  score_ = [base, m](const Vec& x) {
    return (base.grad_log_pdf(x) + m->smooth_log_density(x).second).eval();
  };
}

double Surrogate::log_density(const Vec& x) const { return log_density_(x); }

Vec Surrogate::score(const Vec& x) const { return score_(x); }

Surrogate Surrogate::custom(std::function<double(const Vec&)> log_density,
                            std::function<Vec(const Vec&)> score) {
  Surrogate s;
  s.log_density_ = std::move(log_density);
  s.score_ = std::move(score);
  return s;
}

ContinuousParameterization make_gaussian_parameterization(
    std::shared_ptr<const DiscreteModel> target) {
  BaseDensity base(target->dim());
  EvenPartition partition(base, target->state_labels());
  return ContinuousParameterization(std::move(base), std::move(partition),
                                    std::move(target));
}

}  // namespace dstein
