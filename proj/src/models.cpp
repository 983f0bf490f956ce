#include "dstein/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dstein {

std::pair<double, Vec> DiscreteModel::smooth_log_density(const Vec&) const {
  throw std::runtime_error("model has no smooth relaxation");
}

double sigmoid_pm(double t) { return std::tanh(0.5 * t); }

double sigmoid_pm_deriv(double t) {
  const double s = std::tanh(0.5 * t);
  return 0.5 * (1.0 - s * s);
}

double log1p_exp(double t) {
  return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
}

void check_spins(const Vec& z, const char* who) {
  for (Eigen::Index i = 0; i < z.size(); ++i)
    if (z[i] != 1.0 && z[i] != -1.0)
      throw std::invalid_argument(std::string(who) + ": entry " +
                                  std::to_string(i) + " is not +-1");
}

// ---------------------------------------------------------------------------
// CategoricalModel

CategoricalModel::CategoricalModel(std::vector<double> states,
                                   std::vector<double> probs) {
  if (states.size() < 2)
    throw std::invalid_argument("CategoricalModel: need at least 2 states");
  if (states.size() != probs.size())
    throw std::invalid_argument("CategoricalModel: states/probs size mismatch");
  for (std::size_t i = 1; i < states.size(); ++i)
    if (!(states[i] > states[i - 1]))
      throw std::invalid_argument("CategoricalModel: states must be strictly increasing");
  double total = 0.0;
  for (double p : probs) {
    if (!(p > 0.0) || !std::isfinite(p))
      throw std::invalid_argument("CategoricalModel: probabilities must be positive");
    total += p;
  }
  probs_ = probs;
  for (double& p : probs_) p /= total;
  log_weight_.resize(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) log_weight_[i] = std::log(probs[i]);
  labels_.push_back(std::move(states));
}

double CategoricalModel::log_mass(const Vec& z) const {
  if (z.size() != 1)
    throw std::invalid_argument("CategoricalModel::log_mass: expected scalar state");
  const auto& s = labels_[0];
  const auto it = std::find(s.begin(), s.end(), z[0]);
  if (it == s.end())
    throw std::invalid_argument("CategoricalModel::log_mass: unknown state");
  return log_weight_[static_cast<std::size_t>(it - s.begin())];
}

// ---------------------------------------------------------------------------
// IsingModel

IsingModel::IsingModel(int rows, int cols, double coupling)
    : num_sites_(rows * cols) {
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("IsingModel: grid must be at least 1x1");
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int site = r * cols + c;
      if (c + 1 < cols) edges_.push_back({site, site + 1, coupling});
      if (r + 1 < rows) edges_.push_back({site, site + cols, coupling});
    }
  }
  build_adjacency();
}

IsingModel::IsingModel(int num_sites, std::vector<IsingEdge> edges)
    : num_sites_(num_sites), edges_(std::move(edges)) {
  if (num_sites < 1) throw std::invalid_argument("IsingModel: need at least one site");
  build_adjacency();
}

void IsingModel::build_adjacency() {
  neighbors_.assign(num_sites_, {});
  for (const auto& e : edges_) {
    if (e.i < 0 || e.i >= num_sites_ || e.j < 0 || e.j >= num_sites_ || e.i == e.j)
      throw std::invalid_argument("IsingModel: invalid edge endpoints");
    for (const auto& [nb, w] : neighbors_[e.i])
      if (nb == e.j)
        throw std::invalid_argument("IsingModel: duplicate undirected edge");
    neighbors_[e.i].push_back({e.j, e.coupling});
    neighbors_[e.j].push_back({e.i, e.coupling});
  }
  labels_.assign(num_sites_, {-1.0, 1.0});
}

double IsingModel::log_mass(const Vec& z) const {
  if (static_cast<int>(z.size()) != num_sites_)
    throw std::invalid_argument("IsingModel::log_mass: dimension mismatch");
  check_spins(z, "IsingModel::log_mass");
  double sum = 0.0;
  for (const auto& e : edges_) sum += e.coupling * z[e.i] * z[e.j];
  return sum;
}

std::pair<double, Vec> IsingModel::smooth_log_density(const Vec& x) const {
  if (static_cast<int>(x.size()) != num_sites_)
    throw std::invalid_argument("IsingModel::smooth_log_density: dimension mismatch");
  Vec s(num_sites_), ds(num_sites_);
  for (int i = 0; i < num_sites_; ++i) {
    s[i] = sigmoid_pm(x[i]);
    ds[i] = sigmoid_pm_deriv(x[i]);
  }
  double value = 0.0;
  Vec grad = Vec::Zero(num_sites_);
  for (const auto& e : edges_) {
    value += e.coupling * s[e.i] * s[e.j];
    grad[e.i] += e.coupling * s[e.j] * ds[e.i];
    grad[e.j] += e.coupling * s[e.i] * ds[e.j];
  }
  return {value, grad};
}

double IsingModel::conditional(const Vec& z, int site) const {
  if (site < 0 || site >= num_sites_)
    throw std::invalid_argument("IsingModel::conditional: site out of range");
  check_spins(z, "IsingModel::conditional");
  double field = 0.0;
  for (const auto& [nb, w] : neighbors_[site]) field += w * z[nb];
  return 1.0 / (1.0 + std::exp(-2.0 * field));
}

IsingModel IsingModel::scaled_couplings(double factor) const {
  std::vector<IsingEdge> scaled = edges_;
  for (auto& e : scaled) e.coupling *= factor;
  return IsingModel(num_sites_, std::move(scaled));
}

// ---------------------------------------------------------------------------
// BernoulliRbm

BernoulliRbm::BernoulliRbm(Mat weight, Vec visible_bias, Vec hidden_bias)
    : weight_(std::move(weight)),
      visible_bias_(std::move(visible_bias)),
      hidden_bias_(std::move(hidden_bias)) {
  if (weight_.rows() != visible_bias_.size() || weight_.cols() != hidden_bias_.size())
    throw std::invalid_argument("BernoulliRbm: parameter dimension mismatch");
  if (!weight_.allFinite() || !visible_bias_.allFinite() || !hidden_bias_.allFinite())
    throw std::invalid_argument("BernoulliRbm: parameters must be finite");
  labels_.assign(weight_.rows(), {-1.0, 1.0});
}

double BernoulliRbm::log_mass(const Vec& z) const {
  if (z.size() != weight_.rows())
    throw std::invalid_argument("BernoulliRbm::log_mass: dimension mismatch");
  check_spins(z, "BernoulliRbm::log_mass");
  const Vec act = weight_.transpose() * z + hidden_bias_;
  double sum = z.dot(visible_bias_);
  for (Eigen::Index k = 0; k < act.size(); ++k) sum += log1p_exp(act[k]);
  return sum;
}

std::pair<double, Vec> BernoulliRbm::smooth_log_density(const Vec& x) const {
  if (x.size() != weight_.rows())
    throw std::invalid_argument("BernoulliRbm::smooth_log_density: dimension mismatch");
  Vec s(x.size()), ds(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    s[i] = sigmoid_pm(x[i]);
    ds[i] = sigmoid_pm_deriv(x[i]);
  }
  const Vec act = weight_.transpose() * s + hidden_bias_;
  double value = s.dot(visible_bias_);
  Vec logistic(act.size());
  for (Eigen::Index k = 0; k < act.size(); ++k) {
    value += log1p_exp(act[k]);
    logistic[k] = 1.0 / (1.0 + std::exp(-act[k]));
  }
  const Vec grad = (visible_bias_ + weight_ * logistic).cwiseProduct(ds);
  return {value, grad};
}

Vec BernoulliRbm::hidden_conditionals(const Vec& z) const {
  check_spins(z, "BernoulliRbm::hidden_conditionals");
  const Vec act = weight_.transpose() * z + hidden_bias_;
  return (1.0 + (-act.array()).exp()).inverse();
}

Vec BernoulliRbm::visible_conditionals(const Vec& h) const {
  if (h.size() != weight_.cols())
    throw std::invalid_argument(
        "BernoulliRbm::visible_conditionals: dimension mismatch");
  for (Eigen::Index k = 0; k < h.size(); ++k)
    if (h[k] != 0.0 && h[k] != 1.0)
      throw std::invalid_argument(
          "BernoulliRbm::visible_conditionals: hidden units must be 0/1");
  const Vec act = weight_ * h + visible_bias_;
  return (1.0 + (-2.0 * act.array()).exp()).inverse();
}

BernoulliRbm BernoulliRbm::random(int d, int m, double weight_sd,
                                  RandomStream& rng) {
  Mat w(d, m);
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = weight_sd * rng.normal();
  Vec b(d), c(m);
  for (int i = 0; i < d; ++i) b[i] = rng.normal();
  for (int k = 0; k < m; ++k) c[k] = rng.normal();
  return BernoulliRbm(std::move(w), std::move(b), std::move(c));
}

// ---------------------------------------------------------------------------
// Enumeration oracle

EnumeratedDistribution enumerate_log_mass(const DiscreteModel& model) {
  const auto& labels = model.state_labels();
  double log_count = 0.0;
  for (const auto& l : labels) log_count += std::log2(static_cast<double>(l.size()));
  if (log_count > 20.0)
    throw std::runtime_error("enumerate_log_mass: state space exceeds 2^20");

  std::size_t total = 1;
  for (const auto& l : labels) total *= l.size();

  EnumeratedDistribution out;
  out.states.reserve(total);
  std::vector<double> log_masses;
  log_masses.reserve(total);

  const int d = model.dim();
  std::vector<std::size_t> idx(d, 0);
  Vec z(d);
  double max_lm = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < total; ++s) {
    for (int j = 0; j < d; ++j) z[j] = labels[j][idx[j]];
    const double lm = model.log_mass(z);
    log_masses.push_back(lm);
    max_lm = std::max(max_lm, lm);
    out.states.push_back(z);
    // increment mixed-radix counter, last dimension fastest
    for (int j = d - 1; j >= 0; --j) {
      if (++idx[j] < labels[j].size()) break;
      idx[j] = 0;
    }
  }
  double norm = 0.0;
  out.probs.resize(total);
  for (std::size_t s = 0; s < total; ++s) {
    out.probs[s] = std::exp(log_masses[s] - max_lm);
    norm += out.probs[s];
  }
  for (double& p : out.probs) p /= norm;
  return out;
}

// ---------------------------------------------------------------------------
// JSON loaders

namespace {
using nlohmann::json;

std::unique_ptr<DiscreteModel> model_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "categorical") {
    return std::make_unique<CategoricalModel>(
        j.at("states").get<std::vector<double>>(),
        j.at("probs").get<std::vector<double>>());
  }
  if (type == "ising") {
    const int rows = j.at("rows").get<int>();
    const int cols = j.at("cols").get<int>();
    if (j.contains("edges")) {
      std::vector<IsingEdge> edges;
      for (const auto& e : j.at("edges"))
        edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>()});
      return std::make_unique<IsingModel>(rows * cols, std::move(edges));
    }
    return std::make_unique<IsingModel>(rows, cols, j.at("coupling").get<double>());
  }
  if (type == "rbm") {
    if (j.contains("d")) {
      RandomStream rng(j.value("seed", std::uint64_t{0}));
      auto model = BernoulliRbm::random(j.at("d").get<int>(), j.at("m").get<int>(),
                                        j.value("weight_sd", 0.05), rng);
      return std::make_unique<BernoulliRbm>(std::move(model));
    }
    const auto rows = j.at("W").get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw std::invalid_argument("rbm: empty weight matrix");
    Mat w(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows[0].size())
        throw std::invalid_argument("rbm: ragged weight matrix");
      for (std::size_t k = 0; k < rows[i].size(); ++k) w(i, k) = rows[i][k];
    }
    const auto bv = j.at("b").get<std::vector<double>>();
    const auto cv = j.at("c").get<std::vector<double>>();
    Vec b = Eigen::Map<const Vec>(bv.data(), static_cast<Eigen::Index>(bv.size()));
    Vec c = Eigen::Map<const Vec>(cv.data(), static_cast<Eigen::Index>(cv.size()));
    return std::make_unique<BernoulliRbm>(std::move(w), std::move(b), std::move(c));
  }
  throw std::invalid_argument("unknown model type: " + type);
}
}  // namespace

std::unique_ptr<DiscreteModel> parse_model_json(const std::string& text) {
  return model_from_json(json::parse(text));
}

std::unique_ptr<DiscreteModel> load_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open model file: " + path);
  json j;
  in >> j;
  return model_from_json(j);
}

}  // namespace dstein
