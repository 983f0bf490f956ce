#include "dstein/bnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dstein/models.hpp"
#include "dstein/sampler.hpp"

namespace dstein {

namespace {

double sign_pm(double t) { return t >= 0.0 ? 1.0 : -1.0; }

Mat apply_sign(const Mat& m) {
  return m.unaryExpr([](double t) { return sign_pm(t); });
}

Mat apply_sigmoid(const Mat& m) {
  return m.unaryExpr([](double t) { return sigmoid_pm(t); });
}

Mat apply_sigmoid_deriv(const Mat& m) {
  return m.unaryExpr([](double t) { return sigmoid_pm_deriv(t); });
}

// Row-wise log-softmax.
Mat log_softmax(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse =
        mx + std::log((logits.row(i).array() - mx).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

// d(log-likelihood)/d(logits): one-hot minus softmax, per row.
Mat logit_grad(const Mat& logits, const std::vector<int>& labels) {
  Mat g = -log_softmax(logits).array().exp();
  for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, labels[i]) += 1.0;
  return g;
}

double picked_log_likelihood(const Mat& log_probs, const std::vector<int>& labels) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < log_probs.rows(); ++i)
    acc += log_probs(i, labels[i]);
  return acc;
}

}  // namespace

Dataset two_blob_dataset(int n, double separation, std::uint64_t seed) {
  RandomStream rng(seed);
  Dataset data;
  data.features.resize(n, 2);
  data.labels.resize(n);
  data.num_classes = 2;
  const double half = separation / 2.0;
  for (int i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng.uniform_int(2));
    const double cx = label == 0 ? -half : half;
    data.features(i, 0) = cx + rng.normal();
    data.features(i, 1) = cx + rng.normal();
    data.labels[i] = label;
  }
  return data;
}

Dataset load_dataset_csv(const std::string& path, int num_classes) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open dataset file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows[0].size())
      throw std::invalid_argument("ragged dataset CSV: " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows[0].size() < 2)
    throw std::invalid_argument("dataset needs feature columns and a label column");
  Dataset data;
  const std::size_t d = rows[0].size() - 1;
  data.features.resize(rows.size(), d);
  data.labels.resize(rows.size());
  data.num_classes = num_classes;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) data.features(i, j) = rows[i][j];
    data.labels[i] = static_cast<int>(rows[i][d]);
    if (data.labels[i] < 0 || data.labels[i] >= num_classes)
      throw std::invalid_argument("label out of range in dataset: " + path);
  }
  return data;
}

void save_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  out.precision(17);
  for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.features.cols(); ++j)
      out << data.features(i, j) << ",";
    out << data.labels[i] << "\n";
  }
}

BinaryMlp::BinaryMlp(int inputs, int hidden, int classes)
    : w1_(Mat::Zero(hidden, inputs)), w2_(Mat::Zero(classes, hidden)) {
  if (inputs < 1 || hidden < 1 || classes < 2)
    throw std::invalid_argument("BinaryMlp: bad architecture");
}

Vec BinaryMlp::flat_weights() const {
  Vec w(num_weights());
  w.head(w1_.size()) = Eigen::Map<const Vec>(w1_.data(), w1_.size());
  w.tail(w2_.size()) = Eigen::Map<const Vec>(w2_.data(), w2_.size());
  return w;
}

void BinaryMlp::set_flat_weights(const Vec& w) {
  if (w.size() != num_weights())
    throw std::invalid_argument("BinaryMlp::set_flat_weights: size mismatch");
  Eigen::Map<Vec>(w1_.data(), w1_.size()) = w.head(w1_.size());
  Eigen::Map<Vec>(w2_.data(), w2_.size()) = w.tail(w2_.size());
}

void BinaryMlp::clip_weights(double bound) {
  const double lo = std::nextafter(-bound, 0.0);
  const double hi = std::nextafter(bound, 0.0);
  auto clip = [lo, hi](double t) { return std::clamp(t, lo, hi); };
  w1_ = w1_.unaryExpr(clip);
  w2_ = w2_.unaryExpr(clip);
}

void BinaryMlp::randomize(RandomStream& rng, double scale) {
  for (Eigen::Index i = 0; i < w1_.size(); ++i)
    w1_.data()[i] = scale * (2.0 * rng.uniform() - 1.0);
  for (Eigen::Index i = 0; i < w2_.size(); ++i)
    w2_.data()[i] = scale * (2.0 * rng.uniform() - 1.0);
}

Mat BinaryMlp::forward_binary(const Mat& inputs) const {
  if (inputs.cols() != w1_.cols())
    throw std::invalid_argument("BinaryMlp::forward_binary: input dimension mismatch");
  const Mat hidden = apply_sign(inputs * apply_sign(w1_).transpose());
  return log_softmax(hidden * apply_sign(w2_).transpose());
}

Mat BinaryMlp::forward_smooth(const Mat& inputs) const {
  if (inputs.cols() != w1_.cols())
    throw std::invalid_argument("BinaryMlp::forward_smooth: input dimension mismatch");
  const Mat hidden = apply_sigmoid(inputs * apply_sigmoid(w1_).transpose());
  return log_softmax(hidden * apply_sigmoid(w2_).transpose());
}

double BinaryMlp::binary_log_likelihood(const Mat& inputs,
                                        const std::vector<int>& labels) const {
  return picked_log_likelihood(forward_binary(inputs), labels);
}

std::pair<double, Vec> BinaryMlp::smooth_log_likelihood_grad(
    const Mat& inputs, const std::vector<int>& labels) const {
  const Mat w1s = apply_sigmoid(w1_);
  const Mat w2s = apply_sigmoid(w2_);
  const Mat pre1 = inputs * w1s.transpose();       // batch x hidden
  const Mat hidden = apply_sigmoid(pre1);
  const Mat logits = hidden * w2s.transpose();     // batch x classes
  const double ll = picked_log_likelihood(log_softmax(logits), labels);

  const Mat dlogits = logit_grad(logits, labels);  // batch x classes
  const Mat dw2s = dlogits.transpose() * hidden;   // classes x hidden
  const Mat dw2 = dw2s.cwiseProduct(apply_sigmoid_deriv(w2_));
  const Mat dhidden = dlogits * w2s;               // batch x hidden
  const Mat dpre1 = dhidden.cwiseProduct(apply_sigmoid_deriv(pre1));
  const Mat dw1s = dpre1.transpose() * inputs;     // hidden x inputs
  const Mat dw1 = dw1s.cwiseProduct(apply_sigmoid_deriv(w1_));

  Vec grad(num_weights());
  grad.head(w1_.size()) = Eigen::Map<const Vec>(dw1.data(), dw1.size());
  grad.tail(w2_.size()) = Eigen::Map<const Vec>(dw2.data(), dw2.size());
  return {ll, grad};
}

std::pair<double, Vec> BinaryMlp::ste_log_likelihood_grad(
    const Mat& inputs, const std::vector<int>& labels) const {
  const Mat w1b = apply_sign(w1_);
  const Mat w2b = apply_sign(w2_);
  const Mat pre1 = inputs * w1b.transpose();
  const Mat hidden = apply_sign(pre1);
  const Mat logits = hidden * w2b.transpose();
  const double ll = picked_log_likelihood(log_softmax(logits), labels);

  auto inside = [](double t) { return std::abs(t) <= 1.0 ? 1.0 : 0.0; };
  const Mat dlogits = logit_grad(logits, labels);
  const Mat dw2 = (dlogits.transpose() * hidden).cwiseProduct(w2_.unaryExpr(inside));
  const Mat dhidden = dlogits * w2b;
  const Mat dpre1 = dhidden.cwiseProduct(pre1.unaryExpr(inside));
  const Mat dw1 = (dpre1.transpose() * inputs).cwiseProduct(w1_.unaryExpr(inside));

  Vec grad(num_weights());
  grad.head(w1_.size()) = Eigen::Map<const Vec>(dw1.data(), dw1.size());
  grad.tail(w2_.size()) = Eigen::Map<const Vec>(dw2.data(), dw2.size());
  return {ll, grad};
}

// ---------------------------------------------------------------------------
// BnnEnsemble

BnnEnsemble::BnnEnsemble(int members, int inputs, int hidden, int classes,
                         std::uint64_t seed)
    : rng_(seed), step_size_(1e-2) {
  if (members < 2)
    throw std::invalid_argument("BnnEnsemble: need at least 2 members");
  for (int i = 0; i < members; ++i) {
    members_.emplace_back(inputs, hidden, classes);
    members_.back().randomize(rng_);
    adam_.emplace_back(members_.back().num_weights(), step_size_);
  }
}

void BnnEnsemble::step(const Dataset& data,
                       const std::vector<std::vector<int>>& batches) {
  const int n = size();
  if (static_cast<int>(batches.size()) != n)
    throw std::invalid_argument("BnnEnsemble::step: one batch per member required");

  std::vector<Vec> flat(n);
  for (int j = 0; j < n; ++j) flat[j] = members_[j].flat_weights();
  Mat positions(n, flat[0].size());
  for (int j = 0; j < n; ++j) positions.row(j) = flat[j].transpose();
  const double h = median_bandwidth(positions);

  std::vector<Vec> deltas(n);
  for (int i = 0; i < n; ++i) {
    Mat bx(batches[i].size(), data.features.cols());
    std::vector<int> by(batches[i].size());
    for (std::size_t r = 0; r < batches[i].size(); ++r) {
      bx.row(r) = data.features.row(batches[i][r]);
      by[r] = data.labels[batches[i][r]];
    }
    // Density ratios and surrogate gradients of every member on this
    // member's batch; the Gaussian base term cancels from the ratio.
    std::vector<double> mu(n);
    std::vector<Vec> grads(n);
    for (int j = 0; j < n; ++j) {
      const auto [smooth_ll, grad] = members_[j].smooth_log_likelihood_grad(bx, by);
      const double binary_ll = members_[j].binary_log_likelihood(bx, by);
      mu[j] = std::exp(std::clamp(smooth_ll - binary_ll, -500.0, 500.0));
      mu[j] = std::max(mu[j], 1e-300);
      grads[j] = grad;
    }
    const std::vector<double> gamma = rank_weights(mu);
    const double omega =
        std::accumulate(gamma.begin(), gamma.end(), 0.0);
    Vec delta = Vec::Zero(flat[0].size());
    for (int j = 0; j < n; ++j) {
      const Vec diff = flat[i] - flat[j];
      const double k = std::exp(-diff.squaredNorm() / h);
      // grad_{w_j} k(w_j, w_i) = (2/h)(w_i - w_j) k
      delta += gamma[j] * (grads[j] * k + (2.0 / h) * k * diff);
    }
    deltas[i] = delta / omega;
  }
  for (int i = 0; i < n; ++i) {
    members_[i].set_flat_weights(flat[i] + adam_[i].update(deltas[i]));
    members_[i].clip_weights();
  }
}

void BnnEnsemble::train(const Dataset& data, int steps, int batch_size) {
  const int total = static_cast<int>(data.features.rows());
  batch_size = std::min(batch_size, total);
  for (int s = 0; s < steps; ++s) {
    std::vector<std::vector<int>> batches(size());
    for (auto& b : batches) {
      b.resize(batch_size);
      for (int& idx : b) idx = static_cast<int>(rng_.uniform_int(total));
    }
    step(data, batches);
  }
}

Mat BnnEnsemble::predict(const Mat& inputs) const {
  Mat probs = Mat::Zero(inputs.rows(), members_[0].classes());
  for (const auto& m : members_)
    probs += m.forward_binary(inputs).array().exp().matrix();
  probs /= static_cast<double>(members_.size());
  return probs;
}

double BnnEnsemble::accuracy(const Dataset& data) const {
  return classification_accuracy(predict(data.features), data.labels);
}

std::string BnnEnsemble::to_json() const {
  nlohmann::json j;
  j["inputs"] = members_[0].inputs();
  j["hidden"] = members_[0].hidden();
  j["classes"] = members_[0].classes();
  j["members"] = nlohmann::json::array();
  for (const auto& m : members_) {
    const Vec w = m.flat_weights();
    j["members"].push_back(std::vector<double>(w.data(), w.data() + w.size()));
  }
  return j.dump();
}

// ---------------------------------------------------------------------------
// BaggingEnsemble

BaggingEnsemble::BaggingEnsemble(int members, int inputs, int hidden,
                                 int classes, std::uint64_t seed)
    : rng_(seed), step_size_(1e-2) {
  if (members < 1)
    throw std::invalid_argument("BaggingEnsemble: need at least one member");
  for (int i = 0; i < members; ++i) {
    members_.emplace_back(inputs, hidden, classes);
    members_.back().randomize(rng_);
  }
}

void BaggingEnsemble::train(const Dataset& data, int steps, int batch_size) {
  const int total = static_cast<int>(data.features.rows());
  batch_size = std::min(batch_size, total);
  for (std::size_t m = 0; m < members_.size(); ++m) {
    // Bootstrap resample for this member.
    std::vector<int> resample(total);
    for (int& idx : resample) idx = static_cast<int>(rng_.uniform_int(total));
    AdamState adam(members_[m].num_weights(), step_size_);
    for (int s = 0; s < steps; ++s) {
      Mat bx(batch_size, data.features.cols());
      std::vector<int> by(batch_size);
      for (int r = 0; r < batch_size; ++r) {
        const int idx = resample[rng_.uniform_int(total)];
        bx.row(r) = data.features.row(idx);
        by[r] = data.labels[idx];
      }
      const auto [ll, grad] = members_[m].ste_log_likelihood_grad(bx, by);
      members_[m].set_flat_weights(members_[m].flat_weights() + adam.update(grad));
      members_[m].clip_weights();
    }
  }
}

Mat BaggingEnsemble::predict(const Mat& inputs) const {
  Mat probs = Mat::Zero(inputs.rows(), members_[0].classes());
  for (const auto& m : members_)
    probs += m.forward_binary(inputs).array().exp().matrix();
  probs /= static_cast<double>(members_.size());
  return probs;
}

double BaggingEnsemble::accuracy(const Dataset& data) const {
  return classification_accuracy(predict(data.features), data.labels);
}

double classification_accuracy(const Mat& probs, const std::vector<int>& labels) {
  if (probs.rows() != static_cast<Eigen::Index>(labels.size()))
    throw std::invalid_argument("classification_accuracy: size mismatch");
  int correct = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index best;
    probs.row(i).maxCoeff(&best);
    if (static_cast<int>(best) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(probs.rows());
}

}  // namespace dstein
