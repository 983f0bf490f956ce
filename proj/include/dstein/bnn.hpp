#pragma once

#include <string>
#include <vector>

#include "dstein/numkit.hpp"

namespace dstein {

struct Dataset {
  Mat features;             // one row per example
  std::vector<int> labels;  // class indices
  int num_classes = 2;
};

// Two labeled Gaussian blobs in 2D, centered at +-(separation/2, separation/2).
Dataset two_blob_dataset(int n, double separation, std::uint64_t seed);
Dataset load_dataset_csv(const std::string& path, int num_classes);
void save_dataset_csv(const std::string& path, const Dataset& data);

// One-hidden-layer MLP with binary (+-1) weights and activations. Latent
// real weights live in (-1, 1); the binary pass uses their signs, with
// sign(0) = +1. The smooth pass replaces every sign by
// sigma(t) = 2/(1+exp(-t)) - 1.
class BinaryMlp {
 public:
  BinaryMlp(int inputs, int hidden, int classes);

  int inputs() const { return static_cast<int>(w1_.cols()); }
  int hidden() const { return static_cast<int>(w1_.rows()); }
  int classes() const { return static_cast<int>(w2_.rows()); }

  const Mat& w1() const { return w1_; }
  const Mat& w2() const { return w2_; }

  Eigen::Index num_weights() const { return w1_.size() + w2_.size(); }
  Vec flat_weights() const;
  void set_flat_weights(const Vec& w);
  void clip_weights(double bound = 1.0);  // clip latent weights to (-bound, bound)
  void randomize(RandomStream& rng, double scale = 0.5);

  // Log-probabilities per class, one row per example.
  Mat forward_binary(const Mat& inputs) const;
  Mat forward_smooth(const Mat& inputs) const;

  double binary_log_likelihood(const Mat& inputs, const std::vector<int>& labels) const;
  // Smooth batch log-likelihood and its gradient in the flattened latent
  // weights (exact manual backpropagation).
  std::pair<double, Vec> smooth_log_likelihood_grad(
      const Mat& inputs, const std::vector<int>& labels) const;
  // Straight-through gradient of the binary log-likelihood: sign treated
  // as identity inside [-1, 1], zero outside.
  std::pair<double, Vec> ste_log_likelihood_grad(
      const Mat& inputs, const std::vector<int>& labels) const;

 private:
  Mat w1_;  // hidden x inputs
  Mat w2_;  // classes x hidden
};

// GF-SVGD ensemble of binary MLPs over the latent weights.
class BnnEnsemble {
 public:
  BnnEnsemble(int members, int inputs, int hidden, int classes,
              std::uint64_t seed);

  int size() const { return static_cast<int>(members_.size()); }
  const BinaryMlp& member(int i) const { return members_[i]; }
  BinaryMlp& member(int i) { return members_[i]; }

  // One GF-SVGD step; batches[i] is the minibatch for member i, given as
  // example indices into `data`.
  void step(const Dataset& data, const std::vector<std::vector<int>>& batches);
  // Convenience: samples one random batch per member and steps.
  void train(const Dataset& data, int steps, int batch_size);

  // Arithmetic mean of member softmax outputs, one row per example.
  Mat predict(const Mat& inputs) const;
  double accuracy(const Dataset& data) const;

  std::string to_json() const;

 private:
  std::vector<BinaryMlp> members_;
  std::vector<AdamState> adam_;
  RandomStream rng_;
  double step_size_;
};

// Independently trained members on bootstrap resamples, straight-through
// gradients, predictions averaged like the GF-SVGD ensemble.
class BaggingEnsemble {
 public:
  BaggingEnsemble(int members, int inputs, int hidden, int classes,
                  std::uint64_t seed);

  void train(const Dataset& data, int steps, int batch_size);
  Mat predict(const Mat& inputs) const;
  double accuracy(const Dataset& data) const;
  const BinaryMlp& member(int i) const { return members_[i]; }
  int size() const { return static_cast<int>(members_.size()); }

 private:
  std::vector<BinaryMlp> members_;
  RandomStream rng_;
  double step_size_;
};

double classification_accuracy(const Mat& probs, const std::vector<int>& labels);

}  // namespace dstein
