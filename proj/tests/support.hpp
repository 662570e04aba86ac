#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <vector>

#include "advflow/classifier.hpp"
#include "advflow/constraints.hpp"
#include "advflow/grid.hpp"
#include "advflow/rng.hpp"

namespace advflow::testing {

inline Image random_image(int h, int w, int c, RngStream& rng, double lo = -1.0, double hi = 1.0) {
  Image img(h, w, c);
  for (double& v : img.values()) v = rng.uniform(lo, hi);
  return img;
}

inline FlowField random_flow(int h, int w, double scale, RngStream& rng) {
  FlowField f(h, w, 2);
  for (double& v : f.values()) v = rng.uniform(-scale, scale);
  return f;
}

template <class Tag>
double max_abs_diff(const Grid<Tag>& a, const Grid<Tag>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// logits = W vec(x) + b, with exact gradients. Keeps attack tests
/// independent of the convolutional network.
class LinearModel final : public DifferentiableModel {
 public:
  LinearModel(int inputs, int classes, std::uint64_t seed) : inputs_(inputs), classes_(classes) {
    RngStream rng(seed, "linear-model");
    weights_.resize(static_cast<std::size_t>(inputs) * classes);
    bias_.resize(static_cast<std::size_t>(classes));
    for (double& v : weights_) v = rng.uniform(-1.0, 1.0);
    for (double& v : bias_) v = rng.uniform(-0.5, 0.5);
  }

  int classes() const override { return classes_; }

  Logits predict(std::span<const Image> batch) const override {
    Logits out{static_cast<int>(batch.size()), classes_, {}};
    for (const Image& x : batch) {
      for (int k = 0; k < classes_; ++k) {
        double s = bias_[static_cast<std::size_t>(k)];
        for (int i = 0; i < inputs_; ++i) s += weight(k, i) * x[static_cast<std::size_t>(i)];
        out.values.push_back(s);
      }
    }
    return out;
  }

  void loss_and_input_gradient(std::span<const Image> batch, std::span<const LabelDistribution> targets,
                               std::span<double> losses, std::span<Image> grads) const override {
    evaluations += batch.size();
    const Logits logits = predict(batch);
    for (std::size_t n = 0; n < batch.size(); ++n) {
      const auto row = logits.row(static_cast<int>(n));
      const double mx = *std::max_element(row.begin(), row.end());
      double z = 0.0;
      for (double v : row) z += std::exp(v - mx);
      double l = 0.0;
      std::vector<double> dlogit(static_cast<std::size_t>(classes_));
      for (int k = 0; k < classes_; ++k) {
        const double logp = row[static_cast<std::size_t>(k)] - mx - std::log(z);
        l -= targets[n][k] * logp;
        dlogit[static_cast<std::size_t>(k)] = std::exp(logp) - targets[n][k];
      }
      losses[n] = l;
      grads[n] = Image(batch[n].height(), batch[n].width(), batch[n].depth());
      for (int i = 0; i < inputs_; ++i) {
        double g = 0.0;
        for (int k = 0; k < classes_; ++k) g += dlogit[static_cast<std::size_t>(k)] * weight(k, i);
        grads[n][static_cast<std::size_t>(i)] = g;
      }
    }
  }

  /// Number of per-example gradient evaluations so far.
  mutable std::atomic<std::size_t> evaluations{0};

 private:
  double weight(int k, int i) const { return weights_[static_cast<std::size_t>(k) * inputs_ + i]; }
  int inputs_;
  int classes_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

/// Small random conv net for images of the given shape.
inline Classifier small_net(int h, int w, int c, std::uint64_t seed, int classes = 10) {
  Architecture a;
  a.height = h;
  a.width = w;
  a.channels = c;
  a.classes = classes;
  a.conv1_channels = 4;
  a.conv2_channels = 8;
  a.hidden = 16;
  return Classifier(init_params(a, seed));
}

}  // namespace advflow::testing
