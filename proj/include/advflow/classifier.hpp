#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advflow/grid.hpp"
#include "advflow/rng.hpp"

namespace advflow {

/// Shape of the built-in network:
/// conv3x3(conv1) -> ReLU -> maxpool2 -> conv3x3(conv2) -> ReLU -> maxpool2
/// -> dense(hidden) -> ReLU -> dense(classes). Convolutions are zero-padded
/// to preserve spatial size; pooling floors odd sizes.
struct Architecture {
  int height = 28;
  int width = 28;
  int channels = 1;
  int classes = 10;
  int conv1_channels = 16;
  int conv2_channels = 32;
  int hidden = 128;

  void validate() const;
  int pooled_height() const { return height / 2 / 2; }
  int pooled_width() const { return width / 2 / 2; }
  int flat_features() const { return pooled_height() * pooled_width() * conv2_channels; }

  bool operator==(const Architecture&) const = default;
};

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;

  bool operator==(const NamedTensor&) const = default;
};

/// All weights and biases, in a fixed order:
/// conv1.weight [c1,3,3,in], conv1.bias, conv2.weight [c2,3,3,c1], conv2.bias,
/// fc1.weight [hidden, flat], fc1.bias, fc2.weight [classes, hidden], fc2.bias.
class ModelParams {
 public:
  /// Zero-initialized parameters for `arch`.
  explicit ModelParams(const Architecture& arch);

  const Architecture& architecture() const noexcept { return arch_; }
  std::span<NamedTensor> tensors() noexcept { return tensors_; }
  std::span<const NamedTensor> tensors() const noexcept { return tensors_; }

  NamedTensor& tensor(std::string_view name);
  const NamedTensor& tensor(std::string_view name) const;

  std::size_t total_size() const noexcept { return total_; }
  double& flat(std::size_t i);
  double flat(std::size_t i) const;

  bool all_finite() const;

  bool operator==(const ModelParams&) const = default;

 private:
  Architecture arch_;
  std::vector<NamedTensor> tensors_;
  std::size_t total_ = 0;
};

/// Kaiming-style fan-in initialization of weights (normal, std sqrt(2/fan_in));
/// biases zero.
ModelParams init_params(const Architecture& arch, std::uint64_t seed);

/// Probability vector over classes; nonnegative, sums to 1 within 1e-9.
class LabelDistribution {
 public:
  explicit LabelDistribution(std::vector<double> probabilities);

  static LabelDistribution one_hot(int label, int classes);

  int classes() const noexcept { return static_cast<int>(probs_.size()); }
  double operator[](int k) const { return probs_[static_cast<std::size_t>(k)]; }
  std::span<const double> probabilities() const noexcept { return probs_; }

 private:
  std::vector<double> probs_;
};

/// 1 - factor on `label`, factor / (classes - 1) elsewhere.
LabelDistribution label_smooth(int label, double factor, int classes);

/// Uniform over the classes other than `label`.
int sample_target(int label, int classes, RngStream& rng);

/// Row-major N x classes.
struct Logits {
  int rows = 0;
  int classes = 0;
  std::vector<double> values;

  std::span<const double> row(int i) const {
    return std::span<const double>(values).subspan(static_cast<std::size_t>(i) * classes, classes);
  }
  /// Ties resolve to the lowest class index.
  int argmax(int i) const;
};

Logits forward(const ModelParams& params, std::span<const Image> batch);

/// Cross-entropy of softmax(logits) against each target, averaged over rows.
double loss(const Logits& logits, std::span<const LabelDistribution> targets);

/// Per-row cross-entropy.
std::vector<double> per_example_loss(const Logits& logits, std::span<const LabelDistribution> targets);

/// d(mean loss)/d(pixels) for every image of the batch.
std::vector<Image> input_gradient(const ModelParams& params, std::span<const Image> batch,
                                  std::span<const LabelDistribution> targets);

/// d(mean loss)/d(theta).
ModelParams param_gradient(const ModelParams& params, std::span<const Image> batch,
                           std::span<const LabelDistribution> targets);

/// Mean loss and its parameter gradient from one forward/backward pass.
double loss_and_param_gradient(const ModelParams& params, std::span<const Image> batch,
                               std::span<const LabelDistribution> targets, ModelParams& grad);

/// ReLU on/off states and max-pool winners for every unit. Two inputs with
/// equal signatures lie in the same linear region of the network.
std::vector<std::int32_t> activation_signature(const ModelParams& params, std::span<const Image> batch);

/// Interface attacks are written against: per-example loss and per-example
/// input gradient (no batch averaging).
class DifferentiableModel {
 public:
  virtual ~DifferentiableModel() = default;

  virtual int classes() const = 0;
  virtual Logits predict(std::span<const Image> batch) const = 0;
  /// losses[i] = L(batch[i], targets[i]); grads[i] = dL_i / d batch[i].
  virtual void loss_and_input_gradient(std::span<const Image> batch,
                                       std::span<const LabelDistribution> targets,
                                       std::span<double> losses, std::span<Image> grads) const = 0;
};

class Classifier final : public DifferentiableModel {
 public:
  explicit Classifier(ModelParams params) : params_(std::move(params)) {}

  const ModelParams& params() const noexcept { return params_; }
  ModelParams& params() noexcept { return params_; }
  const Architecture& architecture() const noexcept { return params_.architecture(); }

  int classes() const override { return params_.architecture().classes; }
  Logits predict(std::span<const Image> batch) const override { return forward(params_, batch); }
  void loss_and_input_gradient(std::span<const Image> batch, std::span<const LabelDistribution> targets,
                               std::span<double> losses, std::span<Image> grads) const override;

 private:
  ModelParams params_;
};

// Checkpoint container: "ADVFLOW1", seven little-endian u32 architecture
// fields (height, width, channels, classes, conv1, conv2, hidden), u32 tensor
// count, then per tensor: u32 name length, name bytes, u32 rank, rank u32
// dims, and the values as little-endian float32.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params);
ModelParams decode_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace advflow
