#include "advflow/classifier.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "binary_io.hpp"

namespace advflow {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using ConstRowVec = Eigen::Map<const Eigen::RowVectorXd>;

constexpr std::string_view kCheckpointMagic = "ADVFLOW1";

ConstMatMap as_matrix(const std::vector<double>& v, int rows, int cols) {
  return ConstMatMap(v.data(), rows, cols);
}
MatMap as_matrix(std::vector<double>& v, int rows, int cols) { return MatMap(v.data(), rows, cols); }

const NamedTensor& at(const ModelParams& p, std::size_t i) { return p.tensors()[i]; }
NamedTensor& at(ModelParams& p, std::size_t i) { return p.tensors()[i]; }

enum Slot : std::size_t { kConv1W, kConv1B, kConv2W, kConv2B, kFc1W, kFc1B, kFc2W, kFc2B };

// Zero-padded 3x3 patches: row (img, y, x), column (ky * 3 + kx) * c + ci.
void im2col3x3(const double* in, int n, int h, int w, int c, double* patches) {
  const int cols = 9 * c;
  for (int img = 0; img < n; ++img) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double* row = patches + (static_cast<std::size_t>(img * h + y) * w + x) * cols;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = x + kx - 1;
            double* dst = row + (ky * 3 + kx) * c;
            if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
              std::fill(dst, dst + c, 0.0);
            } else {
              const double* src = in + (static_cast<std::size_t>(img * h + sy) * w + sx) * c;
              std::copy(src, src + c, dst);
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col3x3; `out` must be zeroed.
void col2im3x3(const double* patches, int n, int h, int w, int c, double* out) {
  const int cols = 9 * c;
  for (int img = 0; img < n; ++img) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double* row = patches + (static_cast<std::size_t>(img * h + y) * w + x) * cols;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = x + kx - 1;
            if (sx < 0 || sx >= w) continue;
            const double* src = row + (ky * 3 + kx) * c;
            double* dst = out + (static_cast<std::size_t>(img * h + sy) * w + sx) * c;
            for (int ci = 0; ci < c; ++ci) dst[ci] += src[ci];
          }
        }
      }
    }
  }
}

// 2x2/stride-2 max pooling over NHWC; `arg` records the flat input index of
// each winner (first index wins ties).
void maxpool2(const std::vector<double>& in, int n, int h, int w, int c, std::vector<double>& out,
              std::vector<std::int32_t>& arg) {
  const int oh = h / 2;
  const int ow = w / 2;
  out.assign(static_cast<std::size_t>(n) * oh * ow * c, 0.0);
  arg.assign(out.size(), 0);
  for (int img = 0; img < n; ++img) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        for (int ci = 0; ci < c; ++ci) {
          std::int32_t best_idx = -1;
          double best = 0.0;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const auto idx =
                  static_cast<std::int32_t>((static_cast<std::size_t>(img * h + 2 * y + dy) * w + 2 * x + dx) * c + ci);
              if (best_idx < 0 || in[idx] > best) {
                best = in[idx];
                best_idx = idx;
              }
            }
          }
          const std::size_t o = (static_cast<std::size_t>(img * oh + y) * ow + x) * c + ci;
          out[o] = best;
          arg[o] = best_idx;
        }
      }
    }
  }
}

void relu_inplace(std::vector<double>& v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

// Zeroes gradient entries whose activation was clipped by ReLU.
void relu_backward(const std::vector<double>& activation, std::vector<double>& grad) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(activation[i] > 0.0)) grad[i] = 0.0;
  }
}

struct ForwardCache {
  int n = 0;
  std::vector<double> patches1, act1, pool1, patches2, act2, pool2, hidden, logits;
  std::vector<std::int32_t> arg1, arg2;
};

void check_batch(const Architecture& a, std::span<const Image> batch) {
  for (const Image& img : batch) {
    if (img.height() != a.height || img.width() != a.width || img.depth() != a.channels) {
      throw ShapeError("classifier expects " + std::to_string(a.height) + "x" + std::to_string(a.width) + "x" +
                       std::to_string(a.channels) + " images, got " + img.shape_string());
    }
  }
}

void dense_forward(const std::vector<double>& in, int rows, int in_dim, const NamedTensor& weight,
                   const NamedTensor& bias, int out_dim, std::vector<double>& out) {
  out.resize(static_cast<std::size_t>(rows) * out_dim);
  auto o = as_matrix(out, rows, out_dim);
  o.noalias() = as_matrix(in, rows, in_dim) * as_matrix(weight.values, out_dim, in_dim).transpose();
  o.rowwise() += ConstRowVec(bias.values.data(), out_dim);
}

void run_forward(const ModelParams& params, std::span<const Image> batch, ForwardCache& cache) {
  const Architecture& a = params.architecture();
  check_batch(a, batch);
  const int n = static_cast<int>(batch.size());
  cache.n = n;
  if (n == 0) {
    cache.logits.clear();
    return;
  }
  const int h1 = a.height, w1 = a.width;
  const int h2 = h1 / 2, w2 = w1 / 2;
  const int h3 = h2 / 2, w3 = w2 / 2;

  std::vector<double> input(static_cast<std::size_t>(n) * h1 * w1 * a.channels);
  for (int i = 0; i < n; ++i) {
    std::copy(batch[i].values().begin(), batch[i].values().end(), input.begin() + static_cast<std::ptrdiff_t>(i) * batch[i].size());
  }

  cache.patches1.resize(static_cast<std::size_t>(n) * h1 * w1 * 9 * a.channels);
  im2col3x3(input.data(), n, h1, w1, a.channels, cache.patches1.data());
  dense_forward(cache.patches1, n * h1 * w1, 9 * a.channels, at(params, kConv1W), at(params, kConv1B),
                a.conv1_channels, cache.act1);
  relu_inplace(cache.act1);
  maxpool2(cache.act1, n, h1, w1, a.conv1_channels, cache.pool1, cache.arg1);

  cache.patches2.resize(static_cast<std::size_t>(n) * h2 * w2 * 9 * a.conv1_channels);
  im2col3x3(cache.pool1.data(), n, h2, w2, a.conv1_channels, cache.patches2.data());
  dense_forward(cache.patches2, n * h2 * w2, 9 * a.conv1_channels, at(params, kConv2W), at(params, kConv2B),
                a.conv2_channels, cache.act2);
  relu_inplace(cache.act2);
  maxpool2(cache.act2, n, h2, w2, a.conv2_channels, cache.pool2, cache.arg2);

  const int flat = h3 * w3 * a.conv2_channels;
  dense_forward(cache.pool2, n, flat, at(params, kFc1W), at(params, kFc1B), a.hidden, cache.hidden);
  relu_inplace(cache.hidden);
  dense_forward(cache.hidden, n, a.hidden, at(params, kFc2W), at(params, kFc2B), a.classes, cache.logits);
}

// Gradient of a dense layer y = x W^T + b. Accumulates into `grad` when given
// and returns dx when `in_grad` is non-null.
void dense_backward(const std::vector<double>& in, const std::vector<double>& out_grad, int rows, int in_dim,
                    int out_dim, const NamedTensor& weight, NamedTensor* weight_grad, NamedTensor* bias_grad,
                    std::vector<double>* in_grad) {
  const auto dy = as_matrix(out_grad, rows, out_dim);
  if (weight_grad != nullptr) {
    MatMap(weight_grad->values.data(), out_dim, in_dim).noalias() = dy.transpose() * as_matrix(in, rows, in_dim);
    // Plain loop: Eigen's vectorized reduction depends on pointer alignment,
    // which would make results vary from run to run.
    auto& b = bias_grad->values;
    std::fill(b.begin(), b.end(), 0.0);
    for (int r = 0; r < rows; ++r) {
      const double* row = out_grad.data() + static_cast<std::size_t>(r) * out_dim;
      for (int k = 0; k < out_dim; ++k) b[static_cast<std::size_t>(k)] += row[k];
    }
  }
  if (in_grad != nullptr) {
    in_grad->resize(static_cast<std::size_t>(rows) * in_dim);
    as_matrix(*in_grad, rows, in_dim).noalias() = dy * as_matrix(weight.values, out_dim, in_dim);
  }
}

void unpool(const std::vector<double>& out_grad, const std::vector<std::int32_t>& arg, std::size_t in_size,
            std::vector<double>& in_grad) {
  in_grad.assign(in_size, 0.0);
  for (std::size_t i = 0; i < out_grad.size(); ++i) in_grad[static_cast<std::size_t>(arg[i])] += out_grad[i];
}

void run_backward(const ModelParams& params, const ForwardCache& cache, std::vector<double> dlogits,
                  ModelParams* grad, std::vector<double>* input_grad) {
  const Architecture& a = params.architecture();
  const int n = cache.n;
  const int h1 = a.height, w1 = a.width;
  const int h2 = h1 / 2, w2 = w1 / 2;
  const int h3 = h2 / 2, w3 = w2 / 2;
  const int flat = h3 * w3 * a.conv2_channels;
  auto slot = [&](Slot s) { return grad != nullptr ? &at(*grad, s) : nullptr; };

  std::vector<double> d_hidden;
  dense_backward(cache.hidden, dlogits, n, a.hidden, a.classes, at(params, kFc2W), slot(kFc2W), slot(kFc2B),
                 &d_hidden);
  relu_backward(cache.hidden, d_hidden);

  std::vector<double> d_pool2;
  dense_backward(cache.pool2, d_hidden, n, flat, a.hidden, at(params, kFc1W), slot(kFc1W), slot(kFc1B), &d_pool2);

  std::vector<double> d_act2;
  unpool(d_pool2, cache.arg2, cache.act2.size(), d_act2);
  relu_backward(cache.act2, d_act2);

  std::vector<double> d_patches2;
  dense_backward(cache.patches2, d_act2, n * h2 * w2, 9 * a.conv1_channels, a.conv2_channels,
                 at(params, kConv2W), slot(kConv2W), slot(kConv2B), &d_patches2);
  std::vector<double> d_pool1(cache.pool1.size(), 0.0);
  col2im3x3(d_patches2.data(), n, h2, w2, a.conv1_channels, d_pool1.data());

  std::vector<double> d_act1;
  unpool(d_pool1, cache.arg1, cache.act1.size(), d_act1);
  relu_backward(cache.act1, d_act1);

  std::vector<double> d_patches1;
  dense_backward(cache.patches1, d_act1, n * h1 * w1, 9 * a.channels, a.conv1_channels, at(params, kConv1W),
                 slot(kConv1W), slot(kConv1B), input_grad != nullptr ? &d_patches1 : nullptr);
  if (input_grad != nullptr) {
    input_grad->assign(static_cast<std::size_t>(n) * h1 * w1 * a.channels, 0.0);
    col2im3x3(d_patches1.data(), n, h1, w1, a.channels, input_grad->data());
  }
}

void check_targets(int rows, int classes, std::span<const LabelDistribution> targets) {
  if (static_cast<int>(targets.size()) != rows) {
    throw ShapeError("got " + std::to_string(targets.size()) + " targets for " + std::to_string(rows) + " examples");
  }
  for (const auto& t : targets) {
    if (t.classes() != classes) {
      throw ShapeError("target has " + std::to_string(t.classes()) + " classes, model has " + std::to_string(classes));
    }
  }
}

// Per-row losses and dL_i/dlogits_i scaled by `scale`.
std::vector<double> softmax_xent(const Logits& logits, std::span<const LabelDistribution> targets, double scale,
                                 std::vector<double>* dlogits) {
  check_targets(logits.rows, logits.classes, targets);
  std::vector<double> losses(static_cast<std::size_t>(logits.rows));
  if (dlogits != nullptr) dlogits->resize(logits.values.size());
  std::vector<double> prob(static_cast<std::size_t>(logits.classes));
  for (int i = 0; i < logits.rows; ++i) {
    const auto z = logits.row(i);
    const auto t = targets[i].probabilities();
    const double zmax = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (int k = 0; k < logits.classes; ++k) {
      prob[k] = std::exp(z[k] - zmax);
      denom += prob[k];
    }
    const double lse = zmax + std::log(denom);
    double l = 0.0;
    double mass = 0.0;
    for (int k = 0; k < logits.classes; ++k) {
      l += t[k] * (lse - z[k]);
      mass += t[k];
    }
    losses[i] = l;
    if (dlogits != nullptr) {
      for (int k = 0; k < logits.classes; ++k) {
        (*dlogits)[static_cast<std::size_t>(i) * logits.classes + k] = scale * (mass * prob[k] / denom - t[k]);
      }
    }
  }
  return losses;
}

Logits logits_from(const ForwardCache& cache, int classes) {
  return Logits{cache.n, classes, cache.logits};
}

std::vector<Image> unpack_images(const std::vector<double>& flat, int n, const Architecture& a) {
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(n));
  const std::size_t per = static_cast<std::size_t>(a.height) * a.width * a.channels;
  for (int i = 0; i < n; ++i) {
    out.emplace_back(a.height, a.width, a.channels,
                     std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(i * per),
                                         flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * per)));
  }
  return out;
}

// Box-Muller on the stream's own uniforms.
double standard_normal(RngStream& rng) {
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

void Architecture::validate() const {
  if (height < 4 || width < 4 || channels < 1 || classes < 2 || conv1_channels < 1 || conv2_channels < 1 ||
      hidden < 1) {
    throw ArgumentError("invalid architecture: need height, width >= 4, channels >= 1, classes >= 2");
  }
}

ModelParams::ModelParams(const Architecture& arch) : arch_(arch) {
  arch_.validate();
  auto add = [this](std::string name, std::vector<int> shape) {
    const auto count = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                       [](std::size_t acc, int d) { return acc * static_cast<std::size_t>(d); });
    tensors_.push_back(NamedTensor{std::move(name), std::move(shape), std::vector<double>(count, 0.0)});
    total_ += count;
  };
  add("conv1.weight", {arch.conv1_channels, 3, 3, arch.channels});
  add("conv1.bias", {arch.conv1_channels});
  add("conv2.weight", {arch.conv2_channels, 3, 3, arch.conv1_channels});
  add("conv2.bias", {arch.conv2_channels});
  add("fc1.weight", {arch.hidden, arch.flat_features()});
  add("fc1.bias", {arch.hidden});
  add("fc2.weight", {arch.classes, arch.hidden});
  add("fc2.bias", {arch.classes});
}

NamedTensor& ModelParams::tensor(std::string_view name) {
  for (auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw ArgumentError("no parameter tensor named " + std::string(name));
}

const NamedTensor& ModelParams::tensor(std::string_view name) const {
  return const_cast<ModelParams*>(this)->tensor(name);
}

double& ModelParams::flat(std::size_t i) {
  for (auto& t : tensors_) {
    if (i < t.values.size()) return t.values[i];
    i -= t.values.size();
  }
  throw ArgumentError("flat parameter index out of range");
}

double ModelParams::flat(std::size_t i) const { return const_cast<ModelParams*>(this)->flat(i); }

bool ModelParams::all_finite() const {
  return std::all_of(tensors_.begin(), tensors_.end(), [](const NamedTensor& t) {
    return std::all_of(t.values.begin(), t.values.end(), [](double v) { return std::isfinite(v); });
  });
}

ModelParams init_params(const Architecture& arch, std::uint64_t seed) {
  ModelParams params(arch);
  RngStream rng(seed, "weight-init");
  for (auto& t : params.tensors()) {
    if (t.shape.size() < 2) continue;  // biases stay zero
    const int fan_in = std::accumulate(t.shape.begin() + 1, t.shape.end(), 1, std::multiplies<>());
    const double scale = std::sqrt(2.0 / fan_in);
    for (double& v : t.values) v = scale * standard_normal(rng);
  }
  return params;
}

LabelDistribution::LabelDistribution(std::vector<double> probabilities) : probs_(std::move(probabilities)) {
  if (probs_.size() < 2) throw ArgumentError("label distribution needs at least two classes");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0)) throw ArgumentError("label distribution has a negative or NaN entry");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ArgumentError("label distribution sums to " + std::to_string(total));
  }
}

LabelDistribution LabelDistribution::one_hot(int label, int classes) { return label_smooth(label, 0.0, classes); }

LabelDistribution label_smooth(int label, double factor, int classes) {
  if (classes < 2) throw ArgumentError("label_smooth needs at least two classes");
  if (label < 0 || label >= classes) throw ArgumentError("label " + std::to_string(label) + " out of range");
  if (!(factor >= 0.0 && factor < 1.0)) throw ArgumentError("smoothing factor must lie in [0, 1)");
  std::vector<double> p(static_cast<std::size_t>(classes), factor / (classes - 1));
  p[static_cast<std::size_t>(label)] = 1.0 - factor;
  return LabelDistribution(std::move(p));
}

int sample_target(int label, int classes, RngStream& rng) {
  if (classes < 2) throw ArgumentError("sample_target needs at least two classes");
  if (label < 0 || label >= classes) throw ArgumentError("label " + std::to_string(label) + " out of range");
  const int draw = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes - 1)));
  return draw < label ? draw : draw + 1;
}

int Logits::argmax(int i) const {
  const auto r = row(i);
  return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
}

Logits forward(const ModelParams& params, std::span<const Image> batch) {
  ForwardCache cache;
  run_forward(params, batch, cache);
  return logits_from(cache, params.architecture().classes);
}

double loss(const Logits& logits, std::span<const LabelDistribution> targets) {
  const auto per = per_example_loss(logits, targets);
  if (per.empty()) throw ArgumentError("loss of an empty batch");
  return std::accumulate(per.begin(), per.end(), 0.0) / static_cast<double>(per.size());
}

std::vector<double> per_example_loss(const Logits& logits, std::span<const LabelDistribution> targets) {
  return softmax_xent(logits, targets, 1.0, nullptr);
}

std::vector<Image> input_gradient(const ModelParams& params, std::span<const Image> batch,
                                  std::span<const LabelDistribution> targets) {
  if (batch.empty()) throw ArgumentError("input_gradient of an empty batch");
  ForwardCache cache;
  run_forward(params, batch, cache);
  std::vector<double> dlogits;
  softmax_xent(logits_from(cache, params.architecture().classes), targets, 1.0 / static_cast<double>(batch.size()),
               &dlogits);
  std::vector<double> dx;
  run_backward(params, cache, std::move(dlogits), nullptr, &dx);
  return unpack_images(dx, cache.n, params.architecture());
}

double loss_and_param_gradient(const ModelParams& params, std::span<const Image> batch,
                               std::span<const LabelDistribution> targets, ModelParams& grad) {
  if (batch.empty()) throw ArgumentError("param_gradient of an empty batch");
  if (!(grad.architecture() == params.architecture())) throw ShapeError("gradient architecture mismatch");
  ForwardCache cache;
  run_forward(params, batch, cache);
  std::vector<double> dlogits;
  const auto losses = softmax_xent(logits_from(cache, params.architecture().classes), targets,
                                   1.0 / static_cast<double>(batch.size()), &dlogits);
  run_backward(params, cache, std::move(dlogits), &grad, nullptr);
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

ModelParams param_gradient(const ModelParams& params, std::span<const Image> batch,
                           std::span<const LabelDistribution> targets) {
  ModelParams grad(params.architecture());
  loss_and_param_gradient(params, batch, targets, grad);
  return grad;
}

std::vector<std::int32_t> activation_signature(const ModelParams& params, std::span<const Image> batch) {
  ForwardCache cache;
  run_forward(params, batch, cache);
  std::vector<std::int32_t> sig;
  sig.reserve(cache.act1.size() + cache.act2.size() + cache.hidden.size() + cache.arg1.size() + cache.arg2.size());
  for (const auto* act : {&cache.act1, &cache.act2, &cache.hidden}) {
    for (double v : *act) sig.push_back(v > 0.0 ? 1 : 0);
  }
  sig.insert(sig.end(), cache.arg1.begin(), cache.arg1.end());
  sig.insert(sig.end(), cache.arg2.begin(), cache.arg2.end());
  return sig;
}

void Classifier::loss_and_input_gradient(std::span<const Image> batch, std::span<const LabelDistribution> targets,
                                         std::span<double> losses, std::span<Image> grads) const {
  if (losses.size() != batch.size() || grads.size() != batch.size()) {
    throw ShapeError("loss_and_input_gradient: output spans do not match batch size");
  }
  if (batch.empty()) return;
  ForwardCache cache;
  run_forward(params_, batch, cache);
  std::vector<double> dlogits;
  const auto per = softmax_xent(logits_from(cache, classes()), targets, 1.0, &dlogits);
  std::copy(per.begin(), per.end(), losses.begin());
  std::vector<double> dx;
  run_backward(params_, cache, std::move(dlogits), nullptr, &dx);
  auto images = unpack_images(dx, cache.n, architecture());
  std::move(images.begin(), images.end(), grads.begin());
}

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params) {
  detail::ByteWriter w;
  w.text(kCheckpointMagic);
  const Architecture& a = params.architecture();
  for (int v : {a.height, a.width, a.channels, a.classes, a.conv1_channels, a.conv2_channels, a.hidden}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.u32(static_cast<std::uint32_t>(params.tensors().size()));
  for (const auto& t : params.tensors()) {
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.text(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.values) w.f32(static_cast<float>(v));
  }
  return std::move(w.buffer());
}

ModelParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  if (r.text(kCheckpointMagic.size(), "magic") != kCheckpointMagic) {
    throw FormatError("bad checkpoint magic", 0);
  }
  Architecture a;
  for (int* field : {&a.height, &a.width, &a.channels, &a.classes, &a.conv1_channels, &a.conv2_channels, &a.hidden}) {
    const std::uint32_t v = r.u32("architecture");
    if (v == 0 || v > (1u << 20)) throw FormatError("implausible architecture field", r.offset() - 4);
    *field = static_cast<int>(v);
  }
  ModelParams params(a);
  const std::size_t count_at = r.offset();
  if (r.u32("tensor count") != params.tensors().size()) {
    throw FormatError("tensor count does not match architecture", count_at);
  }
  for (auto& t : params.tensors()) {
    const std::size_t name_at = r.offset();
    const std::uint32_t name_len = r.u32("tensor name length");
    if (r.text(name_len, "tensor name") != t.name) {
      throw FormatError("expected tensor " + t.name, name_at);
    }
    const std::size_t shape_at = r.offset();
    const std::uint32_t rank = r.u32("tensor rank");
    if (rank != t.shape.size()) throw FormatError("rank mismatch for " + t.name, shape_at);
    for (int d : t.shape) {
      if (r.u32("tensor dims") != static_cast<std::uint32_t>(d)) {
        throw FormatError("shape mismatch for " + t.name, shape_at);
      }
    }
    for (double& v : t.values) v = static_cast<double>(r.f32("tensor values"));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint", r.offset());
  return params;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  detail::write_file(path, encode_checkpoint(params));
}

ModelParams load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(detail::read_file(path)); }

}  // namespace advflow
