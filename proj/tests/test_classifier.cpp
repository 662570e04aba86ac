#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "advflow/classifier.hpp"
#include "advflow/errors.hpp"
#include "support.hpp"

using namespace advflow;
using advflow::testing::random_image;

namespace {

Architecture tiny_arch(int channels = 1) {
  Architecture a;
  a.height = 8;
  a.width = 8;
  a.channels = channels;
  a.conv1_channels = 4;
  a.conv2_channels = 6;
  a.hidden = 12;
  return a;
}

ModelParams random_params(const Architecture& a, std::uint64_t seed) {
  ModelParams p = init_params(a, seed);
  RngStream rng(seed, "bias");
  for (auto& t : p.tensors())
    if (t.shape.size() == 1)
      for (double& v : t.values) v = rng.uniform(-0.1, 0.1);
  return p;
}

std::vector<Image> random_batch(const Architecture& a, int n, RngStream& rng) {
  std::vector<Image> b;
  for (int i = 0; i < n; ++i) b.push_back(random_image(a.height, a.width, a.channels, rng));
  return b;
}

std::vector<LabelDistribution> random_labels(int n, int classes, RngStream& rng) {
  std::vector<LabelDistribution> t;
  for (int i = 0; i < n; ++i) t.push_back(LabelDistribution::one_hot(static_cast<int>(rng.below(classes)), classes));
  return t;
}

}  // namespace

TEST(Forward, ZeroParamsGiveZeroLogits) {
  const Architecture a = tiny_arch();
  RngStream rng(1, "t");
  const Logits l = forward(ModelParams(a), random_batch(a, 3, rng));
  EXPECT_EQ(l.rows, 3);
  for (double v : l.values) EXPECT_EQ(v, 0.0);
}

TEST(Forward, RowPerExampleAndPermutationEquivariant) {
  const Architecture a = tiny_arch(2);
  RngStream rng(2, "t");
  const ModelParams p = random_params(a, 2);
  auto batch = random_batch(a, 5, rng);
  const Logits l = forward(p, batch);
  ASSERT_EQ(l.rows, 5);
  ASSERT_EQ(l.classes, 10);
  std::vector<Image> permuted{batch[3], batch[0], batch[4], batch[1], batch[2]};
  const Logits lp = forward(p, permuted);
  const int perm[] = {3, 0, 4, 1, 2};
  for (int i = 0; i < 5; ++i)
    for (int k = 0; k < 10; ++k) EXPECT_NEAR(lp.row(i)[k], l.row(perm[i])[k], 1e-12);
  EXPECT_EQ(forward(p, batch).values, l.values);
}

TEST(Forward, ShapeMismatchThrows) {
  const Architecture a = tiny_arch();
  std::vector<Image> bad{Image(8, 9, 1)};
  EXPECT_THROW(forward(ModelParams(a), bad), ShapeError);
}

TEST(Loss, UniformLogitsGiveLogC) {
  Logits l{1, 10, std::vector<double>(10, 0.7)};
  const std::vector<LabelDistribution> t{LabelDistribution::one_hot(3, 10)};
  EXPECT_NEAR(loss(l, t), std::log(10.0), 1e-12);
}

TEST(Loss, ShiftInvariantAndBoundedByEntropy) {
  RngStream rng(3, "t");
  Logits l{1, 5, {}};
  for (int k = 0; k < 5; ++k) l.values.push_back(rng.uniform(-3, 3));
  const std::vector<LabelDistribution> t{label_smooth(2, 0.3, 5)};
  Logits shifted = l;
  for (double& v : shifted.values) v += 123.4;
  EXPECT_NEAR(loss(l, t), loss(shifted, t), 1e-9);
  double entropy = 0.0;
  for (double p : t[0].probabilities()) entropy -= p > 0 ? p * std::log(p) : 0.0;
  EXPECT_GE(loss(l, t), entropy - 1e-12);
}

TEST(Loss, SoftmaxTargetMinimisesOverTargets) {
  RngStream rng(4, "t");
  Logits l{1, 4, {0.3, -1.0, 2.0, 0.5}};
  double z = 0.0;
  for (double v : l.values) z += std::exp(v);
  std::vector<double> p;
  for (double v : l.values) p.push_back(std::exp(v) / z);
  // Cross-entropy H(t, q) = H(t) + KL(t||q) is smallest in KL at t = q.
  auto kl = [&](const std::vector<double>& t) {
    const std::vector<LabelDistribution> tt{LabelDistribution(t)};
    double h = 0.0;
    for (double v : t) h -= v > 0 ? v * std::log(v) : 0.0;
    return loss(l, tt) - h;
  };
  const double best = kl(p);
  EXPECT_NEAR(best, 0.0, 1e-12);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> t = p;
    double s = 0.0;
    for (double& v : t) s += (v = std::max(1e-6, v + rng.uniform(-0.05, 0.05)));
    for (double& v : t) v /= s;
    EXPECT_GE(kl(t), best);
  }
}

TEST(InputGradient, MatchesCentralDifferences) {
  const double h = 1e-3;
  for (int k = 0; k < 5; ++k) {
    const Architecture a = tiny_arch(1 + k % 2);
    RngStream rng(10 + k, "t");
    const ModelParams p = random_params(a, 10 + k);
    auto batch = random_batch(a, 2, rng);
    const auto targets = random_labels(2, 10, rng);
    const auto g = input_gradient(p, batch, targets);
    double worst = 0.0, scale = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b)
      for (std::size_t i = 0; i < batch[b].size(); ++i) {
        const double saved = batch[b][i];
        batch[b][i] = saved + h;
        const auto sp = activation_signature(p, batch);
        const double lp = loss(forward(p, batch), targets);
        batch[b][i] = saved - h;
        const auto sm = activation_signature(p, batch);
        const double lm = loss(forward(p, batch), targets);
        batch[b][i] = saved;
        if (sp != sm) continue;
        const double num = (lp - lm) / (2 * h);
        worst = std::max(worst, std::abs(num - g[b][i]));
        scale = std::max({scale, std::abs(num), std::abs(g[b][i])});
      }
    EXPECT_LT(worst / scale, 1e-4);
  }
}

TEST(InputGradient, DuplicatingExampleKeepsPerExampleGradient) {
  const Architecture a = tiny_arch();
  RngStream rng(20, "t");
  const ModelParams p = random_params(a, 20);
  const auto x = random_batch(a, 1, rng);
  const auto t = random_labels(1, 10, rng);
  const auto single = input_gradient(p, x, t);
  const std::vector<Image> twice{x[0], x[0]};
  const std::vector<LabelDistribution> tt{t[0], t[0]};
  const auto doubled = input_gradient(p, twice, tt);
  // Mean reduction halves each copy's share; the two shares add back up.
  for (std::size_t i = 0; i < single[0].size(); ++i) {
    EXPECT_NEAR(doubled[0][i] + doubled[1][i], single[0][i], 1e-12);
  }
}

TEST(InputGradient, ZeroWhenTargetEqualsPrediction) {
  const Architecture a = tiny_arch();
  RngStream rng(21, "t");
  const ModelParams p = random_params(a, 21);
  const auto x = random_batch(a, 1, rng);
  const Logits l = forward(p, x);
  double z = 0.0;
  for (double v : l.values) z += std::exp(v);
  std::vector<double> q;
  for (double v : l.values) q.push_back(std::exp(v) / z);
  const std::vector<LabelDistribution> t{LabelDistribution(q)};
  const auto g = input_gradient(p, x, t);
  for (double v : g[0].values()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(ParamGradient, MatchesCentralDifferences) {
  const double h = 1e-3;
  for (int k = 0; k < 3; ++k) {
    const Architecture a = tiny_arch(1 + k % 2);
    RngStream rng(30 + k, "t");
    ModelParams p = random_params(a, 30 + k);
    const auto batch = random_batch(a, 3, rng);
    const auto targets = random_labels(3, 10, rng);
    const ModelParams g = param_gradient(p, batch, targets);
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < p.total_size(); ++i) {
      const double saved = p.flat(i);
      p.flat(i) = saved + h;
      const auto sp = activation_signature(p, batch);
      const double lp = loss(forward(p, batch), targets);
      p.flat(i) = saved - h;
      const auto sm = activation_signature(p, batch);
      const double lm = loss(forward(p, batch), targets);
      p.flat(i) = saved;
      if (sp != sm) continue;
      const double num = (lp - lm) / (2 * h);
      worst = std::max(worst, std::abs(num - g.flat(i)));
      scale = std::max({scale, std::abs(num), std::abs(g.flat(i))});
    }
    EXPECT_LT(worst / scale, 1e-4);
  }
}

TEST(ParamGradient, UnusedChannelBiasHasZeroGradient) {
  const Architecture a = tiny_arch();
  RngStream rng(40, "t");
  ModelParams p = random_params(a, 40);
  // Channel 0 of conv2: zero kernel and a bias that keeps it below zero, so
  // ReLU blocks it and nothing flows to its bias.
  auto& w = p.tensor("conv2.weight");
  const std::size_t per = w.values.size() / static_cast<std::size_t>(a.conv2_channels);
  std::fill(w.values.begin(), w.values.begin() + static_cast<std::ptrdiff_t>(per), 0.0);
  p.tensor("conv2.bias").values[0] = -1.0;
  const auto batch = random_batch(a, 2, rng);
  const ModelParams g = param_gradient(p, batch, random_labels(2, 10, rng));
  EXPECT_EQ(g.tensor("conv2.bias").values[0], 0.0);
}

TEST(ParamGradient, MeanOfPerExampleGradients) {
  const Architecture a = tiny_arch();
  RngStream rng(41, "t");
  const ModelParams p = random_params(a, 41);
  const auto batch = random_batch(a, 3, rng);
  const auto targets = random_labels(3, 10, rng);
  const ModelParams all = param_gradient(p, batch, targets);
  std::vector<double> mean(all.total_size(), 0.0);
  for (int i = 0; i < 3; ++i) {
    const ModelParams gi = param_gradient(p, std::span(batch).subspan(i, 1), std::span(targets).subspan(i, 1));
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += gi.flat(j) / 3.0;
  }
  for (std::size_t j = 0; j < mean.size(); ++j) EXPECT_NEAR(all.flat(j), mean[j], 1e-12);
}

TEST(ParamGradient, LossAndGradientAgree) {
  const Architecture a = tiny_arch();
  RngStream rng(42, "t");
  const ModelParams p = random_params(a, 42);
  const auto batch = random_batch(a, 4, rng);
  const auto targets = random_labels(4, 10, rng);
  ModelParams g(a);
  const double l = loss_and_param_gradient(p, batch, targets, g);
  EXPECT_NEAR(l, loss(forward(p, batch), targets), 1e-12);
  EXPECT_EQ(g, param_gradient(p, batch, targets));
}

TEST(ClassifierModel, PerExampleLossAndGradient) {
  const Architecture a = tiny_arch();
  RngStream rng(43, "t");
  const Classifier model(random_params(a, 43));
  const auto batch = random_batch(a, 3, rng);
  const auto targets = random_labels(3, 10, rng);
  std::vector<double> losses(3);
  std::vector<Image> grads(3);
  model.loss_and_input_gradient(batch, targets, losses, grads);
  const auto per = per_example_loss(model.predict(batch), targets);
  const auto mean_grad = input_gradient(model.params(), batch, targets);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(losses[i], per[i], 1e-12);
    for (std::size_t j = 0; j < grads[i].size(); ++j) EXPECT_NEAR(grads[i][j], 3.0 * mean_grad[i][j], 1e-12);
  }
}

TEST(LabelSmooth, Values) {
  const auto one_hot = label_smooth(4, 0.0, 10);
  for (int k = 0; k < 10; ++k) EXPECT_EQ(one_hot[k], k == 4 ? 1.0 : 0.0);
  const auto half = label_smooth(2, 0.5, 10);
  EXPECT_DOUBLE_EQ(half[2], 0.5);
  EXPECT_NEAR(half[0], 0.0556, 1e-4);
  RngStream rng(50, "t");
  for (int k = 0; k < 100; ++k) {
    const auto d = label_smooth(static_cast<int>(rng.below(7)), rng.uniform(0.0, 0.99), 7);
    double s = 0.0;
    for (double p : d.probabilities()) s += p;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_THROW(label_smooth(0, 1.0, 10), ArgumentError);
  EXPECT_THROW(label_smooth(10, 0.1, 10), ArgumentError);
}

TEST(LabelDistribution, RejectsInvalid) {
  EXPECT_THROW(LabelDistribution({0.5, 0.6}), ArgumentError);
  EXPECT_THROW(LabelDistribution({1.2, -0.2}), ArgumentError);
  EXPECT_NO_THROW(LabelDistribution({0.25, 0.75}));
}

TEST(SampleTarget, BinaryAlwaysOther) {
  RngStream rng(51, "t");
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_target(0, 2, rng), 1);
}

TEST(SampleTarget, UniformOverOtherClasses) {
  RngStream rng(52, "t");
  const int n = 100000, y = 3;
  std::vector<int> counts(10, 0);
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_target(y, 10, rng))];
  EXPECT_EQ(counts[y], 0);
  const double p = 1.0 / 9.0;
  const double sigma = std::sqrt(n * p * (1 - p));
  for (int k = 0; k < 10; ++k)
    if (k != y) {
      EXPECT_LT(std::abs(counts[static_cast<std::size_t>(k)] - n * p), 3 * sigma);
    }
}

TEST(Logits, ArgmaxTiesGoToLowestIndex) {
  Logits l{1, 4, {0.5, 2.0, 2.0, -1.0}};
  EXPECT_EQ(l.argmax(0), 1);
}

TEST(InitParams, DeterministicAndScaled) {
  const Architecture a;
  const ModelParams p = init_params(a, 7);
  EXPECT_EQ(p, init_params(a, 7));
  EXPECT_NE(p, init_params(a, 8));
  const auto& w = p.tensor("fc1.weight");
  double s2 = 0.0;
  for (double v : w.values) s2 += v * v;
  const double var = s2 / static_cast<double>(w.values.size());
  EXPECT_NEAR(var, 2.0 / w.shape[1], 0.1 * 2.0 / w.shape[1]);
  for (double v : p.tensor("fc1.bias").values) EXPECT_EQ(v, 0.0);
}

TEST(Checkpoint, RoundTripAtFloatPrecision) {
  const Architecture a = tiny_arch(3);
  const ModelParams p = random_params(a, 60);
  const ModelParams back = decode_checkpoint(encode_checkpoint(p));
  ASSERT_EQ(back.architecture(), a);
  for (std::size_t i = 0; i < p.total_size(); ++i) {
    EXPECT_EQ(back.flat(i), static_cast<double>(static_cast<float>(p.flat(i))));
  }
  // A float-exact model round-trips bit for bit.
  EXPECT_EQ(decode_checkpoint(encode_checkpoint(back)), back);
}

TEST(Checkpoint, RejectsCorruptInput) {
  const auto bytes = encode_checkpoint(random_params(tiny_arch(), 61));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  try {
    decode_checkpoint(std::span(bytes).first(bytes.size() - 3));
    FAIL() << "truncated checkpoint accepted";
  } catch (const FormatError& e) {
    EXPECT_GT(e.offset(), 0u);
  }
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_THROW(decode_checkpoint(extra), FormatError);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "advflow_ckpt_test.bin";
  const ModelParams p = decode_checkpoint(encode_checkpoint(random_params(tiny_arch(), 62)));
  save_checkpoint(p, path);
  EXPECT_EQ(load_checkpoint(path), p);
  std::filesystem::remove(path);
}
