#include "advflow/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "advflow/evaluation.hpp"
#include "binary_io.hpp"

namespace advflow {
namespace {

constexpr std::size_t kAttackChunk = 32;

std::uint64_t example_key(int epoch, std::size_t index) {
  return (static_cast<std::uint64_t>(epoch) << 32) | static_cast<std::uint64_t>(index);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream rng(seed, "shuffle", static_cast<std::uint64_t>(epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

struct ProbeScores {
  double clean = 0.0;
  double adversarial = 0.0;
};

ProbeScores run_probe(const Classifier& model, const Dataset& probe, const TrainConfig& cfg) {
  const EvalOptions opts{cfg.workers, 100, false};
  std::vector<Image> images;
  for (std::size_t i = 0; i < probe.size(); ++i) images.push_back(probe.image(i));
  const auto clean = predict_labels(model, images, opts);

  SuiteEntry entry;
  entry.name = "probe";
  entry.kind = cfg.probe.kind;
  entry.config.steps = cfg.probe.steps;
  entry.config.pixel_step = cfg.probe.pixel_step;
  entry.config.spatial_step = cfg.probe.spatial_step;
  entry.config.budget = cfg.probe.budget;
  entry.config.seed = cfg.seed;
  const auto results = attack_dataset(model, probe, entry, opts);
  images.clear();
  for (const auto& r : results) images.push_back(r.adversarial);
  const auto adv = predict_labels(model, images, opts);

  std::size_t clean_ok = 0, adv_ok = 0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    clean_ok += clean[i] == probe.label(i) ? 1 : 0;
    adv_ok += adv[i] == probe.label(i) ? 1 : 0;
  }
  return {rounded_accuracy(clean_ok, probe.size()), rounded_accuracy(adv_ok, probe.size())};
}

}  // namespace

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::natural: return "natural";
    case TrainMode::pixel_one: return "pixel-one";
    case TrainMode::pixel_multi: return "pixel-multi";
    case TrainMode::spatial: return "spatial";
    case TrainMode::joint_sp: return "joint-sp";
    case TrainMode::joint_ps: return "joint-ps";
    case TrainMode::cascade: return "cascade";
    case TrainMode::one_pass: return "one-pass";
  }
  return "unknown";
}

TrainMode parse_train_mode(std::string_view name) {
  for (TrainMode m : {TrainMode::natural, TrainMode::pixel_one, TrainMode::pixel_multi, TrainMode::spatial,
                      TrainMode::joint_sp, TrainMode::joint_ps, TrainMode::cascade, TrainMode::one_pass}) {
    if (to_string(m) == name) return m;
  }
  throw ArgumentError("unknown training mode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ArgumentError("epochs must be at least 1");
  if (batch_size < 1) throw ArgumentError("batch size must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ArgumentError("learning rate must be finite and nonnegative");
  }
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    if (transitions[i] < 1 || transitions[i] >= epochs) {
      throw ArgumentError("transition epoch " + std::to_string(transitions[i]) + " outside [1, epochs)");
    }
    if (i > 0 && transitions[i] <= transitions[i - 1]) throw ArgumentError("transition epochs must increase");
  }
  if (!(decay > 0.0)) throw ArgumentError("decay factor must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ArgumentError("momentum must lie in [0, 1)");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) throw ArgumentError("label smoothing must lie in [0, 1)");
  if (augment.padding < 0) throw ArgumentError("augmentation padding must be nonnegative");
  if (probe.size < 1 || probe.steps < 1) throw ArgumentError("probe needs at least one example and one step");
  probe.budget.validate();
  if (attack_kind) attack.validate();
}

TrainConfig make_train_config(TrainMode mode, const Budget& budget) {
  budget.validate();
  TrainConfig cfg;
  cfg.attack.budget = budget;
  cfg.attack.steps = 1;
  cfg.attack.mode = AttackMode::targeted;
  cfg.attack.pixel_step = budget.pixel;
  cfg.attack.spatial_step = budget.spatial;
  cfg.label_smoothing = 0.5;
  switch (mode) {
    case TrainMode::natural:
      cfg.attack_kind.reset();
      cfg.label_smoothing = 0.0;
      break;
    case TrainMode::pixel_one:
      cfg.attack_kind = AttackKind::pgd_pixel;
      cfg.attack.budget.spatial = 0.0;
      break;
    case TrainMode::pixel_multi:
      cfg.attack_kind = AttackKind::pgd_pixel;
      cfg.attack.budget.spatial = 0.0;
      cfg.attack.steps = 7;
      cfg.attack.pixel_step = 4.0 / 255.0;
      cfg.attack.mode = AttackMode::untargeted;
      cfg.label_smoothing = 0.0;
      break;
    case TrainMode::spatial:
      cfg.attack_kind = AttackKind::spatial;
      cfg.attack.budget.pixel = 0.0;
      break;
    case TrainMode::joint_sp: cfg.attack_kind = AttackKind::joint_sp; break;
    case TrainMode::joint_ps: cfg.attack_kind = AttackKind::joint_ps; break;
    case TrainMode::cascade: cfg.attack_kind = AttackKind::cascade; break;
    case TrainMode::one_pass: cfg.attack_kind = AttackKind::one_pass; break;
  }
  return cfg;
}

std::vector<int> scaled_transitions(int epochs) {
  std::vector<int> out;
  for (int t : {(2 * epochs + 1) / 3, (5 * epochs + 3) / 6}) {
    if (t >= 1 && t < epochs && (out.empty() || t > out.back())) out.push_back(t);
  }
  return out;
}

double learning_rate_at(const TrainConfig& cfg, int epoch) {
  double lr = cfg.learning_rate;
  for (int t : cfg.transitions) {
    if (t <= epoch) lr *= cfg.decay;
  }
  return lr;
}

void write_train_log(const TrainLog& log, std::ostream& out) {
  out << "epoch,lr,train_loss,clean_acc,adv_acc\n";
  for (const auto& e : log.epochs) {
    out << std::to_string(e.epoch) << ',' << format_number(e.lr) << ',' << format_fixed(e.train_loss, 6) << ','
        << format_fixed(e.clean_acc, 1) << ',' << format_fixed(e.adv_acc, 1) << '\n';
  }
}

void save_train_log(const TrainLog& log, const std::filesystem::path& path) {
  std::ostringstream text;
  write_train_log(log, text);
  const std::string s = text.str();
  detail::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

TrainResult joint_adv_train(const TrainConfig& cfg, const Dataset& train, const Dataset* probe,
                            const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.empty()) throw ArgumentError("training dataset is empty");
  const Dataset probe_set = probe ? probe->head(cfg.probe.size) : train.head(cfg.probe.size);
  if (probe_set.empty()) throw ArgumentError("probe dataset is empty");

  Architecture arch;
  arch.height = train.height();
  arch.width = train.width();
  arch.channels = train.channels();
  arch.classes = train.num_classes();
  arch.validate();
  Classifier model(init_params(arch, cfg.seed));
  ModelParams velocity(arch);
  ModelParams grad(arch);
  const int classes = arch.classes;

  AttackConfig attack_cfg = cfg.attack;
  attack_cfg.seed = cfg.seed;

  TrainLog log;
  const std::size_t n = train.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = learning_rate_at(cfg, epoch);
    const auto order = epoch_order(n, cfg.seed, epoch);
    double loss_sum = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < n; start += batch, ++batch_index) {
      const std::size_t count = std::min(batch, n - start);
      std::vector<Image> xs;
      std::vector<int> labels;
      std::vector<std::uint64_t> keys;
      xs.reserve(count);
      for (std::size_t j = 0; j < count; ++j) {
        const std::size_t idx = order[start + j];
        const std::uint64_t key = example_key(epoch, idx);
        RngStream aug(cfg.seed, "augment", key);
        xs.push_back(augment(train.image(idx), aug, cfg.augment));
        labels.push_back(train.label(idx));
        keys.push_back(key);
      }

      std::vector<Image> inputs;
      if (cfg.attack_kind) {
        std::vector<LabelDistribution> targets;
        targets.reserve(count);
        for (std::size_t j = 0; j < count; ++j) {
          if (attack_cfg.mode == AttackMode::targeted) {
            RngStream pick(cfg.seed, "target-label", keys[j]);
            targets.push_back(LabelDistribution::one_hot(sample_target(labels[j], classes, pick), classes));
          } else {
            targets.push_back(LabelDistribution::one_hot(labels[j], classes));
          }
        }
        auto results = run_attack_chunked(*cfg.attack_kind, model, xs, targets, attack_cfg, keys, cfg.workers,
                                          kAttackChunk);
        if (batch_index == 0) {
          for (std::size_t j = 0; j < count; ++j) {
            if (auto why = feasibility_violation(results[j], xs[j], attack_cfg.budget)) {
              throw std::logic_error("training attack produced an infeasible image in epoch " +
                                     std::to_string(epoch) + ": " + *why);
            }
          }
        }
        inputs.reserve(count);
        for (auto& r : results) inputs.push_back(std::move(r.adversarial));
      } else {
        inputs = std::move(xs);
      }

      std::vector<LabelDistribution> smoothed;
      smoothed.reserve(count);
      for (int y : labels) smoothed.push_back(label_smooth(y, cfg.label_smoothing, classes));
      const double batch_loss = loss_and_param_gradient(model.params(), inputs, smoothed, grad);
      if (!std::isfinite(batch_loss)) throw TrainingDivergence(epoch, batch_index, batch_loss);
      loss_sum += batch_loss * static_cast<double>(count);

      ModelParams& theta = model.params();
      for (std::size_t t = 0; t < theta.tensors().size(); ++t) {
        auto& w = theta.tensors()[t].values;
        auto& v = velocity.tensors()[t].values;
        const auto& g = grad.tensors()[t].values;
        for (std::size_t k = 0; k < w.size(); ++k) {
          v[k] = cfg.momentum * v[k] + g[k];
          w[k] -= lr * v[k];
        }
      }
    }

    const ProbeScores scores = run_probe(model, probe_set, cfg);
    EpochRecord record{epoch, lr, loss_sum / static_cast<double>(n), scores.clean, scores.adversarial};
    log.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return {model.params(), std::move(log)};
}

TrainResult train_variant(TrainMode mode, const TrainConfig& base, const Dataset& train, const Dataset* probe,
                          const EpochCallback& on_epoch) {
  const TrainConfig preset = make_train_config(mode, base.attack.budget);
  TrainConfig cfg = base;
  cfg.attack_kind = preset.attack_kind;
  cfg.attack = preset.attack;
  cfg.label_smoothing = preset.label_smoothing;
  return joint_adv_train(cfg, train, probe, on_epoch);
}

}  // namespace advflow
