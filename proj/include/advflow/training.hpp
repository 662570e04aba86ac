#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "advflow/attacks.hpp"
#include "advflow/classifier.hpp"
#include "advflow/data.hpp"

namespace advflow {

enum class TrainMode { natural, pixel_one, pixel_multi, spatial, joint_sp, joint_ps, cascade, one_pass };

std::string_view to_string(TrainMode mode);
TrainMode parse_train_mode(std::string_view name);

/// Held-out attack used to report adversarial accuracy after every epoch.
struct ProbeConfig {
  std::size_t size = 200;
  AttackKind kind = AttackKind::joint_sp;
  int steps = 5;
  double spatial_step = 0.1;
  double pixel_step = 4.0 / 255.0;
  Budget budget{16.0 / 255.0, 0.3};
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 0.05;
  /// 1-based epochs from which the learning rate is multiplied by `decay`.
  std::vector<int> transitions{20, 25};
  double decay = 0.1;
  double momentum = 0.9;
  /// nullopt trains on clean images only.
  std::optional<AttackKind> attack_kind;
  AttackConfig attack;
  double label_smoothing = 0.5;
  std::uint64_t seed = 0;
  AugmentFlags augment;
  ProbeConfig probe;
  int workers = 1;

  void validate() const;
};

/// Configuration of one of the named training recipes with the given budget.
/// One-step recipes use targeted generation, step sizes equal to the budgets
/// and label smoothing; pixel-multi is 7-step untargeted PGD with step 4/255
/// and no smoothing; natural has no attack.
TrainConfig make_train_config(TrainMode mode, const Budget& budget);

/// The default schedule (decays at 2/3 and 5/6 of training) rescaled to
/// `epochs`, dropping transitions that would not fall inside [1, epochs).
std::vector<int> scaled_transitions(int epochs);

/// rho * decay^(number of transitions <= epoch), epochs counted from 1.
double learning_rate_at(const TrainConfig& cfg, int epoch);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double clean_acc = 0.0;
  double adv_acc = 0.0;
  bool operator==(const EpochRecord&) const = default;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  bool operator==(const TrainLog&) const = default;
};

/// CSV with header `epoch,lr,train_loss,clean_acc,adv_acc`.
void write_train_log(const TrainLog& log, std::ostream& out);
void save_train_log(const TrainLog& log, const std::filesystem::path& path);

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

/// Per-epoch progress callback; may be empty.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adversarial training loop. Every batch is augmented, attacked with the
/// configured generator (targets drawn by sample_target in targeted mode),
/// paired with smoothed labels and used for one momentum-SGD step.
/// `probe` supplies the held-out examples for the per-epoch accuracies; when
/// null, the head of `train` is used.
TrainResult joint_adv_train(const TrainConfig& cfg, const Dataset& train, const Dataset* probe = nullptr,
                            const EpochCallback& on_epoch = {});

/// make_train_config(mode, budget) with the remaining fields taken from
/// `base`, then joint_adv_train.
TrainResult train_variant(TrainMode mode, const TrainConfig& base, const Dataset& train,
                          const Dataset* probe = nullptr, const EpochCallback& on_epoch = {});

}  // namespace advflow
