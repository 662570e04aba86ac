#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "advflow/attacks.hpp"
#include "advflow/classifier.hpp"
#include "advflow/data.hpp"

namespace advflow {

/// One named attack of an evaluation suite.
struct SuiteEntry {
  std::string name;
  AttackKind kind = AttackKind::pgd_pixel;
  AttackConfig config;
};

/// FGSM (step = budget, no random start), PGD20 (step 4/255), Spatial
/// (20 steps of 0.15 px) and Joint (20 double-pass steps with both step
/// sizes), all untargeted.
std::vector<SuiteEntry> default_suite(const Budget& budget, std::uint64_t seed);

struct EvalRow {
  std::string attack;
  double eps_pixel = 0.0;    // [-1, 1] units
  double eps_spatial = 0.0;  // pixels
  int steps = 0;
  double accuracy = 0.0;     // percent, rounded to 0.1
  std::size_t examples = 0;
  double seconds = 0.0;
  bool operator==(const EvalRow&) const = default;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  bool operator==(const EvalReport&) const = default;
};

struct EvalOptions {
  int workers = 1;
  /// Examples per model call; fixed so results do not depend on `workers`.
  std::size_t chunk = 100;
  /// Record wall time per row. Off by default so reports are reproducible
  /// byte for byte.
  bool timing = false;
};

/// Percent of `correct` out of `total`, rounded to 0.1.
double rounded_accuracy(std::size_t correct, std::size_t total);

/// Predicted class of every image.
std::vector<int> predict_labels(const DifferentiableModel& model, std::span<const Image> images,
                                const EvalOptions& opts = {});

/// Untargeted attacks against `source`, scored on `target`. Example i of
/// `data` uses key i for its random start.
std::vector<AttackResult> attack_dataset(const DifferentiableModel& source, const Dataset& data,
                                         const SuiteEntry& entry, const EvalOptions& opts = {});

/// A "Pristine" row followed by one row per suite entry.
EvalReport evaluate_suite(const DifferentiableModel& model, const Dataset& data, std::span<const SuiteEntry> suite,
                          const EvalOptions& opts = {});

enum class SweepAxis { pixel, spatial };

/// One row per value of the swept budget, the other budget taken from
/// `base`.
EvalReport budget_sweep(const DifferentiableModel& model, const Dataset& data, const SuiteEntry& base, SweepAxis axis,
                        std::span<const double> values, const EvalOptions& opts = {});

/// Attacks generated on `source` and scored on `target`; the Pristine row is
/// the target's clean accuracy.
EvalReport blackbox_eval(const DifferentiableModel& target, const DifferentiableModel& source, const Dataset& data,
                         std::span<const SuiteEntry> suite, const EvalOptions& opts = {});

/// CSV with header `attack,eps_pixel,eps_spatial,steps,accuracy,examples,seconds`.
void write_report(const EvalReport& report, std::ostream& out);
void export_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport parse_report(std::istream& in);

/// Shortest decimal form that reads back to the same double, independent of
/// the global locale.
std::string format_number(double v);
/// format_number rounded to `decimals` places.
std::string format_fixed(double v, int decimals);

/// Tensor archive for raw exports: "ADVTENS1", u32 tensor count, then each
/// tensor encoded as in the checkpoint container (name, rank, dims, float32
/// values).
std::vector<std::uint8_t> encode_tensor_archive(std::span<const NamedTensor> tensors);
std::vector<NamedTensor> decode_tensor_archive(std::span<const std::uint8_t> bytes);
void save_tensor_archive(std::span<const NamedTensor> tensors, const std::filesystem::path& path);

template <class Tag>
NamedTensor to_tensor(std::string name, const Grid<Tag>& g) {
  return {std::move(name), {g.height(), g.width(), g.depth()}, std::vector<double>(g.values().begin(), g.values().end())};
}

}  // namespace advflow
