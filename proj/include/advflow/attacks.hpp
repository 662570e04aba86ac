#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advflow/classifier.hpp"
#include "advflow/constraints.hpp"
#include "advflow/grid.hpp"

namespace advflow {

enum class AttackKind { fgsm, pgd_pixel, spatial, joint_sp, joint_ps, cascade, one_pass };
enum class AttackMode { untargeted, targeted };

std::string_view to_string(AttackKind kind);
/// Accepts the names printed by to_string ("fgsm", "pgd", "spatial",
/// "joint-sp", "joint-ps", "cascade", "one-pass").
AttackKind parse_attack_kind(std::string_view name);

struct AttackConfig {
  int steps = 1;
  double pixel_step = 0.0;    // [-1, 1] units per step
  double spatial_step = 0.0;  // pixels per step
  Budget budget;
  bool random_start = true;
  AttackMode mode = AttackMode::untargeted;
  std::uint64_t seed = 0;

  void validate() const;
};

/// How the adversarial image was composed from the clean image x.
enum class Composition {
  spatial_then_pixel,  // warp(x, flow) + delta
  pixel_then_spatial,  // warp(x + delta, flow)
};

struct AttackResult {
  Image adversarial;
  FlowField flow;
  PixelPerturbation delta;
  /// Loss at the first gradient evaluation of every step.
  std::vector<double> loss_trace;
  Composition composition = Composition::spatial_then_pixel;
};

/// Names the first violated invariant of `result` for clean image `x`, or
/// nullopt when the result is feasible. Tolerance covers rounding only.
std::optional<std::string> feasibility_violation(const AttackResult& result, const Image& x, const Budget& budget,
                                                 double tol = 1e-9);

// Batched attack generators. Example i draws its random start from the
// streams ("flow-init", keys[i]) and ("delta-init", keys[i]) of cfg.seed, so
// results do not depend on how examples are grouped into batches. In
// untargeted mode the loss on `targets` is ascended; in targeted mode it is
// descended.

std::vector<AttackResult> fgsm(const DifferentiableModel& model, std::span<const Image> xs,
                               std::span<const LabelDistribution> targets, const AttackConfig& cfg,
                               std::span<const std::uint64_t> keys);

/// Multi-step l-inf PGD with optional random start.
std::vector<AttackResult> pgd_pixel(const DifferentiableModel& model, std::span<const Image> xs,
                                    std::span<const LabelDistribution> targets, const AttackConfig& cfg,
                                    std::span<const std::uint64_t> keys);

/// Generalized gradient sign method on the flow field. The flow is
/// accumulated across steps and the clean image re-warped every step.
std::vector<AttackResult> spatial_attack(const DifferentiableModel& model, std::span<const Image> xs,
                                         std::span<const LabelDistribution> targets, const AttackConfig& cfg,
                                         std::span<const std::uint64_t> keys);

/// Double-pass joint attack on warp(x, flow) + delta: each step first
/// updates the flow, then re-evaluates at the new flow and updates delta.
std::vector<AttackResult> joint_attack_sp(const DifferentiableModel& model, std::span<const Image> xs,
                                          std::span<const LabelDistribution> targets, const AttackConfig& cfg,
                                          std::span<const std::uint64_t> keys);

/// Double-pass joint attack on warp(x + delta, flow): delta first, then flow.
std::vector<AttackResult> joint_attack_ps(const DifferentiableModel& model, std::span<const Image> xs,
                                          std::span<const LabelDistribution> targets, const AttackConfig& cfg,
                                          std::span<const std::uint64_t> keys);

/// Full spatial attack followed by full pixel PGD on its output.
std::vector<AttackResult> cascade_attack(const DifferentiableModel& model, std::span<const Image> xs,
                                         std::span<const LabelDistribution> targets, const AttackConfig& cfg,
                                         std::span<const std::uint64_t> keys);

/// Both variables updated from one gradient evaluation per step.
std::vector<AttackResult> one_pass_attack(const DifferentiableModel& model, std::span<const Image> xs,
                                          std::span<const LabelDistribution> targets, const AttackConfig& cfg,
                                          std::span<const std::uint64_t> keys);

std::vector<AttackResult> run_attack(AttackKind kind, const DifferentiableModel& model, std::span<const Image> xs,
                                     std::span<const LabelDistribution> targets, const AttackConfig& cfg,
                                     std::span<const std::uint64_t> keys);

/// run_attack over fixed chunks of `chunk` examples spread across `workers`
/// threads; the output does not depend on the worker count.
std::vector<AttackResult> run_attack_chunked(AttackKind kind, const DifferentiableModel& model,
                                             std::span<const Image> xs, std::span<const LabelDistribution> targets,
                                             const AttackConfig& cfg, std::span<const std::uint64_t> keys, int workers,
                                             std::size_t chunk = 32);

/// Single-example convenience form, using key 0.
AttackResult run_attack(AttackKind kind, const DifferentiableModel& model, const Image& x,
                        const LabelDistribution& target, const AttackConfig& cfg);

}  // namespace advflow
