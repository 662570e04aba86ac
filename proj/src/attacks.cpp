#include "advflow/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "advflow/geometry.hpp"
#include "advflow/parallel.hpp"

namespace advflow {
namespace {

double direction(const AttackConfig& cfg) { return cfg.mode == AttackMode::targeted ? -1.0 : 1.0; }

void check_inputs(const DifferentiableModel& model, std::span<const Image> xs,
                  std::span<const LabelDistribution> targets, std::span<const std::uint64_t> keys) {
  if (targets.size() != xs.size() || keys.size() != xs.size()) {
    throw ShapeError("attack: images, targets and keys must have equal length");
  }
  for (const Image& x : xs) {
    for (double v : x.values()) {
      if (!(v >= -1.0 && v <= 1.0)) throw ArgumentError("attack input image outside [-1, 1]");
    }
  }
  for (const auto& t : targets) {
    if (t.classes() != model.classes()) throw ShapeError("attack target class count does not match model");
  }
}

struct Evaluation {
  std::vector<double> losses;
  std::vector<Image> grads;
};

Evaluation evaluate(const DifferentiableModel& model, std::span<const Image> images,
                    std::span<const LabelDistribution> targets) {
  Evaluation e{std::vector<double>(images.size()), std::vector<Image>(images.size())};
  model.loss_and_input_gradient(images, targets, e.losses, e.grads);
  return e;
}

// delta + step * sign(grad)
PixelPerturbation sign_step(const PixelPerturbation& delta, const Image& grad, double step) {
  PixelPerturbation out = delta;
  auto d = out.values();
  const auto g = grad.values();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double s = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
    d[i] += step * s;
  }
  return out;
}

// flow + step * gsign(grad), projected onto the spatial budget.
FlowField gsign_step(const FlowField& flow, const FlowField& grad, double step, double eps) {
  FlowField moved = flow;
  const FlowField unit = generalized_sign(grad);
  auto f = moved.values();
  const auto u = unit.values();
  for (std::size_t i = 0; i < f.size(); ++i) f[i] += step * u[i];
  return project_l2inf(moved, eps);
}

std::vector<FlowField> initial_flows(std::span<const Image> xs, const AttackConfig& cfg,
                                     std::span<const std::uint64_t> keys) {
  std::vector<FlowField> flows;
  flows.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (cfg.random_start) {
      RngStream rng(cfg.seed, "flow-init", keys[i]);
      flows.push_back(random_init_flow(xs[i].height(), xs[i].width(), cfg.budget.spatial, rng));
    } else {
      flows.push_back(zero_flow(xs[i].height(), xs[i].width()));
    }
  }
  return flows;
}

std::vector<PixelPerturbation> initial_deltas(std::span<const Image> bases, const AttackConfig& cfg,
                                              std::span<const std::uint64_t> keys) {
  std::vector<PixelPerturbation> deltas;
  deltas.reserve(bases.size());
  for (std::size_t i = 0; i < bases.size(); ++i) {
    const Image& b = bases[i];
    if (cfg.random_start) {
      RngStream rng(cfg.seed, "delta-init", keys[i]);
      deltas.push_back(clamp_feasible_delta(random_init_delta(b.height(), b.width(), b.depth(), cfg.budget.pixel, rng),
                                            b, cfg.budget.pixel));
    } else {
      deltas.emplace_back(b.height(), b.width(), b.depth());
    }
  }
  return deltas;
}

std::vector<Image> warp_all(std::span<const Image> xs, std::span<const FlowField> flows) {
  std::vector<Image> out;
  out.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out.push_back(warp(xs[i], flows[i]));
  return out;
}

std::vector<Image> add_all(std::span<const Image> bases, std::span<const PixelPerturbation> deltas) {
  std::vector<Image> out;
  out.reserve(bases.size());
  for (std::size_t i = 0; i < bases.size(); ++i) out.push_back(apply_delta(bases[i], deltas[i]));
  return out;
}

void check_debug(const std::vector<AttackResult>& results, std::span<const Image> xs, const AttackConfig& cfg) {
#ifndef NDEBUG
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (auto why = feasibility_violation(results[i], xs[i], cfg.budget)) {
      throw std::logic_error("attack produced an infeasible result: " + *why);
    }
  }
#else
  (void)results;
  (void)xs;
  (void)cfg;
#endif
}

std::vector<AttackResult> pixel_pgd_on(const DifferentiableModel& model, std::span<const Image> bases,
                                       std::span<const LabelDistribution> targets, const AttackConfig& cfg,
                                       std::span<const std::uint64_t> keys) {
  const double step = direction(cfg) * cfg.pixel_step;
  const double eps = cfg.budget.pixel;
  auto deltas = initial_deltas(bases, cfg, keys);
  std::vector<AttackResult> results(bases.size());
  for (int t = 0; t < cfg.steps; ++t) {
    const auto images = add_all(bases, deltas);
    const auto e = evaluate(model, images, targets);
    for (std::size_t i = 0; i < bases.size(); ++i) {
      results[i].loss_trace.push_back(e.losses[i]);
      deltas[i] = clamp_feasible_delta(sign_step(deltas[i], e.grads[i], step), bases[i], eps);
    }
  }
  for (std::size_t i = 0; i < bases.size(); ++i) {
    results[i].adversarial = apply_delta(bases[i], deltas[i]);
    results[i].flow = zero_flow(bases[i].height(), bases[i].width());
    results[i].delta = std::move(deltas[i]);
  }
  return results;
}

}  // namespace

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::fgsm: return "fgsm";
    case AttackKind::pgd_pixel: return "pgd";
    case AttackKind::spatial: return "spatial";
    case AttackKind::joint_sp: return "joint-sp";
    case AttackKind::joint_ps: return "joint-ps";
    case AttackKind::cascade: return "cascade";
    case AttackKind::one_pass: return "one-pass";
  }
  return "unknown";
}

AttackKind parse_attack_kind(std::string_view name) {
  for (AttackKind k : {AttackKind::fgsm, AttackKind::pgd_pixel, AttackKind::spatial, AttackKind::joint_sp,
                       AttackKind::joint_ps, AttackKind::cascade, AttackKind::one_pass}) {
    if (to_string(k) == name) return k;
  }
  if (name == "joint") return AttackKind::joint_sp;
  throw ArgumentError("unknown attack kind '" + std::string(name) + "'");
}

void AttackConfig::validate() const {
  if (steps < 1) throw ArgumentError("attack steps must be at least 1");
  if (!(pixel_step >= 0.0) || !(spatial_step >= 0.0)) throw ArgumentError("attack step sizes must be nonnegative");
  budget.validate();
}

std::optional<std::string> feasibility_violation(const AttackResult& r, const Image& x, const Budget& budget,
                                                 double tol) {
  if (!r.adversarial.same_shape(x) || !r.delta.same_shape(x) || r.flow.height() != x.height() ||
      r.flow.width() != x.width() || r.flow.depth() != 2) {
    return "result shapes do not match the clean image";
  }
  for (double v : r.flow.values()) {
    if (!std::isfinite(v)) return "flow has a non-finite entry";
  }
  if (l2inf_norm(r.flow) > budget.spatial + tol) return "flow exceeds the spatial budget";
  for (double v : r.adversarial.values()) {
    if (!(v >= -1.0 && v <= 1.0)) return "adversarial image leaves [-1, 1]";
  }
  for (double d : r.delta.values()) {
    if (!(std::abs(d) <= budget.pixel + tol)) return "delta exceeds the pixel budget";
  }
  const Image base = r.composition == Composition::spatial_then_pixel ? warp(x, r.flow) : x;
  const auto b = base.values();
  const auto d = r.delta.values();
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double z = b[i] + d[i];
    if (z < -1.0 - tol || z > 1.0 + tol) return "base + delta leaves [-1, 1]";
  }
  const Image expected = r.composition == Composition::spatial_then_pixel ? apply_delta(base, r.delta)
                                                                           : warp(apply_delta(x, r.delta), r.flow);
  const auto e = expected.values();
  const auto a = r.adversarial.values();
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (std::abs(e[i] - a[i]) > tol) return "adversarial image does not match its flow and delta";
  }
  return std::nullopt;
}

std::vector<AttackResult> fgsm(const DifferentiableModel& model, std::span<const Image> xs,
                               std::span<const LabelDistribution> targets, const AttackConfig& cfg,
                               std::span<const std::uint64_t> keys) {
  cfg.validate();
  check_inputs(model, xs, targets, keys);
  const double eps = cfg.budget.pixel;
  const auto e = evaluate(model, xs, targets);
  std::vector<AttackResult> results(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const PixelPerturbation zero(xs[i].height(), xs[i].width(), xs[i].depth());
    results[i].delta = clamp_feasible_delta(sign_step(zero, e.grads[i], direction(cfg) * eps), xs[i], eps);
    results[i].adversarial = apply_delta(xs[i], results[i].delta);
    results[i].flow = zero_flow(xs[i].height(), xs[i].width());
    results[i].loss_trace = {e.losses[i]};
  }
  check_debug(results, xs, cfg);
  return results;
}

std::vector<AttackResult> pgd_pixel(const DifferentiableModel& model, std::span<const Image> xs,
                                    std::span<const LabelDistribution> targets, const AttackConfig& cfg,
                                    std::span<const std::uint64_t> keys) {
  cfg.validate();
  check_inputs(model, xs, targets, keys);
  auto results = pixel_pgd_on(model, xs, targets, cfg, keys);
  check_debug(results, xs, cfg);
  return results;
}

std::vector<AttackResult> spatial_attack(const DifferentiableModel& model, std::span<const Image> xs,
                                         std::span<const LabelDistribution> targets, const AttackConfig& cfg,
                                         std::span<const std::uint64_t> keys) {
  cfg.validate();
  check_inputs(model, xs, targets, keys);
  const double step = direction(cfg) * cfg.spatial_step;
  auto flows = initial_flows(xs, cfg, keys);
  std::vector<AttackResult> results(xs.size());
  for (int t = 0; t < cfg.steps; ++t) {
    const auto warped = warp_all(xs, flows);
    const auto e = evaluate(model, warped, targets);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      results[i].loss_trace.push_back(e.losses[i]);
      flows[i] = gsign_step(flows[i], warp_grad_flow(xs[i], flows[i], e.grads[i]), step, cfg.budget.spatial);
    }
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    results[i].adversarial = warp(xs[i], flows[i]);
    results[i].delta = PixelPerturbation(xs[i].height(), xs[i].width(), xs[i].depth());
    results[i].flow = std::move(flows[i]);
  }
  check_debug(results, xs, cfg);
  return results;
}

std::vector<AttackResult> joint_attack_sp(const DifferentiableModel& model, std::span<const Image> xs,
                                          std::span<const LabelDistribution> targets, const AttackConfig& cfg,
                                          std::span<const std::uint64_t> keys) {
  cfg.validate();
  check_inputs(model, xs, targets, keys);
  const double dir = direction(cfg);
  auto flows = initial_flows(xs, cfg, keys);
  auto warped = warp_all(xs, flows);
  auto deltas = initial_deltas(warped, cfg, keys);
  std::vector<AttackResult> results(xs.size());
  for (int t = 0; t < cfg.steps; ++t) {
    // First pass: flow update at warp(x, flow) + delta.
    const auto first = evaluate(model, add_all(warped, deltas), targets);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      results[i].loss_trace.push_back(first.losses[i]);
      flows[i] = gsign_step(flows[i], warp_grad_flow(xs[i], flows[i], first.grads[i]), dir * cfg.spatial_step,
                            cfg.budget.spatial);
    }
    // Second pass: delta update at the new flow.
    warped = warp_all(xs, flows);
    const auto second = evaluate(model, add_all(warped, deltas), targets);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      deltas[i] = clamp_feasible_delta(sign_step(deltas[i], second.grads[i], dir * cfg.pixel_step), warped[i],
                                       cfg.budget.pixel);
    }
  }
  // delta was last projected against the final warp, so it already lies in
  // the feasible set.
  for (std::size_t i = 0; i < xs.size(); ++i) {
    results[i].adversarial = apply_delta(warped[i], deltas[i]);
    results[i].flow = std::move(flows[i]);
    results[i].delta = std::move(deltas[i]);
  }
  check_debug(results, xs, cfg);
  return results;
}

std::vector<AttackResult> joint_attack_ps(const DifferentiableModel& model, std::span<const Image> xs,
                                          std::span<const LabelDistribution> targets, const AttackConfig& cfg,
                                          std::span<const std::uint64_t> keys) {
  cfg.validate();
  check_inputs(model, xs, targets, keys);
  const double dir = direction(cfg);
  auto flows = initial_flows(xs, cfg, keys);
  auto deltas = initial_deltas(xs, cfg, keys);
  std::vector<AttackResult> results(xs.size());
  for (int t = 0; t < cfg.steps; ++t) {
    // First pass: delta update, chaining the image gradient through the warp.
    auto shifted = add_all(xs, deltas);
    const auto first = evaluate(model, warp_all(shifted, flows), targets);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      results[i].loss_trace.push_back(first.losses[i]);
      const Image pre_warp_grad = warp_grad_image(flows[i], first.grads[i]);
      deltas[i] = clamp_feasible_delta(sign_step(deltas[i], pre_warp_grad, dir * cfg.pixel_step), xs[i],
                                       cfg.budget.pixel);
    }
    // Second pass: flow update at the new delta.
    shifted = add_all(xs, deltas);
    const auto second = evaluate(model, warp_all(shifted, flows), targets);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      flows[i] = gsign_step(flows[i], warp_grad_flow(shifted[i], flows[i], second.grads[i]), dir * cfg.spatial_step,
                            cfg.budget.spatial);
    }
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    results[i].adversarial = warp(apply_delta(xs[i], deltas[i]), flows[i]);
    results[i].flow = std::move(flows[i]);
    results[i].delta = std::move(deltas[i]);
    results[i].composition = Composition::pixel_then_spatial;
  }
  check_debug(results, xs, cfg);
  return results;
}

std::vector<AttackResult> cascade_attack(const DifferentiableModel& model, std::span<const Image> xs,
                                         std::span<const LabelDistribution> targets, const AttackConfig& cfg,
                                         std::span<const std::uint64_t> keys) {
  auto spatial = spatial_attack(model, xs, targets, cfg, keys);
  std::vector<Image> warped;
  warped.reserve(xs.size());
  for (const auto& r : spatial) warped.push_back(r.adversarial);
  auto pixel = pixel_pgd_on(model, warped, targets, cfg, keys);
  std::vector<AttackResult> results(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    results[i].adversarial = std::move(pixel[i].adversarial);
    results[i].flow = std::move(spatial[i].flow);
    results[i].delta = std::move(pixel[i].delta);
    results[i].loss_trace = std::move(spatial[i].loss_trace);
    results[i].loss_trace.insert(results[i].loss_trace.end(), pixel[i].loss_trace.begin(), pixel[i].loss_trace.end());
  }
  check_debug(results, xs, cfg);
  return results;
}

std::vector<AttackResult> one_pass_attack(const DifferentiableModel& model, std::span<const Image> xs,
                                          std::span<const LabelDistribution> targets, const AttackConfig& cfg,
                                          std::span<const std::uint64_t> keys) {
  cfg.validate();
  check_inputs(model, xs, targets, keys);
  const double dir = direction(cfg);
  auto flows = initial_flows(xs, cfg, keys);
  auto warped = warp_all(xs, flows);
  auto deltas = initial_deltas(warped, cfg, keys);
  std::vector<AttackResult> results(xs.size());
  for (int t = 0; t < cfg.steps; ++t) {
    const auto e = evaluate(model, add_all(warped, deltas), targets);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      results[i].loss_trace.push_back(e.losses[i]);
      flows[i] = gsign_step(flows[i], warp_grad_flow(xs[i], flows[i], e.grads[i]), dir * cfg.spatial_step,
                            cfg.budget.spatial);
      warped[i] = warp(xs[i], flows[i]);
      deltas[i] = clamp_feasible_delta(sign_step(deltas[i], e.grads[i], dir * cfg.pixel_step), warped[i],
                                       cfg.budget.pixel);
    }
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    results[i].adversarial = apply_delta(warped[i], deltas[i]);
    results[i].flow = std::move(flows[i]);
    results[i].delta = std::move(deltas[i]);
  }
  check_debug(results, xs, cfg);
  return results;
}

std::vector<AttackResult> run_attack(AttackKind kind, const DifferentiableModel& model, std::span<const Image> xs,
                                     std::span<const LabelDistribution> targets, const AttackConfig& cfg,
                                     std::span<const std::uint64_t> keys) {
  switch (kind) {
    case AttackKind::fgsm: return fgsm(model, xs, targets, cfg, keys);
    case AttackKind::pgd_pixel: return pgd_pixel(model, xs, targets, cfg, keys);
    case AttackKind::spatial: return spatial_attack(model, xs, targets, cfg, keys);
    case AttackKind::joint_sp: return joint_attack_sp(model, xs, targets, cfg, keys);
    case AttackKind::joint_ps: return joint_attack_ps(model, xs, targets, cfg, keys);
    case AttackKind::cascade: return cascade_attack(model, xs, targets, cfg, keys);
    case AttackKind::one_pass: return one_pass_attack(model, xs, targets, cfg, keys);
  }
  throw ArgumentError("unknown attack kind");
}

std::vector<AttackResult> run_attack_chunked(AttackKind kind, const DifferentiableModel& model,
                                             std::span<const Image> xs, std::span<const LabelDistribution> targets,
                                             const AttackConfig& cfg, std::span<const std::uint64_t> keys, int workers,
                                             std::size_t chunk) {
  if (targets.size() != xs.size() || keys.size() != xs.size()) {
    throw ShapeError("attack: images, targets and keys must have equal length");
  }
  std::vector<AttackResult> results(xs.size());
  for_each_chunk(xs.size(), chunk, workers, [&](std::size_t begin, std::size_t end) {
    const std::size_t n = end - begin;
    auto part = run_attack(kind, model, xs.subspan(begin, n), targets.subspan(begin, n), cfg, keys.subspan(begin, n));
    std::move(part.begin(), part.end(), results.begin() + static_cast<std::ptrdiff_t>(begin));
  });
  return results;
}

AttackResult run_attack(AttackKind kind, const DifferentiableModel& model, const Image& x,
                        const LabelDistribution& target, const AttackConfig& cfg) {
  const std::uint64_t key = 0;
  auto results = run_attack(kind, model, std::span<const Image>(&x, 1), std::span<const LabelDistribution>(&target, 1),
                            cfg, std::span<const std::uint64_t>(&key, 1));
  return std::move(results.front());
}

}  // namespace advflow
