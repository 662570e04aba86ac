#include "advflow/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "advflow/classifier.hpp"
#include "advflow/errors.hpp"
#include "advflow/geometry.hpp"
#include "advflow/rng.hpp"

namespace advflow {
namespace {

// Tracks max|a - n| and the largest magnitudes seen in one instance.
class ErrorTracker {
 public:
  void add(double analytic, double numeric) {
    worst_ = std::max(worst_, std::abs(analytic - numeric));
    scale_ = std::max({scale_, std::abs(analytic), std::abs(numeric)});
  }
  double relative() const { return scale_ > 1e-12 ? worst_ / scale_ : worst_; }

 private:
  double worst_ = 0.0;
  double scale_ = 0.0;
};

template <class Tag>
Grid<Tag> random_grid(int h, int w, int d, RngStream& rng) {
  Grid<Tag> g(h, w, d);
  for (double& v : g.values()) v = rng.uniform(-1.0, 1.0);
  return g;
}

bool near_integer(double t, double margin) { return std::abs(t - std::round(t)) < margin; }

// Flow whose sampling coordinates stay clear of lattice lines (and hence of
// the clamp boundaries) by more than `margin`.
FlowField off_lattice_flow(int h, int w, double radius, double margin, RngStream& rng) {
  FlowField flow(h, w, 2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double u, v;
      do {
        const double r = radius * std::sqrt(rng.uniform());
        const double a = 2.0 * std::numbers::pi * rng.uniform();
        u = r * std::cos(a);
        v = r * std::sin(a);
      } while (near_integer(x + u, margin) || near_integer(y + v, margin));
      flow(y, x, 0) = u;
      flow(y, x, 1) = v;
    }
  }
  return flow;
}

void corrupt(std::span<double> g) {
  for (double& v : g) v *= 1.01;
}

double central_difference(std::span<double> values, std::size_t i, double h, const std::function<double()>& f) {
  const double saved = values[i];
  values[i] = saved + h;
  const double plus = f();
  values[i] = saved - h;
  const double minus = f();
  values[i] = saved;
  return (plus - minus) / (2.0 * h);
}

double warp_objective(const Image& image, const FlowField& flow, const Image& upstream) {
  const Image out = warp(image, flow);
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * upstream[i];
  return s;
}

LabelDistribution random_target(int classes, RngStream& rng) {
  std::vector<double> p(static_cast<std::size_t>(classes));
  double total = 0.0;
  for (double& v : p) total += (v = rng.uniform() + 1e-3);
  for (double& v : p) v /= total;
  return LabelDistribution(std::move(p));
}

struct NetInstance {
  ModelParams params;
  std::vector<Image> batch;
  std::vector<LabelDistribution> targets;
};

NetInstance random_net(const GradcheckOptions& opts, int k) {
  RngStream rng(opts.seed, "gradcheck-net", static_cast<std::uint64_t>(k));
  Architecture arch;
  arch.height = opts.size;
  arch.width = opts.size;
  arch.channels = 1 + k % 3;
  NetInstance inst{init_params(arch, opts.seed + static_cast<std::uint64_t>(k)), {}, {}};
  for (auto& t : inst.params.tensors()) {
    if (t.shape.size() == 1) {
      for (double& v : t.values) v = rng.uniform(-0.1, 0.1);
    }
  }
  for (int i = 0; i < 3; ++i) {
    inst.batch.push_back(random_grid<ImageTag>(opts.size, opts.size, arch.channels, rng));
    inst.targets.push_back(random_target(arch.classes, rng));
  }
  return inst;
}

GradcheckResult finish(std::string name, const std::vector<double>& errors, int skipped, double tol) {
  GradcheckResult r;
  r.operation = std::move(name);
  r.instances = static_cast<int>(errors.size());
  r.worst_relative_error = errors.empty() ? 0.0 : *std::max_element(errors.begin(), errors.end());
  r.skipped = skipped;
  r.passed = !errors.empty() && r.worst_relative_error < tol;
  return r;
}

GradcheckResult check_warp_flow(const GradcheckOptions& opts) {
  std::vector<double> errors;
  for (int k = 0; k < opts.instances; ++k) {
    RngStream rng(opts.seed, "gradcheck-warp-flow", static_cast<std::uint64_t>(k));
    const int c = 1 + k % 3;
    const Image x = random_grid<ImageTag>(opts.size, opts.size, c, rng);
    FlowField flow = off_lattice_flow(opts.size, opts.size, 1.5, 1e-2, rng);
    const Image up = random_grid<ImageTag>(opts.size, opts.size, c, rng);
    FlowField analytic = warp_grad_flow(x, flow, up);
    if (opts.fault == GradFault::warp_flow) corrupt(analytic.values());
    ErrorTracker err;
    for (std::size_t i = 0; i < flow.size(); ++i) {
      err.add(analytic[i],
              central_difference(flow.values(), i, opts.step, [&] { return warp_objective(x, flow, up); }));
    }
    errors.push_back(err.relative());
  }
  return finish("warp_grad_flow", errors, 0, opts.tolerance);
}

GradcheckResult check_warp_image(const GradcheckOptions& opts) {
  std::vector<double> errors;
  for (int k = 0; k < opts.instances; ++k) {
    RngStream rng(opts.seed, "gradcheck-warp-image", static_cast<std::uint64_t>(k));
    const int c = 1 + k % 3;
    Image x = random_grid<ImageTag>(opts.size, opts.size, c, rng);
    const FlowField flow = off_lattice_flow(opts.size, opts.size, 1.5, 1e-2, rng);
    const Image up = random_grid<ImageTag>(opts.size, opts.size, c, rng);
    Image analytic = warp_grad_image(flow, up);
    if (opts.fault == GradFault::warp_image) corrupt(analytic.values());
    ErrorTracker err;
    for (std::size_t i = 0; i < x.size(); ++i) {
      err.add(analytic[i], central_difference(x.values(), i, opts.step, [&] { return warp_objective(x, flow, up); }));
    }
    errors.push_back(err.relative());
  }
  return finish("warp_grad_image", errors, 0, opts.tolerance);
}

GradcheckResult check_input_gradient(const GradcheckOptions& opts) {
  std::vector<double> errors;
  int skipped = 0;
  for (int k = 0; k < opts.instances; ++k) {
    NetInstance inst = random_net(opts, k);
    auto analytic = input_gradient(inst.params, inst.batch, inst.targets);
    if (opts.fault == GradFault::input) {
      for (auto& g : analytic) corrupt(g.values());
    }
    const auto objective = [&] { return loss(forward(inst.params, inst.batch), inst.targets); };
    ErrorTracker err;
    for (std::size_t b = 0; b < inst.batch.size(); ++b) {
      auto values = inst.batch[b].values();
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + opts.step;
        const auto sig_plus = activation_signature(inst.params, inst.batch);
        values[i] = saved - opts.step;
        const auto sig_minus = activation_signature(inst.params, inst.batch);
        values[i] = saved;
        if (sig_plus != sig_minus) {
          ++skipped;
          continue;
        }
        err.add(analytic[b][i], central_difference(values, i, opts.step, objective));
      }
    }
    errors.push_back(err.relative());
  }
  return finish("input_gradient", errors, skipped, opts.tolerance);
}

GradcheckResult check_param_gradient(const GradcheckOptions& opts) {
  std::vector<double> errors;
  int skipped = 0;
  for (int k = 0; k < opts.instances; ++k) {
    NetInstance inst = random_net(opts, k);
    ModelParams analytic = param_gradient(inst.params, inst.batch, inst.targets);
    if (opts.fault == GradFault::param) {
      for (auto& t : analytic.tensors()) corrupt(t.values);
    }
    RngStream pick(opts.seed, "gradcheck-coords", static_cast<std::uint64_t>(k));
    const auto objective = [&] { return loss(forward(inst.params, inst.batch), inst.targets); };
    ErrorTracker err;
    for (std::size_t t = 0; t < inst.params.tensors().size(); ++t) {
      auto& values = inst.params.tensors()[t].values;
      const auto& grad = analytic.tensors()[t].values;
      const std::size_t n = values.size();
      const std::size_t probes = std::min<std::size_t>(n, static_cast<std::size_t>(opts.coords_per_tensor));
      for (std::size_t p = 0; p < probes; ++p) {
        const std::size_t i = probes == n ? p : pick.below(n);
        const double saved = values[i];
        values[i] = saved + opts.step;
        const auto sig_plus = activation_signature(inst.params, inst.batch);
        values[i] = saved - opts.step;
        const auto sig_minus = activation_signature(inst.params, inst.batch);
        values[i] = saved;
        if (sig_plus != sig_minus) {
          ++skipped;
          continue;
        }
        err.add(grad[i], central_difference(values, i, opts.step, objective));
      }
    }
    errors.push_back(err.relative());
  }
  return finish("param_gradient", errors, skipped, opts.tolerance);
}

}  // namespace

GradFault parse_grad_fault(std::string_view name) {
  if (name == "none") return GradFault::none;
  if (name == "warp-flow") return GradFault::warp_flow;
  if (name == "warp-image") return GradFault::warp_image;
  if (name == "input") return GradFault::input;
  if (name == "param") return GradFault::param;
  throw ArgumentError("unknown gradient fault '" + std::string(name) + "'");
}

std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& opts) {
  if (opts.instances < 1 || opts.size < 4 || !(opts.step > 0.0) || !(opts.tolerance > 0.0)) {
    throw ArgumentError("gradcheck needs instances >= 1, size >= 4 and positive step and tolerance");
  }
  return {check_warp_flow(opts), check_warp_image(opts), check_input_gradient(opts), check_param_gradient(opts)};
}

}  // namespace advflow
