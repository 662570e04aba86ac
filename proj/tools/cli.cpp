#include "cli.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "advflow/attacks.hpp"
#include "advflow/classifier.hpp"
#include "advflow/data.hpp"
#include "advflow/errors.hpp"
#include "advflow/evaluation.hpp"
#include "advflow/gradcheck.hpp"
#include "advflow/parallel.hpp"
#include "advflow/training.hpp"

namespace advflow::cli {
namespace {

using nlohmann::json;

// ---------------------------------------------------------------- config

template <class T>
T expect(const json& v, const std::string& path);

template <>
bool expect<bool>(const json& v, const std::string& path) {
  if (!v.is_boolean()) throw ConfigError(path + ": expected true or false");
  return v.get<bool>();
}

template <>
int expect<int>(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
  const auto i = v.get<std::int64_t>();
  if (i < INT32_MIN || i > INT32_MAX) throw ConfigError(path + ": integer out of range");
  return static_cast<int>(i);
}

template <>
std::uint64_t expect<std::uint64_t>(const json& v, const std::string& path) {
  if (!v.is_number_unsigned()) throw ConfigError(path + ": expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

template <>
double expect<double>(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path + ": expected a number");
  return v.get<double>();
}

template <>
std::string expect<std::string>(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path + ": expected a string");
  return v.get<std::string>();
}

template <class T>
std::vector<T> expect_list(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path + ": expected a list");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(expect<T>(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

using Setter = std::function<void(RunConfig&, const json&, const std::string&)>;

template <class T, class Field>
Setter set(Field RunConfig::*field) {
  return [field](RunConfig& c, const json& v, const std::string& path) { c.*field = expect<T>(v, path); };
}

Setter set_path(std::filesystem::path RunConfig::*field) {
  return [field](RunConfig& c, const json& v, const std::string& path) { c.*field = expect<std::string>(v, path); };
}

const std::map<std::string, std::map<std::string, Setter>>& schema() {
  static const std::map<std::string, std::map<std::string, Setter>> s = {
      {"",
       {{"seed", set<std::uint64_t>(&RunConfig::seed)},
        {"workers", set<int>(&RunConfig::workers)},
        {"out", set_path(&RunConfig::out)}}},
      {"model",
       {{"checkpoint", set_path(&RunConfig::checkpoint)},
        {"source_checkpoint", set_path(&RunConfig::source_checkpoint)}}},
      {"data",
       {{"train", set_path(&RunConfig::train_data)},
        {"test", set_path(&RunConfig::test_data)},
        {"limit",
         [](RunConfig& c, const json& v, const std::string& p) { c.limit = expect<std::uint64_t>(v, p); }},
        {"crop", set<bool>(&RunConfig::crop)},
        {"flip", set<bool>(&RunConfig::flip)},
        {"padding", set<int>(&RunConfig::padding)}}},
      {"attack",
       {{"kind", set<std::string>(&RunConfig::attack_kind)},
        {"eps_pixel", set<double>(&RunConfig::eps_pixel)},
        {"eps_spatial", set<double>(&RunConfig::eps_spatial)},
        {"pixel_scale", set<double>(&RunConfig::pixel_scale)},
        {"steps", set<int>(&RunConfig::steps)},
        {"pixel_step", set<double>(&RunConfig::pixel_step)},
        {"spatial_step", set<double>(&RunConfig::spatial_step)},
        {"random_start", set<bool>(&RunConfig::random_start)}}},
      {"train",
       {{"mode", set<std::string>(&RunConfig::mode)},
        {"epochs", set<int>(&RunConfig::epochs)},
        {"batch_size", set<int>(&RunConfig::batch_size)},
        {"lr", set<double>(&RunConfig::lr)},
        {"transitions",
         [](RunConfig& c, const json& v, const std::string& p) { c.transitions = expect_list<int>(v, p); }},
        {"decay", set<double>(&RunConfig::decay)},
        {"momentum", set<double>(&RunConfig::momentum)},
        {"label_smoothing", set<double>(&RunConfig::label_smoothing)},
        {"steps", set<int>(&RunConfig::train_steps)},
        {"pixel_step", set<double>(&RunConfig::train_pixel_step)},
        {"spatial_step", set<double>(&RunConfig::train_spatial_step)},
        {"probe_size", set<int>(&RunConfig::probe_size)},
        {"probe_steps", set<int>(&RunConfig::probe_steps)}}},
      {"eval",
       {{"timing", set<bool>(&RunConfig::timing)},
        {"sweep_axis", set<std::string>(&RunConfig::sweep_axis)},
        {"sweep_values",
         [](RunConfig& c, const json& v, const std::string& p) { c.sweep_values = expect_list<double>(v, p); }},
        {"instances", set<int>(&RunConfig::instances)},
        {"fault", set<std::string>(&RunConfig::fault)}}},
  };
  return s;
}

// ---------------------------------------------------------------- logging

enum class Level { error = 0, info = 1, debug = 2 };

class Logger {
 public:
  Logger(Level level, std::ostream& sink) : level_(level), sink_(sink) {}
  void error(const std::string& m) const { emit(Level::error, "error", m); }
  void info(const std::string& m) const { emit(Level::info, "info", m); }
  void debug(const std::string& m) const { emit(Level::debug, "debug", m); }

 private:
  void emit(Level l, const char* tag, const std::string& m) const {
    if (l <= level_) sink_ << "[" << tag << "] " << m << '\n';
  }
  Level level_;
  std::ostream& sink_;
};

Level log_level_from_env() {
  const char* v = std::getenv("ADVFLOW_LOG");
  if (v == nullptr || *v == '\0') return Level::info;
  const std::string s(v);
  if (s == "error") return Level::error;
  if (s == "info") return Level::info;
  if (s == "debug") return Level::debug;
  throw ConfigError("ADVFLOW_LOG must be one of error, info, debug (got '" + s + "')");
}

// ---------------------------------------------------------------- helpers

struct Context {
  RunConfig cfg;
  Logger log;
  std::ostream& out;
  int workers;
};

Dataset load_split(const std::filesystem::path& path, Split split, std::size_t limit) {
  Dataset d = load_dataset(path, split);
  return limit > 0 ? d.head(limit) : d;
}

Budget budget_for(const RunConfig& cfg, const Dataset& data) {
  Budget b;
  b.pixel = cfg.eps_pixel * cfg.pixel_scale;
  b.spatial = cfg.eps_spatial.value_or(0.01 * std::max(data.height(), data.width()));
  b.validate();
  return b;
}

std::string describe_budget(const RunConfig& cfg, const Budget& b) {
  return "eps_pixel=" + format_number(cfg.eps_pixel) + "/255-scale (" + format_number(b.pixel) +
         " in [-1,1] units), eps_spatial=" + format_number(b.spatial) + " px";
}

Classifier load_model(const std::filesystem::path& path, const Dataset& data) {
  ModelParams params = load_checkpoint(path);
  const Architecture& a = params.architecture();
  if (a.height != data.height() || a.width != data.width() || a.channels != data.channels() ||
      a.classes != data.num_classes()) {
    throw ShapeError("checkpoint " + path.string() + " does not match the dataset's image shape or class count");
  }
  return Classifier(std::move(params));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

void ensure_out_dir(const RunConfig& cfg) { std::filesystem::create_directories(cfg.out); }

/// Evaluation attack built from the attack section.
SuiteEntry attack_entry(const RunConfig& cfg, AttackKind kind, const Budget& budget) {
  SuiteEntry e;
  e.kind = kind;
  e.name = std::string(to_string(kind));
  e.config.steps = kind == AttackKind::fgsm ? 1 : cfg.steps;
  e.config.pixel_step = kind == AttackKind::fgsm ? budget.pixel : cfg.pixel_step * cfg.pixel_scale;
  e.config.spatial_step = cfg.spatial_step;
  e.config.budget = budget;
  e.config.random_start = kind == AttackKind::fgsm ? false : cfg.random_start;
  e.config.seed = cfg.seed;
  if (kind == AttackKind::fgsm || kind == AttackKind::pgd_pixel) e.config.budget.spatial = 0.0;
  if (kind == AttackKind::spatial) e.config.budget.pixel = 0.0;
  e.config.validate();
  return e;
}

// ---------------------------------------------------------------- commands

int cmd_train(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const Dataset train = load_split(c.train_data, Split::train, c.limit);
  const Dataset probe = load_dataset(c.test_data, Split::test);
  const Budget budget = budget_for(c, train);
  const TrainMode mode = parse_train_mode(c.mode);

  TrainConfig cfg = make_train_config(mode, budget);
  cfg.epochs = c.epochs;
  cfg.batch_size = c.batch_size;
  cfg.learning_rate = c.lr;
  cfg.transitions = c.transitions.value_or(scaled_transitions(c.epochs));
  cfg.decay = c.decay;
  cfg.momentum = c.momentum;
  cfg.seed = c.seed;
  cfg.workers = ctx.workers;
  cfg.augment = {c.crop, c.flip, c.padding};
  cfg.probe.size = static_cast<std::size_t>(std::max(c.probe_size, 0));
  cfg.probe.steps = c.probe_steps;
  cfg.probe.budget = budget;
  if (c.label_smoothing) cfg.label_smoothing = *c.label_smoothing;
  if (c.train_steps) {
    cfg.attack.steps = *c.train_steps;
    if (*c.train_steps > 1) {
      // Multi-step recipe: 0.1 px spatial steps and the configured pixel step.
      cfg.attack.spatial_step = 0.1;
      cfg.attack.pixel_step = c.pixel_step * c.pixel_scale;
    }
  }
  if (c.train_pixel_step) cfg.attack.pixel_step = *c.train_pixel_step * c.pixel_scale;
  if (c.train_spatial_step) cfg.attack.spatial_step = *c.train_spatial_step;

  ctx.log.info("train mode=" + c.mode + " epochs=" + std::to_string(cfg.epochs) + " examples=" +
               std::to_string(train.size()) + " " + describe_budget(c, budget));
  ensure_out_dir(c);
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult result = joint_adv_train(cfg, train, &probe, [&](const EpochRecord& e) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ctx.log.info("epoch " + std::to_string(e.epoch) + " lr=" + format_number(e.lr) + " loss=" +
                 format_fixed(e.train_loss, 4) + " clean=" + format_fixed(e.clean_acc, 1) +
                 " adv=" + format_fixed(e.adv_acc, 1) + " elapsed=" + format_fixed(secs, 1) + "s");
  });
  save_checkpoint(result.params, c.out / "model.ckpt");
  save_train_log(result.log, c.out / "train_log.csv");
  ctx.out << "wrote " << (c.out / "model.ckpt").string() << " and " << (c.out / "train_log.csv").string() << '\n';
  return 0;
}

int cmd_attack(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const Dataset data = load_split(c.test_data, Split::test, c.limit);
  const Classifier model = load_model(c.checkpoint, data);
  const Budget budget = budget_for(c, data);
  const SuiteEntry entry = attack_entry(c, parse_attack_kind(c.attack_kind.value_or("joint-sp")), budget);
  ctx.log.info("attack " + entry.name + " steps=" + std::to_string(entry.config.steps) + " examples=" +
               std::to_string(data.size()) + " " + describe_budget(c, entry.config.budget));

  const EvalOptions opts{ctx.workers, 100, false};
  const auto results = attack_dataset(model, data, entry, opts);
  std::vector<Image> clean, adversarial;
  for (std::size_t i = 0; i < data.size(); ++i) {
    clean.push_back(data.image(i));
    adversarial.push_back(results[i].adversarial);
  }
  const auto clean_pred = predict_labels(model, clean, opts);
  const auto adv_pred = predict_labels(model, adversarial, opts);

  std::vector<NamedTensor> tensors;
  std::ostringstream flags;
  flags << "index,label,clean_pred,adv_pred,success,feasible\n";
  std::size_t successes = 0, infeasible = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::string k = std::to_string(i);
    tensors.push_back(to_tensor("x." + k, clean[i]));
    tensors.push_back(to_tensor("flow." + k, results[i].flow));
    tensors.push_back(to_tensor("delta." + k, results[i].delta));
    tensors.push_back(to_tensor("adv." + k, results[i].adversarial));
    const bool success = adv_pred[i] != data.label(i);
    const auto violation = feasibility_violation(results[i], clean[i], entry.config.budget);
    if (violation) ctx.log.error("example " + k + " infeasible: " + *violation);
    successes += success ? 1 : 0;
    infeasible += violation ? 1 : 0;
    flags << std::to_string(i) << ',' << std::to_string(data.label(i)) << ',' << std::to_string(clean_pred[i]) << ','
          << std::to_string(adv_pred[i]) << ',' << (success ? '1' : '0') << ',' << (violation ? '0' : '1') << '\n';
  }
  ensure_out_dir(c);
  save_tensor_archive(tensors, c.out / "adversarial.advt");
  write_text(c.out / "attack_flags.csv", flags.str());
  ctx.out << "attack success " << format_fixed(rounded_accuracy(successes, data.size()), 1) << "% over "
          << data.size() << " examples, " << infeasible << " infeasible\n";
  return infeasible == 0 ? 0 : 1;
}

void print_report(std::ostream& out, const EvalReport& report) {
  for (const auto& r : report.rows) {
    out << r.attack << ": " << format_fixed(r.accuracy, 1) << "% (" << r.examples << " examples)\n";
  }
}

int cmd_eval(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const Dataset data = load_split(c.test_data, Split::test, c.limit);
  const Classifier model = load_model(c.checkpoint, data);
  const Budget budget = budget_for(c, data);
  auto suite = default_suite(budget, c.seed);
  for (auto& e : suite) {
    if (e.kind == AttackKind::fgsm) continue;
    e.config.steps = c.steps;
    e.config.pixel_step = c.pixel_step * c.pixel_scale;
    e.config.random_start = c.random_start;
    if (e.kind != AttackKind::pgd_pixel) e.config.spatial_step = c.spatial_step;
    if (e.kind == AttackKind::pgd_pixel) e.name = "PGD" + std::to_string(c.steps);
  }
  const EvalOptions opts{ctx.workers, 100, c.timing};
  ensure_out_dir(c);
  EvalReport report;
  std::filesystem::path path;
  if (!c.source_checkpoint.empty()) {
    const Classifier source = load_model(c.source_checkpoint, data);
    ctx.log.info("black-box eval: attacks from " + c.source_checkpoint.string() + ", " + describe_budget(c, budget));
    report = blackbox_eval(model, source, data, suite, opts);
    path = c.out / "blackbox.csv";
  } else {
    ctx.log.info("white-box eval over " + std::to_string(data.size()) + " examples, " + describe_budget(c, budget));
    report = evaluate_suite(model, data, suite, opts);
    path = c.out / "eval.csv";
  }
  export_report(report, path);
  print_report(ctx.out, report);
  return 0;
}

int cmd_sweep(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const Dataset data = load_split(c.test_data, Split::test, c.limit);
  const Classifier model = load_model(c.checkpoint, data);
  const Budget budget = budget_for(c, data);
  SweepAxis axis;
  std::vector<double> values;
  AttackKind kind;
  if (c.sweep_axis == "pixel") {
    axis = SweepAxis::pixel;
    kind = AttackKind::pgd_pixel;
    for (double v : c.sweep_values.value_or(std::vector<double>{0, 1, 2, 4, 6, 8, 10, 12, 16})) {
      values.push_back(v * c.pixel_scale);
    }
  } else if (c.sweep_axis == "spatial") {
    axis = SweepAxis::spatial;
    kind = AttackKind::spatial;
    values = c.sweep_values.value_or(std::vector<double>{0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0});
  } else {
    throw ConfigError("sweep axis must be 'pixel' or 'spatial'");
  }
  // An explicit --attack picks the swept attack; the other budget then
  // stays at its configured value.
  if (c.attack_kind) kind = parse_attack_kind(*c.attack_kind);
  const SuiteEntry base = attack_entry(c, kind, budget);
  ctx.log.info("sweep " + c.sweep_axis + " with " + base.name + " over " + std::to_string(values.size()) +
               " budgets, " + std::to_string(data.size()) + " examples");
  const EvalReport report = budget_sweep(model, data, base, axis, values, {ctx.workers, 100, c.timing});
  ensure_out_dir(c);
  export_report(report, c.out / ("sweep_" + c.sweep_axis + ".csv"));
  for (const auto& r : report.rows) {
    ctx.out << base.name << " eps_pixel=" << format_number(r.eps_pixel / c.pixel_scale) << "/255-scale eps_spatial="
            << format_number(r.eps_spatial) << ": " << format_fixed(r.accuracy, 1) << "%\n";
  }
  return 0;
}

int cmd_gradcheck(Context& ctx) {
  GradcheckOptions opts;
  opts.instances = ctx.cfg.instances;
  opts.seed = ctx.cfg.seed;
  opts.fault = parse_grad_fault(ctx.cfg.fault);
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = run_gradcheck(opts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool ok = true;
  for (const auto& r : results) {
    char err[32];
    std::snprintf(err, sizeof err, "%.3e", r.worst_relative_error);
    ctx.out << r.operation << " instances=" << r.instances << " worst_rel_error=" << err << " skipped=" << r.skipped
            << ' ' << (r.passed ? "PASS" : "FAIL") << '\n';
    ok = ok && r.passed;
  }
  ctx.out << "gradcheck " << (ok ? "passed" : "failed") << " in " << format_fixed(secs, 2) << "s\n";
  return ok ? 0 : 1;
}

}  // namespace

void apply_config(RunConfig& cfg, const json& doc) {
  if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");
  const auto& s = schema();
  const auto& top = s.at("");
  for (const auto& [key, value] : doc.items()) {
    if (auto it = top.find(key); it != top.end()) {
      it->second(cfg, value, key);
      continue;
    }
    const auto section = s.find(key);
    if (key.empty() || section == s.end()) throw ConfigError("unknown configuration key '" + key + "'");
    if (!value.is_object()) throw ConfigError(key + ": expected a section object");
    for (const auto& [sub, v] : value.items()) {
      const auto setter = section->second.find(sub);
      if (setter == section->second.end()) throw ConfigError("unknown configuration key '" + key + "." + sub + "'");
      setter->second(cfg, v, key + "." + sub);
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open configuration file " + path.string());
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  apply_config(cfg, doc);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatial and joint spatial-pixel adversarial attacks and training"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path, seed, out_dir, checkpoint, source, mode, attack, train_data, test_data, axis, fault;
  int workers = 0, steps = 0, epochs = 0, instances = 0;
  std::size_t limit = 0;
  double eps_pixel = 0, eps_spatial = 0;
  std::vector<double> values;
  bool timing = false;

  auto* o_config = app.add_option("--config", config_path, "JSON configuration file");
  auto* o_seed = app.add_option("--seed", seed, "Master random seed (u64)");
  auto* o_out = app.add_option("--out", out_dir, "Output directory");
  auto* o_workers = app.add_option("--workers", workers, "Parallel workers (default: available cores)");
  auto* o_limit = app.add_option("--limit", limit, "Use only the first N examples of the split");
  auto* o_eps_pixel = app.add_option("--eps-pixel", eps_pixel, "Pixel budget on the 0-255 scale");
  auto* o_eps_spatial = app.add_option("--eps-spatial", eps_spatial, "Spatial budget in pixels");
  auto* o_steps = app.add_option("--steps", steps, "Attack steps (training attack steps for train)");
  auto* o_mode = app.add_option("--mode", mode, "Training mode")
                     ->check(CLI::IsMember({"natural", "pixel-one", "pixel-multi", "spatial", "joint-sp", "joint-ps",
                                            "cascade", "one-pass"}));
  auto* o_source = app.add_option("--source-checkpoint", source, "Generate attacks on this model (black-box eval)");
  auto* o_checkpoint = app.add_option("--checkpoint", checkpoint, "Model checkpoint to attack or evaluate");
  auto* o_attack = app.add_option("--attack", attack, "Attack kind")
                       ->check(CLI::IsMember({"fgsm", "pgd", "spatial", "joint-sp", "joint-ps", "cascade",
                                              "one-pass"}));
  auto* o_train_data = app.add_option("--train-data", train_data, "Training split (ADVDATA1 file)");
  auto* o_test_data = app.add_option("--test-data", test_data, "Test split (ADVDATA1 file)");
  auto* o_epochs = app.add_option("--epochs", epochs, "Training epochs");
  auto* o_axis = app.add_option("--axis", axis, "Sweep axis")->check(CLI::IsMember({"pixel", "spatial"}));
  auto* o_values = app.add_option("--values", values, "Sweep budgets (pixel axis on the 0-255 scale)");
  auto* o_timing = app.add_flag("--timing", timing, "Record wall time in reports");
  auto* o_instances = app.add_option("--instances", instances, "Gradient-check instances per operation");
  auto* o_fault = app.add_option("--fault", fault, "Corrupt one gradient path (oracle self-test)")
                      ->check(CLI::IsMember({"none", "warp-flow", "warp-image", "input", "param"}));

  auto* train = app.add_subcommand("train", "Train a model with the selected recipe");
  auto* attack_cmd = app.add_subcommand("attack", "Attack a test split and export the tensors");
  auto* eval = app.add_subcommand("eval", "Evaluate the default attack suite");
  auto* sweep = app.add_subcommand("sweep", "Accuracy along one budget axis");
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient oracles");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version exit cleanly; every other parse error is a usage error.
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    const Level level = log_level_from_env();
    RunConfig cfg;
    if (o_config->count()) apply_config_file(cfg, config_path);
    if (o_seed->count()) {
      std::uint64_t s = 0;
      const auto [end, ec] = std::from_chars(seed.data(), seed.data() + seed.size(), s);
      if (ec != std::errc() || end != seed.data() + seed.size()) throw ConfigError("--seed must be an unsigned integer");
      cfg.seed = s;
    }
    if (o_out->count()) cfg.out = out_dir;
    if (o_workers->count()) cfg.workers = workers;
    if (o_limit->count()) cfg.limit = limit;
    if (o_eps_pixel->count()) cfg.eps_pixel = eps_pixel;
    if (o_eps_spatial->count()) cfg.eps_spatial = eps_spatial;
    if (o_mode->count()) cfg.mode = mode;
    if (o_source->count()) cfg.source_checkpoint = source;
    if (o_checkpoint->count()) cfg.checkpoint = checkpoint;
    if (o_attack->count()) cfg.attack_kind = attack;
    if (o_train_data->count()) cfg.train_data = train_data;
    if (o_test_data->count()) cfg.test_data = test_data;
    if (o_epochs->count()) cfg.epochs = epochs;
    if (o_axis->count()) cfg.sweep_axis = axis;
    if (o_values->count()) cfg.sweep_values = values;
    if (o_timing->count()) cfg.timing = timing;
    if (o_instances->count()) cfg.instances = instances;
    if (o_fault->count()) cfg.fault = fault;
    if (o_steps->count()) {
      if (train->parsed()) {
        cfg.train_steps = steps;
      } else {
        cfg.steps = steps;
      }
    }
    if (cfg.workers < 0) throw ConfigError("workers must be nonnegative");

    Context ctx{cfg, Logger(level, err), out, resolve_workers(cfg.workers)};
    if (train->parsed()) return cmd_train(ctx);
    if (attack_cmd->parsed()) return cmd_attack(ctx);
    if (eval->parsed()) return cmd_eval(ctx);
    if (sweep->parsed()) return cmd_sweep(ctx);
    if (gradcheck->parsed()) return cmd_gradcheck(ctx);
    return 2;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "invalid argument: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace advflow::cli
