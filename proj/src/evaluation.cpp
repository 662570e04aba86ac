#include "advflow/evaluation.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "advflow/parallel.hpp"
#include "binary_io.hpp"

namespace advflow {
namespace {

constexpr std::string_view kReportHeader = "attack,eps_pixel,eps_spatial,steps,accuracy,examples,seconds";
constexpr std::string_view kArchiveMagic = "ADVTENS1";

std::vector<Image> dataset_images(const Dataset& data) {
  std::vector<Image> images;
  images.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) images.push_back(data.image(i));
  return images;
}

std::size_t count_correct(std::span<const int> predicted, const Dataset& data) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == data.label(i) ? 1 : 0;
  return correct;
}

void check_compatible(const DifferentiableModel& model, const Dataset& data) {
  if (data.empty()) throw ArgumentError("evaluation dataset is empty");
  if (model.classes() != data.num_classes()) {
    throw ShapeError("model predicts " + std::to_string(model.classes()) + " classes but the dataset has " +
                     std::to_string(data.num_classes()));
  }
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

EvalRow pristine_row(const DifferentiableModel& model, const Dataset& data, std::span<const Image> images,
                     const EvalOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto predicted = predict_labels(model, images, opts);
  EvalRow row{"Pristine", 0.0, 0.0, 0, rounded_accuracy(count_correct(predicted, data), data.size()), data.size(), 0.0};
  if (opts.timing) row.seconds = elapsed_since(t0);
  return row;
}

EvalRow attack_row(const DifferentiableModel& target, const DifferentiableModel& source, const Dataset& data,
                   const SuiteEntry& entry, const EvalOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = attack_dataset(source, data, entry, opts);
  std::vector<Image> adversarial;
  adversarial.reserve(results.size());
  for (const auto& r : results) adversarial.push_back(r.adversarial);
  const auto predicted = predict_labels(target, adversarial, opts);
  EvalRow row{entry.name,
              entry.config.budget.pixel,
              entry.config.budget.spatial,
              entry.config.steps,
              rounded_accuracy(count_correct(predicted, data), data.size()),
              data.size(),
              0.0};
  if (opts.timing) row.seconds = elapsed_since(t0);
  return row;
}

// `line` is 1-based; `at` is the byte offset of the line start.
double parse_double(std::string_view field, std::size_t line, std::size_t at) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || end != field.data() + field.size()) {
    throw FormatError("bad number '" + std::string(field) + "' on report line " + std::to_string(line), at);
  }
  return v;
}

template <class Int>
Int parse_integer(std::string_view field, std::size_t line, std::size_t at) {
  Int v{};
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || end != field.data() + field.size()) {
    throw FormatError("bad integer '" + std::string(field) + "' on report line " + std::to_string(line), at);
  }
  return v;
}

}  // namespace

std::vector<SuiteEntry> default_suite(const Budget& budget, std::uint64_t seed) {
  budget.validate();
  AttackConfig base;
  base.budget = budget;
  base.seed = seed;
  base.mode = AttackMode::untargeted;

  AttackConfig fgsm_cfg = base;
  fgsm_cfg.steps = 1;
  fgsm_cfg.pixel_step = budget.pixel;
  fgsm_cfg.random_start = false;
  fgsm_cfg.budget.spatial = 0.0;

  AttackConfig pgd = base;
  pgd.steps = 20;
  pgd.pixel_step = 4.0 / 255.0;
  pgd.budget.spatial = 0.0;

  AttackConfig spatial = base;
  spatial.steps = 20;
  spatial.spatial_step = 0.15;
  spatial.budget.pixel = 0.0;

  AttackConfig joint = base;
  joint.steps = 20;
  joint.pixel_step = 4.0 / 255.0;
  joint.spatial_step = 0.15;

  return {{"FGSM", AttackKind::fgsm, fgsm_cfg},
          {"PGD20", AttackKind::pgd_pixel, pgd},
          {"Spatial", AttackKind::spatial, spatial},
          {"Joint", AttackKind::joint_sp, joint}};
}

double rounded_accuracy(std::size_t correct, std::size_t total) {
  if (total == 0) throw ArgumentError("accuracy over zero examples");
  return std::round(1000.0 * static_cast<double>(correct) / static_cast<double>(total)) / 10.0;
}

std::vector<int> predict_labels(const DifferentiableModel& model, std::span<const Image> images,
                                const EvalOptions& opts) {
  std::vector<int> out(images.size());
  for_each_chunk(images.size(), opts.chunk, opts.workers, [&](std::size_t begin, std::size_t end) {
    const Logits logits = model.predict(images.subspan(begin, end - begin));
    for (std::size_t i = begin; i < end; ++i) out[i] = logits.argmax(static_cast<int>(i - begin));
  });
  return out;
}

std::vector<AttackResult> attack_dataset(const DifferentiableModel& source, const Dataset& data,
                                         const SuiteEntry& entry, const EvalOptions& opts) {
  check_compatible(source, data);
  if (entry.config.mode != AttackMode::untargeted) throw ArgumentError("evaluation attacks must be untargeted");
  const auto images = dataset_images(data);
  std::vector<LabelDistribution> targets;
  std::vector<std::uint64_t> keys(data.size());
  targets.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    targets.push_back(LabelDistribution::one_hot(data.label(i), data.num_classes()));
    keys[i] = i;
  }
  return run_attack_chunked(entry.kind, source, images, targets, entry.config, keys, opts.workers, opts.chunk);
}

EvalReport evaluate_suite(const DifferentiableModel& model, const Dataset& data, std::span<const SuiteEntry> suite,
                          const EvalOptions& opts) {
  return blackbox_eval(model, model, data, suite, opts);
}

EvalReport budget_sweep(const DifferentiableModel& model, const Dataset& data, const SuiteEntry& base, SweepAxis axis,
                        std::span<const double> values, const EvalOptions& opts) {
  check_compatible(model, data);
  EvalReport report;
  for (double v : values) {
    SuiteEntry entry = base;
    (axis == SweepAxis::pixel ? entry.config.budget.pixel : entry.config.budget.spatial) = v;
    if (entry.kind == AttackKind::fgsm) entry.config.pixel_step = entry.config.budget.pixel;
    entry.config.validate();
    report.rows.push_back(attack_row(model, model, data, entry, opts));
  }
  return report;
}

EvalReport blackbox_eval(const DifferentiableModel& target, const DifferentiableModel& source, const Dataset& data,
                         std::span<const SuiteEntry> suite, const EvalOptions& opts) {
  check_compatible(target, data);
  check_compatible(source, data);
  for (const auto& entry : suite) entry.config.validate();
  const auto images = dataset_images(data);
  EvalReport report;
  report.rows.push_back(pristine_row(target, data, images, opts));
  for (const auto& entry : suite) report.rows.push_back(attack_row(target, source, data, entry, opts));
  return report;
}

std::string format_number(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw ArgumentError("number does not fit the output buffer");
  return std::string(buf, end);
}

std::string format_fixed(double v, int decimals) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  if (ec != std::errc()) throw ArgumentError("number does not fit the output buffer");
  return std::string(buf, end);
}

void write_report(const EvalReport& report, std::ostream& out) {
  out << kReportHeader << '\n';
  for (const auto& r : report.rows) {
    if (r.attack.find_first_of(",\n\r") != std::string::npos) {
      throw ArgumentError("attack name '" + r.attack + "' cannot be written to CSV");
    }
    out << r.attack << ',' << format_number(r.eps_pixel) << ',' << format_number(r.eps_spatial) << ','
        << std::to_string(r.steps) << ',' << format_fixed(r.accuracy, 1) << ',' << std::to_string(r.examples) << ',' << format_fixed(r.seconds, 3) << '\n';
  }
}

void export_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ostringstream text;
  write_report(report, text);
  const std::string s = text.str();
  detail::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

EvalReport parse_report(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kReportHeader) throw FormatError("missing report header", 0);
  EvalReport report;
  std::size_t line_no = 1;
  std::size_t at = line.size() + 1;
  for (; std::getline(in, line); at += line.size() + 1) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest = line;
    for (std::size_t comma; (comma = rest.find(',')) != std::string_view::npos; rest.remove_prefix(comma + 1)) {
      f.push_back(rest.substr(0, comma));
    }
    f.push_back(rest);
    if (f.size() != 7) throw FormatError("expected 7 fields on report line " + std::to_string(line_no), at);
    report.rows.push_back({std::string(f[0]), parse_double(f[1], line_no, at), parse_double(f[2], line_no, at),
                           parse_integer<int>(f[3], line_no, at), parse_double(f[4], line_no, at),
                           parse_integer<std::size_t>(f[5], line_no, at), parse_double(f[6], line_no, at)});
  }
  return report;
}

std::vector<std::uint8_t> encode_tensor_archive(std::span<const NamedTensor> tensors) {
  detail::ByteWriter w;
  w.text(kArchiveMagic);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    std::size_t n = 1;
    for (int d : t.shape) n *= static_cast<std::size_t>(d);
    if (n != t.values.size()) throw ShapeError("tensor '" + t.name + "' shape does not match its values");
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.text(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.values) w.f32(static_cast<float>(v));
  }
  return std::move(w.buffer());
}

std::vector<NamedTensor> decode_tensor_archive(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  if (r.text(kArchiveMagic.size(), "magic") != kArchiveMagic) throw FormatError("bad tensor archive magic", 0);
  const std::uint32_t count = r.u32("tensor count");
  std::vector<NamedTensor> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor t;
    const std::uint32_t name_len = r.u32("name length");
    t.name = r.text(name_len, "tensor name");
    const std::size_t rank_at = r.offset();
    const std::uint32_t rank = r.u32("rank");
    if (rank > 8) throw FormatError("implausible tensor rank", rank_at);
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = r.u32("dimension");
      t.shape.push_back(static_cast<int>(dim));
      n *= dim;
    }
    if (n > r.remaining() / 4) throw FormatError("truncated tensor values", r.offset());
    t.values.reserve(n);
    for (std::size_t i = 0; i < n; ++i) t.values.push_back(r.f32("value"));
    out.push_back(std::move(t));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after tensor archive", r.offset());
  return out;
}

void save_tensor_archive(std::span<const NamedTensor> tensors, const std::filesystem::path& path) {
  detail::write_file(path, encode_tensor_archive(tensors));
}

}  // namespace advflow
