#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace advflow::cli {

/// Rejected configuration key or value; the message names the key path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a command needs. Budgets and step sizes for pixels are on the
/// 0-255 scale here and converted with `pixel_scale` when a command runs.
struct RunConfig {
  std::uint64_t seed = 0;
  int workers = 0;  // 0: one per hardware thread
  std::filesystem::path out = "out";

  // model
  std::filesystem::path checkpoint = "out/model.ckpt";
  std::filesystem::path source_checkpoint;

  // data
  std::filesystem::path train_data = "data/digits_train.advd";
  std::filesystem::path test_data = "data/digits_test.advd";
  std::size_t limit = 0;  // 0: whole split
  bool crop = true;
  bool flip = false;
  int padding = 4;

  // attack
  std::optional<std::string> attack_kind;  // attack: joint-sp; sweep: per axis
  double eps_pixel = 8.0;
  std::optional<double> eps_spatial;  // default: 1% of the image side
  double pixel_scale = 2.0 / 255.0;
  int steps = 20;
  double pixel_step = 2.0;
  double spatial_step = 0.15;
  bool random_start = true;

  // train
  std::string mode = "joint-sp";
  int epochs = 30;
  int batch_size = 64;
  double lr = 0.05;
  std::optional<std::vector<int>> transitions;
  double decay = 0.1;
  double momentum = 0.9;
  std::optional<double> label_smoothing;
  std::optional<int> train_steps;
  std::optional<double> train_pixel_step;
  std::optional<double> train_spatial_step;
  int probe_size = 200;
  int probe_steps = 5;

  // eval
  bool timing = false;
  std::string sweep_axis = "pixel";
  std::optional<std::vector<double>> sweep_values;
  int instances = 20;
  std::string fault = "none";
};

/// Applies a parsed configuration document on top of `cfg`. Every key is
/// checked against the schema; unknown keys and mistyped values throw
/// ConfigError.
void apply_config(RunConfig& cfg, const nlohmann::json& doc);

/// Reads and applies a JSON configuration file.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Entry point shared by the executable and the tests. Returns the process
/// exit status; diagnostics go to `err`, reports to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace advflow::cli
