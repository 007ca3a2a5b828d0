#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "urie/evalkit.hpp"
#include "urie/recognizer.hpp"
#include "urie/trainer.hpp"
#include "urie/urie_net.hpp"

namespace urie::cli {

/// Raised for unreadable configs, unknown keys and ill-typed values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat run configuration. Every key can be set in the JSON config file and
/// overridden with --<key> on the command line.
struct CliConfig {
  std::uint64_t seed = 0;

  std::uint64_t dataset_seed = 7;
  int classes = 4;
  int n_per_class = 64;
  int test_per_class = 32;

  int pretrain_epochs = 15;
  double pretrain_lr = 0.01;
  int pretrain_batch = 16;

  double lr = 0.001;
  int lr_decay_every = 6;
  double lr_decay_factor = 10.0;
  int epochs = 8;
  int batch_size = 16;
  std::string loss = "recognition";
  double fraction = 1.0;
  bool augment = true;

  std::string norm = "both";
  int reduction_ratio = kDefaultReductionRatio;
  bool residual_skip = true;
  std::string head_init = "zero";

  std::uint64_t eval_seen_seed = 1001;
  std::uint64_t eval_unseen_seed = 2002;

  bool log_wall_time = true;

  UrieConfig urie_config() const;
  TrainConfig train_config() const;
  PretrainConfig pretrain_config() const;
  SplitSeeds split_seeds() const;
  HeadInit head_init_kind() const;

  /// Checks value ranges and enumerations.
  void validate() const;
};

struct ConfigField {
  std::string key;
  std::string help;
};

/// All keys with their descriptions, in documentation order.
const std::vector<ConfigField>& config_fields();

/// Default value of a key rendered as JSON text.
std::string default_value_text(const std::string& key);

CliConfig parse_config_json(const std::string& text);
CliConfig load_config(const std::filesystem::path& path);

/// Sets one key from command-line text. Text that parses as JSON (numbers,
/// booleans) is taken as such; anything else is taken as a string.
void apply_override(CliConfig& cfg, const std::string& key, const std::string& text);

std::string to_json(const CliConfig& cfg);

}  // namespace urie::cli
