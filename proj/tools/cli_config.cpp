#include "cli_config.hpp"

#include <fstream>
#include <functional>
#include <iterator>
#include <map>

#include "json.hpp"

namespace urie::cli {

namespace {

using json = nlohmann::ordered_json;

struct Binding {
  std::string help;
  std::function<void(CliConfig&, const json&)> set;
  std::function<json(const CliConfig&)> get;
};

template <typename T>
Binding field(T CliConfig::*member, std::string help) {
  return {std::move(help),
          [member](CliConfig& c, const json& v) {
            if constexpr (std::is_same_v<T, bool>) {
              if (!v.is_boolean()) throw ConfigError("expected a boolean");
            } else if constexpr (std::is_same_v<T, std::string>) {
              if (!v.is_string()) throw ConfigError("expected a string");
            } else if constexpr (std::is_integral_v<T>) {
              if (!v.is_number_integer()) throw ConfigError("expected an integer");
              if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_integer() && !v.is_number_unsigned()) {
                  throw ConfigError("expected a non-negative integer");
                }
              }
            } else {
              if (!v.is_number()) throw ConfigError("expected a number");
            }
            c.*member = v.get<T>();
          },
          [member](const CliConfig& c) { return json(c.*member); }};
}

const std::vector<std::pair<std::string, Binding>>& bindings() {
  static const std::vector<std::pair<std::string, Binding>> table = {
      {"seed", field(&CliConfig::seed, "master seed for initialization, sampling and augmentation")},
      {"dataset_seed", field(&CliConfig::dataset_seed, "seed of the procedural toy dataset")},
      {"classes", field(&CliConfig::classes, "number of toy classes (2..8)")},
      {"n_per_class", field(&CliConfig::n_per_class, "training images per class")},
      {"test_per_class", field(&CliConfig::test_per_class, "test images per class")},
      {"pretrain_epochs", field(&CliConfig::pretrain_epochs, "classifier pretraining epochs")},
      {"pretrain_lr", field(&CliConfig::pretrain_lr, "classifier Adam learning rate")},
      {"pretrain_batch", field(&CliConfig::pretrain_batch, "classifier batch size")},
      {"lr", field(&CliConfig::lr, "enhancer Adam learning rate")},
      {"lr_decay_every", field(&CliConfig::lr_decay_every, "epochs between learning-rate decays")},
      {"lr_decay_factor", field(&CliConfig::lr_decay_factor, "learning-rate divisor at each decay")},
      {"epochs", field(&CliConfig::epochs, "enhancer training epochs")},
      {"batch_size", field(&CliConfig::batch_size, "enhancer batch size")},
      {"loss", field(&CliConfig::loss, "recognition | mse | ssim")},
      {"fraction", field(&CliConfig::fraction, "fraction of training images used, in (0, 1]")},
      {"augment", field(&CliConfig::augment, "random resize-crop-flip during training")},
      {"norm", field(&CliConfig::norm, "both | bn | in")},
      {"reduction_ratio", field(&CliConfig::reduction_ratio, "attention bottleneck ratio")},
      {"residual_skip", field(&CliConfig::residual_skip, "add the input to the network output")},
      {"head_init", field(&CliConfig::head_init, "zero | kaiming initialization of the last conv")},
      {"eval_seen_seed", field(&CliConfig::eval_seen_seed, "seed of the seen evaluation split")},
      {"eval_unseen_seed", field(&CliConfig::eval_unseen_seed, "seed of the unseen evaluation split")},
      {"log_wall_time", field(&CliConfig::log_wall_time, "record epoch wall time in training logs")},
  };
  return table;
}

const Binding& find_binding(const std::string& key) {
  for (const auto& [k, b] : bindings()) {
    if (k == key) return b;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void set_key(CliConfig& cfg, const std::string& key, const json& value) {
  const Binding& b = find_binding(key);
  try {
    b.set(cfg, value);
  } catch (const ConfigError& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

}  // namespace

UrieConfig CliConfig::urie_config() const {
  UrieConfig c;
  c.norm_mode = parse_norm_variant(norm);
  c.reduction_ratio = reduction_ratio;
  c.residual_skip = residual_skip;
  return c;
}

TrainConfig CliConfig::train_config() const {
  TrainConfig t;
  t.lr = lr;
  t.lr_decay_every = lr_decay_every;
  t.lr_decay_factor = lr_decay_factor;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.loss_kind = parse_loss_kind(loss);
  t.data_fraction = fraction;
  t.augment.enabled = augment;
  t.seed = seed;
  return t;
}

PretrainConfig CliConfig::pretrain_config() const {
  PretrainConfig p;
  p.epochs = pretrain_epochs;
  p.lr = pretrain_lr;
  p.batch_size = pretrain_batch;
  p.seed = seed;
  return p;
}

SplitSeeds CliConfig::split_seeds() const { return {eval_seen_seed, eval_unseen_seed}; }

HeadInit CliConfig::head_init_kind() const {
  if (head_init == "zero") return HeadInit::kZero;
  if (head_init == "kaiming") return HeadInit::kKaiming;
  throw ConfigError("head_init must be zero or kaiming");
}

void CliConfig::validate() const {
  try {
    urie_config();
    train_config().validate();
    head_init_kind();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  if (classes < 2 || classes > kMaxToyClasses) throw ConfigError("classes must be in 2..8");
  if (n_per_class < 1 || test_per_class < 1) throw ConfigError("per-class counts must be >= 1");
  if (pretrain_epochs < 0 || pretrain_batch < 2 || !(pretrain_lr > 0)) {
    throw ConfigError("invalid pretraining settings");
  }
  if (reduction_ratio < 1 || (kAttentionCells * 16) % reduction_ratio != 0) {
    throw ConfigError("reduction_ratio must divide 256");
  }
}

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = [] {
    std::vector<ConfigField> out;
    for (const auto& [k, b] : bindings()) out.push_back({k, b.help});
    return out;
  }();
  return fields;
}

std::string default_value_text(const std::string& key) {
  return find_binding(key).get(CliConfig{}).dump();
}

CliConfig parse_config_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  CliConfig cfg;
  for (const auto& [key, value] : j.items()) set_key(cfg, key, value);
  return cfg;
}

CliConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_config_json(text);
}

void apply_override(CliConfig& cfg, const std::string& key, const std::string& text) {
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  // "--loss mse" style values are strings even when they happen to parse.
  if (find_binding(key).get(CliConfig{}).is_string() && !value.is_string()) value = text;
  set_key(cfg, key, value);
}

std::string to_json(const CliConfig& cfg) {
  json j;
  for (const auto& [k, b] : bindings()) j[k] = b.get(cfg);
  return j.dump(2);
}

}  // namespace urie::cli
