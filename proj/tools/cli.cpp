#include "cli.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "cli_config.hpp"
#include "json.hpp"
#include "urie/checkpoint.hpp"
#include "urie/corruptions.hpp"
#include "urie/evalkit.hpp"
#include "urie/image_io.hpp"
#include "urie/recognizer.hpp"
#include "urie/trainer.hpp"
#include "urie/urie_net.hpp"

namespace urie::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigOptions {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file (flat object of the keys below)");
    for (const auto& f : config_fields()) {
      const std::string help = f.help + " [default " + default_value_text(f.key) + "]";
      options[f.key] = app->add_option("--" + f.key, values[f.key], help)->type_name("VALUE");
    }
  }

  CliConfig resolve() const {
    CliConfig cfg = config_path.empty() ? CliConfig{} : load_config(config_path);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) apply_override(cfg, key, values.at(key));
    }
    cfg.validate();
    return cfg;
  }
};

fs::path sibling_log_path(const fs::path& out) {
  fs::path p = out;
  p.replace_extension(".log.jsonl");
  return p;
}

class JsonlLog {
 public:
  explicit JsonlLog(const fs::path& path) : f_(path, std::ios::binary | std::ios::trunc) {
    if (!f_) throw UsageError("cannot write log " + path.string());
  }
  void write(const json& line) {
    f_ << line.dump() << '\n';
    f_.flush();
  }

 private:
  std::ofstream f_;
};

json wall_time(const CliConfig& cfg, double seconds) {
  return cfg.log_wall_time ? json(seconds) : json(nullptr);
}

TinyClassifier load_classifier(const fs::path& path) {
  if (path.empty()) throw UsageError("--clf is required");
  if (!fs::exists(path)) throw UsageError("classifier checkpoint not found: " + path.string());
  return TinyClassifier::from_checkpoint(read_checkpoint(path));
}

struct LoadedUrie {
  UrieConfig cfg;
  UrieParams params;
};

LoadedUrie load_urie(const fs::path& path) {
  if (!fs::exists(path)) throw UsageError("model checkpoint not found: " + path.string());
  Checkpoint ckpt = read_checkpoint(path);
  UrieConfig cfg = UrieConfig::from_fingerprint(ckpt.fingerprint);
  UrieParams params = UrieParams::init(cfg, 0, HeadInit::kZero);
  restore(params.named_parameters(), ckpt, cfg.fingerprint());
  params.set_mode(NormMode::kEval);
  return {cfg, std::move(params)};
}

// Mirror index without repeating the edge sample.
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

int pad_amount(int n) { return (kUrieSizeMultiple - n % kUrieSizeMultiple) % kUrieSizeMultiple; }

Tensor reflect_pad(const Tensor& img, int top, int left, int out_h, int out_w) {
  const Shape s = img.shape();
  Tensor out(Shape{s.n, s.c, out_h, out_w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x)
          out.at(n, c, y, x) = img.at(n, c, reflect_index(y - top, s.h), reflect_index(x - left, s.w));
  return out;
}

Tensor crop(const Tensor& img, int top, int left, int h, int w) {
  const Shape s = img.shape();
  Tensor out(Shape{s.n, s.c, h, w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(n, c, y, x) = img.at(n, c, y + top, x + left);
  return out;
}

int cmd_pretrain(const ConfigOptions& co, const fs::path& out_path, fs::path log_path,
                 std::ostream& out) {
  if (out_path.empty()) throw UsageError("--out is required");
  const CliConfig cfg = co.resolve();
  if (log_path.empty()) log_path = sibling_log_path(out_path);

  const ToyDataset train =
      build_toy_dataset(cfg.dataset_seed, cfg.n_per_class, cfg.classes, Split::kTrain);
  JsonlLog log(log_path);
  auto last = Clock::now();
  PretrainResult result;
  TinyClassifier clf = pretrain_classifier(train, cfg.pretrain_config(), &result,
                                           [&](int epoch, double loss) {
                                             const auto now = Clock::now();
                                             const double secs =
                                                 std::chrono::duration<double>(now - last).count();
                                             last = now;
                                             log.write({{"epoch", epoch},
                                                        {"mean_loss", loss},
                                                        {"images", train.size()},
                                                        {"wall_time_s", wall_time(cfg, secs)}});
                                           });
  write_checkpoint(out_path, snapshot(clf.named_parameters(), clf.fingerprint()));

  const ToyDataset test =
      build_toy_dataset(cfg.dataset_seed, cfg.test_per_class, cfg.classes, Split::kTest);
  const double test_acc = accuracy(predict(clf, test.images), test.labels);
  log.write({{"train_accuracy", result.train_accuracy}, {"test_accuracy", test_acc}});
  out << "classifier written to " << out_path.string() << " (train accuracy "
      << result.train_accuracy << ", clean test accuracy " << test_acc << ")\n";
  return kExitOk;
}

int cmd_train(const ConfigOptions& co, const fs::path& clf_path, const fs::path& out_path,
              fs::path log_path, std::ostream& out, std::ostream& err) {
  if (out_path.empty()) throw UsageError("--out is required");
  const CliConfig cfg = co.resolve();
  if (log_path.empty()) log_path = sibling_log_path(out_path);

  TinyClassifier clf = load_classifier(clf_path);
  if (clf.classes() != cfg.classes) {
    throw UsageError("classifier has " + std::to_string(clf.classes()) +
                     " classes but the config asks for " + std::to_string(cfg.classes));
  }
  const UrieConfig ucfg = cfg.urie_config();
  const TrainConfig tcfg = cfg.train_config();
  const ToyDataset train =
      build_toy_dataset(cfg.dataset_seed, cfg.n_per_class, cfg.classes, Split::kTrain);
  const int images = fraction_count(train.size(), tcfg.data_fraction);

  UrieParams urie = UrieParams::init(ucfg, cfg.seed, cfg.head_init_kind());
  JsonlLog log(log_path);
  log.write({{"fingerprint", ucfg.fingerprint()},
             {"loss", std::string(to_string(tcfg.loss_kind))},
             {"fraction", tcfg.data_fraction},
             {"dataset_images", train.size()},
             {"images", images}});

  auto save = [&] {
    write_checkpoint(out_path, snapshot(urie.named_parameters(), ucfg.fingerprint()));
  };
  auto last = Clock::now();
  TrainResult result;
  try {
    result = train_urie(urie, ucfg, clf, train, tcfg, [&](const EpochRecord& r) {
      const auto now = Clock::now();
      const double secs = std::chrono::duration<double>(now - last).count();
      last = now;
      log.write({{"epoch", r.epoch},
                 {"lr", r.lr},
                 {"mean_loss", r.mean_loss},
                 {"images", images},
                 {"wall_time_s", wall_time(cfg, secs)}});
    });
  } catch (const TrainingDiverged& e) {
    save();
    err << "error: " << e.what() << "; last good parameters written to " << out_path.string()
        << "\n";
    return kExitNumeric;
  }
  save();
  out << "enhancer written to " << out_path.string() << " (" << result.train_images
      << " images, " << result.steps << " steps, final loss "
      << (result.epochs.empty() ? 0.0 : result.epochs.back().mean_loss) << ")\n";
  return kExitOk;
}

int cmd_enhance(const fs::path& model_path, const fs::path& in, const fs::path& out_path,
                std::ostream& out) {
  if (model_path.empty() || in.empty() || out_path.empty()) {
    throw UsageError("--model, --in and --out are required");
  }
  LoadedUrie m = load_urie(model_path);
  const Tensor img = read_image(in);
  const int h = img.shape().h, w = img.shape().w;
  const int ph = pad_amount(h), pw = pad_amount(w);
  const Tensor padded = reflect_pad(img, ph / 2, pw / 2, h + ph, w + pw);
  const Tensor enhanced = enhance_images(m.params, m.cfg, padded, 1);
  write_image(out_path, crop(enhanced, ph / 2, pw / 2, h, w));
  out << "enhanced " << in.string() << " -> " << out_path.string() << "\n";
  return kExitOk;
}

int cmd_corrupt(const std::string& kind, int severity, std::uint64_t seed, const fs::path& in,
                const fs::path& out_path, const fs::path& table_path, std::ostream& out) {
  if (kind.empty() || in.empty() || out_path.empty()) {
    throw UsageError("--kind, --in and --out are required");
  }
  CorruptionSpec spec{parse_corruption_kind(kind), severity, seed};
  const SeverityTable table =
      table_path.empty() ? SeverityTable::defaults() : SeverityTable::load(table_path);
  const Tensor img = read_image(in);
  write_image(out_path, corrupt(img, spec, table));
  out << "corrupted " << in.string() << " with " << kind << " severity " << severity << " -> "
      << out_path.string() << "\n";
  return kExitOk;
}

int cmd_eval(const ConfigOptions& co, const fs::path& model_path, const fs::path& clf_path,
             const fs::path& report_path, const fs::path& csv_path, std::ostream& out) {
  const CliConfig cfg = co.resolve();
  TinyClassifier clf = load_classifier(clf_path);
  if (clf.classes() != cfg.classes) {
    throw UsageError("classifier has " + std::to_string(clf.classes()) +
                     " classes but the config asks for " + std::to_string(cfg.classes));
  }
  const ToyDataset test =
      build_toy_dataset(cfg.dataset_seed, cfg.test_per_class, cfg.classes, Split::kTest);
  const EvalSplits splits = build_eval_splits(test, cfg.split_seeds());

  EvalReport report;
  if (model_path.empty()) {
    report = evaluate({}, clf, splits);
  } else {
    LoadedUrie m = load_urie(model_path);
    Enhancer enh = [&](const Tensor& x) { return enhance_images(m.params, m.cfg, x); };
    report = evaluate(enh, clf, splits, m.cfg.fingerprint(),
                      mac_count(m.cfg, kToyImageSize, kToyImageSize));
  }
  const std::string text = report.to_json();
  if (report_path.empty()) {
    out << text << "\n";
  } else {
    std::ofstream f(report_path, std::ios::binary | std::ios::trunc);
    if (!f) throw UsageError("cannot write report " + report_path.string());
    f << text << "\n";
    out << "report written to " << report_path.string() << "\n";
  }
  if (!csv_path.empty()) {
    std::ofstream f(csv_path, std::ios::binary | std::ios::trunc);
    if (!f) throw UsageError("cannot write csv " + csv_path.string());
    f << report.per_kind_csv();
  }
  return kExitOk;
}

int cmd_macs(int h, int w, int reduction_ratio, std::ostream& out) {
  UrieConfig cfg;
  cfg.reduction_ratio = reduction_ratio;
  out << mac_count(cfg, h, w) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Recognition-friendly image enhancement toolkit", "urie"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all commands");

  fs::path out_path, log_path, clf_path, model_path, in_path, report_path, csv_path, table_path;

  ConfigOptions pretrain_opts;
  auto* pretrain = app.add_subcommand("pretrain", "Train the toy classifier on clean images");
  pretrain_opts.attach(pretrain);
  pretrain->add_option("--out", out_path, "classifier checkpoint to write");
  pretrain->add_option("--log", log_path, "JSONL log [default: <out> with .log.jsonl]");

  ConfigOptions train_opts;
  auto* train = app.add_subcommand("train", "Train the enhancer in front of a frozen classifier");
  train_opts.attach(train);
  train->add_option("--clf", clf_path, "classifier checkpoint");
  train->add_option("--out", out_path, "enhancer checkpoint to write");
  train->add_option("--log", log_path, "JSONL log [default: <out> with .log.jsonl]");

  auto* enhance = app.add_subcommand("enhance", "Enhance one image with a trained model");
  enhance->add_option("--model", model_path, "enhancer checkpoint");
  enhance->add_option("--in", in_path, "input image (.png or .ppm)");
  enhance->add_option("--out", out_path, "output image (.png or .ppm)");

  std::string kind;
  int severity = 1;
  std::uint64_t corrupt_seed = 0;
  auto* corrupt_cmd = app.add_subcommand("corrupt", "Apply one corruption to an image");
  corrupt_cmd->add_option("--kind", kind, "corruption kind, e.g. gaussian_noise or identity");
  corrupt_cmd->add_option("--severity", severity, "severity level 1..5")->capture_default_str();
  corrupt_cmd->add_option("--seed", corrupt_seed, "noise seed")->capture_default_str();
  corrupt_cmd->add_option("--in", in_path, "input image (.png or .ppm)");
  corrupt_cmd->add_option("--out", out_path, "output image (.png or .ppm)");
  corrupt_cmd->add_option("--table", table_path, "severity table JSON [default: built-in]");

  ConfigOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "Report accuracy with and without an enhancer");
  eval_opts.attach(eval);
  eval->add_option("--model", model_path, "enhancer checkpoint [default: identity]");
  eval->add_option("--clf", clf_path, "classifier checkpoint");
  eval->add_option("--report", report_path, "JSON report path [default: stdout]");
  eval->add_option("--csv", csv_path, "per-kind CSV path");

  int mh = 224, mw = 224, mr = kDefaultReductionRatio;
  auto* macs = app.add_subcommand("macs", "Print the multiply-accumulate count of the enhancer");
  macs->set_help_flag("--help", "Print this help message and exit");
  macs->add_option("--h,h", mh, "input height")->capture_default_str();
  macs->add_option("--w,w", mw, "input width")->capture_default_str();
  macs->add_option("--reduction_ratio", mr, "attention bottleneck ratio")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (pretrain->parsed()) return cmd_pretrain(pretrain_opts, out_path, log_path, out);
    if (train->parsed()) return cmd_train(train_opts, clf_path, out_path, log_path, out, err);
    if (enhance->parsed()) return cmd_enhance(model_path, in_path, out_path, out);
    if (corrupt_cmd->parsed()) {
      return cmd_corrupt(kind, severity, corrupt_seed, in_path, out_path, table_path, out);
    }
    if (eval->parsed()) {
      return cmd_eval(eval_opts, model_path, clf_path, report_path, csv_path, out);
    }
    if (macs->parsed()) return cmd_macs(mh, mw, mr, out);
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace urie::cli
