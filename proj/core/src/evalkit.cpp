#include "urie/evalkit.hpp"

#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "json.hpp"
#include "urie/checkpoint.hpp"
#include "urie/trainer.hpp"

namespace urie {

namespace {

ToyDataset corrupt_all(const ToyDataset& test, CorruptionPool pool,
                       std::uint64_t seed, std::vector<CorruptionSpec>& specs) {
  Rng rng(seed);
  ToyDataset out = test;
  specs.clear();
  const std::size_t per = out.images.size() / std::max(1, out.size());
  for (int i = 0; i < test.size(); ++i) {
    const CorruptionSpec spec = sample_spec(rng, pool, false);
    const Tensor c = corrupt(test.image(i), spec);
    std::copy(c.values().begin(), c.values().end(), out.images.data() + i * per);
    specs.push_back(spec);
  }
  return out;
}

Tensor labels_tensor(const ToyDataset& ds) {
  std::vector<double> v(ds.labels.begin(), ds.labels.end());
  const int n = static_cast<int>(v.size());
  return Tensor({n, 1, 1, 1}, std::move(v));
}

std::vector<int> labels_from(const Tensor& t) {
  std::vector<int> out;
  for (double v : t.values()) out.push_back(static_cast<int>(v));
  return out;
}

nlohmann::ordered_json spec_json(const CorruptionSpec& s) {
  return {{"kind", std::string(to_string(s.kind))},
          {"severity", s.severity},
          {"seed", s.seed}};
}

CorruptionSpec spec_from(const nlohmann::json& j) {
  CorruptionSpec s;
  s.kind = parse_corruption_kind(j.at("kind").get<std::string>());
  s.severity = j.at("severity").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

nlohmann::ordered_json split_json(const SplitAccuracy& s) {
  return {{"count", s.count},
          {"accuracy_without", s.without},
          {"accuracy_with", s.with},
          {"delta", s.delta}};
}

constexpr const char* kSplitsFingerprint = "evalsplits/v1";

}  // namespace

EvalSplits build_eval_splits(const ToyDataset& test, const SplitSeeds& seeds) {
  if (test.size() == 0) throw ContractError("evaluation needs a non-empty test split");
  EvalSplits s;
  s.clean = test;
  s.seen = corrupt_all(test, CorruptionPool::kSeen, seeds.seen, s.seen_specs);
  s.unseen = corrupt_all(test, CorruptionPool::kUnseen, seeds.unseen, s.unseen_specs);
  return s;
}

void save_eval_splits(const std::filesystem::path& dir, const EvalSplits& splits) {
  std::filesystem::create_directories(dir);
  Checkpoint ckpt;
  ckpt.fingerprint = std::string(kSplitsFingerprint) +
                     ";classes=" + std::to_string(splits.clean.classes);
  for (const auto& [name, ds] : {std::pair<const char*, const ToyDataset*>{"clean", &splits.clean},
                                 {"seen", &splits.seen},
                                 {"unseen", &splits.unseen}}) {
    ckpt.entries.emplace_back(std::string(name) + ".images", ds->images);
    ckpt.entries.emplace_back(std::string(name) + ".labels", labels_tensor(*ds));
  }
  write_checkpoint(dir / "splits.ckpt", ckpt);
  nlohmann::ordered_json j;
  j["seen"] = nlohmann::ordered_json::array();
  j["unseen"] = nlohmann::ordered_json::array();
  for (const auto& s : splits.seen_specs) j["seen"].push_back(spec_json(s));
  for (const auto& s : splits.unseen_specs) j["unseen"].push_back(spec_json(s));
  std::ofstream(dir / "specs.json") << j.dump(2) << '\n';
}

EvalSplits load_eval_splits(const std::filesystem::path& dir) {
  const Checkpoint ckpt = read_checkpoint(dir / "splits.ckpt");
  const std::string prefix = std::string(kSplitsFingerprint) + ";classes=";
  if (ckpt.fingerprint.rfind(prefix, 0) != 0) {
    throw CheckpointError("not an evaluation split file: " + ckpt.fingerprint);
  }
  const int classes = std::stoi(ckpt.fingerprint.substr(prefix.size()));
  EvalSplits s;
  for (auto [name, ds] : {std::pair<const char*, ToyDataset*>{"clean", &s.clean},
                          {"seen", &s.seen},
                          {"unseen", &s.unseen}}) {
    const Tensor* images = ckpt.find(std::string(name) + ".images");
    const Tensor* labels = ckpt.find(std::string(name) + ".labels");
    if (!images || !labels) throw CheckpointError(std::string("split file lacks ") + name);
    ds->images = *images;
    ds->labels = labels_from(*labels);
    ds->classes = classes;
    ds->split = Split::kTest;
  }
  std::ifstream f(dir / "specs.json");
  if (!f) throw CheckpointError("cannot read " + (dir / "specs.json").string());
  const auto j = nlohmann::json::parse(f);
  for (const auto& e : j.at("seen")) s.seen_specs.push_back(spec_from(e));
  for (const auto& e : j.at("unseen")) s.unseen_specs.push_back(spec_from(e));
  return s;
}

double mean_image_mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ContractError("mse: shape mismatch");
  const int n = a.shape().n;
  if (n == 0) return 0.0;
  const std::size_t per = a.size() / n;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < per; ++j) {
      const double d = a[i * per + j] - b[i * per + j];
      acc += d * d;
    }
    total += acc / static_cast<double>(per);
  }
  return total / n;
}

double mean_image_ssim(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ContractError("ssim: shape mismatch");
  NoGradGuard guard;
  const int n = a.shape().n;
  if (n == 0) return 0.0;
  // SSIM is a mean over equally sized images, so the batch mean equals the
  // mean of per-image values.
  return ssim(Var(a), Var(b)).value()[0];
}

EvalReport evaluate(const Enhancer& enhancer, TinyClassifier& clf,
                    const EvalSplits& splits, std::string enhancer_name,
                    std::uint64_t mac_count) {
  clf.set_mode(NormMode::kEval);
  EvalReport r;
  r.enhancer = std::move(enhancer_name);
  r.mac_count = mac_count;
  auto run = [&](const ToyDataset& ds, const char* name,
                 const std::vector<CorruptionSpec>* specs, SplitAccuracy& out,
                 Tensor* enhanced_out) {
    const std::vector<int> base = predict(clf, ds.images);
    const Tensor enhanced = enhancer ? enhancer(ds.images) : ds.images;
    const std::vector<int> enh = predict(clf, enhanced);
    out.split = name;
    out.count = ds.size();
    out.without = accuracy(base, ds.labels);
    out.with = accuracy(enh, ds.labels);
    out.delta = out.with - out.without;
    if (enhanced_out) *enhanced_out = enhanced;
    if (!specs) return;
    std::map<std::string, std::array<int, 3>> tally;  // count, hit_without, hit_with
    for (int i = 0; i < ds.size(); ++i) {
      auto& t = tally[std::string(to_string((*specs)[i].kind))];
      ++t[0];
      t[1] += base[i] == ds.labels[i];
      t[2] += enh[i] == ds.labels[i];
    }
    for (const auto& [kind, t] : tally) {
      r.per_kind.push_back({name, kind, t[0], static_cast<double>(t[1]) / t[0],
                            static_cast<double>(t[2]) / t[0]});
    }
  };
  Tensor seen_enh, unseen_enh;
  run(splits.clean, "clean", nullptr, r.clean, nullptr);
  run(splits.seen, "seen", &splits.seen_specs, r.seen, &seen_enh);
  run(splits.unseen, "unseen", &splits.unseen_specs, r.unseen, &unseen_enh);

  const Tensor* corrupted[] = {&splits.seen.images, &splits.unseen.images};
  const Tensor* enhanced[] = {&seen_enh, &unseen_enh};
  double total = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double n = corrupted[k]->shape().n;
    r.restoration.mse_without += n * mean_image_mse(*corrupted[k], splits.clean.images);
    r.restoration.mse_with += n * mean_image_mse(*enhanced[k], splits.clean.images);
    r.restoration.ssim_without += n * mean_image_ssim(*corrupted[k], splits.clean.images);
    r.restoration.ssim_with += n * mean_image_ssim(*enhanced[k], splits.clean.images);
    total += n;
  }
  if (total > 0) {
    r.restoration.mse_without /= total;
    r.restoration.mse_with /= total;
    r.restoration.ssim_without /= total;
    r.restoration.ssim_with /= total;
  }
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["enhancer"] = enhancer;
  j["mac_count"] = mac_count;
  j["splits"] = {{"clean", split_json(clean)},
                 {"seen", split_json(seen)},
                 {"unseen", split_json(unseen)}};
  j["per_kind"] = nlohmann::ordered_json::array();
  for (const auto& k : per_kind) {
    j["per_kind"].push_back({{"split", k.split},
                             {"kind", k.kind},
                             {"count", k.count},
                             {"accuracy_without", k.without},
                             {"accuracy_with", k.with}});
  }
  j["restoration"] = {{"mse_without", restoration.mse_without},
                      {"mse_with", restoration.mse_with},
                      {"ssim_without", restoration.ssim_without},
                      {"ssim_with", restoration.ssim_with}};
  return j.dump(2);
}

std::string EvalReport::per_kind_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "split,kind,count,acc_without,acc_with\n";
  for (const auto& k : per_kind) {
    os << k.split << ',' << k.kind << ',' << k.count << ',' << k.without << ','
       << k.with << '\n';
  }
  return os.str();
}

}  // namespace urie
