#include "urie/recognizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "urie/ops.hpp"
#include "urie/optim.hpp"

namespace urie {

namespace {

struct Rgb {
  double r, g, b;
};

Rgb random_color(Rng& rng, double lo, double hi) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

// Silhouette per class: disk, square, diamond, wide ellipse; the upper half
// of the classes repeats them with a hollow centre.
bool inside_shape(int cls, double dy, double dx, double radius) {
  const double ay = std::abs(dy), ax = std::abs(dx);
  bool in = false;
  switch (cls % 4) {
    case 0:
      in = std::hypot(dy, dx) <= radius;
      break;
    case 1:
      in = std::max(ay, ax) <= 0.85 * radius;
      break;
    case 2:
      in = ay + ax <= 1.2 * radius;
      break;
    default:
      in = std::hypot(dy / 0.6, dx / 1.25) <= radius;
      break;
  }
  if (in && cls >= 4) in = std::hypot(dy, dx) >= 0.45 * radius;
  return in;
}

// Texture selector in [0, 1] for a pixel at (y, x); 1 picks the first
// foreground colour.
double texture(int cls, double y, double x, double cy, double cx,
               double period, double phase) {
  const double two_pi = 2.0 * std::numbers::pi;
  auto wave = [&](double t) { return std::sin(two_pi * t / period + phase) >= 0.0 ? 1.0 : 0.0; };
  switch (cls) {
    case 0:
      return wave(y);
    case 1:
      return wave(x);
    case 2:
      return wave((x + y) / std::numbers::sqrt2);
    case 3:
      return wave(y) == wave(x) ? 1.0 : 0.0;
    case 4:
      return wave((x - y) / std::numbers::sqrt2);
    case 5:
      return wave(std::hypot(y - cy, x - cx));
    case 6: {
      const double fy = std::fmod(y + phase, period) - period / 2;
      const double fx = std::fmod(x + phase, period) - period / 2;
      return fy * fy + fx * fx <= (period * period) / 9.0 ? 1.0 : 0.0;
    }
    default:
      return 1.0;
  }
}

}  // namespace

ToyDataset ToyDataset::subset(std::span<const int> indices) const {
  std::vector<Tensor> items;
  ToyDataset out;
  out.classes = classes;
  out.split = split;
  for (int i : indices) {
    if (i < 0 || i >= size()) throw ContractError("dataset index out of range");
    items.push_back(image(i));
    out.labels.push_back(labels[i]);
  }
  out.images = items.empty() ? Tensor({0, 3, images.shape().h, images.shape().w})
                             : stack(items);
  return out;
}

ToyDataset build_toy_dataset(std::uint64_t seed, int n_per_class, int classes,
                             Split split) {
  if (classes < 2 || classes > kMaxToyClasses) {
    throw ContractError("toy dataset supports 2..8 classes");
  }
  if (n_per_class < 0) throw ContractError("n_per_class must be non-negative");
  const int n = n_per_class * classes;
  const int size = kToyImageSize;
  ToyDataset ds;
  ds.classes = classes;
  ds.split = split;
  ds.images = Tensor({n, 3, size, size});
  ds.labels.resize(n);
  // Train and test draw from disjoint streams of the same seed.
  Rng rng(seed * 2 + (split == Split::kTest ? 1 : 0));
  for (int i = 0; i < n; ++i) {
    const int cls = i % classes;
    ds.labels[i] = cls;
    const Rgb bg = random_color(rng, 0.0, 0.35);
    Rgb fg1 = random_color(rng, 0.35, 1.0);
    Rgb fg2 = random_color(rng, 0.35, 1.0);
    // Keep the texture visible: push the two foreground colours apart.
    const double sep = (fg1.r + fg1.g + fg1.b) - (fg2.r + fg2.g + fg2.b);
    if (std::abs(sep) < 0.6) {
      const double shift = sep >= 0 ? 0.25 : -0.25;
      fg1 = {std::clamp(fg1.r + shift, 0.0, 1.0), std::clamp(fg1.g + shift, 0.0, 1.0),
             std::clamp(fg1.b + shift, 0.0, 1.0)};
      fg2 = {std::clamp(fg2.r - shift, 0.0, 1.0), std::clamp(fg2.g - shift, 0.0, 1.0),
             std::clamp(fg2.b - shift, 0.0, 1.0)};
    }
    const double period = rng.uniform(3.5, 5.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double cy = rng.uniform(12.0, 20.0);
    const double cx = rng.uniform(12.0, 20.0);
    const double radius = rng.uniform(9.0, 13.0);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        Rgb px = bg;
        if (inside_shape(cls, y + 0.5 - cy, x + 0.5 - cx, radius)) {
          const double t = texture(cls, y, x, cy, cx, period, phase);
          px = {t * fg1.r + (1 - t) * fg2.r, t * fg1.g + (1 - t) * fg2.g,
                t * fg1.b + (1 - t) * fg2.b};
        }
        ds.images.at(i, 0, y, x) = px.r;
        ds.images.at(i, 1, y, x) = px.g;
        ds.images.at(i, 2, y, x) = px.b;
      }
    }
  }
  return ds;
}

Var cross_entropy(const Var& logits, std::span<const int> labels) {
  const Shape& s = logits.shape();
  const int n = s.n, k = static_cast<int>(s.c * s.plane());
  if (k < 2) throw ContractError("cross_entropy needs at least 2 classes");
  if (static_cast<int>(labels.size()) != n) {
    throw ContractError("cross_entropy: label count does not match batch");
  }
  for (int l : labels) {
    if (l < 0 || l >= k) {
      throw ContractError("cross_entropy: label " + std::to_string(l) +
                          " out of range for " + std::to_string(k) + " classes");
    }
  }
  const Tensor& z = logits.value();
  auto probs = std::make_shared<Tensor>(Shape{n, k, 1, 1});
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* row = z.data() + static_cast<std::size_t>(i) * k;
    const double m = *std::max_element(row, row + k);
    double total = 0.0;
    for (int j = 0; j < k; ++j) total += std::exp(row[j] - m);
    const double lse = m + std::log(total);
    loss += lse - row[labels[i]];
    for (int j = 0; j < k; ++j) (*probs)[i * k + j] = std::exp(row[j] - lse);
  }
  loss /= n;
  std::vector<int> lab(labels.begin(), labels.end());
  auto nz = logits.node();
  return Var::make(Tensor::scalar(loss), {logits}, [nz, probs, lab, n, k](const Tensor& g) {
    Tensor& slot = nz->grad_slot();
    const double scale = g[0] / n;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) {
        const double onehot = j == lab[i] ? 1.0 : 0.0;
        slot[i * k + j] += scale * ((*probs)[i * k + j] - onehot);
      }
    }
  });
}

TinyClassifier TinyClassifier::init(int classes, std::uint64_t seed) {
  if (classes < 2) throw ContractError("classifier needs at least 2 classes");
  Rng rng(seed);
  TinyClassifier c;
  c.conv1_ = Conv2dParams::init(3, 16, 3, 1, 1, rng);
  c.bn1_ = NormState::init(16, NormKind::kBatch);
  c.conv2_ = Conv2dParams::init(16, 32, 3, 1, 1, rng);
  c.bn2_ = NormState::init(32, NormKind::kBatch);
  c.fc_ = LinearParams::init(32, classes, rng);
  return c;
}

Var TinyClassifier::forward(const Var& x) {
  Var h = max_pool2(leaky_relu(batch_norm(conv2d(x, conv1_), bn1_)));
  h = max_pool2(leaky_relu(batch_norm(conv2d(h, conv2_), bn2_)));
  return fully_connected(global_avg_pool(h), fc_);
}

void TinyClassifier::freeze() {
  for (auto p : named_parameters()) {
    p.var.set_requires_grad(false);
    p.var.zero_grad();
  }
  set_mode(NormMode::kEval);
  frozen_ = true;
}

void TinyClassifier::set_mode(NormMode mode) {
  bn1_.mode = mode;
  bn2_.mode = mode;
}

ParamList TinyClassifier::named_parameters() const {
  return {
      {"conv1.kernel", conv1_.kernel, true},
      {"conv1.bias", conv1_.bias, true},
      {"bn1.gamma", bn1_.gamma, true},
      {"bn1.beta", bn1_.beta, true},
      {"bn1.running_mean", bn1_.running_mean, false},
      {"bn1.running_var", bn1_.running_var, false},
      {"conv2.kernel", conv2_.kernel, true},
      {"conv2.bias", conv2_.bias, true},
      {"bn2.gamma", bn2_.gamma, true},
      {"bn2.beta", bn2_.beta, true},
      {"bn2.running_mean", bn2_.running_mean, false},
      {"bn2.running_var", bn2_.running_var, false},
      {"fc.weight", fc_.weight, true},
      {"fc.bias", fc_.bias, true},
  };
}

std::string TinyClassifier::fingerprint() const {
  return "clf/v1;classes=" + std::to_string(classes());
}

TinyClassifier TinyClassifier::from_checkpoint(const Checkpoint& ckpt) {
  constexpr std::string_view prefix = "clf/v1;classes=";
  if (ckpt.fingerprint.rfind(prefix, 0) != 0) {
    throw CheckpointError("not a classifier checkpoint: " + ckpt.fingerprint);
  }
  const int classes = std::stoi(ckpt.fingerprint.substr(prefix.size()));
  TinyClassifier c = init(classes, 0);
  restore(c.named_parameters(), ckpt, c.fingerprint());
  c.freeze();
  return c;
}

std::vector<int> predict(TinyClassifier& clf, const Tensor& images, int chunk) {
  NoGradGuard guard;
  std::vector<int> out;
  const int n = images.shape().n;
  out.reserve(n);
  for (int b = 0; b < n; b += chunk) {
    const int cnt = std::min(chunk, n - b);
    const Tensor logits = clf.forward(Var(images.samples(b, cnt))).value();
    const int k = logits.shape().c;
    for (int i = 0; i < cnt; ++i) {
      const double* row = logits.data() + static_cast<std::size_t>(i) * k;
      out.push_back(static_cast<int>(std::max_element(row, row + k) - row));
    }
  }
  return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) {
    throw ContractError("accuracy: prediction and label counts differ");
  }
  if (labels.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predicted[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

TinyClassifier pretrain_classifier(const ToyDataset& ds, const PretrainConfig& cfg,
                                   PretrainResult* result,
                                   const std::function<void(int, double)>& on_epoch) {
  if (ds.size() == 0) throw ContractError("pretraining needs a non-empty dataset");
  if (cfg.batch_size < 2) throw ContractError("pretraining batch size must be >= 2");
  TinyClassifier clf = TinyClassifier::init(ds.classes, cfg.seed);
  const ParamList params = clf.named_parameters();
  AdamState adam = AdamState::for_params(params);
  Rng rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
  std::vector<int> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  PretrainResult local;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    clf.set_mode(NormMode::kTrain);
    for (int i = ds.size() - 1; i > 0; --i) {
      std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    }
    double total = 0.0;
    int batches = 0;
    for (int b = 0; b + 1 < ds.size(); b += cfg.batch_size) {
      // A trailing single sample is dropped: batch norm needs two.
      const int cnt = std::min(cfg.batch_size, ds.size() - b);
      const ToyDataset batch =
          ds.subset(std::span<const int>(order).subspan(b, cnt));
      zero_grads(params);
      Var loss = cross_entropy(clf.forward(Var(batch.images)), batch.labels);
      const double lv = loss.value()[0];
      if (!std::isfinite(lv)) {
        throw NumericError("classifier pretraining diverged at epoch " +
                           std::to_string(epoch + 1));
      }
      backward(loss);
      adam_step(params, adam, cfg.lr);
      total += lv;
      ++batches;
    }
    local.epoch_loss.push_back(total / std::max(1, batches));
    if (on_epoch) on_epoch(epoch + 1, local.epoch_loss.back());
  }
  clf.freeze();
  local.train_accuracy = accuracy(predict(clf, ds.images), ds.labels);
  if (result) *result = local;
  return clf;
}

}  // namespace urie
