#include "urie/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "urie/ops.hpp"

namespace urie {

namespace {

std::vector<double> gaussian_window(const SsimConfig& cfg) {
  const int r = cfg.window / 2;
  std::vector<double> g(cfg.window);
  double total = 0.0;
  for (int i = 0; i < cfg.window; ++i) {
    g[i] = std::exp(-((i - r) * (i - r)) / (2.0 * cfg.sigma * cfg.sigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  std::vector<double> w(static_cast<std::size_t>(cfg.window) * cfg.window);
  for (int y = 0; y < cfg.window; ++y) {
    for (int x = 0; x < cfg.window; ++x) w[y * cfg.window + x] = g[y] * g[x];
  }
  return w;
}

// Per-plane correlation with a k x k window over valid positions.
Var filter_valid(const Var& x, std::shared_ptr<const std::vector<double>> win, int k) {
  const Shape& s = x.shape();
  const Shape os{s.n, s.c, s.h - k + 1, s.w - k + 1};
  Tensor out(os);
  for (int p = 0; p < s.n * s.c; ++p) {
    const double* src = x.value().data() + static_cast<std::size_t>(p) * s.plane();
    double* dst = out.data() + static_cast<std::size_t>(p) * os.plane();
    for (int y = 0; y < os.h; ++y) {
      for (int xx = 0; xx < os.w; ++xx) {
        double acc = 0.0;
        for (int dy = 0; dy < k; ++dy) {
          const double* row = src + (y + dy) * s.w + xx;
          const double* wr = win->data() + dy * k;
          for (int dx = 0; dx < k; ++dx) acc += wr[dx] * row[dx];
        }
        dst[y * os.w + xx] = acc;
      }
    }
  }
  auto nx = x.node();
  return Var::make(std::move(out), {x}, [nx, win, k, s, os](const Tensor& g) {
    Tensor& slot = nx->grad_slot();
    for (int p = 0; p < s.n * s.c; ++p) {
      double* dst = slot.data() + static_cast<std::size_t>(p) * s.plane();
      const double* src = g.data() + static_cast<std::size_t>(p) * os.plane();
      for (int y = 0; y < os.h; ++y) {
        for (int xx = 0; xx < os.w; ++xx) {
          const double v = src[y * os.w + xx];
          for (int dy = 0; dy < k; ++dy) {
            double* row = dst + (y + dy) * s.w + xx;
            const double* wr = win->data() + dy * k;
            for (int dx = 0; dx < k; ++dx) row[dx] += wr[dx] * v;
          }
        }
      }
    }
  });
}

}  // namespace

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kRecognition:
      return "recognition";
    case LossKind::kMse:
      return "mse";
    case LossKind::kSsim:
      return "ssim";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view s) {
  if (s == "recognition") return LossKind::kRecognition;
  if (s == "mse") return LossKind::kMse;
  if (s == "ssim") return LossKind::kSsim;
  throw ContractError("unknown loss kind '" + std::string(s) +
                      "' (expected recognition, mse or ssim)");
}

AugmentDraw draw_augment(Rng& rng, const AugmentConfig& cfg) {
  if (cfg.crop > cfg.resize) {
    throw ContractError("augment crop " + std::to_string(cfg.crop) +
                        " exceeds resized extent " + std::to_string(cfg.resize));
  }
  const auto range = static_cast<std::uint64_t>(cfg.resize - cfg.crop + 1);
  AugmentDraw d;
  d.off_y = static_cast<int>(rng.below(range));
  d.off_x = static_cast<int>(rng.below(range));
  d.flip = rng.bernoulli(0.5);
  return d;
}

Tensor flip_horizontal(const Tensor& img) {
  const Shape& s = img.shape();
  Tensor out(s);
  for (int p = 0; p < s.n * s.c; ++p) {
    for (int y = 0; y < s.h; ++y) {
      const double* src = img.data() + p * s.plane() + y * s.w;
      double* dst = out.data() + p * s.plane() + y * s.w;
      for (int x = 0; x < s.w; ++x) dst[x] = src[s.w - 1 - x];
    }
  }
  return out;
}

Tensor apply_augment(const Tensor& img, const AugmentDraw& draw,
                     const AugmentConfig& cfg) {
  if (cfg.crop > cfg.resize) {
    throw ContractError("augment crop exceeds resized extent");
  }
  if (draw.off_y < 0 || draw.off_x < 0 || draw.off_y + cfg.crop > cfg.resize ||
      draw.off_x + cfg.crop > cfg.resize) {
    throw ContractError("augment crop offset out of range");
  }
  Tensor resized;
  {
    NoGradGuard guard;
    resized = bilinear_resize(Var(img), cfg.resize, cfg.resize).value();
  }
  const Shape& s = resized.shape();
  Tensor out({s.n, s.c, cfg.crop, cfg.crop});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < cfg.crop; ++y) {
        for (int x = 0; x < cfg.crop; ++x) {
          out.at(n, c, y, x) = resized.at(n, c, y + draw.off_y, x + draw.off_x);
        }
      }
    }
  }
  return draw.flip ? flip_horizontal(out) : out;
}

Tensor augment(const Tensor& img, Rng& rng, const AugmentConfig& cfg) {
  return apply_augment(img, draw_augment(rng, cfg), cfg);
}

Var ssim(const Var& a, const Var& b, const SsimConfig& cfg) {
  if (a.shape() != b.shape()) throw ContractError("ssim: shape mismatch");
  if (a.shape().h < cfg.window || a.shape().w < cfg.window) {
    throw ContractError("ssim: image smaller than the " +
                        std::to_string(cfg.window) + "x" +
                        std::to_string(cfg.window) + " window");
  }
  auto win = std::make_shared<const std::vector<double>>(gaussian_window(cfg));
  const int k = cfg.window;
  Var mu_a = filter_valid(a, win, k);
  Var mu_b = filter_valid(b, win, k);
  Var mu_aa = square(mu_a), mu_bb = square(mu_b), mu_ab = ew_mul(mu_a, mu_b);
  Var var_a = ew_sub(filter_valid(square(a), win, k), mu_aa);
  Var var_b = ew_sub(filter_valid(square(b), win, k), mu_bb);
  Var cov = ew_sub(filter_valid(ew_mul(a, b), win, k), mu_ab);
  Var num = ew_mul(add_scalar(scale(mu_ab, 2.0), cfg.c1),
                   add_scalar(scale(cov, 2.0), cfg.c2));
  Var den = ew_mul(add_scalar(ew_add(mu_aa, mu_bb), cfg.c1),
                   add_scalar(ew_add(var_a, var_b), cfg.c2));
  return mean(ew_div(num, den));
}

double TrainConfig::lr_at(int epoch) const {
  return lr / std::pow(lr_decay_factor, std::floor(static_cast<double>(epoch) / lr_decay_every));
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ContractError("lr must be positive");
  if (!(data_fraction > 0.0 && data_fraction <= 1.0)) {
    throw ContractError("data fraction must be in (0, 1]");
  }
  if (lr_decay_every < 1) throw ContractError("lr_decay_every must be >= 1");
  if (!(lr_decay_factor > 0.0)) throw ContractError("lr_decay_factor must be positive");
  if (epochs < 0) throw ContractError("epochs must be non-negative");
  if (batch_size < 2) throw ContractError("batch size must be >= 2");
}

int fraction_count(int n, double fraction) {
  return static_cast<int>(std::ceil(fraction * n - 1e-9));
}

Var enhancement_loss(LossKind kind, const Var& enhanced, const Tensor& clean,
                     std::span<const int> labels, TinyClassifier& clf) {
  switch (kind) {
    case LossKind::kRecognition:
      return cross_entropy(clf.forward(enhanced), labels);
    case LossKind::kMse:
      return mse(enhanced, Var(clean));
    case LossKind::kSsim:
      return add_scalar(scale(ssim(enhanced, Var(clean)), -1.0), 1.0);
  }
  throw ContractError("unknown loss kind");
}

TrainResult train_urie(UrieParams& urie, const UrieConfig& ucfg,
                       TinyClassifier& clf, const ToyDataset& ds,
                       const TrainConfig& cfg,
                       const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (!clf.frozen()) throw ContractError("train_urie needs a frozen classifier");
  if (ds.size() == 0) throw ContractError("train_urie needs a non-empty dataset");

  Rng rng(cfg.seed);
  std::vector<int> pool(ds.size());
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = ds.size() - 1; i > 0; --i) {
    std::swap(pool[i], pool[rng.below(static_cast<std::uint64_t>(i) + 1)]);
  }
  TrainResult result;
  result.train_images = fraction_count(ds.size(), cfg.data_fraction);
  if (result.train_images < 2) {
    throw ContractError("training needs at least 2 images after the data fraction");
  }
  pool.resize(result.train_images);

  const ParamList params = urie.named_parameters();
  AdamState adam = AdamState::for_params(params, cfg.adam);
  Checkpoint last_good = snapshot(params, ucfg.fingerprint());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = cfg.lr_at(epoch);
    urie.set_mode(NormMode::kTrain);
    for (int i = static_cast<int>(pool.size()) - 1; i > 0; --i) {
      std::swap(pool[i], pool[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    }
    double total = 0.0;
    int batches = 0;
    const int n = static_cast<int>(pool.size());
    for (int b = 0; b < n;) {
      int cnt = std::min(cfg.batch_size, n - b);
      // Fold a trailing single image into this batch; batch norm needs two.
      if (n - (b + cnt) == 1) ++cnt;
      std::vector<Tensor> clean, corrupted;
      std::vector<int> labels;
      for (int i = b; i < b + cnt; ++i) {
        const int idx = pool[i];
        Tensor img = ds.image(idx);
        if (cfg.augment.enabled) img = augment(img, rng, cfg.augment);
        const CorruptionSpec spec = cfg.corrupt_inputs
                                        ? sample_spec(rng, cfg.pool, cfg.include_clean)
                                        : CorruptionSpec{};
        corrupted.push_back(corrupt(img, spec));
        clean.push_back(std::move(img));
        labels.push_back(ds.labels[idx]);
      }
      b += cnt;
      zero_grads(params);
      Var enhanced = urie_forward(Var(stack(corrupted)), urie, ucfg);
      Var loss = enhancement_loss(cfg.loss_kind, enhanced, stack(clean), labels, clf);
      const double lv = loss.value()[0];
      if (!std::isfinite(lv)) {
        restore(params, last_good, ucfg.fingerprint());
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch + 1) +
                               ", step " + std::to_string(result.steps + 1) +
                               "; parameters restored to the last completed epoch");
      }
      backward(loss);
      try {
        adam_step(params, adam, lr);
      } catch (const NumericError& e) {
        restore(params, last_good, ucfg.fingerprint());
        throw TrainingDiverged(std::string(e.what()) +
                               "; parameters restored to the last completed epoch");
      }
      total += lv;
      ++batches;
      ++result.steps;
    }
    zero_grads(params);
    last_good = snapshot(params, ucfg.fingerprint());
    const auto t1 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    rec.mean_loss = total / std::max(1, batches);
    rec.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    result.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  urie.set_mode(NormMode::kEval);
  return result;
}

Tensor enhance_images(UrieParams& urie, const UrieConfig& ucfg,
                      const Tensor& images, int chunk) {
  NoGradGuard guard;
  urie.set_mode(NormMode::kEval);
  const int n = images.shape().n;
  std::vector<Tensor> parts;
  for (int b = 0; b < n; b += chunk) {
    const int cnt = std::min(chunk, n - b);
    parts.push_back(urie_forward(Var(images.samples(b, cnt)), urie, ucfg).value());
  }
  if (parts.empty()) return images;
  return stack(parts);
}

}  // namespace urie
