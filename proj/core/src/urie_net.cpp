#include "urie/urie_net.hpp"

#include <sstream>

#include "urie/ops.hpp"

namespace urie {

namespace {

std::pair<NormKind, NormKind> sem_kinds(NormVariant v) {
  switch (v) {
    case NormVariant::kBoth:
      return {NormKind::kInstance, NormKind::kBatch};
    case NormVariant::kBatchOnly:
      return {NormKind::kBatch, NormKind::kBatch};
    case NormVariant::kInstanceOnly:
      return {NormKind::kInstance, NormKind::kInstance};
  }
  throw ContractError("unknown norm variant");
}

void check_input(const Shape& s) {
  if (s.c != 3) throw ContractError("URIE expects 3 input channels, got " + s.str());
  if (s.h % kUrieSizeMultiple != 0 || s.w % kUrieSizeMultiple != 0 || s.h == 0 ||
      s.w == 0) {
    throw ContractError("URIE input extents must be positive multiples of 16, got " +
                        s.str());
  }
}

std::uint64_t conv_macs(std::uint64_t k, std::uint64_t c_in, std::uint64_t c_out,
                        std::uint64_t h, std::uint64_t w) {
  return k * k * c_in * c_out * h * w;
}

std::uint64_t sem_macs(const UrieConfig& cfg, std::uint64_t c_in,
                       std::uint64_t c_out, std::uint64_t h, std::uint64_t w) {
  const std::uint64_t flat = kAttentionCells * c_out;
  const std::uint64_t hidden = flat / static_cast<std::uint64_t>(cfg.reduction_ratio);
  return 2 * conv_macs(3, c_in, c_out, h, w) + flat * hidden + 2 * hidden * flat;
}

}  // namespace

const char* to_string(NormVariant v) {
  switch (v) {
    case NormVariant::kBoth:
      return "both";
    case NormVariant::kBatchOnly:
      return "bn";
    case NormVariant::kInstanceOnly:
      return "in";
  }
  return "?";
}

NormVariant parse_norm_variant(std::string_view s) {
  if (s == "both") return NormVariant::kBoth;
  if (s == "bn" || s == "bn_only") return NormVariant::kBatchOnly;
  if (s == "in" || s == "in_only") return NormVariant::kInstanceOnly;
  throw ContractError("unknown norm mode '" + std::string(s) +
                      "' (expected both, bn or in)");
}

std::string UrieConfig::fingerprint() const {
  std::ostringstream os;
  os << "urie/v1;norm=" << to_string(norm_mode) << ";r=" << reduction_ratio
     << ";skip=" << (residual_skip ? 1 : 0);
  return os.str();
}

UrieConfig UrieConfig::from_fingerprint(std::string_view fp) {
  constexpr std::string_view prefix = "urie/v1;";
  if (fp.substr(0, prefix.size()) != prefix) {
    throw ContractError("not a URIE fingerprint: " + std::string(fp));
  }
  UrieConfig cfg;
  std::string rest(fp.substr(prefix.size()));
  std::istringstream is(rest);
  std::string field;
  int seen = 0;
  while (std::getline(is, field, ';')) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw ContractError("malformed fingerprint field " + field);
    const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
    if (key == "norm") {
      cfg.norm_mode = parse_norm_variant(value);
    } else if (key == "r") {
      cfg.reduction_ratio = std::stoi(value);
    } else if (key == "skip") {
      cfg.residual_skip = value == "1";
    } else {
      throw ContractError("unknown fingerprint key " + key);
    }
    ++seen;
  }
  if (seen != 3) throw ContractError("incomplete fingerprint " + std::string(fp));
  return cfg;
}

UrieParams UrieParams::init(const UrieConfig& cfg, std::uint64_t seed,
                            HeadInit head_init) {
  Rng rng(seed);
  const auto [in_kind, bn_kind] = sem_kinds(cfg.norm_mode);
  const int r = cfg.reduction_ratio;
  UrieParams p;
  p.stem = Conv2dParams::init(3, 32, 9, 1, 4, rng);
  p.sem1 = SemParams::init(32, 64, r, in_kind, bn_kind, rng);
  p.sem2 = SemParams::init(64, 64, r, in_kind, bn_kind, rng);
  p.sem3 = SemParams::init(128, 32, r, in_kind, bn_kind, rng);
  p.sem4 = SemParams::init(64, 16, r, in_kind, bn_kind, rng);
  p.head = Conv2dParams::init(16, 3, 3, 1, 1, rng);
  if (head_init == HeadInit::kZero) p.zero_head();
  return p;
}

ParamList UrieParams::named_parameters() const {
  ParamList out;
  out.push_back({"stem.kernel", stem.kernel, true});
  out.push_back({"stem.bias", stem.bias, true});
  const std::pair<const char*, const SemParams*> sems[] = {
      {"sem1.", &sem1}, {"sem2.", &sem2}, {"sem3.", &sem3}, {"sem4.", &sem4}};
  for (const auto& [prefix, sem] : sems) {
    for (auto& [suffix, var, trainable] : sem->parameters()) {
      out.push_back({prefix + suffix, var, trainable});
    }
  }
  out.push_back({"head.kernel", head.kernel, true});
  out.push_back({"head.bias", head.bias, true});
  return out;
}

void UrieParams::set_mode(NormMode mode) {
  for (SemParams* s : {&sem1, &sem2, &sem3, &sem4}) s->set_mode(mode);
}

void UrieParams::zero_head() {
  head.kernel.mutable_value().fill(0.0);
  head.bias.mutable_value().fill(0.0);
}

Var urie_forward(const Var& x, UrieParams& p, const UrieConfig& cfg) {
  const Shape& s = x.shape();
  check_input(s);
  Var stem = conv2d(x, p.stem);
  Var enc1 = sem_forward(max_pool2(stem), p.sem1);
  Var enc2 = sem_forward(max_pool2(enc1), p.sem2);
  Var up1 = bilinear_resize(enc2, s.h / 2, s.w / 2);
  Var dec1 = sem_forward(concat_channels(enc1, up1), p.sem3);
  Var up2 = bilinear_resize(dec1, s.h, s.w);
  Var dec2 = sem_forward(concat_channels(stem, up2), p.sem4);
  Var residual = conv2d(dec2, p.head);
  Var out = cfg.residual_skip ? ew_add(x, residual) : residual;
  return clamp(out, 0.0, 1.0);
}

std::uint64_t mac_count(const UrieConfig& cfg, int h, int w) {
  if (h <= 0 || w <= 0 || h % kUrieSizeMultiple != 0 || w % kUrieSizeMultiple != 0) {
    throw ContractError("mac_count needs positive multiples of 16");
  }
  const std::uint64_t H = h, W = w;
  std::uint64_t total = conv_macs(9, 3, 32, H, W);
  total += sem_macs(cfg, 32, 64, H / 2, W / 2);
  total += sem_macs(cfg, 64, 64, H / 4, W / 4);
  total += sem_macs(cfg, 128, 32, H / 2, W / 2);
  total += sem_macs(cfg, 64, 16, H, W);
  total += conv_macs(3, 16, 3, H, W);
  return total;
}

}  // namespace urie
