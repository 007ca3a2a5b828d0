#include "urie/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace urie {

namespace {

constexpr std::string_view kMagic = "URIECKPT";

template <typename T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void put_string(std::string& out, std::string_view s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::string string() { return std::string(take(le<std::uint32_t>())); }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const Tensor* Checkpoint::find(std::string_view name) const {
  for (const auto& [n, t] : entries) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic);
  put_le<std::uint32_t>(out, Checkpoint::kVersion);
  put_string(out, ckpt.fingerprint);
  put_le<std::uint64_t>(out, ckpt.entries.size());
  for (const auto& [name, t] : ckpt.entries) {
    put_string(out, name);
    const Shape& s = t.shape();
    for (int d : {s.n, s.c, s.h, s.w}) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : t.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(kMagic.size()) != kMagic) throw CheckpointError("not a checkpoint file");
  const auto version = r.le<std::uint32_t>();
  if (version != Checkpoint::kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.fingerprint = r.string();
  const auto count = r.le<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.string();
    Shape s;
    s.n = static_cast<int>(r.le<std::uint32_t>());
    s.c = static_cast<int>(r.le<std::uint32_t>());
    s.h = static_cast<int>(r.le<std::uint32_t>());
    s.w = static_cast<int>(r.le<std::uint32_t>());
    std::vector<double> data(s.numel());
    for (double& v : data) v = std::bit_cast<double>(r.le<std::uint64_t>());
    ckpt.entries.emplace_back(std::move(name), Tensor(s, std::move(data)));
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint payload");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("cannot open " + path.string() + " for writing");
  const std::string bytes = serialize_checkpoint(ckpt);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw CheckpointError("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

Checkpoint snapshot(const ParamList& params, std::string fingerprint) {
  Checkpoint ckpt;
  ckpt.fingerprint = std::move(fingerprint);
  ckpt.entries.reserve(params.size());
  for (const auto& p : params) ckpt.entries.emplace_back(p.name, p.var.value());
  return ckpt;
}

void restore(const ParamList& params, const Checkpoint& ckpt,
             std::string_view expected_fingerprint) {
  if (ckpt.fingerprint != expected_fingerprint) {
    throw CheckpointError("checkpoint fingerprint '" + ckpt.fingerprint +
                          "' does not match expected '" +
                          std::string(expected_fingerprint) + "'");
  }
  for (const auto& p : params) {
    const Tensor* t = ckpt.find(p.name);
    if (t == nullptr) throw CheckpointError("checkpoint lacks tensor " + p.name);
    if (t->shape() != p.var.shape()) {
      throw CheckpointError("shape mismatch for " + p.name + ": " +
                            t->shape().str() + " vs " + p.var.shape().str());
    }
  }
  for (auto p : params) p.var.mutable_value() = *ckpt.find(p.name);
}

}  // namespace urie
