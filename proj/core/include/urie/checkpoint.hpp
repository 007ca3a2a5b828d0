#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "urie/autograd.hpp"

namespace urie {

struct NamedParam {
  std::string name;
  Var var;
  bool trainable = true;
};

using ParamList = std::vector<NamedParam>;

/// Raised for unreadable, malformed or incompatible checkpoint files.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary container layout (all integers little-endian):
///
///   "URIECKPT"                 8-byte magic
///   u32 version                currently 1
///   u32 len, bytes             config fingerprint
///   u64 count
///   count x {
///     u32 len, bytes           tensor name
///     u32 n, c, h, w           shape
///     n*c*h*w x f64            IEEE-754 payload
///   }
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string fingerprint;
  std::vector<std::pair<std::string, Tensor>> entries;

  const Tensor* find(std::string_view name) const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

Checkpoint snapshot(const ParamList& params, std::string fingerprint);

/// Copies values into `params`. Requires a matching fingerprint and an entry
/// of identical shape for every parameter.
void restore(const ParamList& params, const Checkpoint& ckpt,
             std::string_view expected_fingerprint);

}  // namespace urie
