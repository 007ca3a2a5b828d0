#pragma once

#include <filesystem>
#include <stdexcept>

#include "urie/tensor.hpp"

namespace urie {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads an 8-bit RGB (or gray / RGBA, converted) PNG or a binary PPM (P6)
/// into a (1, 3, h, w) tensor with values v / 255. The format follows the
/// file extension.
Tensor read_image(const std::filesystem::path& path);

/// Writes a (1, 3, h, w) tensor as 8-bit RGB, mapping v to
/// round(clamp(v, 0, 1) * 255).
void write_image(const std::filesystem::path& path, const Tensor& img);

/// The 8-bit quantization used by write_image, applied in memory.
Tensor quantize8(const Tensor& img);

}  // namespace urie
