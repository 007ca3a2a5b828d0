#include "urie/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

namespace urie {

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

bool is_ppm(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".ppm";
}

void check_image(const Tensor& img) {
  const Shape& s = img.shape();
  if (s.n != 1 || s.c != 3 || s.h < 1 || s.w < 1) {
    throw ImageIoError("expected a (1, 3, h, w) image, got " + s.str());
  }
}

Tensor from_rgb(const std::vector<std::uint8_t>& rgb, int h, int w) {
  Tensor img({1, 3, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at(0, c, y, x) = rgb[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0;
      }
    }
  }
  return img;
}

std::vector<std::uint8_t> to_rgb(const Tensor& img) {
  const Shape& s = img.shape();
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(s.h) * s.w * 3);
  for (int y = 0; y < s.h; ++y) {
    for (int x = 0; x < s.w; ++x) {
      for (int c = 0; c < 3; ++c) {
        rgb[(static_cast<std::size_t>(y) * s.w + x) * 3 + c] = to_byte(img.at(0, c, y, x));
      }
    }
  }
  return rgb;
}

Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ImageIoError("cannot open " + path.string());
  std::string magic;
  f >> magic;
  auto next_int = [&] {
    int v = -1;
    while (f >> std::ws && f.peek() == '#') {
      std::string line;
      std::getline(f, line);
    }
    f >> v;
    return v;
  };
  const int w = next_int(), h = next_int(), maxval = next_int();
  if (magic != "P6" || w < 1 || h < 1 || maxval != 255) {
    throw ImageIoError(path.string() + ": only 8-bit binary PPM (P6) is supported");
  }
  f.get();
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3);
  f.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!f) throw ImageIoError(path.string() + ": truncated pixel data");
  return from_rgb(rgb, h, w);
}

void write_ppm(const std::filesystem::path& path, const Tensor& img) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ImageIoError("cannot open " + path.string() + " for writing");
  f << "P6\n" << img.shape().w << ' ' << img.shape().h << "\n255\n";
  const auto rgb = to_rgb(img);
  f.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!f) throw ImageIoError("failed writing " + path.string());
}

Tensor read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw ImageIoError(path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw ImageIoError(path.string() + ": " + msg);
  }
  return from_rgb(rgb, static_cast<int>(image.height), static_cast<int>(image.width));
}

void write_png(const std::filesystem::path& path, const Tensor& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.shape().w);
  image.height = static_cast<png_uint_32>(img.shape().h);
  image.format = PNG_FORMAT_RGB;
  const auto rgb = to_rgb(img);
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, rgb.data(), 0, nullptr)) {
    throw ImageIoError(path.string() + ": " + image.message);
  }
}

}  // namespace

Tensor read_image(const std::filesystem::path& path) {
  return is_ppm(path) ? read_ppm(path) : read_png(path);
}

void write_image(const std::filesystem::path& path, const Tensor& img) {
  check_image(img);
  if (is_ppm(path)) {
    write_ppm(path, img);
  } else {
    write_png(path, img);
  }
}

Tensor quantize8(const Tensor& img) {
  Tensor out(img.shape());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = to_byte(img[i]) / 255.0;
  return out;
}

}  // namespace urie
