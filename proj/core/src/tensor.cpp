#include "urie/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace urie {

std::string Shape::str() const {
  std::ostringstream os;
  os << '(' << n << ", " << c << ", " << h << ", " << w << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw ContractError("negative tensor extent " + shape.str());
  }
  data_.assign(shape.numel(), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape.numel()) {
    throw ContractError("tensor data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape.str());
  }
}

Tensor Tensor::vector(std::vector<double> v) {
  const int len = static_cast<int>(v.size());
  return Tensor({len, 1, 1, 1}, std::move(v));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.numel() != shape_.numel()) {
    throw ContractError("cannot reshape " + shape_.str() + " to " +
                        shape.str());
  }
  return Tensor(shape, data_);
}

Tensor Tensor::samples(int begin, int count) const {
  if (begin < 0 || count < 0 || begin + count > shape_.n) {
    throw ContractError("sample range out of bounds for " + shape_.str());
  }
  const std::size_t per = static_cast<std::size_t>(shape_.c) * shape_.plane();
  Shape s = shape_;
  s.n = count;
  std::vector<double> out(data_.begin() + begin * per,
                          data_.begin() + (begin + count) * per);
  return Tensor(s, std::move(out));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor stack(std::span<const Tensor> items) {
  if (items.empty()) throw ContractError("stack of zero tensors");
  Shape s = items.front().shape();
  int total = 0;
  for (const auto& t : items) {
    const Shape& ts = t.shape();
    if (ts.c != s.c || ts.h != s.h || ts.w != s.w) {
      throw ContractError("stack shape mismatch: " + ts.str() + " vs " +
                          s.str());
    }
    total += ts.n;
  }
  s.n = total;
  std::vector<double> data;
  data.reserve(s.numel());
  for (const auto& t : items) {
    data.insert(data.end(), t.values().begin(), t.values().end());
  }
  return Tensor(s, std::move(data));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ContractError("max_abs_diff shape mismatch");
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

}  // namespace urie
