#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace glimpse {

// Error taxonomy. The CLI maps these onto distinct exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionError : Error { using Error::Error; };  // operand shape mismatch
struct DataError : Error { using Error::Error; };       // malformed input data
struct ContractError : Error { using Error::Error; };   // API misuse (mode/cache/params mismatch)
struct ConfigError : Error { using Error::Error; };     // invalid configuration values
struct ParseError : Error { using Error::Error; };      // malformed files (magic, version, CRC, truncation)
struct IoError : Error { using Error::Error; };         // filesystem failures
struct NumericError : Error { using Error::Error; };    // non-finite values, failed numeric checks

inline std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (k) os << 'x';
    os << shape[k];
  }
  os << ']';
  return os.str();
}

// Dense row-major tensor of 64-bit floats. All extents are positive; the flat
// data length always equals the product of the extents.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    data_.assign(checked_size(shape_), 0.0);
  }

  Tensor(std::vector<std::size_t> shape, std::vector<double> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != checked_size(shape_)) {
      throw DimensionError("tensor: " + std::to_string(data_.size()) +
                           " values do not fill shape " + shape_str(shape_));
    }
  }

  static Tensor filled(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
  }

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[offset2(i, j)]; }
  double at(std::size_t i, std::size_t j) const { return data_[offset2(i, j)]; }
  double& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data_[offset4(i, j, k, l)];
  }
  double at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[offset4(i, j, k, l)];
  }

  void fill(double value) {
    for (double& x : data_) x = value;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

  void check_finite(const char* what) const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i])) {
        throw NumericError(std::string(what) + ": non-finite value at flat index " +
                           std::to_string(i));
      }
    }
  }

 private:
  static std::size_t checked_size(const std::vector<std::size_t>& shape) {
    if (shape.empty()) throw DimensionError("tensor: empty shape");
    std::size_t n = 1;
    for (std::size_t e : shape) {
      if (e == 0) throw DimensionError("tensor: zero extent in shape " + shape_str(shape));
      n *= e;
    }
    return n;
  }

  std::size_t offset2(std::size_t i, std::size_t j) const { return i * shape_[1] + j; }
  std::size_t offset4(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return ((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l;
  }

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

}  // namespace glimpse
