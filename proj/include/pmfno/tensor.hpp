#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pmfno {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using cplx = std::complex<double>;

// Tagged error used across the library; the CLI maps codes to exit codes.
struct Error : std::runtime_error {
  enum class Code {
    config,     // bad configuration / malformed input files
    synthesis,  // physical model cannot be built or integrated
    numeric,    // non-finite values, failed decompositions, divergence
  };
  Code code;
  Error(Code c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

inline Index shape_size(const Shape& s) {
  Index n = 1;
  for (Index d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
  os << ']';
  return os.str();
}

inline bool is_pow2(Index n) { return n > 0 && (n & (n - 1)) == 0; }

// Dense row-major n-d array over a scalar type. Every dimension must be at
// least 1; a payload passed in must match the shape product exactly.
template <typename Scalar>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(Shape shape) : shape_(std::move(shape)) {
    validate_shape_();
    data_.assign(static_cast<std::size_t>(shape_size(shape_)), Scalar{});
  }

  TensorT(Shape shape, std::vector<Scalar> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape_();
    if (static_cast<Index>(data_.size()) != shape_size(shape_))
      throw Error(Error::Code::config,
                  "tensor payload of " + std::to_string(data_.size()) +
                      " elements does not match shape " + shape_str(shape_));
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index i) const { return shape_[static_cast<std::size_t>(i)]; }
  Index size() const { return static_cast<Index>(data_.size()); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::vector<Scalar>& storage() { return data_; }
  const std::vector<Scalar>& storage() const { return data_; }

  Scalar& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }
  const Scalar& operator[](Index i) const { return data_[static_cast<std::size_t>(i)]; }

  template <typename... Ix>
  Scalar& at(Ix... ix) { return data_[static_cast<std::size_t>(offset(ix...))]; }
  template <typename... Ix>
  const Scalar& at(Ix... ix) const { return data_[static_cast<std::size_t>(offset(ix...))]; }

  // Row-major flat offset of a full index tuple.
  template <typename... Ix>
  Index offset(Ix... ix) const {
    static_assert(sizeof...(Ix) > 0);
    const Index idx[] = {static_cast<Index>(ix)...};
    Index off = 0;
    for (std::size_t k = 0; k < sizeof...(Ix); ++k) off = off * shape_[k] + idx[k];
    return off;
  }

  void fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }
  void set_zero() { fill(Scalar{}); }

  // Elements per step along `axis` (row-major stride).
  Index stride(Index axis) const {
    Index s = 1;
    for (Index a = axis + 1; a < rank(); ++a) s *= dim(a);
    return s;
  }

  bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

 private:
  void validate_shape_() {
    if (shape_.empty())
      throw Error(Error::Code::config, "tensor shape must have at least one dimension");
    for (Index d : shape_)
      if (d < 1)
        throw Error(Error::Code::config,
                    "tensor shape " + shape_str(shape_) + " has a dimension < 1");
  }

  Shape shape_;
  std::vector<Scalar> data_;
};

using Tensor = TensorT<double>;
using ComplexTensor = TensorT<cplx>;

// Eigen views over the flat storage (row-major matricization).
template <typename Scalar>
using RowMajorMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> as_vec(TensorT<Scalar>& t) {
  return {t.data(), t.size()};
}

template <typename Scalar>
Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> as_vec(const TensorT<Scalar>& t) {
  return {t.data(), t.size()};
}

template <typename Scalar>
Eigen::Map<RowMajorMat<Scalar>> as_mat(TensorT<Scalar>& t, Index rows, Index cols) {
  if (rows * cols != t.size())
    throw Error(Error::Code::config, "matrix view does not cover the tensor");
  return {t.data(), rows, cols};
}

template <typename Scalar>
Eigen::Map<const RowMajorMat<Scalar>> as_mat(const TensorT<Scalar>& t, Index rows, Index cols) {
  if (rows * cols != t.size())
    throw Error(Error::Code::config, "matrix view does not cover the tensor");
  return {t.data(), rows, cols};
}

// Copies of the leading `count` slices / the i-th slice along axis 0.
template <typename Scalar>
TensorT<Scalar> leading_frames(const TensorT<Scalar>& t, Index count) {
  if (count < 1 || count > t.dim(0))
    throw Error(Error::Code::config, "frame prefix " + std::to_string(count) +
                                         " out of range for shape " + shape_str(t.shape()));
  Shape s = t.shape();
  s[0] = count;
  TensorT<Scalar> out(s);
  std::copy_n(t.data(), static_cast<std::size_t>(out.size()), out.data());
  return out;
}

template <typename Scalar>
TensorT<Scalar> frame_at(const TensorT<Scalar>& t, Index i) {
  if (t.rank() < 2 || i < 0 || i >= t.dim(0))
    throw Error(Error::Code::config, "frame index " + std::to_string(i) +
                                         " out of range for shape " + shape_str(t.shape()));
  Shape s(t.shape().begin() + 1, t.shape().end());
  TensorT<Scalar> out(s);
  std::copy_n(t.data() + i * out.size(), static_cast<std::size_t>(out.size()), out.data());
  return out;
}

template <typename Scalar>
bool all_finite(const TensorT<Scalar>& t) {
  for (Index i = 0; i < t.size(); ++i) {
    if constexpr (std::is_same_v<Scalar, cplx>) {
      if (!std::isfinite(t[i].real()) || !std::isfinite(t[i].imag())) return false;
    } else {
      if (!std::isfinite(t[i])) return false;
    }
  }
  return true;
}

}  // namespace pmfno
