#ifndef CNNLAB_TENSOR_HPP_
#define CNNLAB_TENSOR_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace cnnlab {

// Thrown when shapes or stride/pool divisibility relations are violated.
// Messages carry the offending numbers so CLI output is actionable.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

// Dense rank-3 array with shape (rows, cols, channels), stored as one
// column-major matrix per channel.
template <typename Scalar>
struct Tensor3 {
  std::vector<MatrixX<Scalar>> slices;

  Tensor3() = default;
  Tensor3(Index rows, Index cols, Index channels)
      : slices(static_cast<std::size_t>(channels),
               MatrixX<Scalar>::Zero(rows, cols)) {}

  static Tensor3 Constant(Index rows, Index cols, Index channels, Scalar v) {
    Tensor3 t(rows, cols, channels);
    for (auto& m : t.slices) m.setConstant(v);
    return t;
  }

  Index rows() const { return slices.empty() ? 0 : slices.front().rows(); }
  Index cols() const { return slices.empty() ? 0 : slices.front().cols(); }
  Index channels() const { return static_cast<Index>(slices.size()); }
  Index size() const { return rows() * cols() * channels(); }

  MatrixX<Scalar>& slice(Index ch) { return slices[static_cast<std::size_t>(ch)]; }
  const MatrixX<Scalar>& slice(Index ch) const {
    return slices[static_cast<std::size_t>(ch)];
  }

  Scalar& operator()(Index r, Index c, Index ch) { return slice(ch)(r, c); }
  Scalar operator()(Index r, Index c, Index ch) const { return slice(ch)(r, c); }

  Scalar squaredNorm() const {
    Scalar s = 0;
    for (const auto& m : slices) s += m.squaredNorm();
    return s;
  }
  Scalar norm() const { return std::sqrt(squaredNorm()); }

  bool allFinite() const {
    for (const auto& m : slices)
      if (!m.allFinite()) return false;
    return true;
  }

  void setZero() {
    for (auto& m : slices) m.setZero();
  }

  Tensor3& operator*=(Scalar a) {
    for (auto& m : slices) m *= a;
    return *this;
  }
  Tensor3& operator+=(const Tensor3& o) {
    for (std::size_t i = 0; i < slices.size(); ++i) slices[i] += o.slices[i];
    return *this;
  }

  bool operator==(const Tensor3& o) const { return slices == o.slices; }
};

using Tensor3d = Tensor3<double>;

// vec(A) stacks the columns of A.
template <typename Scalar>
VectorX<Scalar> vec(const MatrixX<Scalar>& m) {
  return Eigen::Map<const VectorX<Scalar>>(m.data(), m.size());
}

// vec of a rank-3 array: column-major within each slice, slices concatenated
// in channel order.
template <typename Scalar>
VectorX<Scalar> vec(const Tensor3<Scalar>& t) {
  VectorX<Scalar> out(t.size());
  Index at = 0;
  for (const auto& m : t.slices) {
    out.segment(at, m.size()) = Eigen::Map<const VectorX<Scalar>>(m.data(), m.size());
    at += m.size();
  }
  return out;
}

template <typename Scalar>
Tensor3<Scalar> unvec(const VectorX<Scalar>& v, Index rows, Index cols, Index channels) {
  if (v.size() != rows * cols * channels)
    throw DimensionError("unvec: vector of size " + std::to_string(v.size()) +
                         " cannot fill shape " + std::to_string(rows) + "x" +
                         std::to_string(cols) + "x" + std::to_string(channels));
  Tensor3<Scalar> t(rows, cols, channels);
  Index at = 0;
  for (auto& m : t.slices) {
    m = Eigen::Map<const MatrixX<Scalar>>(v.data() + at, rows, cols);
    at += rows * cols;
  }
  return t;
}

}  // namespace cnnlab

#endif  // CNNLAB_TENSOR_HPP_
