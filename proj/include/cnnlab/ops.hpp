#ifndef CNNLAB_OPS_HPP_
#define CNNLAB_OPS_HPP_

#include <string>

#include "cnnlab/tensor.hpp"

// Low-level tensor operators. All of them are pure functions on immutable
// inputs; identical inputs give bit-identical outputs.

namespace cnnlab {

namespace detail {
inline std::string shape_str(Index r, Index c, Index ch) {
  return std::to_string(r) + "x" + std::to_string(c) + "x" + std::to_string(ch);
}
}  // namespace detail

// Valid cross-correlation of a single-channel image with a single-channel
// kernel, stepping by `stride`. No kernel flip.
template <typename Scalar>
MatrixX<Scalar> conv_valid(const MatrixX<Scalar>& z, const MatrixX<Scalar>& kern,
                           Index stride) {
  const Index k_r = kern.rows(), k_c = kern.cols();
  if (stride < 1) throw DimensionError("conv_valid: stride must be >= 1, got " +
                                       std::to_string(stride));
  if (k_r > z.rows() || k_c > z.cols())
    throw DimensionError("conv_valid: kernel " + std::to_string(k_r) + "x" +
                         std::to_string(k_c) + " larger than input " +
                         std::to_string(z.rows()) + "x" + std::to_string(z.cols()));
  if ((z.rows() - k_r) % stride != 0 || (z.cols() - k_c) % stride != 0)
    throw DimensionError("conv_valid: (input " + std::to_string(z.rows()) + "x" +
                         std::to_string(z.cols()) + " - kernel " +
                         std::to_string(k_r) + "x" + std::to_string(k_c) +
                         ") not divisible by stride " + std::to_string(stride));
  const Index out_r = (z.rows() - k_r) / stride + 1;
  const Index out_c = (z.cols() - k_c) / stride + 1;
  MatrixX<Scalar> out(out_r, out_c);
  for (Index a = 0; a < out_r; ++a)
    for (Index b = 0; b < out_c; ++b)
      out(a, b) =
          z.block(a * stride, b * stride, k_r, k_c).cwiseProduct(kern).sum();
  return out;
}

// Multi-channel valid cross-correlation: the k x k x q kernel is slid over the
// image and the products are summed over all three axes.
template <typename Scalar>
MatrixX<Scalar> conv_valid(const Tensor3<Scalar>& z, const Tensor3<Scalar>& kern,
                           Index stride) {
  if (kern.rows() != kern.cols())
    throw DimensionError("conv_valid: kernel must be square, got " +
                         detail::shape_str(kern.rows(), kern.cols(), kern.channels()));
  if (kern.channels() != z.channels())
    throw DimensionError("conv_valid: kernel channels " +
                         std::to_string(kern.channels()) + " != input channels " +
                         std::to_string(z.channels()));
  MatrixX<Scalar> out = conv_valid<Scalar>(z.slice(0), kern.slice(0), stride);
  for (Index ch = 1; ch < z.channels(); ++ch)
    out += conv_valid<Scalar>(z.slice(ch), kern.slice(ch), stride);
  return out;
}

// 180-degree rotation; an involution.
template <typename Scalar>
MatrixX<Scalar> rotate180(const MatrixX<Scalar>& m) {
  return m.reverse();
}

// Replicates every entry into a p x p block scaled by 1/p^2 (the adjoint of
// non-overlapping mean pooling).
template <typename Scalar>
MatrixX<Scalar> upsample(const MatrixX<Scalar>& m, Index p) {
  if (p < 1) throw DimensionError("upsample: p must be >= 1, got " + std::to_string(p));
  MatrixX<Scalar> out(m.rows() * p, m.cols() * p);
  const Scalar scale = Scalar(1) / static_cast<Scalar>(p * p);
  for (Index g = 0; g < m.rows(); ++g)
    for (Index h = 0; h < m.cols(); ++h)
      out.block(g * p, h * p, p, p).setConstant(m(g, h) * scale);
  return out;
}

template <typename Scalar>
Tensor3<Scalar> upsample(const Tensor3<Scalar>& t, Index p) {
  Tensor3<Scalar> out;
  out.slices.reserve(t.slices.size());
  for (const auto& m : t.slices) out.slices.push_back(upsample<Scalar>(m, p));
  return out;
}

// Non-overlapping mean pooling with a p x p window.
template <typename Scalar>
MatrixX<Scalar> avg_pool(const MatrixX<Scalar>& y, Index p) {
  if (p < 1) throw DimensionError("avg_pool: p must be >= 1, got " + std::to_string(p));
  if (y.rows() % p != 0 || y.cols() % p != 0)
    throw DimensionError("avg_pool: input " + std::to_string(y.rows()) + "x" +
                         std::to_string(y.cols()) + " not divisible by window " +
                         std::to_string(p));
  MatrixX<Scalar> out(y.rows() / p, y.cols() / p);
  for (Index g = 0; g < out.rows(); ++g)
    for (Index h = 0; h < out.cols(); ++h)
      out(g, h) = y.block(g * p, h * p, p, p).mean();
  return out;
}

template <typename Scalar>
Tensor3<Scalar> avg_pool(const Tensor3<Scalar>& t, Index p) {
  Tensor3<Scalar> out;
  out.slices.reserve(t.slices.size());
  for (const auto& m : t.slices) out.slices.push_back(avg_pool<Scalar>(m, p));
  return out;
}

// Inserts stride-1 zero rows/cols between neighboring entries of `delta`
// (interior size s(r-1)+1 by s(c-1)+1) and pads a zero border of width k-1.
// The entries of delta land at positions (k-1 + a*s, k-1 + b*s).
// With k = 1 this is plain dilation with no border.
template <typename Scalar>
MatrixX<Scalar> dilate_and_pad(const MatrixX<Scalar>& delta, Index s, Index k) {
  if (s < 1 || k < 1)
    throw DimensionError("dilate_and_pad: need s >= 1 and k >= 1, got s = " +
                         std::to_string(s) + ", k = " + std::to_string(k));
  const Index r = delta.rows(), c = delta.cols();
  MatrixX<Scalar> out =
      MatrixX<Scalar>::Zero(s * (r - 1) + 2 * k - 1, s * (c - 1) + 2 * k - 1);
  for (Index a = 0; a < r; ++a)
    for (Index b = 0; b < c; ++b) out(k - 1 + a * s, k - 1 + b * s) = delta(a, b);
  return out;
}

// Elementwise logistic sigmoid.
template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return (Scalar(1) / (Scalar(1) + (-x.array()).exp())).matrix().eval();
}

template <typename Scalar>
Tensor3<Scalar> sigmoid(const Tensor3<Scalar>& t) {
  Tensor3<Scalar> out;
  out.slices.reserve(t.slices.size());
  for (const auto& m : t.slices) out.slices.push_back(sigmoid(m));
  return out;
}

// Softmax with max subtraction for stability.
template <typename Scalar>
VectorX<Scalar> softmax(const VectorX<Scalar>& x) {
  VectorX<Scalar> e = (x.array() - x.maxCoeff()).exp();
  return e / e.sum();
}

// Diagonal of G(z): i-th entry sigmoid(z_i) * (1 - sigmoid(z_i)), in (0, 1/4].
template <typename Scalar>
VectorX<Scalar> sigmoid_gate(const VectorX<Scalar>& z) {
  VectorX<Scalar> s = sigmoid(z);
  return s.array() * (Scalar(1) - s.array());
}

// Q(z): d^2 x d matrix whose only nonzero entries sit at ((i-1)d + i, i)
// (1-indexed) and equal sigmoid(z_i)(1 - sigmoid(z_i))(1 - 2 sigmoid(z_i)).
// Every entry has absolute value at most 2^3/3^4.
template <typename Scalar>
MatrixX<Scalar> sigmoid_curvature(const VectorX<Scalar>& z) {
  const Index d = z.size();
  MatrixX<Scalar> q = MatrixX<Scalar>::Zero(d * d, d);
  VectorX<Scalar> s = sigmoid(z);
  for (Index i = 0; i < d; ++i)
    q(i * (d + 1), i) = s(i) * (Scalar(1) - s(i)) * (Scalar(1) - 2 * s(i));
  return q;
}

}  // namespace cnnlab

#endif  // CNNLAB_OPS_HPP_
