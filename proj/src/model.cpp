#include "cnnlab/model.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "cnnlab/arch_io.hpp"

namespace cnnlab {

namespace {

Tensor3d random_tensor(Rng& rng, Index rows, Index cols, Index channels) {
  Tensor3d t(rows, cols, channels);
  for (auto& m : t.slices)
    for (Index c = 0; c < m.cols(); ++c)
      for (Index r = 0; r < m.rows(); ++r) m(r, c) = uniform(rng, -1.0, 1.0);
  return t;
}

// sigmoid'(x) recovered from y = sigmoid(x) as y (1 - y).
Eigen::MatrixXd sigmoid_prime_from_y(const Eigen::MatrixXd& y) {
  return (y.array() * (1.0 - y.array())).matrix();
}

}  // namespace

Weights init_weights(const Architecture& arch, std::uint64_t seed, double norm_fraction) {
  validate(arch);
  if (!(norm_fraction > 0.0) || norm_fraction > 1.0)
    throw DimensionError("init_weights: norm_fraction must be in (0,1], got " +
                         std::to_string(norm_fraction));
  Rng rng(seed);
  Weights w;
  int d_prev = arch.input_channels;
  for (const LayerSpec& L : arch.layers) {
    std::vector<Tensor3d> stack;
    for (int j = 0; j < L.out_channels; ++j) {
      Tensor3d kern = random_tensor(rng, L.kernel, L.kernel, d_prev);
      kern *= norm_fraction * L.b / kern.norm();
      stack.push_back(std::move(kern));
    }
    w.kernels.push_back(std::move(stack));
    d_prev = L.out_channels;
  }
  DerivedDims dims = validate(arch);
  const Index fc_cols =
      static_cast<Index>(dims.pooled_rows.back()) * dims.pooled_cols.back() * d_prev;
  w.fc.resize(arch.output_dim, fc_cols);
  for (Index c = 0; c < w.fc.cols(); ++c)
    for (Index r = 0; r < w.fc.rows(); ++r) w.fc(r, c) = uniform(rng, -1.0, 1.0);
  w.fc *= norm_fraction * arch.output_b / w.fc.norm();
  return w;
}

ForwardTrace forward(const Architecture& arch, const Weights& w, const Tensor3d& input,
                     Head head) {
  if (input.rows() != arch.input_rows || input.cols() != arch.input_cols ||
      input.channels() != arch.input_channels)
    throw DimensionError("forward: input shape " +
                         detail::shape_str(input.rows(), input.cols(), input.channels()) +
                         " does not match architecture " +
                         detail::shape_str(arch.input_rows, arch.input_cols,
                                           arch.input_channels));
  for (const auto& m : input.slices)
    if ((m.array() < 0.0).any() || (m.array() > 1.0).any())
      throw DimensionError("forward: input entries must lie in [0,1]");

  ForwardTrace t;
  t.head = head;
  t.zs.push_back(input);
  for (int i = 0; i < arch.depth(); ++i) {
    const LayerSpec& L = arch.layers[static_cast<std::size_t>(i)];
    const auto& stack = w.kernels[static_cast<std::size_t>(i)];
    Tensor3d x;
    x.slices.reserve(stack.size());
    for (const Tensor3d& kern : stack)
      x.slices.push_back(conv_valid(t.zs.back(), kern, L.stride));
    Tensor3d y = sigmoid(x);
    t.zs.push_back(avg_pool(y, arch.pool));
    t.xs.push_back(std::move(x));
    t.ys.push_back(std::move(y));
  }
  t.z_flat = vec(t.zs.back());
  t.u = w.fc * t.z_flat;
  t.v = head == Head::Softmax ? softmax(t.u) : VectorX<double>(sigmoid(t.u));
  return t;
}

double loss(const Eigen::VectorXd& v, const Eigen::VectorXd& y) {
  if (v.size() != y.size())
    throw DimensionError("loss: prediction size " + std::to_string(v.size()) +
                         " != label size " + std::to_string(y.size()));
  int ones = 0;
  for (Index i = 0; i < y.size(); ++i) {
    if (y(i) == 1.0) ++ones;
    else if (y(i) != 0.0)
      throw DimensionError("loss: label must be one-hot");
  }
  if (ones != 1) throw DimensionError("loss: label must be one-hot");
  return 0.5 * (v - y).squaredNorm();
}

namespace {

// Shared backward recursion, parameterized by the output-layer gradient
// df/du. Computes the fully connected gradient, every delta_i, and the
// kernel gradients.
std::pair<Gradient, Deltas> backprop_from_head(const Architecture& arch, const Weights& w,
                                               const ForwardTrace& trace,
                                               const Eigen::VectorXd& head_grad) {
  const int l = arch.depth();
  const int p = arch.pool;

  Gradient grad;
  grad.kernels.resize(static_cast<std::size_t>(l));
  grad.fc = head_grad * trace.z_flat.transpose();

  Deltas deltas;
  deltas.layers.resize(static_cast<std::size_t>(l));

  // delta_l = sigmoid'(X_l) .* up(reshape(W_fc^T df/du))
  const Tensor3d& z_last = trace.zs.back();
  Eigen::VectorXd dz = w.fc.transpose() * head_grad;
  Tensor3d dZ = unvec(dz, z_last.rows(), z_last.cols(), z_last.channels());
  Tensor3d dY = upsample(dZ, p);
  {
    Tensor3d delta = dY;
    for (Index ch = 0; ch < delta.channels(); ++ch)
      delta.slice(ch) =
          delta.slice(ch).cwiseProduct(sigmoid_prime_from_y(trace.ys.back().slice(ch)));
    deltas.layers.back() = std::move(delta);
  }

  for (int i = l; i >= 1; --i) {
    const LayerSpec& L = arch.layers[static_cast<std::size_t>(i - 1)];
    const Tensor3d& delta = deltas.layers[static_cast<std::size_t>(i - 1)];
    const Tensor3d& z_in = trace.zs[static_cast<std::size_t>(i - 1)];

    // Kernel gradients: correlate the layer input with the stride-dilated
    // delta slice (no border).
    std::vector<Tensor3d>& gstack = grad.kernels[static_cast<std::size_t>(i - 1)];
    gstack.assign(static_cast<std::size_t>(L.out_channels),
                  Tensor3d(L.kernel, L.kernel, z_in.channels()));
    for (Index k = 0; k < L.out_channels; ++k) {
      Eigen::MatrixXd dilated = dilate_and_pad(delta.slice(k), L.stride, 1);
      for (Index j = 0; j < z_in.channels(); ++j)
        gstack[static_cast<std::size_t>(k)].slice(j) =
            conv_valid(z_in.slice(j), dilated, 1);
    }

    // delta_{i-1}: full-size backward convolution with the rotated kernels.
    if (i > 1) {
      const auto& stack = w.kernels[static_cast<std::size_t>(i - 1)];
      const Tensor3d& y_prev = trace.ys[static_cast<std::size_t>(i - 2)];
      Tensor3d prev(y_prev.rows(), y_prev.cols(), y_prev.channels());
      std::vector<Eigen::MatrixXd> padded;
      padded.reserve(static_cast<std::size_t>(L.out_channels));
      for (Index k = 0; k < L.out_channels; ++k)
        padded.push_back(dilate_and_pad(delta.slice(k), L.stride, L.kernel));
      for (Index j = 0; j < prev.channels(); ++j) {
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(
            padded[0].rows() - L.kernel + 1, padded[0].cols() - L.kernel + 1);
        for (Index k = 0; k < L.out_channels; ++k)
          acc += conv_valid<double>(
              padded[static_cast<std::size_t>(k)],
              rotate180<double>(stack[static_cast<std::size_t>(k)].slice(j)), 1);
        prev.slice(j) =
            upsample(acc, p).cwiseProduct(sigmoid_prime_from_y(y_prev.slice(j)));
      }
      deltas.layers[static_cast<std::size_t>(i - 2)] = std::move(prev);
    }
  }
  return {std::move(grad), std::move(deltas)};
}

}  // namespace

std::pair<Gradient, Deltas> backprop_gated(const Architecture& arch, const Weights& w,
                                           const ForwardTrace& trace,
                                           const Eigen::VectorXd& y) {
  Eigen::VectorXd head_grad =
      sigmoid_gate(trace.u).cwiseProduct(trace.v - y);  // S (v - y), S = G(u)
  return backprop_from_head(arch, w, trace, head_grad);
}

Gradient backprop_exact(const Architecture& arch, const Weights& w,
                        const ForwardTrace& trace, const Eigen::VectorXd& y) {
  Eigen::VectorXd head_grad;
  if (trace.head == Head::Sigmoid) {
    head_grad = sigmoid_gate(trace.u).cwiseProduct(trace.v - y);
  } else {
    // (diag(v) - v v^T)(v - y)
    const Eigen::VectorXd r = trace.v - y;
    head_grad = trace.v.cwiseProduct(r) - trace.v * trace.v.dot(r);
  }
  return backprop_from_head(arch, w, trace, head_grad).first;
}

Eigen::VectorXd weights_to_vec(const Weights& w) {
  Eigen::VectorXd out(weight_count(w));
  Index at = 0;
  for (const auto& stack : w.kernels)
    for (const Tensor3d& kern : stack) {
      Eigen::VectorXd kv = vec(kern);
      out.segment(at, kv.size()) = kv;
      at += kv.size();
    }
  Eigen::VectorXd fv = vec<double>(w.fc);
  out.segment(at, fv.size()) = fv;
  return out;
}

Weights vec_to_weights(const Architecture& arch, const Eigen::VectorXd& v) {
  DerivedDims dims = validate(arch);
  if (v.size() != dims.total_params)
    throw DimensionError("vec_to_weights: got " + std::to_string(v.size()) +
                         " values, architecture has " +
                         std::to_string(dims.total_params));
  Weights w;
  Index at = 0;
  int d_prev = arch.input_channels;
  for (const LayerSpec& L : arch.layers) {
    std::vector<Tensor3d> stack;
    const Index n = static_cast<Index>(L.kernel) * L.kernel * d_prev;
    for (int j = 0; j < L.out_channels; ++j) {
      stack.push_back(unvec<double>(v.segment(at, n), L.kernel, L.kernel, d_prev));
      at += n;
    }
    w.kernels.push_back(std::move(stack));
    d_prev = L.out_channels;
  }
  const Index fc_cols =
      static_cast<Index>(dims.pooled_rows.back()) * dims.pooled_cols.back() * d_prev;
  w.fc = Eigen::Map<const Eigen::MatrixXd>(v.data() + at, arch.output_dim, fc_cols);
  return w;
}

Eigen::VectorXd gradient_to_vec(const Gradient& g) {
  Weights w;
  w.kernels = g.kernels;
  w.fc = g.fc;
  return weights_to_vec(w);
}

long long weight_count(const Weights& w) {
  long long n = w.fc.size();
  for (const auto& stack : w.kernels)
    for (const Tensor3d& kern : stack) n += kern.size();
  return n;
}

void project_to_bounds(const Architecture& arch, Weights& w) {
  for (std::size_t i = 0; i < w.kernels.size(); ++i) {
    const double b = arch.layers[i].b;
    for (Tensor3d& kern : w.kernels[i]) {
      const double norm = kern.norm();
      if (norm > b) kern *= b / norm;
    }
  }
  const double norm = w.fc.norm();
  if (norm > arch.output_b) w.fc *= arch.output_b / norm;
}

void save_weights(std::ostream& out, const Architecture& arch, const Weights& w) {
  out << "cnnlab-weights 1 " << std::hex << arch_hash(arch) << std::dec << "\n";
  Eigen::VectorXd v = weights_to_vec(w);
  std::ostringstream line;
  line.precision(17);
  for (Index i = 0; i < v.size(); ++i) {
    line.str("");
    line << v(i);
    out << line.str() << "\n";
  }
}

Weights load_weights(std::istream& in, const Architecture& arch) {
  std::string magic;
  int version = 0;
  std::string hash_hex;
  if (!(in >> magic >> version >> hash_hex) || magic != "cnnlab-weights" || version != 1)
    throw DimensionError("load_weights: not a cnnlab-weights v1 stream");
  std::ostringstream expect;
  expect << std::hex << arch_hash(arch);
  if (hash_hex != expect.str())
    throw DimensionError("load_weights: architecture hash mismatch (file " + hash_hex +
                         ", expected " + expect.str() + ")");
  DerivedDims dims = validate(arch);
  Eigen::VectorXd v(dims.total_params);
  for (Index i = 0; i < v.size(); ++i)
    if (!(in >> v(i)))
      throw DimensionError("load_weights: expected " + std::to_string(dims.total_params) +
                           " values, stream ended at " + std::to_string(i));
  return vec_to_weights(arch, v);
}

}  // namespace cnnlab
