#ifndef CNNLAB_MODEL_HPP_
#define CNNLAB_MODEL_HPP_

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "cnnlab/arch.hpp"
#include "cnnlab/ops.hpp"

namespace cnnlab {

enum class Head { Sigmoid, Softmax };

// Per-layer kernel stacks plus the fully connected matrix. kernels[i][j] is
// the j-th kernel of layer i+1 with shape k_i x k_i x d_{i-1}; fc maps the
// flattened last pooled map to the output.
struct Weights {
  std::vector<std::vector<Tensor3d>> kernels;
  Eigen::MatrixXd fc;
};

// Everything the forward pass computes for one sample. zs[0] is the input,
// zs[i] the pooled output of layer i; z_flat is vec(zs[l]).
struct ForwardTrace {
  std::vector<Tensor3d> xs;  // pre-activations, layer i at index i-1
  std::vector<Tensor3d> ys;  // sigmoid(xs)
  std::vector<Tensor3d> zs;  // pooled maps, index 0 = input
  Eigen::VectorXd z_flat;
  Eigen::VectorXd u;  // fc * z_flat
  Eigen::VectorXd v;  // head activation of u
  Head head = Head::Softmax;
};

struct Gradient {
  std::vector<std::vector<Tensor3d>> kernels;
  Eigen::MatrixXd fc;
};

// Loss gradients with respect to the pre-activations, delta_i = df/dX_i.
struct Deltas {
  std::vector<Tensor3d> layers;  // layer i at index i-1
};

// Kernels drawn i.i.d. uniform[-1,1] and rescaled so every Frobenius norm
// equals norm_fraction * b exactly. Deterministic in the seed.
Weights init_weights(const Architecture& arch, std::uint64_t seed, double norm_fraction);

// Runs the layer recurrence. Input entries must lie in [0,1].
ForwardTrace forward(const Architecture& arch, const Weights& w, const Tensor3d& input,
                     Head head);

// Squared loss 0.5 * ||v - y||^2; y must be one-hot.
double loss(const Eigen::VectorXd& v, const Eigen::VectorXd& y);

// Backward pass using the head multiplier S = G(u) regardless of head kind
// ("gated mode"). Under a sigmoid head this is the true gradient.
std::pair<Gradient, Deltas> backprop_gated(const Architecture& arch, const Weights& w,
                                           const ForwardTrace& trace,
                                           const Eigen::VectorXd& y);

// True chain rule: identical to gated mode under a sigmoid head; under a
// softmax head the output-layer multiplier becomes diag(v) - v v^T.
Gradient backprop_exact(const Architecture& arch, const Weights& w,
                        const ForwardTrace& trace, const Eigen::VectorXd& y);

// Canonical parameter order: layer 1 kernel 1 vec, ..., layer l kernel d_l
// vec, then vec of the fully connected matrix (column-major).
Eigen::VectorXd weights_to_vec(const Weights& w);
Weights vec_to_weights(const Architecture& arch, const Eigen::VectorXd& v);
Eigen::VectorXd gradient_to_vec(const Gradient& g);
long long weight_count(const Weights& w);

// Rescales any kernel (or the fc matrix) whose Frobenius norm exceeds its
// bound back onto the bound sphere.
void project_to_bounds(const Architecture& arch, Weights& w);

// Text format: header line "cnnlab-weights 1 <arch-hash-hex>", then one
// double per line (max precision) in canonical parameter order.
void save_weights(std::ostream& out, const Architecture& arch, const Weights& w);
Weights load_weights(std::istream& in, const Architecture& arch);

}  // namespace cnnlab

#endif  // CNNLAB_MODEL_HPP_
