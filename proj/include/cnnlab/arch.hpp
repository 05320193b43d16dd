#ifndef CNNLAB_ARCH_HPP_
#define CNNLAB_ARCH_HPP_

#include <cstdint>
#include <vector>

#include "cnnlab/rng.hpp"
#include "cnnlab/tensor.hpp"

namespace cnnlab {

// One convolutional layer: k x k kernels applied with a stride, followed by
// sigmoid activation and mean pooling (pool size is global, see Architecture).
struct LayerSpec {
  int kernel = 0;        // k_i
  int stride = 1;        // s_i
  int out_channels = 0;  // d_i feature maps
  double b = 1.0;        // Frobenius-norm bound per kernel
  int rank = 1;          // rank bound on the layer's kernel matrix
};

struct Architecture {
  int input_rows = 0;
  int input_cols = 0;
  int input_channels = 1;
  int pool = 1;  // shared p x p mean-pooling window
  std::vector<LayerSpec> layers;
  int output_dim = 0;     // classes
  double output_b = 1.0;  // Frobenius-norm bound on the fully connected matrix
  int output_rank = 1;

  int depth() const { return static_cast<int>(layers.size()); }
};

// Spatial sizes and parameter counts implied by an Architecture.
// rows/cols are pre-pool feature-map sizes per layer; pooled_* the post-pool
// sizes. Layer i of the network is index i-1 in these vectors.
struct DerivedDims {
  std::vector<int> rows, cols;
  std::vector<int> pooled_rows, pooled_cols;
  long long total_params = 0;        // literal weight count d
  long long freedom_main = 0;        // rank-based freedom degree, main formula
  long long freedom_supplement = 0;  // alternative formula (see freedom_degree)
};

enum class ThetaVariant { Main, Supplement };

// Checks every dimension relation (stride divisibility, pool divisibility,
// positivity, rank ranges) and the dilation size identity for each layer.
// Returns the derived sizes; throws DimensionError naming the first violated
// relation with its layer index and values.
DerivedDims validate(const Architecture& arch);

// Literal number of weights: pooled_r_l * pooled_c_l * d_l * d_{l+1} plus
// sum_i k_i^2 d_{i-1} d_i.
long long param_count(const Architecture& arch);

// Freedom degree of the rank-constrained parameterization. The two variants
// differ in the per-layer tail (+1 vs -2a+1) and in which channel count
// multiplies k^2; both are kept, Main is canonical.
//   Main:       a_{l+1}(d_{l+1} + rc d_l + 1) + sum a_i(k_i^2 d_{i-1} + d_i + 1)
//   Supplement: a_{l+1}(d_{l+1} + rc d_l - 2a_{l+1} + 1)
//                 + sum a_i(k_i^2 d_i + d_{i-1} - 2a_i + 1)
long long freedom_degree(const Architecture& arch, ThetaVariant variant);

// Random valid architecture for property tests. Samples layer shapes and then
// searches input sizes satisfying all divisibility relations by rejection,
// capped at 10^4 attempts.
Architecture random_architecture(Rng& rng);

}  // namespace cnnlab

#endif  // CNNLAB_ARCH_HPP_
