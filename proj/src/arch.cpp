#include "cnnlab/arch.hpp"

#include <algorithm>
#include <string>

namespace cnnlab {

namespace {

[[noreturn]] void fail(int layer, const std::string& msg) {
  throw DimensionError("layer " + std::to_string(layer) + ": " + msg);
}

}  // namespace

DerivedDims validate(const Architecture& arch) {
  if (arch.input_rows < 1 || arch.input_cols < 1 || arch.input_channels < 1)
    throw DimensionError("input shape must be positive, got " +
                         std::to_string(arch.input_rows) + "x" +
                         std::to_string(arch.input_cols) + "x" +
                         std::to_string(arch.input_channels));
  if (arch.pool < 1)
    throw DimensionError("pool_size must be >= 1, got " + std::to_string(arch.pool));
  if (arch.layers.empty()) throw DimensionError("need at least one layer");

  DerivedDims dims;
  const int p = arch.pool;
  int prev_r = arch.input_rows, prev_c = arch.input_cols;
  int prev_d = arch.input_channels;
  for (int i = 0; i < arch.depth(); ++i) {
    const LayerSpec& L = arch.layers[static_cast<std::size_t>(i)];
    const int layer = i + 1;
    if (L.kernel < 1) fail(layer, "kernel must be >= 1, got " + std::to_string(L.kernel));
    if (L.stride < 1 || L.stride > L.kernel)
      fail(layer, "need 1 <= stride <= kernel, got stride " + std::to_string(L.stride) +
                      ", kernel " + std::to_string(L.kernel));
    if (L.out_channels < 1)
      fail(layer, "out_channels must be >= 1, got " + std::to_string(L.out_channels));
    if (!(L.b > 0)) fail(layer, "magnitude bound b must be positive, got " +
                                    std::to_string(L.b));
    const long long max_rank =
        std::min<long long>(1LL * L.kernel * L.kernel * prev_d, L.out_channels);
    if (L.rank < 1 || L.rank > max_rank)
      fail(layer, "need 1 <= rank <= min(k^2 d_prev, d) = " + std::to_string(max_rank) +
                      ", got " + std::to_string(L.rank));
    if (prev_r < L.kernel || prev_c < L.kernel)
      fail(layer, "kernel " + std::to_string(L.kernel) + " exceeds input " +
                      std::to_string(prev_r) + "x" + std::to_string(prev_c));
    if ((prev_r - L.kernel) % L.stride != 0 || (prev_c - L.kernel) % L.stride != 0)
      fail(layer, "(input " + std::to_string(prev_r) + "x" + std::to_string(prev_c) +
                      " - kernel " + std::to_string(L.kernel) +
                      ") not divisible by stride " + std::to_string(L.stride));
    const int r = (prev_r - L.kernel) / L.stride + 1;
    const int c = (prev_c - L.kernel) / L.stride + 1;
    if (r < 1 || c < 1)
      fail(layer, "feature map collapsed to " + std::to_string(r) + "x" + std::to_string(c));
    if (r % p != 0 || c % p != 0)
      fail(layer, "feature map " + std::to_string(r) + "x" + std::to_string(c) +
                      " not divisible by pool_size " + std::to_string(p));
    const int rp = r / p, cp = c / p;
    if (rp < 1 || cp < 1)
      fail(layer, "pooled map collapsed to " + std::to_string(rp) + "x" + std::to_string(cp));

    // Dilation size identity: inserting stride-1 zeros between delta entries
    // recovers the pre-pool extent, and the border-padded form matches what
    // the backward convolution consumes.
    if (L.stride * (r - 1) + 1 != prev_r - L.kernel + 1)
      fail(layer, "size identity violated: s(r-1)+1 = " +
                      std::to_string(L.stride * (r - 1) + 1) + " != " +
                      std::to_string(prev_r - L.kernel + 1));
    if (L.stride * (r - 1) + 2 * L.kernel - 1 != prev_r + L.kernel - 1)
      fail(layer, "size identity violated: s(r-1)+2k-1 = " +
                      std::to_string(L.stride * (r - 1) + 2 * L.kernel - 1) + " != " +
                      std::to_string(prev_r + L.kernel - 1));

    dims.rows.push_back(r);
    dims.cols.push_back(c);
    dims.pooled_rows.push_back(rp);
    dims.pooled_cols.push_back(cp);
    prev_r = rp;
    prev_c = cp;
    prev_d = L.out_channels;
  }

  if (arch.output_dim < 1)
    throw DimensionError("output dim must be >= 1, got " + std::to_string(arch.output_dim));
  if (!(arch.output_b > 0))
    throw DimensionError("output magnitude bound b must be positive, got " +
                         std::to_string(arch.output_b));
  const long long fc_cols = 1LL * prev_r * prev_c * prev_d;
  const long long max_fc_rank = std::min<long long>(arch.output_dim, fc_cols);
  if (arch.output_rank < 1 || arch.output_rank > max_fc_rank)
    throw DimensionError("need 1 <= output rank <= min(output dim, flattened size) = " +
                         std::to_string(max_fc_rank) + ", got " +
                         std::to_string(arch.output_rank));

  dims.total_params = fc_cols * arch.output_dim;
  int d_prev = arch.input_channels;
  for (const LayerSpec& L : arch.layers) {
    dims.total_params += 1LL * L.kernel * L.kernel * d_prev * L.out_channels;
    d_prev = L.out_channels;
  }

  dims.freedom_main = 1LL * arch.output_rank * (arch.output_dim + fc_cols + 1);
  dims.freedom_supplement =
      1LL * arch.output_rank * (arch.output_dim + fc_cols - 2LL * arch.output_rank + 1);
  d_prev = arch.input_channels;
  for (const LayerSpec& L : arch.layers) {
    const long long k2 = 1LL * L.kernel * L.kernel;
    dims.freedom_main += L.rank * (k2 * d_prev + L.out_channels + 1);
    dims.freedom_supplement +=
        L.rank * (k2 * L.out_channels + d_prev - 2LL * L.rank + 1);
    d_prev = L.out_channels;
  }
  return dims;
}

long long param_count(const Architecture& arch) { return validate(arch).total_params; }

long long freedom_degree(const Architecture& arch, ThetaVariant variant) {
  DerivedDims dims = validate(arch);
  return variant == ThetaVariant::Main ? dims.freedom_main : dims.freedom_supplement;
}

Architecture random_architecture(Rng& rng) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    Architecture a;
    a.pool = 1 + static_cast<int>(uniform_index(rng, 3));
    a.input_channels = 1 + static_cast<int>(uniform_index(rng, 3));
    const int depth = 1 + static_cast<int>(uniform_index(rng, 3));
    for (int i = 0; i < depth; ++i) {
      LayerSpec L;
      L.kernel = 1 + static_cast<int>(uniform_index(rng, 4));
      L.stride = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(L.kernel)));
      L.out_channels = 1 + static_cast<int>(uniform_index(rng, 4));
      L.b = uniform(rng, 0.5, 2.0);
      a.layers.push_back(L);
    }
    a.output_dim = 2 + static_cast<int>(uniform_index(rng, 4));
    a.output_b = uniform(rng, 0.5, 2.0);

    // Search an input size that satisfies every divisibility relation.
    const int r0 = 2 + static_cast<int>(uniform_index(rng, 47));
    bool ok = false;
    for (int r = r0; r < r0 + 48 && !ok; ++r) {
      a.input_rows = a.input_cols = r;
      int cur = r;
      ok = true;
      for (const LayerSpec& L : a.layers) {
        if (cur < L.kernel || (cur - L.kernel) % L.stride != 0) { ok = false; break; }
        cur = (cur - L.kernel) / L.stride + 1;
        if (cur % a.pool != 0) { ok = false; break; }
        cur /= a.pool;
        if (cur < 1) { ok = false; break; }
      }
    }
    if (!ok) continue;

    // Fill ranks now that shapes are fixed.
    int d_prev = a.input_channels;
    for (LayerSpec& L : a.layers) {
      const long long max_rank =
          std::min<long long>(1LL * L.kernel * L.kernel * d_prev, L.out_channels);
      L.rank = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(max_rank)));
      d_prev = L.out_channels;
    }
    int cur = a.input_rows;
    for (const LayerSpec& L : a.layers) cur = ((cur - L.kernel) / L.stride + 1) / a.pool;
    const long long fc_cols = 1LL * cur * cur * a.layers.back().out_channels;
    const long long max_fc_rank = std::min<long long>(a.output_dim, fc_cols);
    a.output_rank =
        1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(max_fc_rank)));
    validate(a);
    return a;
  }
  throw std::runtime_error("random_architecture: no valid architecture in 10^4 attempts");
}

}  // namespace cnnlab
