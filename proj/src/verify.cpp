#include "cnnlab/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

namespace cnnlab {

namespace {

constexpr std::uint64_t kTeacherStream = 0x7eac4e20;
constexpr std::uint64_t kWeightStream = 0x57a27000;
constexpr std::uint64_t kDataStreamBase = 0xda7a0000;

// Runs body(0..count-1) on `threads` workers. Each index writes only its own
// slot in caller-owned storage, so the result is independent of scheduling.
void parallel_for(long long count, int threads, const std::function<void(long long)>& body) {
  threads = std::max(1, threads);
  if (threads == 1 || count <= 1) {
    for (long long i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<long long> next{0};
  auto worker = [&]() {
    for (;;) {
      const long long i = next.fetch_add(1);
      if (i >= count) return;
      body(i);
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

Tensor3d random_input(Rng& rng, const Architecture& arch) {
  Tensor3d t(arch.input_rows, arch.input_cols, arch.input_channels);
  for (auto& m : t.slices)
    for (Index c = 0; c < m.cols(); ++c)
      for (Index r = 0; r < m.rows(); ++r) m(r, c) = uniform01(rng);
  return t;
}

Eigen::VectorXd one_hot(Index dim, Index k) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(dim);
  y(k) = 1.0;
  return y;
}

Eigen::VectorXd random_one_hot(Rng& rng, Index dim) {
  return one_hot(dim, static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(dim))));
}

// norm_fraction uniform in (0, 1].
double random_fraction(Rng& rng) { return 1.0 - uniform01(rng); }

double fmt_ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

void note_extreme(std::vector<std::pair<std::string, double>>& ex, const std::string& key,
                  double value) {
  for (auto& [k, v] : ex)
    if (k == key) {
      v = std::max(v, value);
      return;
    }
  ex.emplace_back(key, value);
}

// Trailing products prod_{s=i+1..l} d_s b_s^2 (k_s - s_s + 1)^2 / (16 p^2),
// indexed by i = 0..l.
std::vector<double> delta_chain_factors(const Architecture& arch) {
  const int l = arch.depth();
  const double p2 = static_cast<double>(arch.pool) * arch.pool;
  std::vector<double> tail(static_cast<std::size_t>(l) + 1, 1.0);
  for (int i = l - 1; i >= 0; --i) {
    const LayerSpec& L = arch.layers[static_cast<std::size_t>(i)];
    tail[static_cast<std::size_t>(i)] =
        tail[static_cast<std::size_t>(i) + 1] *
        (L.out_channels * L.b * L.b * (L.kernel - L.stride + 1) *
         (L.kernel - L.stride + 1) / (16.0 * p2));
  }
  return tail;
}

struct LayerOffsets {
  std::vector<Index> begin;  // offset of layer i's block in the canonical vec
  std::vector<Index> count;  // k_i^2 d_{i-1} d_i
};

LayerOffsets layer_offsets(const Architecture& arch) {
  LayerOffsets off;
  Index at = 0;
  int d_prev = arch.input_channels;
  for (const LayerSpec& L : arch.layers) {
    const Index n = static_cast<Index>(L.kernel) * L.kernel * d_prev * L.out_channels;
    off.begin.push_back(at);
    off.count.push_back(n);
    at += n;
    d_prev = L.out_channels;
  }
  return off;
}

}  // namespace

DataModel make_data_model(const Architecture& arch, std::uint64_t seed) {
  DataModel dm;
  dm.arch = arch;
  dm.seed = seed;
  dm.teacher = init_weights(arch, derive_seed(seed, kTeacherStream), 1.0);
  return dm;
}

Sample draw_sample(const DataModel& dm, std::uint64_t stream, std::uint64_t index) {
  Rng rng(derive_seed(derive_seed(dm.seed, kDataStreamBase ^ stream), index));
  Sample s;
  s.input = random_input(rng, dm.arch);
  ForwardTrace t = forward(dm.arch, dm.teacher, s.input, Head::Softmax);
  Index best = 0;
  t.v.maxCoeff(&best);
  s.label = one_hot(t.v.size(), best);
  return s;
}

namespace {

// Loss of the layer recurrence evaluated in extended precision. The model
// under test stays double; the difference oracle needs the loss values
// themselves to carry less rounding noise than the 1e-6 tolerance budget,
// which plain doubles cannot provide near zero-gradient coordinates.
long double extended_loss(const Architecture& arch, const Eigen::VectorXd& wv,
                          const Tensor3<long double>& input,
                          const VectorX<long double>& y, Head head) {
  using LD = long double;
  Index at = 0;
  int d_prev = arch.input_channels;
  Tensor3<LD> z = input;
  for (const LayerSpec& L : arch.layers) {
    Tensor3<LD> x;
    x.slices.reserve(static_cast<std::size_t>(L.out_channels));
    const Index per_slice = static_cast<Index>(L.kernel) * L.kernel;
    for (int j = 0; j < L.out_channels; ++j) {
      Tensor3<LD> kern(L.kernel, L.kernel, d_prev);
      for (auto& m : kern.slices) {
        m = Eigen::Map<const Eigen::MatrixXd>(wv.data() + at, L.kernel, L.kernel)
                .cast<LD>();
        at += per_slice;
      }
      x.slices.push_back(conv_valid(z, kern, L.stride));
    }
    z = avg_pool(sigmoid(x), arch.pool);
    d_prev = L.out_channels;
  }
  VectorX<LD> zf = vec(z);
  MatrixX<LD> fc =
      Eigen::Map<const Eigen::MatrixXd>(wv.data() + at, arch.output_dim, zf.size())
          .cast<LD>();
  VectorX<LD> u = fc * zf;
  VectorX<LD> v = head == Head::Softmax ? VectorX<LD>(softmax(u)) : VectorX<LD>(sigmoid(u));
  return 0.5L * (v - y).squaredNorm();
}

}  // namespace

std::string VerifyReport::to_line() const {
  std::ostringstream os;
  os.precision(10);
  os << "check=" << check << " trials=" << trials << " violations=" << violations
     << " flagged=" << flagged << " worst_ratio=" << worst_ratio
     << " pass=" << (pass ? 1 : 0) << " seed=" << seed;
  for (const auto& [k, v] : extremes) os << " " << k << "=" << v;
  return os.str();
}

Gradient fd_gradient(const Architecture& arch, const Weights& w, const Tensor3d& input,
                     const Eigen::VectorXd& y, Head head, double h) {
  if (!(h > 0)) throw DimensionError("fd_gradient: h must be positive");
  Eigen::VectorXd wv = weights_to_vec(w);
  Tensor3<long double> input_l;
  input_l.slices.reserve(input.slices.size());
  for (const auto& m : input.slices) input_l.slices.push_back(m.cast<long double>());
  const VectorX<long double> y_l = y.cast<long double>();
  Eigen::VectorXd g(wv.size());
  for (Index j = 0; j < wv.size(); ++j) {
    const double orig = wv(j);
    const double up = orig + h, down = orig - h;
    wv(j) = up;
    const long double fp = extended_loss(arch, wv, input_l, y_l, head);
    wv(j) = down;
    const long double fm = extended_loss(arch, wv, input_l, y_l, head);
    wv(j) = orig;
    // divide by the realized step, not the nominal one
    g(j) = static_cast<double>((fp - fm) / (static_cast<long double>(up) - down));
  }
  Weights shaped = vec_to_weights(arch, g);
  Gradient out;
  out.kernels = std::move(shaped.kernels);
  out.fc = std::move(shaped.fc);
  return out;
}

VerifyReport gradient_check(const Architecture& arch, long long trials, std::uint64_t seed,
                            double tol, Head head, double h, int threads) {
  validate(arch);
  if (trials < 1) throw DimensionError("gradient_check: trials must be >= 1");
  std::vector<double> errs(static_cast<std::size_t>(trials), 0.0);
  parallel_for(trials, threads, [&](long long t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    const double fraction = random_fraction(rng);
    Weights w = init_weights(arch, rng(), fraction);
    Tensor3d input = random_input(rng, arch);
    Eigen::VectorXd y = random_one_hot(rng, arch.output_dim);
    ForwardTrace trace = forward(arch, w, input, head);
    Eigen::VectorXd analytic =
        head == Head::Sigmoid
            ? gradient_to_vec(backprop_gated(arch, w, trace, y).first)
            : gradient_to_vec(backprop_exact(arch, w, trace, y));
    Eigen::VectorXd fd = gradient_to_vec(fd_gradient(arch, w, input, y, head, h));
    double worst = 0;
    for (Index j = 0; j < fd.size(); ++j)
      worst = std::max(worst, std::abs(analytic(j) - fd(j)) /
                                  std::max(std::abs(fd(j)), 1e-8));
    errs[static_cast<std::size_t>(t)] = worst;
  });
  VerifyReport rep;
  rep.check = "gradient_check";
  rep.trials = trials;
  rep.seed = seed;
  double worst = 0;
  for (double e : errs) {
    worst = std::max(worst, e);
    if (e > tol) ++rep.violations;
  }
  rep.worst_ratio = fmt_ratio(worst, tol);
  note_extreme(rep.extremes, "max_rel_error", worst);
  note_extreme(rep.extremes, "tol", tol);
  rep.pass = rep.violations == 0;
  return rep;
}

VerifyReport check_norm_bounds(const Architecture& arch, long long trials,
                               std::uint64_t seed, int threads) {
  DerivedDims dims = validate(arch);
  if (trials < 1) throw DimensionError("check_norm_bounds: trials must be >= 1");
  const int l = arch.depth();
  const double p2 = static_cast<double>(arch.pool) * arch.pool;
  const double beta = eval_beta(arch);
  const std::vector<double> tail = delta_chain_factors(arch);
  const double b_out2 = arch.output_b * arch.output_b;
  // ||delta_i||_F^2 <= vartheta b_{l+1}^2 / (16 p^2) * tail_i
  std::vector<double> delta_bound(static_cast<std::size_t>(l));
  for (int i = 1; i <= l; ++i)
    delta_bound[static_cast<std::size_t>(i - 1)] =
        BoundConstants::vartheta * b_out2 / (16.0 * p2) * tail[static_cast<std::size_t>(i)];
  const double fc_bound = BoundConstants::vartheta * dims.pooled_rows.back() *
                          dims.pooled_cols.back() * arch.layers.back().out_channels;

  struct TrialOut {
    long long violations = 0;
    double delta_ratio = 0, grad_ratio = 0, fc_ratio = 0, loss_max = 0, vy_max = 0;
  };
  std::vector<TrialOut> outs(static_cast<std::size_t>(trials));
  parallel_for(trials, threads, [&](long long t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    Weights w = init_weights(arch, rng(), 1.0);
    Tensor3d input = random_input(rng, arch);
    Eigen::VectorXd y = random_one_hot(rng, arch.output_dim);
    ForwardTrace trace = forward(arch, w, input, Head::Softmax);
    auto [grad, deltas] = backprop_gated(arch, w, trace, y);
    TrialOut& o = outs[static_cast<std::size_t>(t)];
    for (int i = 0; i < l; ++i) {
      const double n2 = deltas.layers[static_cast<std::size_t>(i)].squaredNorm();
      const double ratio = n2 / delta_bound[static_cast<std::size_t>(i)];
      o.delta_ratio = std::max(o.delta_ratio, ratio);
      if (ratio > 1.0) ++o.violations;
    }
    const double gnorm = gradient_to_vec(grad).norm();
    o.grad_ratio = gnorm / beta;
    if (o.grad_ratio > 1.0) ++o.violations;
    o.fc_ratio = grad.fc.squaredNorm() / fc_bound;
    if (o.fc_ratio > 1.0) ++o.violations;
    const double f = loss(trace.v, y);
    o.loss_max = f;
    if (f < 0.0 || f > 1.0) ++o.violations;
    o.vy_max = (trace.v - y).squaredNorm();
    if (o.vy_max > 2.0) ++o.violations;
  });
  VerifyReport rep;
  rep.check = "norm_bounds";
  rep.trials = trials;
  rep.seed = seed;
  for (const TrialOut& o : outs) {
    rep.violations += o.violations;
    rep.worst_ratio = std::max({rep.worst_ratio, o.delta_ratio, o.grad_ratio, o.fc_ratio,
                                o.vy_max / 2.0});
    note_extreme(rep.extremes, "delta_ratio", o.delta_ratio);
    note_extreme(rep.extremes, "grad_ratio", o.grad_ratio);
    note_extreme(rep.extremes, "fc_ratio", o.fc_ratio);
    note_extreme(rep.extremes, "loss_max", o.loss_max);
    note_extreme(rep.extremes, "vy_sq_max", o.vy_max);
  }
  rep.pass = rep.violations == 0;
  return rep;
}

VerifyReport check_jacobian_bounds(const Architecture& arch, long long trials,
                                   std::uint64_t seed, int threads) {
  DerivedDims dims = validate(arch);
  if (dims.total_params > 200)
    throw DimensionError("check_jacobian_bounds: architecture has " +
                         std::to_string(dims.total_params) +
                         " parameters, limit is 200 (finite differences)");
  if (trials < 1) throw DimensionError("check_jacobian_bounds: trials must be >= 1");
  const int l = arch.depth();
  const double p2 = static_cast<double>(arch.pool) * arch.pool;
  const LayerOffsets off = layer_offsets(arch);
  const double h = 1e-5;

  // Closed-form Jacobian budgets per (i, j), j <= i, 1-based. The full bound includes
  // the leading d_i; slice_bound is the per-feature-map version.
  std::vector<double> pooled_r(static_cast<std::size_t>(l) + 1),
      pooled_c(static_cast<std::size_t>(l) + 1), channels(static_cast<std::size_t>(l) + 1);
  pooled_r[0] = arch.input_rows;
  pooled_c[0] = arch.input_cols;
  channels[0] = arch.input_channels;
  for (int i = 1; i <= l; ++i) {
    pooled_r[static_cast<std::size_t>(i)] = dims.pooled_rows[static_cast<std::size_t>(i - 1)];
    pooled_c[static_cast<std::size_t>(i)] = dims.pooled_cols[static_cast<std::size_t>(i - 1)];
    channels[static_cast<std::size_t>(i)] =
        arch.layers[static_cast<std::size_t>(i - 1)].out_channels;
  }
  auto mid_product = [&](int j, int i) {  // prod_{s=j+1..i} d_s b_s^2 (k-s+1)^2/(16 p^2)
    double prod = 1.0;
    for (int s = j + 1; s <= i; ++s) {
      const LayerSpec& L = arch.layers[static_cast<std::size_t>(s - 1)];
      prod *= L.out_channels * L.b * L.b * (L.kernel - L.stride + 1) *
              (L.kernel - L.stride + 1) / (16.0 * p2);
    }
    return prod;
  };
  auto slice_bound = [&](int i, int j) {
    const LayerSpec& Lj = arch.layers[static_cast<std::size_t>(j - 1)];
    return dims.rows[static_cast<std::size_t>(i - 1)] *
           static_cast<double>(dims.cols[static_cast<std::size_t>(i - 1)]) *
           pooled_r[static_cast<std::size_t>(j - 1)] * pooled_c[static_cast<std::size_t>(j - 1)] *
           channels[static_cast<std::size_t>(j - 1)] * (Lj.kernel - Lj.stride + 1) *
           (Lj.kernel - Lj.stride + 1) * mid_product(j, i);
  };
  auto delta_l_bound = [&](int j) {
    const LayerSpec& Lj = arch.layers[static_cast<std::size_t>(j - 1)];
    return BoundConstants::vartheta_tilde * std::pow(arch.output_b, 4.0) / (16.0 * p2) *
           arch.layers.back().out_channels * dims.rows.back() * dims.cols.back() *
           pooled_r[static_cast<std::size_t>(j - 1)] * pooled_c[static_cast<std::size_t>(j - 1)] *
           channels[static_cast<std::size_t>(j - 1)] * (Lj.kernel - Lj.stride + 1) *
           (Lj.kernel - Lj.stride + 1) * mid_product(j, l);
  };

  struct TrialOut {
    long long violations = 0;
    double x_ratio = 0, slice_ratio = 0, dl_ratio = 0;
  };
  std::vector<TrialOut> outs(static_cast<std::size_t>(trials));
  parallel_for(trials, threads, [&](long long t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    const double fraction = random_fraction(rng);
    Weights w = init_weights(arch, rng(), fraction);
    Tensor3d input = random_input(rng, arch);
    Eigen::VectorXd y = random_one_hot(rng, arch.output_dim);
    Eigen::VectorXd wv = weights_to_vec(w);
    TrialOut& o = outs[static_cast<std::size_t>(t)];

    for (int j = 1; j <= l; ++j) {
      // Accumulated squared Jacobian norms over layer j's coordinates.
      std::vector<double> x_norm2(static_cast<std::size_t>(l) + 1, 0.0);
      std::vector<std::vector<double>> slice_norm2(static_cast<std::size_t>(l) + 1);
      for (int i = j; i <= l; ++i)
        slice_norm2[static_cast<std::size_t>(i)].assign(
            static_cast<std::size_t>(arch.layers[static_cast<std::size_t>(i - 1)].out_channels),
            0.0);
      double dl_norm2 = 0.0;

      const Index begin = off.begin[static_cast<std::size_t>(j - 1)];
      const Index count = off.count[static_cast<std::size_t>(j - 1)];
      for (Index q = begin; q < begin + count; ++q) {
        const double orig = wv(q);
        wv(q) = orig + h;
        Weights wp = vec_to_weights(arch, wv);
        ForwardTrace tp = forward(arch, wp, input, Head::Softmax);
        auto dp = backprop_gated(arch, wp, tp, y).second;
        wv(q) = orig - h;
        Weights wm = vec_to_weights(arch, wv);
        ForwardTrace tm = forward(arch, wm, input, Head::Softmax);
        auto dm_ = backprop_gated(arch, wm, tm, y).second;
        wv(q) = orig;
        for (int i = j; i <= l; ++i) {
          const Tensor3d& xp = tp.xs[static_cast<std::size_t>(i - 1)];
          const Tensor3d& xm = tm.xs[static_cast<std::size_t>(i - 1)];
          for (Index s = 0; s < xp.channels(); ++s) {
            const double part =
                ((xp.slice(s) - xm.slice(s)) / (2.0 * h)).squaredNorm();
            x_norm2[static_cast<std::size_t>(i)] += part;
            slice_norm2[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)] += part;
          }
        }
        const Tensor3d& dlp = dp.layers.back();
        const Tensor3d& dlm = dm_.layers.back();
        for (Index s = 0; s < dlp.channels(); ++s)
          dl_norm2 += ((dlp.slice(s) - dlm.slice(s)) / (2.0 * h)).squaredNorm();
      }

      for (int i = j; i <= l; ++i) {
        const double sb = slice_bound(i, j);
        const double d_i = arch.layers[static_cast<std::size_t>(i - 1)].out_channels;
        const double xr = x_norm2[static_cast<std::size_t>(i)] / (d_i * sb);
        o.x_ratio = std::max(o.x_ratio, xr);
        if (xr > 1.0) ++o.violations;
        for (double sn2 : slice_norm2[static_cast<std::size_t>(i)]) {
          const double sr = sn2 / sb;
          o.slice_ratio = std::max(o.slice_ratio, sr);
          if (sr > 1.0) ++o.violations;
        }
      }
      const double dr = dl_norm2 / delta_l_bound(j);
      o.dl_ratio = std::max(o.dl_ratio, dr);
      if (dr > 1.0) ++o.violations;
    }
  });
  VerifyReport rep;
  rep.check = "jacobian_bounds";
  rep.trials = trials;
  rep.seed = seed;
  for (const TrialOut& o : outs) {
    rep.violations += o.violations;
    rep.worst_ratio = std::max({rep.worst_ratio, o.x_ratio, o.slice_ratio, o.dl_ratio});
    note_extreme(rep.extremes, "x_jacobian_ratio", o.x_ratio);
    note_extreme(rep.extremes, "slice_jacobian_ratio", o.slice_ratio);
    note_extreme(rep.extremes, "delta_l_jacobian_ratio", o.dl_ratio);
  }
  rep.pass = rep.violations == 0;
  return rep;
}

VerifyReport hessian_ratio(const Architecture& arch, long long trials, std::uint64_t seed,
                           bool strict, int threads) {
  DerivedDims dims = validate(arch);
  if (dims.total_params > 200)
    throw DimensionError("hessian_ratio: architecture has " +
                         std::to_string(dims.total_params) +
                         " parameters, limit is 200 (finite differences)");
  if (trials < 1) throw DimensionError("hessian_ratio: trials must be >= 1");
  const double gamma = eval_gamma(arch);
  const double h = 1e-4;
  const Index d = dims.total_params;

  struct TrialOut {
    double ratio = 0, asym = 0;
    bool finite = true;
  };
  std::vector<TrialOut> outs(static_cast<std::size_t>(trials));
  parallel_for(trials, threads, [&](long long t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    const double fraction = random_fraction(rng);
    Weights w = init_weights(arch, rng(), fraction);
    Tensor3d input = random_input(rng, arch);
    Eigen::VectorXd y = random_one_hot(rng, arch.output_dim);
    Eigen::VectorXd wv = weights_to_vec(w);
    Eigen::MatrixXd hess(d, d);
    for (Index q = 0; q < d; ++q) {
      const double orig = wv(q);
      wv(q) = orig + h;
      Weights wp = vec_to_weights(arch, wv);
      Eigen::VectorXd gp =
          gradient_to_vec(backprop_exact(arch, wp, forward(arch, wp, input, Head::Softmax), y));
      wv(q) = orig - h;
      Weights wm = vec_to_weights(arch, wv);
      Eigen::VectorXd gm =
          gradient_to_vec(backprop_exact(arch, wm, forward(arch, wm, input, Head::Softmax), y));
      wv(q) = orig;
      hess.col(q) = (gp - gm) / (2.0 * h);
    }
    TrialOut& o = outs[static_cast<std::size_t>(t)];
    const double hnorm = hess.norm();
    o.asym = hnorm > 0 ? (hess - hess.transpose()).norm() / hnorm : 0.0;
    Eigen::MatrixXd sym = 0.5 * (hess + hess.transpose());
    o.ratio = sym.norm() / gamma;
    o.finite = sym.allFinite();
  });
  VerifyReport rep;
  rep.check = "hessian_ratio";
  rep.trials = trials;
  rep.seed = seed;
  double mean_ratio = 0;
  std::vector<double> ratios;
  ratios.reserve(outs.size());
  for (const TrialOut& o : outs) {
    rep.worst_ratio = std::max(rep.worst_ratio, o.ratio);
    mean_ratio += o.ratio / static_cast<double>(trials);
    ratios.push_back(o.ratio);
    if (!o.finite || o.ratio > 10.0) ++rep.violations;
    if (o.ratio > 1.0) ++rep.flagged;
    if (o.asym > 1e-3) ++rep.violations;
    note_extreme(rep.extremes, "asymmetry_max", o.asym);
  }
  if (strict) rep.violations += rep.flagged;
  std::sort(ratios.begin(), ratios.end());
  note_extreme(rep.extremes, "ratio_min", ratios.front());
  note_extreme(rep.extremes, "ratio_median", ratios[ratios.size() / 2]);
  note_extreme(rep.extremes, "ratio_mean", mean_ratio);
  note_extreme(rep.extremes, "ratio_max", rep.worst_ratio);
  rep.pass = rep.violations == 0;
  return rep;
}

double fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  double n = 0;
  for (const auto& [x, y] : points) {
    if (!(x > 0) || !(y > 0)) continue;
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    n += 1;
  }
  if (n < 2) return 0.0;
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ConvergenceResult convergence_experiment(const Architecture& arch, const DataModel& dm,
                                         const std::vector<long long>& n_list,
                                         long long trials, int m_w, long long ref_factor,
                                         std::uint64_t seed, double eps,
                                         const BoundConstants& consts) {
  validate(arch);
  if (n_list.empty()) throw DimensionError("convergence_experiment: empty n list");
  if (trials < 1 || m_w < 1 || ref_factor < 1)
    throw DimensionError("convergence_experiment: trials, m_w and ref_factor must be >= 1");
  const long long n_max = *std::max_element(n_list.begin(), n_list.end());
  const long long n_ref = ref_factor * n_max;

  // Fixed parameter points, sampled once.
  std::vector<Weights> wpts;
  for (int j = 0; j < m_w; ++j) {
    Rng rng(derive_seed(seed, kWeightStream + static_cast<std::uint64_t>(j)));
    const double fraction = random_fraction(rng);
    wpts.push_back(init_weights(arch, rng(), fraction));
  }

  const Index dim = weights_to_vec(wpts.front()).size();
  // Large-sample surrogates for the population risk and gradient at each w_j.
  std::vector<double> ref_risk(static_cast<std::size_t>(m_w), 0.0);
  std::vector<Eigen::VectorXd> ref_grad(static_cast<std::size_t>(m_w),
                                        Eigen::VectorXd::Zero(dim));
  for (long long i = 0; i < n_ref; ++i) {
    Sample s = draw_sample(dm, 0, static_cast<std::uint64_t>(i));
    for (int j = 0; j < m_w; ++j) {
      ForwardTrace trace = forward(arch, wpts[static_cast<std::size_t>(j)], s.input,
                                   Head::Softmax);
      ref_risk[static_cast<std::size_t>(j)] += loss(trace.v, s.label);
      ref_grad[static_cast<std::size_t>(j)] += gradient_to_vec(
          backprop_exact(arch, wpts[static_cast<std::size_t>(j)], trace, s.label));
    }
  }
  for (int j = 0; j < m_w; ++j) {
    ref_risk[static_cast<std::size_t>(j)] /= static_cast<double>(n_ref);
    ref_grad[static_cast<std::size_t>(j)] /= static_cast<double>(n_ref);
  }

  ConvergenceResult result;
  result.n_ref = n_ref;
  result.m_w = m_w;
  std::vector<std::pair<double, double>> risk_pts, grad_pts;
  for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
    const long long n = n_list[ni];
    if (n < 1) throw DimensionError("convergence_experiment: n must be >= 1");
    double mean_risk_dev = 0, mean_grad_dev = 0;
    for (long long t = 0; t < trials; ++t) {
      const std::uint64_t stream =
          1 + static_cast<std::uint64_t>(t) * n_list.size() + ni;
      std::vector<double> risk(static_cast<std::size_t>(m_w), 0.0);
      std::vector<Eigen::VectorXd> grad(static_cast<std::size_t>(m_w),
                                        Eigen::VectorXd::Zero(dim));
      for (long long i = 0; i < n; ++i) {
        Sample s = draw_sample(dm, stream, static_cast<std::uint64_t>(i));
        for (int j = 0; j < m_w; ++j) {
          ForwardTrace trace =
              forward(arch, wpts[static_cast<std::size_t>(j)], s.input, Head::Softmax);
          risk[static_cast<std::size_t>(j)] += loss(trace.v, s.label);
          grad[static_cast<std::size_t>(j)] += gradient_to_vec(
              backprop_exact(arch, wpts[static_cast<std::size_t>(j)], trace, s.label));
        }
      }
      double risk_dev = 0, grad_dev = 0;
      for (int j = 0; j < m_w; ++j) {
        risk_dev = std::max(risk_dev, std::abs(risk[static_cast<std::size_t>(j)] / n -
                                               ref_risk[static_cast<std::size_t>(j)]));
        grad_dev = std::max(grad_dev, (grad[static_cast<std::size_t>(j)] / n -
                                       ref_grad[static_cast<std::size_t>(j)])
                                          .norm());
      }
      mean_risk_dev += risk_dev / static_cast<double>(trials);
      mean_grad_dev += grad_dev / static_cast<double>(trials);
    }
    ConvergenceRecord rec;
    rec.n = n;
    rec.deviation_risk = mean_risk_dev;
    rec.deviation_grad = mean_grad_dev;
    rec.trials = trials;
    rec.seed = seed;
    try {
      BoundReport rep = eval_bounds(arch, n, eps, std::nullopt, consts);
      rec.bound_risk = rep.gen_bound;
      rec.bound_grad = rep.grad_bound;
    } catch (const BoundDomainError&) {
      rec.bound_risk = std::numeric_limits<double>::quiet_NaN();
      rec.bound_grad = std::numeric_limits<double>::quiet_NaN();
    }
    result.records.push_back(rec);
    risk_pts.emplace_back(static_cast<double>(n), mean_risk_dev);
    grad_pts.emplace_back(static_cast<double>(n), mean_grad_dev);
  }
  result.slope_risk = fit_loglog_slope(risk_pts);
  result.slope_grad = fit_loglog_slope(grad_pts);
  return result;
}

VerifyReport hoeffding_tail(const Architecture& arch, const Weights& w, long long n,
                            long long trials, const std::vector<double>& t_grid,
                            std::uint64_t seed, int threads) {
  validate(arch);
  if (n < 1 || trials < 1)
    throw DimensionError("hoeffding_tail: n and trials must be >= 1");
  if (t_grid.empty()) throw DimensionError("hoeffding_tail: empty t grid");
  DataModel dm = make_data_model(arch, seed);

  // Population surrogate on a large independent stream.
  const long long n_pop = std::min<long long>(256 * n, 1 << 20);
  double pop_risk = 0;
  for (long long i = 0; i < n_pop; ++i) {
    Sample s = draw_sample(dm, 0, static_cast<std::uint64_t>(i));
    pop_risk += loss(forward(arch, w, s.input, Head::Softmax).v, s.label);
  }
  pop_risk /= static_cast<double>(n_pop);

  std::vector<double> devs(static_cast<std::size_t>(trials), 0.0);
  parallel_for(trials, threads, [&](long long t) {
    double risk = 0;
    for (long long i = 0; i < n; ++i) {
      Sample s = draw_sample(dm, 1 + static_cast<std::uint64_t>(t),
                             static_cast<std::uint64_t>(i));
      risk += loss(forward(arch, w, s.input, Head::Softmax).v, s.label);
    }
    devs[static_cast<std::size_t>(t)] = risk / static_cast<double>(n) - pop_risk;
  });

  VerifyReport rep;
  rep.check = "hoeffding_tail";
  rep.trials = trials;
  rep.seed = seed;
  for (double t : t_grid) {
    if (!(t >= 0)) throw DimensionError("hoeffding_tail: t must be >= 0");
    long long count = 0;
    for (double dev : devs)
      if (dev > t) ++count;
    const double freq = static_cast<double>(count) / static_cast<double>(trials);
    const double bound = std::exp(-2.0 * static_cast<double>(n) * t * t);
    const double slack =
        3.0 * std::sqrt(std::max(0.0, bound * (1.0 - bound)) / static_cast<double>(trials));
    const double limit = bound + slack;
    if (freq > limit) ++rep.violations;
    rep.worst_ratio = std::max(rep.worst_ratio, limit > 0 ? freq / limit : 0.0);
    std::ostringstream key;
    key.precision(6);
    key << "freq_t" << t;
    note_extreme(rep.extremes, key.str(), freq);
    std::ostringstream bkey;
    bkey.precision(6);
    bkey << "bound_t" << t;
    note_extreme(rep.extremes, bkey.str(), limit);
  }
  rep.pass = rep.violations == 0;
  return rep;
}

namespace {

// Projected full-batch gradient descent on the mean loss of `samples`.
Weights run_gd(const Architecture& arch, const Weights& start,
               const std::vector<Sample>& samples, long long steps, double step_size) {
  Weights w = start;
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  for (long long step = 0; step < steps; ++step) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(weights_to_vec(w).size());
    double risk = 0;
    for (const Sample& s : samples) {
      ForwardTrace trace = forward(arch, w, s.input, Head::Softmax);
      risk += loss(trace.v, s.label);
      grad += gradient_to_vec(backprop_exact(arch, w, trace, s.label));
    }
    risk *= inv_n;
    if (!std::isfinite(risk))
      throw std::runtime_error("stationary_experiment: non-finite loss at step " +
                               std::to_string(step));
    Eigen::VectorXd wv = weights_to_vec(w) - step_size * inv_n * grad;
    w = vec_to_weights(arch, wv);
    project_to_bounds(arch, w);
  }
  return w;
}

Eigen::VectorXd mean_gradient(const Architecture& arch, const Weights& w,
                              const std::vector<Sample>& samples, std::size_t count) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(weights_to_vec(w).size());
  for (std::size_t i = 0; i < count; ++i) {
    const Sample& s = samples[i];
    grad += gradient_to_vec(
        backprop_exact(arch, w, forward(arch, w, s.input, Head::Softmax), s.label));
  }
  return grad / static_cast<double>(count);
}

}  // namespace

StationaryResult stationary_experiment(const Architecture& arch, const DataModel& dm,
                                       const std::vector<long long>& n_list,
                                       long long ref_n, long long steps, double step_size,
                                       int restarts, std::uint64_t seed) {
  validate(arch);
  if (n_list.empty()) throw DimensionError("stationary_experiment: empty n list");
  if (ref_n < *std::max_element(n_list.begin(), n_list.end()))
    throw DimensionError("stationary_experiment: ref_n must be >= max(n_list)");
  if (steps < 1 || restarts < 1 || !(step_size > 0))
    throw DimensionError("stationary_experiment: steps, restarts and step size must be positive");

  StationaryResult result;
  result.n_ref = ref_n;
  for (int r = 0; r < restarts; ++r) {
    Rng start_rng(derive_seed(seed, 0x600d5eedULL + static_cast<std::uint64_t>(r)));
    Weights w0 = init_weights(arch, start_rng(), 0.5);

    // One sample stream per restart; every run trains on a prefix of it.
    const std::uint64_t stream = 0x6d000000 + static_cast<std::uint64_t>(r);
    std::vector<Sample> samples;
    samples.reserve(static_cast<std::size_t>(ref_n));
    for (long long i = 0; i < ref_n; ++i)
      samples.push_back(draw_sample(dm, stream, static_cast<std::uint64_t>(i)));

    Weights w_ref = run_gd(arch, w0, samples, steps, step_size);
    const Eigen::VectorXd ref_vec = weights_to_vec(w_ref);
    for (long long n : n_list) {
      std::vector<Sample> prefix(samples.begin(), samples.begin() + n);
      Weights w_n = run_gd(arch, w0, prefix, steps, step_size);
      StationaryRecord rec;
      rec.n = n;
      rec.restart = r;
      rec.seed = seed;
      rec.distance = (weights_to_vec(w_n) - ref_vec).norm();
      rec.grad_emp_sq = mean_gradient(arch, w_n, prefix, prefix.size()).squaredNorm();
      rec.grad_pop_sq =
          mean_gradient(arch, w_n, samples, samples.size()).squaredNorm();
      result.records.push_back(rec);
    }
  }

  // Median distance per n across restarts, then one fitted slope.
  std::vector<std::pair<double, double>> pts;
  for (long long n : n_list) {
    std::vector<double> d;
    for (const StationaryRecord& rec : result.records)
      if (rec.n == n) d.push_back(rec.distance);
    std::sort(d.begin(), d.end());
    const double median = d.size() % 2 == 1
                              ? d[d.size() / 2]
                              : 0.5 * (d[d.size() / 2 - 1] + d[d.size() / 2]);
    pts.emplace_back(static_cast<double>(n), median);
  }
  result.slope = fit_loglog_slope(pts);
  return result;
}

std::string convergence_csv(const ConvergenceResult& result) {
  std::ostringstream os;
  os.precision(10);
  os << "n,deviation_risk,deviation_grad,bound_risk,bound_grad,trials,seed\n";
  for (const ConvergenceRecord& r : result.records)
    os << r.n << "," << r.deviation_risk << "," << r.deviation_grad << "," << r.bound_risk
       << "," << r.bound_grad << "," << r.trials << "," << r.seed << "\n";
  return os.str();
}

std::string stationary_csv(const StationaryResult& result) {
  std::ostringstream os;
  os.precision(10);
  os << "n,distance,grad_pop_sq,grad_emp_sq,restart,seed\n";
  for (const StationaryRecord& r : result.records)
    os << r.n << "," << r.distance << "," << r.grad_pop_sq << "," << r.grad_emp_sq << ","
       << r.restart << "," << r.seed << "\n";
  return os.str();
}

}  // namespace cnnlab
