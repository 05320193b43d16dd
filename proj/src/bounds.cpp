#include "cnnlab/bounds.hpp"

#include <algorithm>
#include <cmath>

namespace cnnlab {

namespace {

double sq(double x) { return x * x; }

// b_{l+1} + sum_i d_i b_i, shared by the sample-count thresholds.
double magnitude_sum(const Architecture& arch) {
  double s = arch.output_b;
  for (const LayerSpec& L : arch.layers) s += L.out_channels * L.b;
  return s;
}

}  // namespace

double eval_rho(const Architecture& arch, long long n) {
  validate(arch);
  if (n < 1) throw BoundDomainError("rho: need n >= 1, got " + std::to_string(n));
  const double p = arch.pool;
  double rho = 0;
  for (const LayerSpec& L : arch.layers)
    rho += std::log(std::sqrt(static_cast<double>(L.out_channels)) * L.b *
                    (L.kernel - L.stride + 1) / (4.0 * p));
  rho += std::log(arch.output_b);
  rho += std::log(static_cast<double>(n) / (128.0 * p * p));
  return rho;
}

double eval_beta(const Architecture& arch) {
  DerivedDims dims = validate(arch);
  const int l = arch.depth();
  const double p = arch.pool;
  const double p2 = p * p;
  const double b_out2 = sq(arch.output_b);

  // Trailing products prod_{s=i..l} d_s b_s^2 (k_s - s_s + 1)^2 / (16 p^2).
  std::vector<double> tail(static_cast<std::size_t>(l) + 1, 1.0);
  for (int i = l; i >= 1; --i) {
    const LayerSpec& L = arch.layers[static_cast<std::size_t>(i - 1)];
    tail[static_cast<std::size_t>(i - 1)] =
        tail[static_cast<std::size_t>(i)] *
        (L.out_channels * sq(L.b) * sq(L.kernel - L.stride + 1) / (16.0 * p2));
  }

  const double d_l = arch.layers.back().out_channels;
  // Main-text writing: r_l c_l d_l / (8 p^2) + ...
  double beta2_main =
      dims.rows.back() * static_cast<double>(dims.cols.back()) * d_l / (8.0 * p2);
  // Alternative writing: vartheta * pooled_r_l * pooled_c_l * d_l + ...
  double beta2_alt = BoundConstants::vartheta * dims.pooled_rows.back() *
                     static_cast<double>(dims.pooled_cols.back()) * d_l;
  for (int i = 1; i <= l; ++i) {
    const LayerSpec& L = arch.layers[static_cast<std::size_t>(i - 1)];
    const double d_prev =
        i == 1 ? arch.input_channels
               : arch.layers[static_cast<std::size_t>(i - 2)].out_channels;
    // r_{i-1} c_{i-1} with the convention r_0 = input rows; for i > 1 the
    // pre-pool size of layer i-1.
    const double r_cm1 = i == 1 ? arch.input_rows
                                : dims.rows[static_cast<std::size_t>(i - 2)];
    const double c_cm1 = i == 1 ? arch.input_cols
                                : dims.cols[static_cast<std::size_t>(i - 2)];
    const double common = b_out2 * d_prev / (sq(L.b) * L.out_channels) * r_cm1 * c_cm1 *
                          tail[static_cast<std::size_t>(i - 1)];
    beta2_main += common / (8.0 * p2);
    beta2_alt += BoundConstants::vartheta * common / p2;
  }
  const double beta_main = std::sqrt(beta2_main);
  const double beta_alt = std::sqrt(beta2_alt);
  if (std::abs(beta_main - beta_alt) > 1e-12 * std::max(1.0, beta_main))
    throw BoundDomainError("beta: the two writings disagree: " +
                           std::to_string(beta_main) + " vs " + std::to_string(beta_alt));
  return beta_main;
}

double eval_gamma(const Architecture& arch) {
  validate(arch);
  const int l = arch.depth();
  const double p2 = sq(static_cast<double>(arch.pool));
  double prod = 1.0;
  for (const LayerSpec& L : arch.layers)
    prod *= L.out_channels * sq(L.b) * sq(L.kernel - L.stride + 1) /
            (8.0 * std::sqrt(2.0) * p2);
  const double d0 = arch.input_channels;
  const double d1 = arch.layers.front().out_channels;
  const double b1 = arch.layers.front().b;
  const double gamma2 = BoundConstants::vartheta * sq(arch.output_b) * sq(d0) /
                        (sq(sq(b1)) * sq(d1)) * sq(static_cast<double>(l)) *
                        sq(static_cast<double>(arch.input_rows)) *
                        sq(static_cast<double>(arch.input_cols)) * sq(prod);
  return std::sqrt(gamma2);
}

BoundReport eval_bounds(const Architecture& arch, long long n, double eps,
                        std::optional<double> zeta, const BoundConstants& consts,
                        ThetaVariant variant, std::optional<double> stat_eps) {
  if (!(eps > 0.0 && eps < 1.0))
    throw BoundDomainError("eval_bounds: need 0 < eps < 1, got " + std::to_string(eps));
  if (n < 1) throw BoundDomainError("eval_bounds: need n >= 1, got " + std::to_string(n));
  if (zeta && !(*zeta > 0.0))
    throw BoundDomainError("eval_bounds: zeta must be positive");

  DerivedDims dims = validate(arch);
  BoundReport rep;
  rep.n = n;
  rep.eps = eps;
  rep.consts = consts;
  rep.rho = eval_rho(arch, n);
  rep.theta = variant == ThetaVariant::Main ? dims.freedom_main : dims.freedom_supplement;
  rep.total_params = dims.total_params;
  rep.beta = eval_beta(arch);
  rep.gamma = eval_gamma(arch);
  if (!(rep.rho > 0.0))
    throw BoundDomainError("eval_bounds: rho = " + std::to_string(rep.rho) +
                           " <= 0 at n = " + std::to_string(n) +
                           "; increase n until rho is positive");

  const double log_term = std::log(4.0 / eps);
  const double theta_rho = static_cast<double>(rep.theta) * rep.rho;
  rep.gen_bound = std::sqrt((theta_rho + log_term) / (2.0 * n));
  const double wide = std::sqrt((2.0 * rep.total_params + theta_rho + log_term) / (2.0 * n));
  rep.grad_bound = consts.c_g * rep.beta * wide;
  rep.hess_bound = consts.c_v * rep.gamma * wide;
  if (zeta) rep.stat_bound = 2.0 * consts.c_g * rep.beta / *zeta * wide;

  // Sample-size thresholds, evaluated with the supplied constants.
  const double l2 = sq(static_cast<double>(arch.depth()));
  const double mag2 = sq(magnitude_sum(arch));
  double max_sqrt_rc = 0, max_rc = 0;
  for (std::size_t i = 0; i < dims.rows.size(); ++i) {
    const double rc = static_cast<double>(dims.rows[i]) * dims.cols[i];
    max_rc = std::max(max_rc, rc);
    max_sqrt_rc = std::max(max_sqrt_rc, std::sqrt(rc));
  }
  rep.n_ok_risk =
      static_cast<double>(n) >=
      consts.c_f_prime * l2 * mag2 * max_sqrt_rc / (theta_rho * sq(eps));

  const double r0c0d0 = static_cast<double>(arch.input_rows) * arch.input_cols *
                        arch.input_channels;
  const double d0 = arch.input_channels;
  const double b1 = arch.layers.front().b;
  const double grad_threshold_core =
      l2 * sq(arch.output_b) * mag2 * std::pow(r0c0d0, 4.0) /
      (std::pow(d0, 4.0) * std::pow(b1, 8.0) * sq(eps) * max_rc);
  rep.n_ok_gradient =
      static_cast<double>(n) >=
      consts.c_g * grad_threshold_core /
          (static_cast<double>(rep.total_params) * std::log(6.0) + theta_rho);
  if (zeta)
    rep.n_ok_stationary =
        static_cast<double>(n) >=
        consts.c_h * std::max((static_cast<double>(rep.total_params) + theta_rho) / sq(*zeta),
                              grad_threshold_core /
                                  (static_cast<double>(rep.total_params) * rep.rho));
  if (stat_eps) {
    if (!(*stat_eps > 0.0))
      throw BoundDomainError("eval_bounds: stationarity level must be positive");
    rep.n_ok_approx_stationarity =
        static_cast<double>(n) >=
        (static_cast<double>(rep.total_params) * rep.rho + log_term) * sq(rep.beta) /
            *stat_eps;
  }
  return rep;
}

double eval_dnn_bound(const DnnParams& dnn, long long n, double eps,
                      const BoundConstants& consts) {
  if (dnn.depth < 1 || dnn.total_params < 1 || dnn.max_width < 1 || !(dnn.r_hat > 0) ||
      !(dnn.tau > 0))
    throw BoundDomainError("dnn bound: all parameters must be positive");
  if (!(eps > 0.0 && eps < 1.0))
    throw BoundDomainError("dnn bound: need 0 < eps < 1, got " + std::to_string(eps));
  if (n < 1) throw BoundDomainError("dnn bound: need n >= 1");
  const double r2 = sq(dnn.r_hat) / 16.0;
  const double c_r = std::max(r2, std::pow(r2, static_cast<double>(dnn.depth)));
  return consts.c_n * dnn.tau * std::sqrt((1.0 + c_r * dnn.depth) * dnn.max_width) *
         std::sqrt((dnn.total_params * std::log(static_cast<double>(n) * (dnn.depth + 1)) +
                    std::log(4.0 / eps)) /
                   static_cast<double>(n));
}

RademacherResult eval_rademacher(const RademacherParams& par, long long n, double margin,
                                 double eps) {
  if (!(par.bx > 0) || !(par.bw > 0) || par.pool < 1 || par.depth < 1 ||
      par.input_rows < 1 || par.input_cols < 1 || par.output_dim < 1)
    throw BoundDomainError("rademacher: all parameters must be positive");
  if (!(eps > 0.0 && eps < 1.0))
    throw BoundDomainError("rademacher: need 0 < eps < 1");
  if (n < 1) throw BoundDomainError("rademacher: need n >= 1");
  if (margin >= 2.0)
    throw BoundDomainError("rademacher: margin must be < 2 (log2(2/margin) <= 0), got " +
                           std::to_string(margin));
  if (!(margin > 0.0)) throw BoundDomainError("rademacher: margin must be positive");
  const double loglog = std::log(std::log2(2.0 / margin));
  if (loglog < 0.0)
    throw BoundDomainError("rademacher: margin > 1 makes ln(log2(2/margin)) negative, got " +
                           std::to_string(margin));
  RademacherResult res;
  res.complexity = par.bx *
                   std::pow(2.0 * par.pool * par.bw, static_cast<double>(par.depth + 1)) *
                   std::sqrt(std::log(static_cast<double>(par.input_rows) * par.input_cols)) /
                   std::sqrt(static_cast<double>(n));
  res.margin_excess = 8.0 * par.output_dim * (2.0 * par.output_dim - 1.0) / margin *
                          res.complexity +
                      std::sqrt(loglog / static_cast<double>(n)) +
                      std::sqrt(std::log(2.0 / eps) / static_cast<double>(n));
  return res;
}

}  // namespace cnnlab
