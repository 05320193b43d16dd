#ifndef CNNLAB_BOUNDS_HPP_
#define CNNLAB_BOUNDS_HPP_

#include <optional>
#include <string>

#include "cnnlab/arch.hpp"

namespace cnnlab {

// Constants appearing in the closed-form bounds. vartheta, vartheta_tilde and
// alpha are fixed by the analysis; the c_* factors and nu are universal
// constants the analysis leaves unspecified, so they default to 1 and are
// configurable. Reports always carry the values used.
struct BoundConstants {
  static constexpr double vartheta = 0.125;          // 1/8
  static constexpr double vartheta_tilde = 3.0 / 64;
  static constexpr double alpha = 1.0;
  double c_f_prime = 1.0;
  double c_g = 1.0;
  double c_v = 1.0;
  double c_h = 1.0;
  double c_n = 1.0;
  double nu = 1.0;
};

struct BoundReport {
  long long n = 0;
  double eps = 0;
  double rho = 0;
  long long theta = 0;
  long long total_params = 0;
  double beta = 0;
  double gamma = 0;
  double gen_bound = 0;
  double grad_bound = 0;
  double hess_bound = 0;
  std::optional<double> stat_bound;  // present only when zeta supplied
  bool n_ok_risk = false;
  bool n_ok_gradient = false;
  std::optional<bool> n_ok_stationary;    // needs zeta
  std::optional<bool> n_ok_approx_stationarity;  // needs a stationarity level
  BoundConstants consts;
};

// Thrown when a bound cannot be evaluated as a real number (rho <= 0, or an
// out-of-domain margin); the message says how to fix the inputs.
class BoundDomainError : public DimensionError {
 public:
  explicit BoundDomainError(const std::string& what) : DimensionError(what) {}
};

// rho = sum_i ln(sqrt(d_i) b_i (k_i - s_i + 1)/(4p)) + ln(b_{l+1})
//       + ln(n / (128 p^2)). Natural logs; may be negative for small n.
double eval_rho(const Architecture& arch, long long n);

// Gradient-norm bound. Evaluated in both published writings (which are
// algebraically identical since pooled sizes are rc/p^2); they must agree to
// 1e-12 or the evaluator throws.
double eval_beta(const Architecture& arch);

// Hessian Frobenius-norm scale:
// gamma = sqrt(vartheta b_{l+1}^2 d_0^2 / (b_1^4 d_1^2) * l^2 r_0^2 c_0^2
//              * [prod_s d_s b_s^2 (k_s - s_s + 1)^2 / (8 sqrt(2) p^2)]^2).
double eval_gamma(const Architecture& arch);

// Evaluates every bound at the given sample count and failure probability.
// Requires rho > 0 (else BoundDomainError instructing a larger n).
// stat_eps is the stationarity level for the approximate-stationarity sample threshold.
BoundReport eval_bounds(const Architecture& arch, long long n, double eps,
                        std::optional<double> zeta, const BoundConstants& consts,
                        ThetaVariant variant = ThetaVariant::Main,
                        std::optional<double> stat_eps = std::nullopt);

// Comparator: generalization bound of an (l+1)-layer fully connected network
// with per-layer weight norm bound r_hat and Gaussian input scale tau.
struct DnnParams {
  int depth = 1;               // l
  long long total_params = 0;  // d
  int max_width = 1;
  double r_hat = 1.0;
  double tau = 1.0;
};
double eval_dnn_bound(const DnnParams& dnn, long long n, double eps,
                      const BoundConstants& consts);

// Comparator: Rademacher-complexity margin bound for the same CNN family.
// complexity = bx (2 p bw)^{l+1} sqrt(ln(r0 c0)) / sqrt(n)  (O(.) constant 1);
// margin_excess = 8 d_out (2 d_out - 1) / margin * complexity
//                 + sqrt(ln(log2(2/margin))/n) + sqrt(ln(2/eps)/n).
struct RademacherParams {
  double bx = 1.0;  // entry bound on the input
  double bw = 1.0;  // l1-norm scale of the weights
  int pool = 1;
  int depth = 1;
  int input_rows = 1;
  int input_cols = 1;
  int output_dim = 1;
};
struct RademacherResult {
  double complexity = 0;
  double margin_excess = 0;
};
RademacherResult eval_rademacher(const RademacherParams& par, long long n, double margin,
                                 double eps);

}  // namespace cnnlab

#endif  // CNNLAB_BOUNDS_HPP_
