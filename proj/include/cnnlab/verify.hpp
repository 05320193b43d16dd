#ifndef CNNLAB_VERIFY_HPP_
#define CNNLAB_VERIFY_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cnnlab/bounds.hpp"
#include "cnnlab/model.hpp"

namespace cnnlab {

// Synthetic data distribution: inputs with i.i.d. uniform[0,1] entries,
// labeled one-hot at the argmax of a fixed, seeded teacher network's softmax
// output. Sample i of stream s is a pure function of (seed, s, i).
struct DataModel {
  Architecture arch;
  Weights teacher;
  std::uint64_t seed = 0;
};

struct Sample {
  Tensor3d input;
  Eigen::VectorXd label;
};

DataModel make_data_model(const Architecture& arch, std::uint64_t seed);
Sample draw_sample(const DataModel& dm, std::uint64_t stream, std::uint64_t index);

// Result of one randomized check. violations == 0 is the pass condition for
// hard checks; ratio-style checks also record their worst empirical/bound
// ratio and per-quantity extremes. to_line() renders one record with a
// stable field order.
struct VerifyReport {
  std::string check;
  long long trials = 0;
  long long violations = 0;
  long long flagged = 0;  // soft exceedances (ratio > 1 in monitoring checks)
  double worst_ratio = 0.0;
  std::vector<std::pair<std::string, double>> extremes;
  bool pass = false;
  std::uint64_t seed = 0;

  std::string to_line() const;
};

// Central finite differences (f(w + h e_j) - f(w - h e_j)) / (2h) of the loss
// through the forward pass, coordinate by coordinate in the canonical
// parameter order. The loss values are evaluated in extended precision so the
// oracle's own rounding stays well below the comparison tolerances; the
// gradients under test remain plain double.
Gradient fd_gradient(const Architecture& arch, const Weights& w, const Tensor3d& input,
                     const Eigen::VectorXd& y, Head head, double h);

// Compares the analytic gradient (gated mode under a sigmoid head, exact mode
// under a softmax head) against fd_gradient on fresh random weights, inputs
// and labels. Per-coordinate error |analytic - fd| / max(|fd|, 1e-8); passes
// iff the max over all trials and coordinates is <= tol.
VerifyReport gradient_check(const Architecture& arch, long long trials,
                            std::uint64_t seed, double tol, Head head,
                            double h = 1e-5, int threads = 1);

// Scans gated-mode quantities under a softmax head for violations of the
// closed-form norm bounds: every per-layer delta bound, the full gradient
// bound beta, the fully connected gradient bound, loss in [0,1], and
// ||v - y||^2 <= 2.
VerifyReport check_norm_bounds(const Architecture& arch, long long trials,
                               std::uint64_t seed, int threads = 1);

// Finite-difference feature-map Jacobians ||d vec(X_i)/d w_j||_F^2 (full and
// per-slice) and the last-layer delta Jacobian, checked against their
// closed-form bounds for every j <= i. Requires total_params <= 200.
VerifyReport check_jacobian_bounds(const Architecture& arch, long long trials,
                                   std::uint64_t seed, int threads = 1);

// Numerical Hessian (central differences of the exact gradient, h = 1e-4,
// symmetrized) per draw; reports ||H||_F / gamma. Ratio > 1 is flagged,
// ratio > 10 or non-finite fails; strict promotes flags to failures.
// Also requires the pre-symmetrization asymmetry to stay below 1e-3.
VerifyReport hessian_ratio(const Architecture& arch, long long trials,
                           std::uint64_t seed, bool strict = false, int threads = 1);

// One row per sample count: the empirical sup-deviation (max over m_w fixed
// parameter points) of risk and gradient from their large-sample surrogates,
// against the theory bounds at that n.
struct ConvergenceRecord {
  long long n = 0;
  double deviation_risk = 0;
  double deviation_grad = 0;
  double bound_risk = 0;  // NaN when rho(n) <= 0
  double bound_grad = 0;
  long long trials = 0;
  std::uint64_t seed = 0;
};
struct ConvergenceResult {
  std::vector<ConvergenceRecord> records;
  double slope_risk = 0;  // fitted log-log slope of mean deviation vs n
  double slope_grad = 0;
  long long n_ref = 0;
  int m_w = 0;
};
ConvergenceResult convergence_experiment(const Architecture& arch, const DataModel& dm,
                                         const std::vector<long long>& n_list,
                                         long long trials, int m_w, long long ref_factor,
                                         std::uint64_t seed, double eps,
                                         const BoundConstants& consts = {});

// Empirical one-sided tail frequency of the risk deviation at fixed w against
// exp(-2 n t^2), with 3-sigma binomial slack, for each t in the grid.
VerifyReport hoeffding_tail(const Architecture& arch, const Weights& w, long long n,
                            long long trials, const std::vector<double>& t_grid,
                            std::uint64_t seed, int threads = 1);

// Projected gradient descent (exact mode, fixed step) on the empirical risk
// of the first n samples of a shared stream, from a shared start; distance of
// the endpoint to the reference endpoint trained on ref_n samples. Because
// the n-sample set is a prefix of the reference set, n == ref_n reproduces
// the reference trajectory exactly.
struct StationaryRecord {
  long long n = 0;
  double distance = 0;
  double grad_pop_sq = 0;  // surrogate population gradient norm^2 at the endpoint
  double grad_emp_sq = 0;  // empirical gradient norm^2 at the endpoint
  int restart = 0;
  std::uint64_t seed = 0;
};
struct StationaryResult {
  std::vector<StationaryRecord> records;
  double slope = 0;  // fitted log-log slope of median distance vs n
  long long n_ref = 0;
};
StationaryResult stationary_experiment(const Architecture& arch, const DataModel& dm,
                                       const std::vector<long long>& n_list,
                                       long long ref_n, long long steps,
                                       double step_size, int restarts,
                                       std::uint64_t seed);

// Least-squares slope of ln(y) against ln(x).
double fit_loglog_slope(const std::vector<std::pair<double, double>>& points);

// CSV renderings (stable column order, documented in the README).
std::string convergence_csv(const ConvergenceResult& result);
std::string stationary_csv(const StationaryResult& result);

}  // namespace cnnlab

#endif  // CNNLAB_VERIFY_HPP_
