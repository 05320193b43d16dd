// Acceptance suite: runs every criterion end to end at its stated tolerance
// and prints one pass/fail line per criterion. Exits nonzero if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "cnnlab/verify.hpp"
#include "fixtures.hpp"

using namespace cnnlab;

namespace {

int failures = 0;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void report(int idx, const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s (%s)\n", ok ? "PASS" : "FAIL", idx, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

Tensor3d random_input(Rng& rng, const Architecture& arch) {
  Tensor3d t(arch.input_rows, arch.input_cols, arch.input_channels);
  for (auto& m : t.slices)
    for (Index c = 0; c < m.cols(); ++c)
      for (Index r = 0; r < m.rows(); ++r) m(r, c) = uniform01(rng);
  return t;
}

Eigen::MatrixXd random_matrix(Rng& rng, Index r, Index c) {
  Eigen::MatrixXd m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = uniform(rng, -1.0, 1.0);
  return m;
}

Eigen::VectorXd random_one_hot(Rng& rng, Index dim) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(dim);
  y(static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(dim)))) = 1.0;
  return y;
}

// 1. Backward recursion end to end: analytic vs central finite differences.
void criterion_1() {
  const auto start = std::chrono::steady_clock::now();
  VerifyReport r1 = gradient_check(arch_a1(), 100, 1001, 1e-6, Head::Sigmoid, 1e-5);
  VerifyReport r2 = gradient_check(arch_a2(), 100, 1002, 1e-6, Head::Sigmoid, 1e-5);
  const double elapsed = seconds_since(start);
  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "worst rel err a1=%.3g a2=%.3g, %.1fs (limit 60s)",
                r1.extremes[0].second, r2.extremes[0].second, elapsed);
  report(1, "sigmoid-head gradcheck on a1 and a2, 100 trials, tol 1e-6",
         r1.pass && r2.pass && elapsed < 60.0, detail);
}

// 2. Head consistency: the two modes agree under sigmoid; exact mode passes
// the FD oracle under softmax.
void criterion_2() {
  Rng rng(1003);
  double worst = 0;
  for (const Architecture& a : {arch_a1(), arch_a2()}) {
    for (int t = 0; t < 50; ++t) {
      Weights w = init_weights(a, rng(), 1.0 - uniform01(rng) * 0.999);
      Tensor3d input = random_input(rng, a);
      Eigen::VectorXd y = random_one_hot(rng, a.output_dim);
      ForwardTrace tr = forward(a, w, input, Head::Sigmoid);
      Eigen::VectorXd gated = gradient_to_vec(backprop_gated(a, w, tr, y).first);
      Eigen::VectorXd exact = gradient_to_vec(backprop_exact(a, w, tr, y));
      worst = std::max(worst, (gated - exact).cwiseAbs().maxCoeff());
    }
  }
  VerifyReport soft1 = gradient_check(arch_a1(), 50, 1004, 1e-6, Head::Softmax, 1e-5);
  VerifyReport soft2 = gradient_check(arch_a2(), 50, 1005, 1e-6, Head::Softmax, 1e-5);
  char detail[256];
  std::snprintf(detail, sizeof(detail), "mode gap=%.3g (tol 1e-12), softmax fd err=%.3g",
                worst, std::max(soft1.extremes[0].second, soft2.extremes[0].second));
  report(2, "gated == exact under sigmoid; softmax exact passes FD",
         worst <= 1e-12 && soft1.pass && soft2.pass, detail);
}

// 3. Norm bounds, 1000 draws each on a1 and a2.
void criterion_3() {
  VerifyReport r1 = check_norm_bounds(arch_a1(), 1000, 1006);
  VerifyReport r2 = check_norm_bounds(arch_a2(), 1000, 1007);
  char detail[256];
  std::snprintf(detail, sizeof(detail), "violations a1=%lld a2=%lld, worst ratio=%.3g",
                r1.violations, r2.violations, std::max(r1.worst_ratio, r2.worst_ratio));
  report(3, "delta / gradient / loss norm bounds, 1000 draws each",
         r1.pass && r2.pass, detail);
}

// 4. Operator contractions and budgets, 1000 cases each.
void criterion_4() {
  Rng rng(1008);
  long long violations = 0;
  double up_gap = 0;
  for (int t = 0; t < 1000; ++t) {
    const Index d = 1 + static_cast<Index>(uniform_index(rng, 6));
    const Index m_cols = 1 + static_cast<Index>(uniform_index(rng, 6));
    Eigen::VectorXd z = Eigen::VectorXd::NullaryExpr(
        d, [&](Index) { return uniform(rng, -6.0, 6.0); });
    Eigen::MatrixXd m = random_matrix(rng, d, m_cols);
    // (1) gate contraction both sides
    Eigen::VectorXd gate = sigmoid_gate(z);
    if ((gate.asDiagonal() * m).squaredNorm() > m.squaredNorm() / 16.0 + 1e-12) ++violations;
    Eigen::MatrixXd n = random_matrix(rng, m_cols, d);
    if ((n * gate.asDiagonal()).squaredNorm() > n.squaredNorm() / 16.0 + 1e-12) ++violations;
    // (2) curvature contraction and entry budget
    Eigen::MatrixXd q = sigmoid_curvature(z);
    if (q.cwiseAbs().maxCoeff() > 8.0 / 81.0 + 1e-15) ++violations;
    if ((q * m).squaredNorm() > (64.0 / 6561.0) * m.squaredNorm() + 1e-12) ++violations;
    // (3) upsample norm equality, exact
    Tensor3d ten(1 + static_cast<Index>(uniform_index(rng, 4)),
                 1 + static_cast<Index>(uniform_index(rng, 4)),
                 1 + static_cast<Index>(uniform_index(rng, 3)));
    for (auto& sl : ten.slices)
      for (Index c = 0; c < sl.cols(); ++c)
        for (Index r = 0; r < sl.rows(); ++r) sl(r, c) = uniform(rng, -1.0, 1.0);
    const Index p = 1 + static_cast<Index>(uniform_index(rng, 3));
    const double lhs = upsample(ten, p).squaredNorm();
    const double rhs = ten.squaredNorm() / static_cast<double>(p * p);
    if (lhs > rhs + 1e-12) ++violations;
    up_gap = std::max(up_gap, std::abs(lhs - rhs) / std::max(rhs, 1e-300));
    // (4) dilated backward correlation bound
    const Index k = 1 + static_cast<Index>(uniform_index(rng, 4));
    const Index s = 1 + static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(k)));
    Eigen::MatrixXd delta = random_matrix(rng, 1 + static_cast<Index>(uniform_index(rng, 4)),
                                          1 + static_cast<Index>(uniform_index(rng, 4)));
    Eigen::MatrixXd nn = dilate_and_pad<double>(delta, s, k);
    Eigen::MatrixXd w = random_matrix(rng, k, k);
    const double factor = static_cast<double>((k - s + 1) * (k - s + 1));
    if (conv_valid<double>(nn, w, 1).squaredNorm() >
        factor * w.squaredNorm() * nn.squaredNorm() + 1e-12)
      ++violations;
    // (5) softmax residual budget
    const Index dv = 2 + static_cast<Index>(uniform_index(rng, 7));
    Eigen::VectorXd u = Eigen::VectorXd::NullaryExpr(
        dv, [&](Index) { return uniform(rng, -10.0, 10.0); });
    Eigen::VectorXd v = softmax(u);
    Eigen::VectorXd y = random_one_hot(rng, dv);
    const double n2 = (v - y).squaredNorm();
    if (n2 < 0.0 || n2 > 2.0) ++violations;
  }
  char detail[128];
  std::snprintf(detail, sizeof(detail), "violations=%lld, upsample equality gap=%.3g",
                violations, up_gap);
  report(4, "operator properties (1000 cases each)", violations == 0 && up_gap <= 1e-12,
         detail);
}

// 5. Counting identities.
void criterion_5() {
  bool ok = param_count(arch_a1()) == 90 &&
            freedom_degree(arch_a1(), ThetaVariant::Main) == 116;
  Rng rng(1009);
  for (int t = 0; t < 50 && ok; ++t) {
    Architecture a = random_architecture(rng);
    Weights w = init_weights(a, rng(), 1.0);
    if (param_count(a) != weight_count(w)) ok = false;
    long long theta = 0;
    for (std::size_t i = 0; i < w.kernels.size(); ++i)
      theta += a.layers[i].rank *
               (w.kernels[i].front().size() + static_cast<long long>(w.kernels[i].size()) + 1);
    theta += a.output_rank * (w.fc.rows() + w.fc.cols() + 1);
    if (freedom_degree(a, ThetaVariant::Main) != theta) ok = false;
  }
  report(5, "d and theta(main) match instantiation-count oracles; a1 goldens", ok,
         "d(a1)=90 theta(a1)=116, 50 random architectures");
}

// 6. Dilation size identity on random valid architectures.
void criterion_6() {
  Rng rng(1010);
  long long violations = 0;
  for (int t = 0; t < 100; ++t) {
    Architecture a = random_architecture(rng);
    DerivedDims dims = validate(a);
    int prev_r = a.input_rows, prev_c = a.input_cols;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      const LayerSpec& L = a.layers[i];
      if (L.stride * (dims.rows[i] - 1) + 1 != prev_r - L.kernel + 1) ++violations;
      if (L.stride * (dims.rows[i] - 1) + 2 * L.kernel - 1 != prev_r + L.kernel - 1)
        ++violations;
      if (L.stride * (dims.cols[i] - 1) + 1 != prev_c - L.kernel + 1) ++violations;
      prev_r = dims.pooled_rows[i];
      prev_c = dims.pooled_cols[i];
    }
  }
  char detail[64];
  std::snprintf(detail, sizeof(detail), "violations=%lld over 100 architectures", violations);
  report(6, "dilation size identity on validate", violations == 0, detail);
}

// 7. Golden bound values on a1.
void criterion_7() {
  BoundReport rep = eval_bounds(arch_a1(), 1024, 0.05, 0.1, BoundConstants{});
  const bool ok = std::abs(rep.rho - 0.0589) <= 1e-4 &&
                  std::abs(rep.beta - 1.5910) <= 1e-4 &&
                  std::abs(rep.gamma - 4.5) <= 1e-12 &&
                  std::abs(rep.gen_bound - 0.0740) <= 2e-4 &&
                  std::abs(rep.grad_bound - 0.486) <= 1e-3 &&
                  rep.stat_bound && std::abs(*rep.stat_bound - 9.72) <= 0.02;
  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "rho=%.6f beta=%.6f gamma=%.12f gen=%.6f grad=%.5f stat=%.4f", rep.rho,
                rep.beta, rep.gamma, rep.gen_bound, rep.grad_bound,
                rep.stat_bound ? *rep.stat_bound : -1.0);
  report(7, "golden bound values on a1 (n=1024, eps=0.05)", ok, detail);
}

// 8. Uniform convergence at desk scale.
void criterion_8() {
  const auto start = std::chrono::steady_clock::now();
  const Architecture a = arch_a1();
  DataModel dm = make_data_model(a, 1011);
  ConvergenceResult res = convergence_experiment(a, dm, {64, 128, 256, 512, 1024, 2048}, 20,
                                                 32, 16, 1011, 0.05);
  bool dominated = true;
  for (const ConvergenceRecord& r : res.records)
    if (std::isfinite(r.bound_risk) && r.deviation_risk > r.bound_risk) dominated = false;
  const double elapsed = seconds_since(start);
  const bool slope_ok = res.slope_risk >= -0.65 && res.slope_risk <= -0.35;
  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "slope=%.3f (band [-0.65,-0.35]), bound dominated=%d, %.0fs (limit 600s)",
                res.slope_risk, dominated ? 1 : 0, elapsed);
  report(8, "risk deviation rate and bound domination", slope_ok && dominated && elapsed <= 600,
         detail);
}

// 9. Risk concentration tail.
void criterion_9() {
  const Architecture a = arch_a1();
  Weights w = init_weights(a, derive_seed(1012, 0xabcdef), 1.0);
  VerifyReport rep = hoeffding_tail(a, w, 256, 2000, {0.05, 0.1, 0.2}, 1012);
  char detail[256];
  std::string freqs;
  for (const auto& [k, v] : rep.extremes) freqs += k + "=" + std::to_string(v) + " ";
  std::snprintf(detail, sizeof(detail), "%s", freqs.c_str());
  report(9, "tail frequency below exp(-2 n t^2) + 3 sigma (n=256, 2000 trials)", rep.pass,
         detail);
}

// 10. Feature-map and delta Jacobian bounds.
void criterion_10() {
  VerifyReport rep = check_jacobian_bounds(arch_a1(), 100, 1013);
  char detail[128];
  std::snprintf(detail, sizeof(detail), "violations=%lld worst ratio=%.3g", rep.violations,
                rep.worst_ratio);
  report(10, "finite-difference Jacobian bounds, 100 draws", rep.pass, detail);
}

// 11. Hessian norm monitoring.
void criterion_11() {
  VerifyReport rep = hessian_ratio(arch_a1(), 50, 1014, /*strict=*/false);
  double mean = 0;
  for (const auto& [k, v] : rep.extremes)
    if (k == "ratio_mean") mean = v;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "ratio max=%.4g mean=%.4g flagged(>1)=%lld violations(>10)=%lld",
                rep.worst_ratio, mean, rep.flagged, rep.violations);
  report(11, "numerical Hessian norm vs gamma, 50 draws", rep.pass, detail);
}

// 12. Stationary endpoint distance rate, median slope over 5 seeds.
void criterion_12() {
  const auto start = std::chrono::steady_clock::now();
  const Architecture a = arch_a1();
  const std::vector<long long> n_list{128, 256, 512, 1024, 2048};
  std::vector<double> slopes;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    DataModel dm = make_data_model(a, 2000 + s);
    StationaryResult res =
        stationary_experiment(a, dm, n_list, 16 * 2048, 150, 2.0, 1, 2000 + s);
    slopes.push_back(res.slope);
  }
  std::sort(slopes.begin(), slopes.end());
  const double median = slopes[2];
  const double elapsed = seconds_since(start);
  const bool ok = median >= -0.8 && median <= -0.2 && elapsed <= 900;
  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "median slope=%.3f (band [-0.8,-0.2]), slopes=%.3f..%.3f, %.0fs (limit 900s)",
                median, slopes.front(), slopes.back(), elapsed);
  report(12, "gradient-descent endpoint distance rate over 5 seeds", ok, detail);
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_11();
  criterion_12();
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all 12 criteria passed\n");
  return 0;
}
