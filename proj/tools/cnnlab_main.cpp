// Command-line front door: architecture description, bound tables,
// comparator bounds, and the randomized verification suites.
// Exit codes: 0 = all checks passed, 1 = a check failed, 2 = usage or
// validation error.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cnnlab/arch_io.hpp"
#include "cnnlab/bounds.hpp"
#include "cnnlab/verify.hpp"

namespace {

using namespace cnnlab;

struct ConstOverrides {
  std::vector<std::string> entries;

  BoundConstants apply() const {
    BoundConstants c;
    for (const std::string& e : entries) {
      const auto eq = e.find('=');
      if (eq == std::string::npos)
        throw SchemaError("--const expects name=value, got: " + e);
      const std::string name = e.substr(0, eq);
      const double value = std::stod(e.substr(eq + 1));
      if (name == "c_f_prime" || name == "c_f'" || name == "c_fp")
        c.c_f_prime = value;
      else if (name == "c_g")
        c.c_g = value;
      else if (name == "c_v")
        c.c_v = value;
      else if (name == "c_h")
        c.c_h = value;
      else if (name == "c_n")
        c.c_n = value;
      else if (name == "nu")
        c.nu = value;
      else
        throw SchemaError("--const: unknown constant " + name +
                          " (known: c_f_prime, c_g, c_v, c_h, c_n, nu)");
    }
    return c;
  }
};

void write_out(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write output file: " + path);
  out << content;
}

std::string describe_table(const Architecture& arch, const DerivedDims& dims) {
  std::ostringstream os;
  os << "architecture: input " << arch.input_rows << "x" << arch.input_cols << "x"
     << arch.input_channels << ", pool " << arch.pool << ", " << arch.depth()
     << " conv layer(s), " << arch.output_dim << " outputs\n";
  for (int i = 0; i < arch.depth(); ++i) {
    const LayerSpec& L = arch.layers[static_cast<std::size_t>(i)];
    os << "  layer " << i + 1 << ": k=" << L.kernel << " s=" << L.stride
       << " d=" << L.out_channels << " b=" << L.b << " rank=" << L.rank << "  ->  "
       << dims.rows[static_cast<std::size_t>(i)] << "x" << dims.cols[static_cast<std::size_t>(i)]
       << ", pooled " << dims.pooled_rows[static_cast<std::size_t>(i)] << "x"
       << dims.pooled_cols[static_cast<std::size_t>(i)] << "\n";
  }
  os << "  output: dim=" << arch.output_dim << " b=" << arch.output_b
     << " rank=" << arch.output_rank << "\n";
  os << "d (total parameters)        = " << dims.total_params << "\n";
  os << "theta (freedom, main)       = " << dims.freedom_main << "\n";
  os << "theta (freedom, supplement) = " << dims.freedom_supplement << "\n";
  return os.str();
}

std::string bound_table(const BoundReport& rep) {
  std::ostringstream os;
  os.precision(6);
  os << "n = " << rep.n << ", eps = " << rep.eps << "\n";
  os << "rho                  = " << rep.rho << "\n";
  os << "beta                 = " << rep.beta << "\n";
  os << "gamma                = " << rep.gamma << "\n";
  os << "generalization bound = " << rep.gen_bound << "\n";
  os << "gradient bound       = " << rep.grad_bound << " (c_g = " << rep.consts.c_g << ")\n";
  os << "hessian bound        = " << rep.hess_bound << " (c_v = " << rep.consts.c_v << ")\n";
  if (rep.stat_bound)
    os << "stationary distance  = " << *rep.stat_bound << "\n";
  os << "n satisfies risk-convergence threshold     (c_f' = " << rep.consts.c_f_prime
     << "): " << (rep.n_ok_risk ? "yes" : "no") << "\n";
  os << "n satisfies gradient-convergence threshold (c_g = " << rep.consts.c_g
     << "): " << (rep.n_ok_gradient ? "yes" : "no") << "\n";
  if (rep.n_ok_stationary)
    os << "n satisfies stationary-point threshold     (c_h = " << rep.consts.c_h
       << "): " << (*rep.n_ok_stationary ? "yes" : "no") << "\n";
  if (rep.n_ok_approx_stationarity)
    os << "n satisfies approximate-stationarity threshold: "
       << (*rep.n_ok_approx_stationarity ? "yes" : "no") << "\n";
  return os.str();
}

nlohmann::ordered_json bound_json(const BoundReport& rep) {
  nlohmann::ordered_json j;
  j["n"] = rep.n;
  j["eps"] = rep.eps;
  j["rho"] = rep.rho;
  j["theta"] = rep.theta;
  j["d"] = rep.total_params;
  j["beta"] = rep.beta;
  j["gamma"] = rep.gamma;
  j["gen_bound"] = rep.gen_bound;
  j["grad_bound"] = rep.grad_bound;
  j["hess_bound"] = rep.hess_bound;
  if (rep.stat_bound) j["stat_bound"] = *rep.stat_bound;
  j["n_ok_risk"] = rep.n_ok_risk;
  j["n_ok_gradient"] = rep.n_ok_gradient;
  if (rep.n_ok_stationary) j["n_ok_stationary"] = *rep.n_ok_stationary;
  if (rep.n_ok_approx_stationarity) j["n_ok_approx_stationarity"] = *rep.n_ok_approx_stationarity;
  j["constants"] = {{"c_f_prime", rep.consts.c_f_prime}, {"c_g", rep.consts.c_g},
                    {"c_v", rep.consts.c_v},             {"c_h", rep.consts.c_h},
                    {"c_n", rep.consts.c_n},             {"nu", rep.consts.nu}};
  return j;
}

int finish_check(const VerifyReport& rep, const std::string& out_path) {
  std::cout << rep.to_line() << "\n";
  if (!out_path.empty()) write_out(out_path, rep.to_line() + "\n");
  return rep.pass ? 0 : 1;
}

std::vector<long long> parse_n_list(const std::string& csv) {
  std::vector<long long> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoll(item));
  }
  if (out.empty()) throw SchemaError("--n-list: no sample counts given");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cnnlab: capacity bounds and backpropagation verification for small CNNs"};
  app.require_subcommand(1);

  // Shared option storage.
  std::vector<std::string> arch_paths;
  std::string dnn_path, out_path, head_name = "softmax", theta_name = "main";
  std::string n_list_csv, t_list_csv = "0.05,0.1,0.2";
  long long n = 0, trials = 0, steps = 150;
  std::uint64_t seed = 0;
  double eps = 0.05, tol = 1e-6, fd_h = 1e-5, step_size = 2.0;
  std::optional<double> zeta, stat_eps, rad_b, rad_margin;
  long long ref_factor = 16;
  int m_w = 32, restarts = 1, threads = 1;
  bool strict = false;
  ConstOverrides consts;

  auto add_arch = [&](CLI::App* cmd, bool repeatable) {
    auto* opt = cmd->add_option("--arch", arch_paths, "architecture JSON file")->required();
    if (!repeatable) opt->expected(1);
    return opt;
  };
  auto add_consts = [&](CLI::App* cmd) {
    cmd->add_option("--const", consts.entries,
                    "override a universal constant, e.g. --const c_g=2.0 (repeatable)");
  };
  auto add_out = [&](CLI::App* cmd) {
    cmd->add_option("--out", out_path, "write machine-readable output to this file");
  };

  CLI::App* describe = app.add_subcommand("describe", "dimensions, counts and every bound");
  add_arch(describe, false);
  describe->add_option("--n", n, "sample count")->required();
  describe->add_option("--eps", eps, "failure probability (default 0.05)");
  describe->add_option("--zeta", zeta, "Hessian eigenvalue gap for the stationary bound");
  describe->add_option("--stat-eps", stat_eps, "stationarity level for the sample threshold");
  describe->add_option("--theta-variant", theta_name, "main|supplement (default main)");
  describe->add_option("--rademacher-b", rad_b, "l1 weight scale for the Rademacher comparator");
  describe->add_option("--margin", rad_margin, "margin for the Rademacher comparator");
  add_consts(describe);
  add_out(describe);

  CLI::App* compare = app.add_subcommand("compare", "bounds for several architectures side by side");
  add_arch(compare, true);
  compare->add_option("--n", n, "sample count")->required();
  compare->add_option("--eps", eps, "failure probability (default 0.05)");
  compare->add_option("--zeta", zeta, "Hessian eigenvalue gap");
  compare->add_option("--theta-variant", theta_name, "main|supplement");
  add_consts(compare);
  add_out(compare);

  CLI::App* dnncmp = app.add_subcommand("dnn-compare",
                                        "CNN generalization bound vs the DNN comparator");
  add_arch(dnncmp, false);
  dnncmp->add_option("--dnn", dnn_path, "DNN comparator JSON file")->required();
  dnncmp->add_option("--n", n, "sample count")->required();
  dnncmp->add_option("--eps", eps, "failure probability (default 0.05)");
  add_consts(dnncmp);
  add_out(dnncmp);

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "analytic gradients vs finite differences");
  add_arch(gradcheck, false);
  gradcheck->add_option("--trials", trials, "number of random cases")->required();
  gradcheck->add_option("--seed", seed, "master seed")->required();
  gradcheck->add_option("--tol", tol, "max relative error (default 1e-6)");
  gradcheck->add_option("--head", head_name, "sigmoid|softmax (default softmax)");
  gradcheck->add_option("--fd-step", fd_h, "finite-difference step (default 1e-5)");
  gradcheck->add_option("--threads", threads, "worker threads (default 1)");
  add_out(gradcheck);

  CLI::App* vbounds = app.add_subcommand("verify-bounds", "randomized scan of the norm bounds");
  add_arch(vbounds, false);
  vbounds->add_option("--trials", trials, "number of random draws")->required();
  vbounds->add_option("--seed", seed, "master seed")->required();
  vbounds->add_option("--threads", threads, "worker threads (default 1)");
  add_out(vbounds);

  CLI::App* jcheck = app.add_subcommand("jacobian-check",
                                        "finite-difference feature-map Jacobian bounds");
  add_arch(jcheck, false);
  jcheck->add_option("--trials", trials, "number of random draws")->required();
  jcheck->add_option("--seed", seed, "master seed")->required();
  jcheck->add_option("--threads", threads, "worker threads (default 1)");
  add_out(jcheck);

  CLI::App* hcheck = app.add_subcommand("hessian-check", "numerical Hessian norm monitoring");
  add_arch(hcheck, false);
  hcheck->add_option("--trials", trials, "number of random draws")->required();
  hcheck->add_option("--seed", seed, "master seed")->required();
  hcheck->add_flag("--strict", strict, "fail when the ratio exceeds 1 (not only 10)");
  hcheck->add_option("--threads", threads, "worker threads (default 1)");
  add_out(hcheck);

  CLI::App* converge = app.add_subcommand("converge",
                                          "risk/gradient deviation vs sample count");
  add_arch(converge, false);
  converge->add_option("--n-list", n_list_csv, "comma-separated sample counts")->required();
  converge->add_option("--trials", trials, "trials per sample count")->required();
  converge->add_option("--seed", seed, "master seed")->required();
  converge->add_option("--m-w", m_w, "number of fixed parameter points (default 32)");
  converge->add_option("--ref-factor", ref_factor,
                       "population surrogate size as a multiple of max n (default 16)");
  converge->add_option("--eps", eps, "failure probability for the theory bounds");
  add_consts(converge);
  add_out(converge);

  CLI::App* tail = app.add_subcommand("tail", "risk concentration tail vs exp(-2 n t^2)");
  add_arch(tail, false);
  tail->add_option("--n", n, "sample count per trial")->required();
  tail->add_option("--trials", trials, "number of trials")->required();
  tail->add_option("--seed", seed, "master seed")->required();
  tail->add_option("--t-list", t_list_csv, "comma-separated deviation levels (default 0.05,0.1,0.2)");
  tail->add_option("--threads", threads, "worker threads (default 1)");
  add_out(tail);

  CLI::App* stationary = app.add_subcommand("stationary",
                                            "distance of GD endpoints to the reference run");
  add_arch(stationary, false);
  stationary->add_option("--n-list", n_list_csv, "comma-separated sample counts")->required();
  stationary->add_option("--seed", seed, "master seed")->required();
  stationary->add_option("--ref-factor", ref_factor, "reference size multiple (default 16)");
  stationary->add_option("--steps", steps, "gradient descent steps (default 150)");
  stationary->add_option("--step-size", step_size, "gradient descent step size (default 2.0)");
  stationary->add_option("--restarts", restarts, "independent starts (default 1)");
  add_out(stationary);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const BoundConstants pc = consts.apply();
    const ThetaVariant variant =
        theta_name == "supplement" ? ThetaVariant::Supplement : ThetaVariant::Main;
    if (theta_name != "main" && theta_name != "supplement")
      throw SchemaError("--theta-variant must be main or supplement, got " + theta_name);
    Head head;
    if (head_name == "sigmoid")
      head = Head::Sigmoid;
    else if (head_name == "softmax")
      head = Head::Softmax;
    else
      throw SchemaError("--head must be sigmoid or softmax, got " + head_name);

    if (describe->parsed()) {
      Architecture arch = load_arch_file(arch_paths.at(0));
      DerivedDims dims = validate(arch);
      std::cout << describe_table(arch, dims);
      BoundReport rep = eval_bounds(arch, n, eps, zeta, pc, variant, stat_eps);
      std::cout << bound_table(rep);
      nlohmann::ordered_json j = bound_json(rep);
      if (rad_b && rad_margin) {
        RademacherParams rp;
        rp.bx = 1.0;
        rp.bw = *rad_b;
        rp.pool = arch.pool;
        rp.depth = arch.depth();
        rp.input_rows = arch.input_rows;
        rp.input_cols = arch.input_cols;
        rp.output_dim = arch.output_dim;
        RademacherResult rr = eval_rademacher(rp, n, *rad_margin, eps);
        std::cout << "rademacher complexity = " << rr.complexity
                  << ", margin excess = " << rr.margin_excess << "\n";
        j["rademacher_complexity"] = rr.complexity;
        j["rademacher_margin_excess"] = rr.margin_excess;
      }
      if (!out_path.empty()) write_out(out_path, j.dump(2) + "\n");
      return 0;
    }

    if (compare->parsed()) {
      if (arch_paths.size() < 2) throw SchemaError("compare needs at least two --arch files");
      nlohmann::ordered_json all = nlohmann::ordered_json::array();
      for (const std::string& path : arch_paths) {
        Architecture arch = load_arch_file(path);
        BoundReport rep = eval_bounds(arch, n, eps, zeta, pc, variant);
        std::cout << "== " << path << "\n";
        std::cout << "d = " << rep.total_params << ", theta = " << rep.theta << "\n";
        std::cout << bound_table(rep);
        nlohmann::ordered_json j = bound_json(rep);
        j["arch"] = path;
        all.push_back(j);
      }
      if (!out_path.empty()) write_out(out_path, all.dump(2) + "\n");
      return 0;
    }

    if (dnncmp->parsed()) {
      Architecture arch = load_arch_file(arch_paths.at(0));
      std::ifstream in(dnn_path);
      if (!in) throw SchemaError("cannot read DNN comparator file: " + dnn_path);
      nlohmann::json dj = nlohmann::json::parse(in);
      DnnParams dnn;
      dnn.depth = dj.at("l").get<int>();
      dnn.total_params = dj.at("d").get<long long>();
      dnn.max_width = dj.at("max_width").get<int>();
      dnn.r_hat = dj.at("r_hat").get<double>();
      dnn.tau = dj.at("tau").get<double>();
      BoundReport rep = eval_bounds(arch, n, eps, std::nullopt, pc);
      const double dnn_bound = eval_dnn_bound(dnn, n, eps, pc);
      std::cout.precision(6);
      std::cout << "cnn generalization bound = " << rep.gen_bound << "\n";
      std::cout << "dnn generalization bound = " << dnn_bound << " (c_n = " << pc.c_n << ")\n";
      std::cout << "ratio dnn/cnn            = " << dnn_bound / rep.gen_bound << "\n";
      if (!out_path.empty()) {
        nlohmann::ordered_json j;
        j["cnn_gen_bound"] = rep.gen_bound;
        j["dnn_gen_bound"] = dnn_bound;
        j["ratio"] = dnn_bound / rep.gen_bound;
        write_out(out_path, j.dump(2) + "\n");
      }
      return 0;
    }

    if (gradcheck->parsed()) {
      Architecture arch = load_arch_file(arch_paths.at(0));
      return finish_check(gradient_check(arch, trials, seed, tol, head, fd_h, threads),
                          out_path);
    }
    if (vbounds->parsed()) {
      Architecture arch = load_arch_file(arch_paths.at(0));
      return finish_check(check_norm_bounds(arch, trials, seed, threads), out_path);
    }
    if (jcheck->parsed()) {
      Architecture arch = load_arch_file(arch_paths.at(0));
      return finish_check(check_jacobian_bounds(arch, trials, seed, threads), out_path);
    }
    if (hcheck->parsed()) {
      Architecture arch = load_arch_file(arch_paths.at(0));
      VerifyReport rep = hessian_ratio(arch, trials, seed, strict, threads);
      return finish_check(rep, out_path);
    }

    if (converge->parsed()) {
      Architecture arch = load_arch_file(arch_paths.at(0));
      DataModel dm = make_data_model(arch, seed);
      ConvergenceResult res = convergence_experiment(arch, dm, parse_n_list(n_list_csv),
                                                     trials, m_w, ref_factor, seed, eps, pc);
      std::cout << "n_ref = " << res.n_ref << ", m_w = " << res.m_w << "\n";
      std::cout << convergence_csv(res);
      std::cout.precision(6);
      std::cout << "slope_risk = " << res.slope_risk << ", slope_grad = " << res.slope_grad
                << "\n";
      if (!out_path.empty()) write_out(out_path, convergence_csv(res));
      return 0;
    }

    if (tail->parsed()) {
      Architecture arch = load_arch_file(arch_paths.at(0));
      std::vector<double> t_grid;
      std::stringstream ss(t_list_csv);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) t_grid.push_back(std::stod(item));
      Weights w = init_weights(arch, derive_seed(seed, 0xabcdef), 1.0);
      return finish_check(hoeffding_tail(arch, w, n, trials, t_grid, seed, threads),
                          out_path);
    }

    if (stationary->parsed()) {
      Architecture arch = load_arch_file(arch_paths.at(0));
      DataModel dm = make_data_model(arch, seed);
      std::vector<long long> n_list = parse_n_list(n_list_csv);
      const long long ref_n =
          ref_factor * *std::max_element(n_list.begin(), n_list.end());
      StationaryResult res =
          stationary_experiment(arch, dm, n_list, ref_n, steps, step_size, restarts, seed);
      std::cout << "n_ref = " << res.n_ref << "\n";
      std::cout << stationary_csv(res);
      std::cout.precision(6);
      std::cout << "slope = " << res.slope << "\n";
      if (!out_path.empty()) write_out(out_path, stationary_csv(res));
      return 0;
    }
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const BoundDomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
