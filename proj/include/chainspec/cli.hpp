#pragma once

// Commands behind the chainspec executable. Each returns the process exit code
// and writes human output to the given streams.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "chainspec/pipeline.hpp"

namespace chainspec::cli {

enum ExitCode : int { ok = 0, usage = 1, invalid_problem = 2, hypothesis_violated = 3, check_failed = 4 };

enum class Method { fem, shoot, both };

struct RunConfig {
  std::string input;
  std::size_t mesh_n = 256;
  std::size_t k = 8;
  Method method = Method::fem;
  std::string out_dir;
  double eps_rel = 1e-8;
  std::uint64_t seed = 12345;
  bool dump_sigma = false;
  bool dump_eigenfunctions = false;
  bool dump_scan = false;
  double lambda_cap = 1e6;
};

struct SweepSpec {
  std::string parameter;  // alpha, beta, eta_<i>, alpha_<i>
  double from = 0.0;
  double to = 0.0;
  double step = 0.0;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void check_config(const RunConfig& cfg) {
  if (cfg.k < 1) throw UsageError("--k must be at least 1");
  if (cfg.mesh_n < 8) throw UsageError("--mesh-n must be at least 8");
  if (!(cfg.eps_rel > 0.0)) throw UsageError("--eps-rel must be positive");
  if (!(cfg.lambda_cap > 0.0)) throw UsageError("--lambda-cap must be positive");
  if (!std::filesystem::exists(cfg.input)) throw UsageError("input file not found: " + cfg.input);
  if (!cfg.out_dir.empty()) std::filesystem::create_directories(cfg.out_dir);
}

inline ProblemSpec load(const RunConfig& cfg) {
  std::ifstream in(cfg.input);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_problem(ss.str());
}

inline std::filesystem::path out_path(const RunConfig& cfg, const std::string& name) {
  return std::filesystem::path(cfg.out_dir.empty() ? "." : cfg.out_dir) / name;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(15) << v;
  return os.str();
}

inline ShootingOptions shooting_options(const RunConfig& cfg) {
  ShootingOptions s;
  s.lambda_cap = cfg.lambda_cap;
  return s;
}

// Runs f, mapping library exceptions onto exit codes.
template <class F>
int guarded(std::ostream& err, F&& f) {
  try {
    return f();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return usage;
  } catch (const SchemaError& e) {
    err << "invalid problem: " << e.what() << "\n";
    return invalid_problem;
  } catch (const InvariantViolation& e) {
    err << "invalid problem: " << e.what() << "\n";
    return invalid_problem;
  } catch (const HypothesisViolation& e) {
    err << "hypothesis violated: " << e.what() << "\n";
    return hypothesis_violated;
  }
}

}  // namespace detail

inline int run_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    detail::check_config(cfg);
    const ProblemSpec spec = detail::load(cfg);
    const auto tau = build_tau(spec.interfaces);
    const HatPencil hat = push_forward(spec, tau);
    const PencilForm form = form_of(hat);

    std::optional<Spectrum> fem;
    std::optional<ShootingResult> shoot;
    if (cfg.method != Method::shoot) fem = solve_pencil(form, cfg.mesh_n, cfg.k);
    if (cfg.method != Method::fem) {
      shoot = find_eigenvalues(form, cfg.k, detail::shooting_options(cfg));
      if (!shoot->complete) err << "warning: " << shoot->diagnostic << "\n";
      if (!shoot->suspected_double.empty())
        err << "warning: suspected non-simple eigenvalue near " << shoot->suspected_double.front() << "\n";
    }

    out << "n";
    if (fem) out << ",fem";
    if (shoot) out << ",shoot";
    if (fem && shoot) out << ",rel_diff";
    out << "\n";
    for (std::size_t n = 0; n < cfg.k; ++n) {
      const bool has_f = fem && n < fem->size();
      const bool has_s = shoot && n < shoot->eigenvalues.size();
      if (!has_f && !has_s) break;
      out << n;
      if (fem) out << "," << (has_f ? detail::fmt(fem->eigenvalues()[n]) : "");
      if (shoot) out << "," << (has_s ? detail::fmt(shoot->eigenvalues[n]) : "");
      if (fem && shoot)
        out << ","
            << (has_f && has_s ? detail::fmt(std::abs(shoot->eigenvalues[n] / fem->eigenvalues()[n] - 1.0)) : "");
      out << "\n";
    }

    if (cfg.dump_eigenfunctions && fem) {
      std::vector<double> xs;
      for (int i = 0; i <= 1000; ++i) xs.push_back(i / 1000.0);
      std::ofstream f(detail::out_path(cfg, "eigenfunctions.csv"));
      f << "x";
      for (std::size_t n = 0; n < fem->size(); ++n) f << ",y" << n << ",dy" << n;
      f << "\n";
      std::vector<PulledBack> cols;
      for (std::size_t n = 0; n < fem->size(); ++n)
        cols.push_back(pull_back_function([&](double t) { return fem->value_slope(n, t); }, tau, xs));
      for (std::size_t i = 0; i < xs.size(); ++i) {
        f << detail::fmt(xs[i]);
        for (const auto& c : cols) f << "," << detail::fmt(c.y[i]) << "," << detail::fmt(c.dy[i]);
        f << "\n";
      }
    }
    if (cfg.dump_scan && shoot) {
      std::ofstream f(detail::out_path(cfg, "scan.csv"));
      f << "lambda,D_relative\n";
      for (const auto& p : shoot->scan) f << detail::fmt(p.lambda) << "," << detail::fmt(p.relative) << "\n";
    }
    if (cfg.dump_sigma) {
      const SigmaData sd = solve_sigma(hat);
      const MonotoneMap omega = build_omega(sd);
      std::ofstream f(detail::out_path(cfg, "sigma.csv"));
      f << "t,sigma,omega\n";
      for (std::size_t i = 0; i < sd.nodes.size(); ++i)
        f << detail::fmt(sd.nodes[i]) << "," << detail::fmt(sd.values[i]) << "," << detail::fmt(omega(sd.nodes[i]))
          << "\n";
    }
    return static_cast<int>(ok);
  });
}

inline int run_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    detail::check_config(cfg);
    const ProblemSpec spec = detail::load(cfg);
    if (spec.mode != ProblemMode::theorem)
      throw InvariantViolation("verify requires a theorem-mode problem (mode is " + to_string(spec.mode) + ")");
    PipelineOptions opt;
    opt.mesh_n = cfg.mesh_n;
    opt.k = std::max<std::size_t>(cfg.k, 8);
    opt.policy.eps_rel = cfg.eps_rel;
    opt.seed = cfg.seed;
    opt.shooting = detail::shooting_options(cfg);
    const VerifyOutcome vo = verify_problem(spec, opt);
    const std::string text = vo.json.dump(2) + "\n";
    if (!cfg.out_dir.empty()) std::ofstream(detail::out_path(cfg, "report.json")) << text;
    out << text;
    if (!vo.hypothesis_ok) {
      err << "hypothesis violated: " << vo.diagnostic << "\n";
      return static_cast<int>(hypothesis_violated);
    }
    const auto inconclusive = vo.report.count(Verdict::inconclusive);
    if (inconclusive > 0) err << "warning: " << inconclusive << " inconclusive check(s)\n";
    if (!vo.report.all_passed()) {
      err << vo.report.count(Verdict::fail) << " check(s) failed\n";
      return static_cast<int>(check_failed);
    }
    return static_cast<int>(ok);
  });
}

namespace detail {

inline void set_parameter(ProblemSpec& spec, const std::string& name, double value) {
  auto indexed = [&](const std::string& prefix) -> std::optional<std::size_t> {
    if (name.rfind(prefix, 0) != 0 || name.size() == prefix.size()) return std::nullopt;
    const std::string rest = name.substr(prefix.size());
    if (rest.find_first_not_of("0123456789") != std::string::npos) return std::nullopt;
    const auto i = static_cast<std::size_t>(std::stoul(rest));
    if (i >= spec.interfaces.size()) throw UsageError("sweep parameter index out of range: " + name);
    return i;
  };
  if (name == "alpha")
    spec.alpha = value;
  else if (name == "beta")
    spec.beta = value;
  else if (auto i = indexed("eta_"))
    spec.interfaces[*i].eta = value;
  else if (auto j = indexed("alpha_"))
    spec.interfaces[*j].alpha_i = value;
  else
    throw UsageError("unknown sweep parameter: " + name + " (expected alpha, beta, eta_<i>, alpha_<i>)");
}

}  // namespace detail

/// One CSV row per parameter value: lambda_0..lambda_{k-1}, SC(u_n'), and the first n
/// with alpha~ lambda_n > gamma sigma(1) (-1 if none).
inline int run_sweep(const RunConfig& cfg, const SweepSpec& sweep, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    detail::check_config(cfg);
    if (!(sweep.step > 0.0) || !(sweep.to >= sweep.from) || !std::isfinite(sweep.to) || !std::isfinite(sweep.from))
      throw UsageError("empty sweep range");
    const ProblemSpec base = detail::load(cfg);
    const auto rows = static_cast<std::size_t>(std::floor((sweep.to - sweep.from) / sweep.step + 1e-9)) + 1;
    const SignCountPolicy policy{cfg.eps_rel, 32};

    std::ostringstream csv;
    csv << sweep.parameter;
    for (std::size_t n = 0; n < cfg.k; ++n) csv << ",lambda_" << n;
    for (std::size_t n = 0; n < cfg.k; ++n) csv << ",sc_" << n;
    csv << ",first_above_threshold\n";
    for (std::size_t r = 0; r < rows; ++r) {
      const double value = sweep.from + static_cast<double>(r) * sweep.step;
      ProblemSpec spec = base;
      detail::set_parameter(spec, sweep.parameter, value);
      require_valid(spec);
      const ReductionChain ch = build_chain(spec, cfg.mesh_n);
      const Spectrum s = solve_pencil(form_of(ch.hat), cfg.mesh_n, cfg.k);
      csv << detail::fmt(value);
      for (std::size_t n = 0; n < cfg.k; ++n) csv << "," << detail::fmt(s.eigenvalues()[n]);
      int first = -1;
      for (std::size_t n = 0; n < cfg.k; ++n) {
        const auto c = count_sign_changes(chainspec::detail::derivative_samples(s, n, policy.density), policy);
        csv << "," << (c ? std::to_string(*c) : "");
        if (first < 0 && ch.tilde.alpha_tilde * s.eigenvalues()[n] > ch.tilde.gamma_sigma1) first = static_cast<int>(n);
      }
      csv << "," << first << "\n";
    }
    if (!cfg.out_dir.empty()) std::ofstream(detail::out_path(cfg, "sweep.csv")) << csv.str();
    out << csv.str();
    return static_cast<int>(ok);
  });
}

}  // namespace chainspec::cli
