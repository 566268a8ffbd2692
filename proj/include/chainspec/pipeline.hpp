#pragma once

// The complete verification run on one problem: reduction chain, both solvers,
// and every oscillation and K-operator check, collected in one report.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "chainspec/chain_transform.hpp"
#include "chainspec/fem.hpp"
#include "chainspec/k_operator.hpp"
#include "chainspec/oscillation.hpp"
#include "chainspec/problem.hpp"
#include "chainspec/shooting.hpp"
#include "chainspec/sigma.hpp"

namespace chainspec {

struct PipelineOptions {
  std::size_t mesh_n = 256;
  std::size_t k = 8;
  SignCountPolicy policy{};
  std::uint64_t seed = 12345;
  std::size_t trials = 200;
  std::size_t k_mesh = 64;
  ShootingOptions shooting{};
  std::size_t oscillation_count = 8;  // n = 0..7 for the sign-change checks
  std::size_t moment_count = 6;       // n = 0..5 for the moment checks
  std::size_t equivalence_count = 6;
};

/// 64-bit FNV-1a of the canonical problem serialization, as hex.
inline std::string problem_hash(const ProblemSpec& spec) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : serialize_problem(spec)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline CheckRecord tolerance_record(std::string name, double observed, double tol) {
  return {std::move(name), -1, "< " + num(tol), observed, observed < tol ? Verdict::pass : Verdict::fail, tol - observed,
          {}};
}

inline double max_relative_difference(const std::vector<double>& a, const std::vector<double>& b, std::size_t count) {
  double worst = 0.0;
  for (std::size_t i = 0; i < std::min({count, a.size(), b.size()}); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::abs(b[i]));
  return worst;
}

}  // namespace detail

/// Normalization, positivity, flux, weak identity and atom jumps of sigma.
inline std::vector<CheckRecord> sigma_checks(const ReductionChain& ch, std::uint64_t seed) {
  std::vector<CheckRecord> out;
  const auto& sd = ch.sigma;
  out.push_back({"sigma uniformly positive", -1, "> 0", sd.min_sigma, sd.min_sigma > 0.0 ? Verdict::pass : Verdict::fail,
                 sd.min_sigma, {}});
  out.push_back({"gamma positive", -1, "> 0", sd.gamma, sd.gamma > 0.0 ? Verdict::pass : Verdict::fail, sd.gamma, {}});
  out.push_back(detail::tolerance_record("sigma integral is 1", std::abs(sd.sigma.total() - 1.0), 1e-10));

  bool monotone = true;
  double prev = ch.omega(0.0);
  for (int i = 1; i <= 1000; ++i) {
    const double v = ch.omega(i / 1000.0);
    if (!(v > prev)) monotone = false;
    prev = v;
  }
  out.push_back({"omega strictly increasing", -1, true, monotone, monotone ? Verdict::pass : Verdict::fail, 0.0, {}});

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::array<double, 4> c{};
    for (double& x : c) x = dist(rng);
    auto v = [c](double t) {
      return ValueSlope{t * (c[0] + t * (c[1] + t * (c[2] + t * c[3]))),
                        c[0] + t * (2 * c[1] + t * (3 * c[2] + t * 4 * c[3]))};
    };
    worst = std::max(worst, sigma_weak_residual(ch.hat, sd, v));
  }
  out.push_back(detail::tolerance_record("sigma weak identity residual", worst, 1e-8));

  double jump = 0.0;
  for (const auto& j : sd.jumps) jump = std::max(jump, std::abs(j.flux_right - j.flux_left - j.weight * j.sigma));
  out.push_back(detail::tolerance_record("sigma flux jumps at atoms", jump, 1e-8));
  return out;
}

/// Sign-change counts of u' from the FEM and the shooting eigenfunctions of the same pencil.
inline std::vector<CheckRecord> shooting_count_checks(const Spectrum& fem, const PencilForm& form,
                                                      const std::vector<double>& roots, std::size_t count,
                                                      const SignCountPolicy& policy) {
  std::vector<CheckRecord> out;
  for (std::size_t n = 0; n < std::min({count, roots.size(), fem.size()}); ++n) {
    const auto ef = shoot_eigenfunction(form, roots[n]);
    const auto a = count_sign_changes(detail::derivative_samples(fem, n, policy.density), policy);
    const auto b = count_sign_changes(ef.du, policy);
    const bool ok = a && b && *a == *b;
    out.push_back({"FEM and shooting derivative counts agree", static_cast<int>(n), a ? nlohmann::json(*a) : nullptr,
                   b ? nlohmann::json(*b) : nullptr, ok ? Verdict::pass : Verdict::fail, 0.0, {}});
  }
  return out;
}

struct VerifyOutcome {
  VerificationReport report;
  bool hypothesis_ok = true;
  std::string diagnostic;
  nlohmann::json json;
};

/// Full chain tau -> hat -> positivity -> sigma -> tilde -> FEM and shooting -> all checks.
/// Stops after the positivity record when the hypothesis fails.
inline VerifyOutcome verify_problem(const ProblemSpec& spec, const PipelineOptions& opt = {}) {
  VerifyOutcome vo;
  auto& rep = vo.report;
  ReductionChain ch;
  ch.spec = spec;
  ch.tau = build_tau(spec.interfaces);
  ch.hat = push_forward(spec, ch.tau);
  ch.positivity = check_pencil_positivity(ch.hat, opt.mesh_n);
  rep.add({"A(0) positive definite", -1, true, ch.positivity.positive_definite,
           ch.positivity.positive_definite ? Verdict::pass : Verdict::fail, ch.positivity.margin,
           ch.positivity.diagnostic});
  try {
    if (!ch.positivity.positive_definite) throw HypothesisViolation(ch.positivity.diagnostic);
    ch.sigma = solve_sigma(ch.hat);
  } catch (const HypothesisViolation& e) {
    vo.hypothesis_ok = false;
    vo.diagnostic = e.what();
  }

  if (vo.hypothesis_ok) {
    ch.omega = build_omega(ch.sigma);
    ch.tilde = transform_tilde(ch.hat, ch.sigma, ch.omega);
    rep.append(sigma_checks(ch, opt.seed));

    const PencilForm hat_form = form_of(ch.hat), tilde_form = form_of(ch.tilde);
    const Spectrum hat = solve_pencil(hat_form, opt.mesh_n, opt.k);
    const Spectrum tilde = solve_pencil(tilde_form, opt.mesh_n, opt.k);
    const Spectrum tilde_fine = solve_pencil(tilde_form, 2 * opt.mesh_n, opt.k);
    const Spectrum hat_fine = solve_pencil(hat_form, 2 * opt.mesh_n, opt.equivalence_count);
    const auto shoot = find_eigenvalues(hat_form, opt.k, opt.shooting);

    // Compared on the refined meshes: the tilde coefficients can vary strongly with sigma and
    // their discretization error at the base mesh may exceed the tolerance on its own.
    rep.add(detail::tolerance_record(
        "hat and tilde spectra agree",
        detail::max_relative_difference(tilde_fine.eigenvalues(), hat_fine.eigenvalues(), opt.equivalence_count),
        1e-7));
    {
      SigmaOptions other;
      other.extra_shift = 5.0;
      const SigmaData sd2 = solve_sigma(ch.hat, other);
      const TildeProblem t2 = transform_tilde(ch.hat, sd2, build_omega(sd2));
      // A larger shift makes sigma vary more, so both are compared one refinement further.
      const Spectrum base = solve_pencil(tilde_form, 4 * opt.mesh_n, opt.equivalence_count);
      const Spectrum alt = solve_pencil(form_of(t2), 4 * opt.mesh_n, opt.equivalence_count);
      CheckRecord fam = detail::tolerance_record(
          "tilde spectrum independent of the sigma choice",
          detail::max_relative_difference(alt.eigenvalues(), base.eigenvalues(), opt.equivalence_count), 1e-7);
      fam.detail = "shifts " + detail::num(ch.sigma.shift) + " and " + detail::num(sd2.shift);
      rep.add(std::move(fam));
    }
    CheckRecord agree = detail::tolerance_record(
        "FEM and shooting eigenvalues agree", detail::max_relative_difference(shoot.eigenvalues, hat.eigenvalues(), opt.k),
        1e-5);
    if (!shoot.complete) {
      agree.verdict = Verdict::fail;
      agree.detail = shoot.diagnostic;
    }
    rep.add(std::move(agree));

    rep.append(verify_simplicity(tilde.eigenvalues(), shoot.suspected_double));
    rep.append(verify_main_theorem(tilde, opt.oscillation_count, opt.policy, &tilde_fine));
    rep.append(verify_nonvanishing(tilde, opt.moment_count, opt.policy));
    rep.append(verify_y_sign_range(tilde, ch.tilde, opt.oscillation_count, opt.policy, &tilde_fine));
    rep.append(shooting_count_checks(hat, hat_form, shoot.eigenvalues, opt.oscillation_count, opt.policy));

    const KOperator K(tilde_form, opt.k_mesh);
    rep.add(verify_k_spectrum(K, std::min<std::size_t>(opt.equivalence_count, K.mesh()->dof_count())));
    rep.add(verify_variation_diminishing(K, opt.trials, opt.seed, opt.policy).record());
  }

  vo.json = {{"problem_hash", problem_hash(spec)},
             {"mode", to_string(spec.mode)},
             {"hypothesis", vo.hypothesis_ok ? "verified" : "violated"},
             {"policy", {{"eps_rel", opt.policy.eps_rel}, {"density", opt.policy.density}}},
             {"mesh", {{"n", opt.mesh_n}, {"k_operator_n", opt.k_mesh}}},
             {"seeds", {{"sigma_tests", opt.seed}, {"variation_trials", opt.seed}}},
             {"summary",
              {{"pass", rep.count(Verdict::pass)},
               {"fail", rep.count(Verdict::fail)},
               {"inconclusive", rep.count(Verdict::inconclusive)}}}};
  if (!vo.diagnostic.empty()) vo.json["diagnostic"] = vo.diagnostic;
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& r : rep.checks) checks.push_back(to_json(r));
  vo.json["checks"] = std::move(checks);
  return vo;
}

}  // namespace chainspec
