#pragma once

// Numerical sign-change counting and the oscillation checks run against computed
// spectra. Verdicts have three tiers: a count that moves when the threshold is
// halved, the sampling is doubled or the mesh is refined is "inconclusive".

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "chainspec/fem.hpp"
#include "chainspec/sigma.hpp"

namespace chainspec {

struct SignCountPolicy {
  double eps_rel = 1e-8;
  std::size_t density = 32;  // samples per element
};

/// Alternations of sign after dropping samples with |f| <= eps_rel max|f|.
/// nullopt when every sample is below the threshold (identically zero).
inline std::optional<int> count_sign_changes(std::span<const double> f, const SignCountPolicy& policy = {}) {
  if (f.size() < 2) throw std::invalid_argument("sign-change count needs at least 2 samples");
  double mx = 0.0;
  for (double v : f) mx = std::max(mx, std::abs(v));
  const double thr = policy.eps_rel * mx;
  int count = 0, last = 0;
  bool any = false;
  for (double v : f) {
    if (!(std::abs(v) > thr)) continue;
    const int s = v > 0.0 ? 1 : -1;
    if (any && s != last) ++count;
    last = s;
    any = true;
  }
  if (!any) return std::nullopt;
  return count;
}

inline std::vector<double> sample_points(const Mesh& mesh, std::size_t density) {
  std::vector<double> xs;
  xs.reserve(mesh.element_count() * density + 1);
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const double a = mesh.nodes[e], h = mesh.nodes[e + 1] - a;
    for (std::size_t i = 0; i < density; ++i) xs.push_back(a + h * static_cast<double>(i) / static_cast<double>(density));
  }
  xs.push_back(1.0);
  return xs;
}

enum class Verdict { pass, fail, inconclusive };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    default: return "inconclusive";
  }
}

struct CheckRecord {
  std::string name;
  int index = -1;  // eigen-index n, or -1 when not applicable
  nlohmann::json expected;
  nlohmann::json observed;
  Verdict verdict = Verdict::pass;
  double margin = 0.0;
  std::string detail;
};

inline nlohmann::json to_json(const CheckRecord& r) {
  nlohmann::json j{{"name", r.name}, {"expected", r.expected}, {"observed", r.observed},
                   {"verdict", to_string(r.verdict)}, {"margin", r.margin}};
  if (r.index >= 0) j["n"] = r.index;
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j;
}

struct VerificationReport {
  std::vector<CheckRecord> checks;

  void add(CheckRecord r) { checks.push_back(std::move(r)); }
  void append(const std::vector<CheckRecord>& more) { checks.insert(checks.end(), more.begin(), more.end()); }

  [[nodiscard]] std::size_t count(Verdict v) const {
    return static_cast<std::size_t>(
        std::count_if(checks.begin(), checks.end(), [v](const CheckRecord& r) { return r.verdict == v; }));
  }
  [[nodiscard]] bool all_passed() const { return count(Verdict::fail) == 0; }
};

namespace detail {

inline std::vector<double> derivative_samples(const Spectrum& s, std::size_t n, std::size_t density) {
  std::vector<double> out;
  for (double x : sample_points(s.mesh(), density)) out.push_back(s.value_slope(n, x).slope);
  return out;
}

inline std::vector<double> value_samples(const Spectrum& s, std::size_t n, std::size_t density) {
  std::vector<double> out;
  for (double x : sample_points(s.mesh(), density)) out.push_back(s.value_slope(n, x).value);
  return out;
}

struct CountVariants {
  std::optional<int> base;
  bool stable = true;
  nlohmann::json all;
};

// Base count plus the threshold-halved, density-doubled and (optionally) mesh-doubled recounts.
template <class Sampler>
CountVariants count_with_variants(const Spectrum& s, const Spectrum* refined, std::size_t n,
                                  const SignCountPolicy& policy, Sampler sampler) {
  CountVariants cv;
  auto as_json = [](const std::optional<int>& c) { return c ? nlohmann::json(*c) : nlohmann::json(nullptr); };
  const auto base_samples = sampler(s, n, policy.density);
  cv.base = count_sign_changes(base_samples, policy);
  const auto half = count_sign_changes(base_samples, {policy.eps_rel / 2.0, policy.density});
  const auto dense = count_sign_changes(sampler(s, n, 2 * policy.density), policy);
  cv.all = {{"base", as_json(cv.base)}, {"eps_half", as_json(half)}, {"density_double", as_json(dense)}};
  cv.stable = half == cv.base && dense == cv.base;
  if (refined != nullptr && n < refined->size()) {
    const auto fine = count_sign_changes(sampler(*refined, n, policy.density), policy);
    cv.all["mesh_double"] = as_json(fine);
    cv.stable = cv.stable && fine == cv.base;
  }
  return cv;
}

}  // namespace detail

/// Relative gaps between consecutive eigenvalues, plus absence of suspected double roots.
inline std::vector<CheckRecord> verify_simplicity(std::span<const double> eigenvalues,
                                                  std::span<const double> suspected_double = {},
                                                  double gap_tol = 1e-6) {
  std::vector<CheckRecord> out;
  if (eigenvalues.size() < 2) {
    out.push_back({"eigenvalue simple", 0, "gap > " + detail::num(gap_tol), "single eigenvalue", Verdict::pass, 0.0,
                   "vacuous"});
  } else {
    for (std::size_t n = 0; n + 1 < eigenvalues.size(); ++n) {
      const double gap = (eigenvalues[n + 1] - eigenvalues[n]) / std::abs(eigenvalues[n]);
      out.push_back({"eigenvalue simple", static_cast<int>(n), "relative gap > " + detail::num(gap_tol), gap,
                     gap > gap_tol ? Verdict::pass : Verdict::fail, gap, {}});
    }
  }
  out.push_back({"no double roots of characteristic", -1, 0, suspected_double.size(),
                 suspected_double.empty() ? Verdict::pass : Verdict::fail, 0.0,
                 suspected_double.empty() ? std::string{} : "suspected at " + detail::num(suspected_double[0])});
  return out;
}

/// SC(u_n') == n for n < count.
inline std::vector<CheckRecord> verify_main_theorem(const Spectrum& s, std::size_t count,
                                                    const SignCountPolicy& policy = {},
                                                    const Spectrum* refined = nullptr) {
  std::vector<CheckRecord> out;
  for (std::size_t n = 0; n < std::min(count, s.size()); ++n) {
    const auto cv = detail::count_with_variants(s, refined, n, policy, detail::derivative_samples);
    CheckRecord r{"derivative sign changes", static_cast<int>(n), n, cv.all, Verdict::pass, 0.0, {}};
    if (!cv.stable)
      r.verdict = Verdict::inconclusive;
    else if (!cv.base || *cv.base != static_cast<int>(n))
      r.verdict = Verdict::fail;
    out.push_back(std::move(r));
  }
  return out;
}

/// Zeros of u_n' in the open interval, located by bisection between samples of opposite sign.
inline std::vector<double> locate_derivative_zeros(const Spectrum& s, std::size_t n, const SignCountPolicy& policy,
                                                   double tol = 1e-10) {
  const auto xs = sample_points(s.mesh(), policy.density);
  std::vector<double> f;
  for (double x : xs) f.push_back(s.value_slope(n, x).slope);
  double mx = 0.0;
  for (double v : f) mx = std::max(mx, std::abs(v));
  const double thr = policy.eps_rel * mx;
  std::vector<double> zeros;
  std::optional<std::size_t> prev;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(std::abs(f[i]) > thr)) continue;
    if (prev && (f[i] > 0.0) != (f[*prev] > 0.0)) {
      double lo = xs[*prev], hi = xs[i];
      const bool lo_pos = f[*prev] > 0.0;
      while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if ((s.value_slope(n, mid).slope > 0.0) == lo_pos)
          lo = mid;
        else
          hi = mid;
      }
      zeros.push_back(0.5 * (lo + hi));
    }
    prev = i;
  }
  return zeros;
}

/// (P u_n'')(0) != 0 and (P u_n'')(x*) != 0 at every interior zero x* of u_n', relative
/// to max |P u_n''|.
inline std::vector<CheckRecord> verify_nonvanishing(const Spectrum& s, std::size_t count,
                                                    const SignCountPolicy& policy = {}, double threshold = 1e-6) {
  std::vector<CheckRecord> out;
  for (std::size_t n = 0; n < std::min(count, s.size()); ++n) {
    double mx = 0.0;
    for (double x : sample_points(s.mesh(), policy.density)) mx = std::max(mx, std::abs(s.evaluate(n, x).moment));
    const double m0 = std::abs(s.evaluate(n, 0.0).moment) / mx;
    out.push_back({"moment nonzero at 0", static_cast<int>(n), "> " + detail::num(threshold), m0,
                   m0 > threshold ? Verdict::pass : Verdict::fail, m0, {}});
    const auto zeros = locate_derivative_zeros(s, n, policy);
    double worst = INFINITY;
    double where = 0.0;
    for (double z : zeros) {
      const double m = std::abs(s.evaluate(n, z).moment) / mx;
      if (m < worst) {
        worst = m;
        where = z;
      }
    }
    CheckRecord r{"moment nonzero at zeros of u'", static_cast<int>(n), "> " + detail::num(threshold),
                  nlohmann::json{{"zeros", zeros.size()}}, Verdict::pass, 0.0, {}};
    if (zeros.empty()) {
      r.detail = "no interior zeros";
    } else {
      r.observed["min_relative_moment"] = worst;
      r.observed["at"] = where;
      r.margin = worst;
      r.verdict = worst > threshold ? Verdict::pass : Verdict::fail;
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// n-1 <= SC(u_n) <= n, sharpened to SC(u_n) == n when alpha~ lambda_n <= gamma sigma(1);
/// also SC(u_n) in {SC(u_n') - 1, SC(u_n')}.
inline std::vector<CheckRecord> verify_y_sign_range(const Spectrum& s, const TildeProblem& tilde, std::size_t count,
                                                    const SignCountPolicy& policy = {},
                                                    const Spectrum* refined = nullptr) {
  std::vector<CheckRecord> out;
  for (std::size_t n = 0; n < std::min(count, s.size()); ++n) {
    const auto cv = detail::count_with_variants(s, refined, n, policy, detail::value_samples);
    const auto cd = detail::count_with_variants(s, refined, n, policy, detail::derivative_samples);
    const double lam = s.eigenvalues()[n];
    const bool sharp = tilde.alpha_tilde * lam <= tilde.gamma_sigma1;
    const int ni = static_cast<int>(n);
    CheckRecord r{"eigenfunction sign changes", ni, sharp ? nlohmann::json(ni) : nlohmann::json{{"min", ni - 1}, {"max", ni}},
                  cv.all, Verdict::pass, tilde.gamma_sigma1 - tilde.alpha_tilde * lam,
                  sharp ? "alpha~ lambda_n <= gamma sigma(1)" : "range only"};
    if (!cv.stable)
      r.verdict = Verdict::inconclusive;
    else if (!cv.base || (sharp ? *cv.base != ni : (*cv.base < ni - 1 || *cv.base > ni)))
      r.verdict = Verdict::fail;
    out.push_back(std::move(r));

    CheckRecord m{"value and derivative counts consistent", ni, "SC(u') - 1 <= SC(u) <= SC(u')",
                  nlohmann::json{{"values", cv.all["base"]}, {"derivative", cd.all["base"]}}, Verdict::pass, 0.0, {}};
    if (!cv.stable || !cd.stable)
      m.verdict = Verdict::inconclusive;
    else if (!cv.base || !cd.base || *cv.base > *cd.base || *cv.base < *cd.base - 1)
      m.verdict = Verdict::fail;
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace chainspec
