// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "chainspec/chainspec.hpp"
#include "oracles.hpp"

using namespace chainspec;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool ok = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

PencilForm hat_form(const ProblemSpec& spec) { return form_of(push_forward(spec, build_tau(spec.interfaces))); }

double max_rel(const std::vector<double>& a, const std::vector<double>& b, std::size_t k) {
  double w = 0.0;
  for (std::size_t i = 0; i < k; ++i) w = std::max(w, std::abs(a.at(i) / b.at(i) - 1.0));
  return w;
}

// Collects failing records into the outcome.
void require_all(const std::vector<CheckRecord>& rs, const std::string& fixture, Outcome& o) {
  for (const auto& r : rs) {
    if (r.verdict == Verdict::pass) continue;
    o.ok = false;
    if (o.detail.size() < 400)
      o.detail += " " + fixture + ":" + r.name + (r.index >= 0 ? "[" + std::to_string(r.index) + "]" : "") + "=" +
                  to_string(r.verdict);
  }
}

Outcome cantilever_oracle() {
  const auto t0 = Clock::now();
  const auto form = hat_form(oracle::load_fixture("cantilever"));
  const double exact = oracle::cantilever_lambda(0);
  const double fem = solve_pencil(form, 64, 1).eigenvalues()[0];
  const double shoot = find_eigenvalues(form, 1).eigenvalues.at(0);
  const double t = seconds_since(t0);
  const double ef = std::abs(fem / exact - 1.0), es = std::abs(shoot / exact - 1.0);
  return {ef < 1e-4 && es < 1e-4 && t < 5.0,
          "fem err " + num(ef) + ", shooting err " + num(es) + ", " + num(t) + " s"};
}

Outcome cross_method() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  bool complete = true;
  for (const auto& name : oracle::theorem_fixtures()) {
    const auto form = hat_form(oracle::load_fixture(name));
    const auto fem = solve_pencil(form, 512, 8);
    const auto sh = find_eigenvalues(form, 8);
    complete = complete && sh.complete && sh.eigenvalues.size() == 8;
    if (sh.eigenvalues.size() == 8) worst = std::max(worst, max_rel(sh.eigenvalues, fem.eigenvalues(), 8));
  }
  const double t = seconds_since(t0);
  return {complete && worst < 1e-5 && t < 60.0, "max rel diff " + num(worst) + ", " + num(t) + " s"};
}

Outcome reduction_equivalence() {
  double hat_tilde = 0.0, family = 0.0;
  for (const auto& name : oracle::theorem_fixtures()) {
    const auto ch = build_chain(oracle::load_fixture(name));
    const auto tilde = form_of(ch.tilde);
    const auto h = solve_pencil(form_of(ch.hat), 512, 6);
    const auto t = solve_pencil(tilde, 512, 6);
    hat_tilde = std::max(hat_tilde, max_rel(t.eigenvalues(), h.eigenvalues(), 6));
    SigmaOptions other;
    other.extra_shift = 5.0;
    const SigmaData sd = solve_sigma(ch.hat, other);
    const auto alt = solve_pencil(form_of(transform_tilde(ch.hat, sd, build_omega(sd))), 1024, 6);
    const auto base = solve_pencil(tilde, 1024, 6);
    family = std::max(family, max_rel(alt.eigenvalues(), base.eigenvalues(), 6));
  }
  return {hat_tilde < 1e-7 && family < 1e-7, "hat/tilde " + num(hat_tilde) + ", sigma family " + num(family)};
}

struct TildeRun {
  ReductionChain chain;
  Spectrum base, fine;
};

TildeRun tilde_run(const std::string& name) {
  auto ch = build_chain(oracle::load_fixture(name));
  const auto form = form_of(ch.tilde);
  auto base = solve_pencil(form, 256, 8);
  auto fine = solve_pencil(form, 512, 8);
  return {std::move(ch), std::move(base), std::move(fine)};
}

Outcome oscillation_counts(const std::vector<TildeRun>& runs) {
  Outcome o;
  double min_gap = 1e300;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& run = runs[i];
    const auto form = form_of(run.chain.hat);
    const auto sh = find_eigenvalues(form, 8);
    const auto simple = verify_simplicity(run.base.eigenvalues(), sh.suspected_double);
    for (const auto& r : simple)
      if (r.index >= 0 && r.detail.empty()) min_gap = std::min(min_gap, r.margin);
    require_all(simple, oracle::theorem_fixtures()[i], o);
    require_all(verify_main_theorem(run.base, 8, {}, &run.fine), oracle::theorem_fixtures()[i], o);
  }
  o.detail = "min relative gap " + num(min_gap) + o.detail;
  return o;
}

Outcome moments(const std::vector<TildeRun>& runs) {
  Outcome o;
  double min_margin = 1e300;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto rs = verify_nonvanishing(runs[i].base, 6);
    for (const auto& r : rs)
      if (r.detail.empty()) min_margin = std::min(min_margin, r.margin);
    require_all(rs, oracle::theorem_fixtures()[i], o);
  }
  o.detail = "min margin " + num(min_margin) + o.detail;
  return o;
}

Outcome variation_diminishing() {
  std::size_t trials = 0, violations = 0, inconclusive = 0;
  for (const auto& name : oracle::theorem_fixtures()) {
    const KOperator K(form_of(build_chain(oracle::load_fixture(name)).tilde), 64);
    const auto rep = verify_variation_diminishing(K, 200, 12345);
    trials += rep.trials;
    violations += rep.violations.size();
    inconclusive += rep.inconclusive.size();
  }
  const double rate = static_cast<double>(inconclusive) / static_cast<double>(trials);
  return {violations == 0 && rate < 0.02, std::to_string(trials) + " trials, " + std::to_string(violations) +
                                              " violations, inconclusive rate " + num(rate)};
}

Outcome y_sign_range(const std::vector<TildeRun>& runs) {
  Outcome o;
  std::size_t exact = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto rs = verify_y_sign_range(runs[i].base, runs[i].chain.tilde, 8, {}, &runs[i].fine);
    for (const auto& r : rs)
      if (r.detail != "range only" && r.index >= 0 && r.verdict == Verdict::pass) ++exact;
    require_all(rs, oracle::theorem_fixtures()[i], o);
  }
  o.detail = std::to_string(exact) + " exact-count records" + o.detail;
  return o;
}

Outcome k_spectrum() {
  Outcome o;
  double worst = 0.0;
  for (const auto& name : oracle::theorem_fixtures()) {
    const KOperator K(form_of(build_chain(oracle::load_fixture(name)).tilde), 64);
    const auto r = verify_k_spectrum(K, 6);
    worst = std::max(worst, r.margin);
    require_all({r}, name, o);
  }
  o.detail = "max relative error " + num(worst) + o.detail;
  return o;
}

Outcome hypothesis_gating() {
  const std::string path = oracle::fixture_path("strongly_negative_q");
  const auto tmp = std::filesystem::temp_directory_path() / "chainspec_gating_report.json";
  const std::string cmd = std::string(CHAINSPEC_CLI_PATH) + " verify " + path + " > " + tmp.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::size_t checks = 0;
  std::string first;
  try {
    const auto j = nlohmann::json::parse(oracle::read_file(tmp.string()));
    checks = j["checks"].size();
    if (checks > 0) first = j["checks"][0]["name"].get<std::string>();
  } catch (const std::exception&) {
  }
  std::filesystem::remove(tmp);
  const bool q_ok = oracle::load_fixture("strongly_negative_q").q.on_piece(0, 0.5) == -1e4;
  return {code == 3 && checks == 1 && q_ok,
          "exit " + std::to_string(code) + ", " + std::to_string(checks) + " check(s) run: " + first};
}

Outcome convergence() {
  const auto form = hat_form(oracle::load_fixture("cantilever"));
  const double exact = oracle::cantilever_lambda(0);
  std::vector<double> err;
  for (std::size_t n : {16, 32, 64}) err.push_back(std::abs(solve_pencil(form, n, 1).eigenvalues()[0] - exact));
  const double r1 = err[0] / err[1], r2 = err[1] / err[2];
  return {r1 >= 8.0 && r2 >= 8.0, "ratios " + num(r1) + ", " + num(r2)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const char* label, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.ok ? "PASS " : "FAIL ") << label << ": " << o.detail << std::endl;
    if (!o.ok) ++failures;
  };

  report("1 cantilever oracle", cantilever_oracle);
  report("2 FEM and shooting agree on fixtures", cross_method);
  report("3 reduction equivalence and sigma invariance", reduction_equivalence);

  std::vector<TildeRun> runs;
  for (const auto& name : oracle::theorem_fixtures()) runs.push_back(tilde_run(name));
  report("4 simple spectrum and SC(u_n') = n", [&] { return oscillation_counts(runs); });
  report("5 nonvanishing moments", [&] { return moments(runs); });
  report("6 K is variation diminishing", variation_diminishing);
  report("7 sign counts of u_n", [&] { return y_sign_range(runs); });
  report("8 K spectrum correspondence", k_spectrum);
  report("9 hypothesis gating", hypothesis_gating);
  report("10 convergence order", convergence);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion(s) failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
