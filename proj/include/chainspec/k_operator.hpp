#pragma once

// The operator K = Q^{-1} A0^{-1} B Q on functions vanishing at 0, where Q is
// integration from 0 and A0, B are the discrete stiffness and mass of the
// classical problem. A D1 function is stored through the FEM DOF vector of its
// antiderivative, so Q and its inverse are exact.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "chainspec/fem.hpp"
#include "chainspec/oscillation.hpp"
#include "chainspec/pencil.hpp"
#include "chainspec/quadrature.hpp"

namespace chainspec {

/// Function on [0,1] with value 0 at 0, carried as the DOFs of its antiderivative.
class D1Function {
 public:
  D1Function(std::shared_ptr<const Mesh> mesh, Eigen::VectorXd primitive_dofs)
      : mesh_(std::move(mesh)), dofs_(std::move(primitive_dofs)) {
    if (dofs_.size() != static_cast<Eigen::Index>(mesh_->dof_count()))
      throw std::invalid_argument("D1 function DOF count does not match mesh");
  }

  /// Piecewise-linear function through the node values; values[0] must be 0.
  static D1Function piecewise_linear(std::shared_ptr<const Mesh> mesh, const std::vector<double>& values) {
    const std::size_t N = mesh->element_count();
    if (values.size() != N + 1) throw std::invalid_argument("need one value per mesh node");
    if (values[0] != 0.0) throw std::invalid_argument("D1 function must vanish at 0");
    Eigen::VectorXd d(static_cast<Eigen::Index>(2 * N));
    double acc = 0.0;
    for (std::size_t j = 1; j <= N; ++j) {
      acc += 0.5 * (values[j - 1] + values[j]) * (mesh->nodes[j] - mesh->nodes[j - 1]);
      d[Mesh::value_dof(j)] = acc;
      d[Mesh::slope_dof(j)] = values[j];
    }
    return {std::move(mesh), std::move(d)};
  }

  [[nodiscard]] const Mesh& mesh() const noexcept { return *mesh_; }
  [[nodiscard]] const std::shared_ptr<const Mesh>& mesh_ptr() const noexcept { return mesh_; }
  [[nodiscard]] const Eigen::VectorXd& dofs() const noexcept { return dofs_; }

  [[nodiscard]] double operator()(double x) const { return eval(x).slope; }
  [[nodiscard]] double primitive(double x) const { return eval(x).value; }

  [[nodiscard]] std::vector<double> samples(std::size_t density) const {
    std::vector<double> out;
    for (double x : sample_points(*mesh_, density)) out.push_back((*this)(x));
    return out;
  }

 private:
  [[nodiscard]] ValueSlope eval(double x) const {
    const std::size_t e = mesh_->element_of(x);
    const double a = mesh_->nodes[e], h = mesh_->nodes[e + 1] - a;
    const auto B = hermite::at((x - a) / h, h);
    const auto idx = element_dofs(e);
    ValueSlope out;
    for (int i = 0; i < 4; ++i) {
      const double d = idx[i] < 0 ? 0.0 : dofs_[idx[i]];
      out.value += B.v[i] * d;
      out.slope += B.d1[i] * d;
    }
    return out;
  }

  std::shared_ptr<const Mesh> mesh_;
  Eigen::VectorXd dofs_;
};

/// Qu as an element of the clamped FEM space (its DOF vector).
inline Eigen::VectorXd apply_Q(const D1Function& u) { return u.dofs(); }

inline D1Function apply_Q_inverse(std::shared_ptr<const Mesh> mesh, Eigen::VectorXd clamped_dofs) {
  return {std::move(mesh), std::move(clamped_dofs)};
}

/// w(t) = int_t^1 R (Qu) + b (Qu)(1), and the weight a u(1) of the atom at 1.
class WFunctional {
 public:
  WFunctional(const D1Function& u, const PencilForm& form) : u_(u), form_(form) {
    const auto& nodes = u_.mesh().nodes;
    const std::size_t N = u_.mesh().element_count();
    tails_.assign(N + 1, 0.0);
    tails_[N] = form_.end_value_mass * u_.primitive(1.0);
    for (std::size_t e = N; e-- > 0;) tails_[e] = tails_[e + 1] + segment(e, nodes[e]);
    atom_ = form_.end_slope_mass * u_(1.0);
  }

  [[nodiscard]] double operator()(double t) const {
    const std::size_t e = u_.mesh().element_of(t);
    return tails_[e + 1] + segment(e, t);
  }
  [[nodiscard]] double atom_weight() const noexcept { return atom_; }

  /// int_0^1 w z + atom z(1).
  [[nodiscard]] double pair_with(const D1Function& z) const {
    const auto& nodes = u_.mesh().nodes;
    double s = 0.0;
    for (std::size_t e = 0; e < u_.mesh().element_count(); ++e)
      s += Gauss5::integrate([&](double t) { return (*this)(t) * z(t); }, nodes[e], nodes[e + 1]);
    return s + atom_ * z(1.0);
  }

 private:
  // int_t^{x_{e+1}} R (Qu) on element e.
  [[nodiscard]] double segment(std::size_t e, double t) const {
    const double b = u_.mesh().nodes[e + 1];
    if (!(b > t)) return 0.0;
    const std::size_t jr = form_.mass.piece_for_interval(u_.mesh().nodes[e], b);
    return Gauss5::integrate([&](double x) { return form_.mass.on_piece(jr, x) * u_.primitive(x); }, t, b);
  }

  D1Function u_;
  PencilForm form_;
  std::vector<double> tails_;
  double atom_ = 0.0;
};

inline WFunctional w_functional(const D1Function& u, const PencilForm& tilde_form) { return {u, tilde_form}; }

class KOperator {
 public:
  KOperator(const PencilForm& form, std::size_t n)
      : form_(form), mesh_(std::make_shared<const Mesh>(build_mesh(form, n))), pair_(assemble(form, *mesh_)) {
    ldlt_.compute(pair_.A);
    if (ldlt_.info() != Eigen::Success || !(ldlt_.vectorD().minCoeff() > 0.0))
      throw std::runtime_error("discrete A(0) is not positive definite");
  }

  [[nodiscard]] const std::shared_ptr<const Mesh>& mesh() const noexcept { return mesh_; }
  [[nodiscard]] const SymmetricPair& pair() const noexcept { return pair_; }
  [[nodiscard]] const PencilForm& form() const noexcept { return form_; }

  [[nodiscard]] D1Function apply(const D1Function& u) const {
    Eigen::VectorXd rhs = pair_.B * apply_Q(u);
    return apply_Q_inverse(mesh_, ldlt_.solve(rhs));
  }

  [[nodiscard]] Eigen::MatrixXd dense() const {
    const Eigen::MatrixXd B = Eigen::MatrixXd(pair_.B);
    return ldlt_.solve(B);
  }

  /// Largest k eigenvalues of the dense K, by a general (nonsymmetric) eigensolver.
  [[nodiscard]] std::vector<double> largest_eigenvalues(std::size_t k, double* max_imag = nullptr) const {
    Eigen::EigenSolver<Eigen::MatrixXd> es(dense(), false);
    std::vector<std::complex<double>> ev(es.eigenvalues().begin(), es.eigenvalues().end());
    std::sort(ev.begin(), ev.end(), [](auto a, auto b) { return a.real() > b.real(); });
    std::vector<double> out;
    double im = 0.0;
    for (std::size_t i = 0; i < std::min(k, ev.size()); ++i) {
      out.push_back(ev[i].real());
      im = std::max(im, std::abs(ev[i].imag()));
    }
    if (max_imag != nullptr) *max_imag = im;
    return out;
  }

 private:
  PencilForm form_;
  std::shared_ptr<const Mesh> mesh_;
  SymmetricPair pair_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

inline D1Function apply_K(const D1Function& u, const KOperator& K) { return K.apply(u); }

struct VariationTrial {
  std::size_t trial = 0;
  int sc_u = 0;
  int sc_ku = 0;
  std::vector<double> u_nodes;
};

struct VariationReport {
  std::size_t trials = 0;
  std::size_t degenerate = 0;
  std::vector<VariationTrial> violations;
  std::vector<VariationTrial> inconclusive;
  std::uint64_t seed = 0;

  [[nodiscard]] CheckRecord record() const {
    CheckRecord r{"K does not increase sign changes", -1, "0 violations",
                  nlohmann::json{{"trials", trials},
                                 {"violations", violations.size()},
                                 {"inconclusive", inconclusive.size()},
                                 {"degenerate", degenerate},
                                 {"seed", seed}},
                  violations.empty() ? Verdict::pass : Verdict::fail, 0.0, {}};
    if (violations.empty() && !inconclusive.empty()) r.detail = "threshold-sensitive trials present";
    if (!violations.empty()) {
      r.observed["first_violation"] = {{"trial", violations[0].trial},
                                       {"sc_u", violations[0].sc_u},
                                       {"sc_ku", violations[0].sc_ku},
                                       {"u_nodes", violations[0].u_nodes}};
    }
    return r;
  }
};

/// Random piecewise-linear u (i.i.d. uniform(-1,1) node values, u(0) = 0) and the check
/// SC(Ku) <= SC(u). An excess that disappears under a 100x coarser threshold is
/// recorded as inconclusive rather than as a violation.
inline VariationReport verify_variation_diminishing(const KOperator& K, std::size_t trials, std::uint64_t seed,
                                                    const SignCountPolicy& policy = {}) {
  VariationReport rep;
  rep.trials = trials;
  rep.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const std::size_t N = K.mesh()->element_count();
  for (std::size_t t = 0; t < trials; ++t) {
    std::vector<double> vals(N + 1, 0.0);
    for (std::size_t j = 1; j <= N; ++j) vals[j] = dist(rng);
    const auto u = D1Function::piecewise_linear(K.mesh(), vals);
    const auto ku = K.apply(u);
    const auto ku_s = ku.samples(policy.density);
    double nu = 0.0, nk = 0.0;
    for (double v : vals) nu = std::max(nu, std::abs(v));
    for (double v : ku_s) nk = std::max(nk, std::abs(v));
    const auto sc_u = count_sign_changes(vals, policy);
    const auto sc_k = count_sign_changes(ku_s, policy);
    if (!(nk >= 1e-12 * nu) || !sc_u || !sc_k) {
      ++rep.degenerate;
      continue;
    }
    if (*sc_k <= *sc_u) continue;
    VariationTrial vt{t, *sc_u, *sc_k, vals};
    const auto coarse = count_sign_changes(ku_s, {policy.eps_rel * 100.0, policy.density});
    if (coarse && *coarse <= *sc_u)
      rep.inconclusive.push_back(std::move(vt));
    else
      rep.violations.push_back(std::move(vt));
  }
  return rep;
}

/// Largest K eigenvalues against reciprocals of the smallest pencil eigenvalues on the same mesh.
inline CheckRecord verify_k_spectrum(const KOperator& K, std::size_t k, double tol = 1e-8) {
  const auto pencil = solve_gevp(K.pair(), k);
  double im = 0.0;
  const auto mu = K.largest_eigenvalues(k, &im);
  double worst = 0.0;
  std::vector<double> rel;
  for (std::size_t i = 0; i < k; ++i) {
    const double e = std::abs(mu[i] * pencil.values[i] - 1.0);
    rel.push_back(e);
    worst = std::max(worst, e);
  }
  return {"K spectrum equals reciprocal pencil spectrum", -1, "relative error < " + detail::num(tol),
          nlohmann::json{{"relative_errors", rel}, {"max_imag", im}}, worst < tol ? Verdict::pass : Verdict::fail,
          worst, {}};
}

}  // namespace chainspec
