#pragma once

// Hermite-cubic (C1) Rayleigh-Ritz discretization of a PencilForm on [0,1]
// with u(0) = u'(0) = 0 eliminated, and the generalized symmetric eigensolver.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "chainspec/pencil.hpp"
#include "chainspec/quadrature.hpp"

namespace chainspec {

enum class Side { left, right };

struct Mesh {
  std::vector<double> nodes;

  [[nodiscard]] std::size_t element_count() const noexcept { return nodes.size() - 1; }
  [[nodiscard]] std::size_t dof_count() const noexcept { return 2 * element_count(); }

  /// Reduced DOF index of the value/derivative at node j; -1 for the clamped node 0.
  [[nodiscard]] static int value_dof(std::size_t j) noexcept { return j == 0 ? -1 : static_cast<int>(2 * j - 2); }
  [[nodiscard]] static int slope_dof(std::size_t j) noexcept { return j == 0 ? -1 : static_cast<int>(2 * j - 1); }

  [[nodiscard]] std::size_t element_of(double x, Side side = Side::right) const {
    auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
    auto j = static_cast<std::size_t>(it - nodes.begin());
    std::size_t e = j == 0 ? 0 : std::min(j - 1, element_count() - 1);
    if (side == Side::left && e > 0 && x == nodes[e]) --e;
    return e;
  }

  /// Node index equal to x within tol, or npos.
  [[nodiscard]] std::size_t find_node(double x, double tol = 1e-12) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), x - tol);
    if (it != nodes.end() && std::abs(*it - x) <= tol) return static_cast<std::size_t>(it - nodes.begin());
    return static_cast<std::size_t>(-1);
  }
};

/// Quasi-uniform mesh with roughly n elements carrying every required point as a node,
/// graded so that adjacent element lengths differ by at most 2:1.
inline Mesh build_mesh(std::span<const double> required, std::size_t n) {
  if (n < 4) throw std::invalid_argument("mesh needs at least 4 elements");
  std::vector<double> pts{0.0, 1.0};
  for (double x : required) {
    if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("required mesh point outside [0,1]");
    pts.push_back(x);
  }
  std::sort(pts.begin(), pts.end());
  std::vector<double> seg;
  for (double x : pts)
    if (seg.empty() || x - seg.back() > 1e-12) seg.push_back(x);
  seg.back() = 1.0;
  if (seg.size() - 1 > n) throw std::invalid_argument("mesh element count too small for the required points");

  std::vector<double> nodes{0.0};
  for (std::size_t i = 0; i + 1 < seg.size(); ++i) {
    const double len = seg[i + 1] - seg[i];
    const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(len * static_cast<double>(n))));
    for (std::size_t k = 1; k < m; ++k) nodes.push_back(seg[i] + len * static_cast<double>(k) / static_cast<double>(m));
    nodes.push_back(seg[i + 1]);
  }

  for (bool changed = true; changed;) {
    changed = false;
    std::vector<double> next{nodes[0]};
    for (std::size_t e = 0; e + 1 < nodes.size(); ++e) {
      const double h = nodes[e + 1] - nodes[e];
      double hn = INFINITY;
      if (e > 0) hn = std::min(hn, nodes[e] - nodes[e - 1]);
      if (e + 2 < nodes.size()) hn = std::min(hn, nodes[e + 2] - nodes[e + 1]);
      if (h > 2.0 * hn * (1.0 + 1e-12)) {
        next.push_back(nodes[e] + 0.5 * h);
        changed = true;
      }
      next.push_back(nodes[e + 1]);
    }
    nodes = std::move(next);
  }
  return {std::move(nodes)};
}

inline Mesh build_mesh(const PencilForm& form, std::size_t n) {
  const auto pts = form.singular_points();
  if (!form.mesh_map) return build_mesh(pts, n);
  Mesh mesh = build_mesh(form.mesh_map_points, n);
  for (double& x : mesh.nodes) x = form.mesh_map(x);
  mesh.nodes.front() = 0.0;
  mesh.nodes.back() = 1.0;
  for (double p : pts) {
    auto it = std::min_element(mesh.nodes.begin(), mesh.nodes.end(),
                               [p](double a, double b) { return std::abs(a - p) < std::abs(b - p); });
    *it = p;
  }
  for (std::size_t i = 0; i + 1 < mesh.nodes.size(); ++i)
    if (!(mesh.nodes[i + 1] > mesh.nodes[i])) throw std::invalid_argument("mesh map is not increasing");
  return mesh;
}

namespace hermite {

/// Shape functions on [a, a+h] at local coordinate s in [0,1]: values, first, second, third derivatives.
struct Basis {
  std::array<double, 4> v, d1, d2, d3;
};

inline Basis at(double s, double h) {
  Basis b;
  const double s2 = s * s, s3 = s2 * s;
  b.v = {1.0 - 3.0 * s2 + 2.0 * s3, h * (s - 2.0 * s2 + s3), 3.0 * s2 - 2.0 * s3, h * (s3 - s2)};
  b.d1 = {(-6.0 * s + 6.0 * s2) / h, 1.0 - 4.0 * s + 3.0 * s2, (6.0 * s - 6.0 * s2) / h, 3.0 * s2 - 2.0 * s};
  b.d2 = {(-6.0 + 12.0 * s) / (h * h), (-4.0 + 6.0 * s) / h, (6.0 - 12.0 * s) / (h * h), (-2.0 + 6.0 * s) / h};
  b.d3 = {12.0 / (h * h * h), 6.0 / (h * h), -12.0 / (h * h * h), 6.0 / (h * h)};
  return b;
}

}  // namespace hermite

struct ElementMatrices {
  Eigen::Matrix4d stiffness = Eigen::Matrix4d::Zero();
  Eigen::Matrix4d mass = Eigen::Matrix4d::Zero();
};

/// Element contributions of the integral parts of A and B on [a,b].
inline ElementMatrices element_matrices(const PencilForm& form, double a, double b) {
  const double h = b - a;
  const std::size_t jp = form.stiffness.piece_for_interval(a, b);
  const std::size_t jq = form.first_order.piece_for_interval(a, b);
  const std::size_t jr = form.mass.piece_for_interval(a, b);
  ElementMatrices em;
  for (std::size_t g = 0; g < 5; ++g) {
    const double s = Gauss5::nodes[g];
    const double x = a + h * s;
    const double w = Gauss5::weights[g] * h;
    const auto B = hermite::at(s, h);
    const double P = form.stiffness.on_piece(jp, x);
    const double Q = form.first_order.on_piece(jq, x);
    const double R = form.mass.on_piece(jr, x);
    for (int i = 0; i < 4; ++i)
      for (int j = i; j < 4; ++j) {
        em.stiffness(i, j) += w * (P * B.d2[i] * B.d2[j] + Q * B.d1[i] * B.d1[j]);
        em.mass(i, j) += w * R * B.v[i] * B.v[j];
      }
  }
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < i; ++j) {
      em.stiffness(i, j) = em.stiffness(j, i);
      em.mass(i, j) = em.mass(j, i);
    }
  return em;
}

/// Discrete A - lambda B.
struct SymmetricPair {
  Eigen::SparseMatrix<double> A;
  Eigen::SparseMatrix<double> B;
};

inline std::array<int, 4> element_dofs(std::size_t e) {
  return {Mesh::value_dof(e), Mesh::slope_dof(e), Mesh::value_dof(e + 1), Mesh::slope_dof(e + 1)};
}

inline SymmetricPair assemble(const PencilForm& form, const Mesh& mesh) {
  const auto n = static_cast<Eigen::Index>(mesh.dof_count());
  std::vector<Eigen::Triplet<double>> ta, tb;
  ta.reserve(16 * mesh.element_count() + 8);
  tb.reserve(16 * mesh.element_count() + 8);
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto em = element_matrices(form, mesh.nodes[e], mesh.nodes[e + 1]);
    const auto dofs = element_dofs(e);
    for (int i = 0; i < 4; ++i) {
      if (dofs[i] < 0) continue;
      for (int j = 0; j < 4; ++j) {
        if (dofs[j] < 0) continue;
        ta.emplace_back(dofs[i], dofs[j], em.stiffness(i, j));
        tb.emplace_back(dofs[i], dofs[j], em.mass(i, j));
      }
    }
  }
  for (const auto& atom : form.atoms) {
    const std::size_t node = mesh.find_node(atom.location);
    if (node == static_cast<std::size_t>(-1) || node == 0) throw std::invalid_argument("atom is not on a mesh node");
    ta.emplace_back(Mesh::slope_dof(node), Mesh::slope_dof(node), atom.weight);
  }
  const std::size_t last = mesh.element_count();
  ta.emplace_back(Mesh::slope_dof(last), Mesh::slope_dof(last), form.end_slope_stiffness);
  tb.emplace_back(Mesh::slope_dof(last), Mesh::slope_dof(last), form.end_slope_mass);
  tb.emplace_back(Mesh::value_dof(last), Mesh::value_dof(last), form.end_value_mass);
  SymmetricPair pair{Eigen::SparseMatrix<double>(n, n), Eigen::SparseMatrix<double>(n, n)};
  pair.A.setFromTriplets(ta.begin(), ta.end());
  pair.B.setFromTriplets(tb.begin(), tb.end());
  return pair;
}

struct DefinitenessResult {
  bool positive_definite = false;
  double smallest_pivot = 0.0;
};

/// LDL^T without pivoting; positive definite iff every pivot is positive.
inline DefinitenessResult check_positive_definite(const Eigen::SparseMatrix<double>& A) {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::NaturalOrdering<int>> ldlt(A);
  if (ldlt.info() != Eigen::Success) return {false, 0.0};
  const double pivot = ldlt.vectorD().minCoeff();
  return {pivot > 0.0, pivot};
}

inline DefinitenessResult check_positive_definite(const Eigen::MatrixXd& A) {
  Eigen::MatrixXd L = A;
  const Eigen::Index n = L.rows();
  double pivot = INFINITY;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double d = L(k, k);
    pivot = std::min(pivot, d);
    if (!(d > 0.0)) return {false, d};
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double l = L(i, k) / d;
      for (Eigen::Index j = k + 1; j <= i; ++j) L(i, j) -= l * L(j, k);
    }
  }
  return {true, n == 0 ? 0.0 : pivot};
}

struct EigenPairs {
  std::vector<double> values;  // ascending
  Eigen::MatrixXd vectors;     // B-orthonormal columns
  double max_backward_error = 0.0;
  double max_orthonormality_error = 0.0;
  int iterations = 0;
};

namespace detail {

inline double norm1(const Eigen::SparseMatrix<double>& M) {
  Eigen::VectorXd col = Eigen::VectorXd::Zero(M.cols());
  for (int k = 0; k < M.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(M, k); it; ++it) col[it.col()] += std::abs(it.value());
  return col.size() ? col.maxCoeff() : 0.0;
}

inline void finish_pairs(const SymmetricPair& pair, EigenPairs& out) {
  const double na = norm1(pair.A), nb = norm1(pair.B);
  for (Eigen::Index i = 0; i < out.vectors.cols(); ++i) {
    auto x = out.vectors.col(i);
    Eigen::Index imax = 0;
    x.cwiseAbs().maxCoeff(&imax);
    if (x[imax] < 0.0) x = -x;
    const double lam = out.values[static_cast<std::size_t>(i)];
    const Eigen::VectorXd r = pair.A * x - lam * (pair.B * x);
    out.max_backward_error =
        std::max(out.max_backward_error, r.norm() / ((na + std::abs(lam) * nb) * x.norm()));
  }
  const Eigen::MatrixXd G = out.vectors.transpose() * (pair.B * out.vectors);
  out.max_orthonormality_error =
      (G - Eigen::MatrixXd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
}

}  // namespace detail

/// k smallest eigenpairs of A x = lambda B x. A shift s with A + sB positive definite
/// is found first; the inverted problem B x = mu (A + sB) x is then solved, densely for
/// small systems and by subspace iteration with Rayleigh-Ritz otherwise.
inline EigenPairs solve_gevp(const SymmetricPair& pair, std::size_t k) {
  using Eigen::Index;
  const auto n = static_cast<std::size_t>(pair.A.rows());
  if (k == 0) throw std::invalid_argument("eigenpair count must be positive");
  if (k > n) throw std::invalid_argument("eigenpair count exceeds the number of DOFs");
  if (!check_positive_definite(pair.B).positive_definite)
    throw std::domain_error("mass matrix B is not positive definite");

  double shift = 0.0;
  Eigen::SparseMatrix<double> M = pair.A;
  for (int attempt = 0; !check_positive_definite(M).positive_definite; ++attempt) {
    if (attempt > 200) throw std::domain_error("no positive definite shift of A found");
    shift = shift == 0.0 ? 1.0 : 4.0 * shift;
    M = pair.A + shift * pair.B;
  }

  EigenPairs out;
  const std::size_t p = std::min(n, std::max(2 * k, k + 8));
  if (n <= 160 || p == n) {
    const Eigen::MatrixXd Md(M), Bd(pair.B);
    Eigen::LLT<Eigen::MatrixXd> llt(Md);
    const Eigen::MatrixXd L = llt.matrixL();
    Eigen::MatrixXd C = L.triangularView<Eigen::Lower>().solve(Bd);
    C = L.triangularView<Eigen::Lower>().solve(C.transpose()).eval();
    C = 0.5 * (C + C.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    out.vectors.resize(static_cast<Index>(n), static_cast<Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
      const Index col = static_cast<Index>(n - 1 - i);
      out.values.push_back(1.0 / es.eigenvalues()[col] - shift);
      Eigen::VectorXd x = L.transpose().triangularView<Eigen::Upper>().solve(es.eigenvectors().col(col));
      x /= std::sqrt(x.dot(Bd * x));
      out.vectors.col(static_cast<Index>(i)) = x;
    }
    detail::finish_pairs(pair, out);
    return out;
  }

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(M);
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Eigen::MatrixXd X(static_cast<Index>(n), static_cast<Index>(p));
  for (Index j = 0; j < X.cols(); ++j)
    for (Index i = 0; i < X.rows(); ++i) X(i, j) = uni(rng);

  // Ritz values converge like (theta_i/theta_{p+1})^{2m}, vectors like the square root;
  // iterate until the values settle, then as many sweeps again for the vectors.
  std::vector<double> previous(k, 0.0);
  int settle = -1;
  Eigen::VectorXd theta;
  int it = 0;
  for (; it < 2000; ++it) {
    const Eigen::MatrixXd BX = pair.B * X;
    Eigen::MatrixXd Y = solver.solve(BX);
    Eigen::VectorXd scale(Y.cols());
    const Eigen::MatrixXd BY0 = pair.B * Y;
    for (Index j = 0; j < Y.cols(); ++j) scale[j] = 1.0 / std::sqrt(Y.col(j).dot(BY0.col(j)));
    Y = Y * scale.asDiagonal();
    // Y^T M Y = Y^T B X exactly; forming it from B avoids the large entries of M.
    Eigen::MatrixXd Kr = (Y.transpose() * BX) * scale.asDiagonal();
    Eigen::MatrixXd Br = Y.transpose() * (pair.B * Y);
    Kr = 0.5 * (Kr + Kr.transpose()).eval();
    Br = 0.5 * (Br + Br.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(Kr, Br);
    if (ges.info() != Eigen::Success) throw std::runtime_error("Rayleigh-Ritz step failed");
    theta = ges.eigenvalues();
    X = Y * ges.eigenvectors();
    double change = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double t = theta[static_cast<Index>(i)];
      change = std::max(change, std::abs(t - previous[i]) / std::abs(t));
      previous[i] = t;
    }
    if (settle < 0 && it > 1 && change < 1e-10) settle = it;
    if (settle >= 0 && it >= 2 * settle + 2) break;
  }
  out.iterations = it + 1;
  out.vectors = X.leftCols(static_cast<Index>(k));
  for (std::size_t i = 0; i < k; ++i) out.values.push_back(theta[static_cast<Index>(i)] - shift);
  detail::finish_pairs(pair, out);
  return out;
}

/// Eigenpairs together with the discretization they came from; reconstructs
/// u, u', P u'' and (P u'')' anywhere.
struct QuasiValues {
  double u = 0.0;
  double du = 0.0;
  double moment = 0.0;  // P u''
  double shear = 0.0;   // (P u'')'
};

class Spectrum {
 public:
  Spectrum(PencilForm form, Mesh mesh, EigenPairs pairs)
      : form_(std::move(form)), mesh_(std::move(mesh)), pairs_(std::move(pairs)) {}

  [[nodiscard]] const std::vector<double>& eigenvalues() const noexcept { return pairs_.values; }
  [[nodiscard]] const Eigen::MatrixXd& eigenvectors() const noexcept { return pairs_.vectors; }
  [[nodiscard]] const EigenPairs& pairs() const noexcept { return pairs_; }
  [[nodiscard]] const Mesh& mesh() const noexcept { return mesh_; }
  [[nodiscard]] const PencilForm& form() const noexcept { return form_; }
  [[nodiscard]] std::size_t size() const noexcept { return pairs_.values.size(); }

  [[nodiscard]] Eigen::Vector4d element_dofs(std::size_t n, std::size_t e) const {
    Eigen::Vector4d d;
    const auto idx = chainspec::element_dofs(e);
    for (int i = 0; i < 4; ++i) d[i] = idx[i] < 0 ? 0.0 : pairs_.vectors(idx[i], static_cast<Eigen::Index>(n));
    return d;
  }

  /// u and u' only (cheap).
  [[nodiscard]] ValueSlope value_slope(std::size_t n, double x, Side side = Side::right) const {
    check(n, x);
    const std::size_t e = mesh_.element_of(x, side);
    const double a = mesh_.nodes[e], h = mesh_.nodes[e + 1] - a;
    const auto B = hermite::at((x - a) / h, h);
    const Eigen::Vector4d d = element_dofs(n, e);
    ValueSlope out;
    for (int i = 0; i < 4; ++i) {
      out.value += B.v[i] * d[i];
      out.slope += B.d1[i] * d[i];
    }
    return out;
  }

  /// Full reconstruction. P u'' and (P u'')' come from the element's consistent end
  /// forces (K_e - lambda M_e) d_e, continued inside the element by integrating the
  /// equation; they satisfy the discrete interface and end conditions exactly.
  [[nodiscard]] QuasiValues evaluate(std::size_t n, double x, Side side = Side::right) const {
    check(n, x);
    const std::size_t e = mesh_.element_of(x, side);
    const double a = mesh_.nodes[e], b = mesh_.nodes[e + 1], h = b - a;
    const double lam = pairs_.values[n];
    const Eigen::Vector4d d = element_dofs(n, e);
    const auto em = element_matrices(form_, a, b);
    const Eigen::Vector4d f = em.stiffness * d - lam * (em.mass * d);
    const std::size_t jq = form_.first_order.piece_for_interval(a, b);
    const std::size_t jr = form_.mass.piece_for_interval(a, b);

    auto u_at = [&](double t) {
      const auto B = hermite::at((t - a) / h, h);
      return std::pair{B.v[0] * d[0] + B.v[1] * d[1] + B.v[2] * d[2] + B.v[3] * d[3],
                       B.d1[0] * d[0] + B.d1[1] * d[1] + B.d1[2] * d[2] + B.d1[3] * d[3]};
    };
    auto integrated = [&](double xe) {
      double i1 = 0.0, i2 = 0.0, i3 = 0.0;
      if (xe > a) {
        const double len = xe - a;
        for (std::size_t g = 0; g < 5; ++g) {
          const double t = a + len * Gauss5::nodes[g];
          const double w = Gauss5::weights[g] * len;
          const auto [u, du] = u_at(t);
          const double ru = form_.mass.on_piece(jr, t) * u;
          i1 += w * ru;
          i2 += w * (xe - t) * ru;
          i3 += w * form_.first_order.on_piece(jq, t) * du;
        }
      }
      const double flux = f[0] + lam * i1;
      const double moment = -f[1] + f[0] * (xe - a) + lam * i2 + i3;
      return std::pair{flux, moment};
    };
    const auto [flux_b, moment_b] = integrated(b);
    const auto [flux_x, moment_x] = integrated(x);
    const double s = (x - a) / h;
    const auto [u, du] = u_at(x);
    QuasiValues out;
    out.u = u;
    out.du = du;
    out.moment = moment_x + s * (f[3] - moment_b);
    const double flux = flux_x + s * (-f[2] - flux_b);
    out.shear = flux + form_.first_order.on_piece(jq, x) * du;
    return out;
  }

 private:
  void check(std::size_t n, double x) const {
    if (n >= pairs_.values.size()) throw std::out_of_range("eigenfunction index out of range");
    if (!(x >= 0.0 && x <= 1.0)) throw std::out_of_range("evaluation point outside [0,1]");
  }

  PencilForm form_;
  Mesh mesh_;
  EigenPairs pairs_;
};

/// Rayleigh-Ritz on the span of the computed vectors with both forms evaluated from
/// u, u', u'' at quadrature points. x^T A x loses about eps/h^4 to cancellation on
/// fine meshes; evaluating u'' first loses only eps/h^2.
inline void refine_ritz(const PencilForm& form, const Mesh& mesh, const SymmetricPair& pair, EigenPairs& pairs) {
  using Eigen::Index;
  const Index k = pairs.vectors.cols();
  if (k == 0) return;
  Eigen::MatrixXd Kr = Eigen::MatrixXd::Zero(k, k), Br = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd d(4, k);
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const double a = mesh.nodes[e], h = mesh.nodes[e + 1] - a;
    const auto idx = element_dofs(e);
    for (int i = 0; i < 4; ++i) {
      if (idx[i] < 0)
        d.row(i).setZero();
      else
        d.row(i) = pairs.vectors.row(idx[i]);
    }
    const std::size_t jp = form.stiffness.piece_for_interval(a, a + h);
    const std::size_t jq = form.first_order.piece_for_interval(a, a + h);
    const std::size_t jr = form.mass.piece_for_interval(a, a + h);
    for (std::size_t g = 0; g < 5; ++g) {
      const double x = a + h * Gauss5::nodes[g], w = Gauss5::weights[g] * h;
      const auto B = hermite::at(Gauss5::nodes[g], h);
      const Eigen::RowVectorXd u = Eigen::Map<const Eigen::RowVector4d>(B.v.data()) * d;
      const Eigen::RowVectorXd u1 = Eigen::Map<const Eigen::RowVector4d>(B.d1.data()) * d;
      const Eigen::RowVectorXd u2 = Eigen::Map<const Eigen::RowVector4d>(B.d2.data()) * d;
      Kr.noalias() += (w * form.stiffness.on_piece(jp, x)) * u2.transpose() * u2 +
                      (w * form.first_order.on_piece(jq, x)) * u1.transpose() * u1;
      Br.noalias() += (w * form.mass.on_piece(jr, x)) * u.transpose() * u;
    }
  }
  for (const auto& atom : form.atoms) {
    const Eigen::RowVectorXd s = pairs.vectors.row(Mesh::slope_dof(mesh.find_node(atom.location)));
    Kr.noalias() += atom.weight * s.transpose() * s;
  }
  const std::size_t last = mesh.element_count();
  const Eigen::RowVectorXd s1 = pairs.vectors.row(Mesh::slope_dof(last));
  const Eigen::RowVectorXd v1 = pairs.vectors.row(Mesh::value_dof(last));
  Kr.noalias() += form.end_slope_stiffness * s1.transpose() * s1;
  Br.noalias() += form.end_slope_mass * s1.transpose() * s1 + form.end_value_mass * v1.transpose() * v1;
  Kr = 0.5 * (Kr + Kr.transpose()).eval();
  Br = 0.5 * (Br + Br.transpose()).eval();
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(Kr, Br);
  if (ges.info() != Eigen::Success) return;
  pairs.vectors = (pairs.vectors * ges.eigenvectors()).eval();
  for (Index i = 0; i < k; ++i) pairs.values[static_cast<std::size_t>(i)] = ges.eigenvalues()[i];
  pairs.max_backward_error = 0.0;
  detail::finish_pairs(pair, pairs);
}

/// Assemble on a mesh of ~n elements honoring the form's singular points, then solve.
inline Spectrum solve_pencil(const PencilForm& form, std::size_t n, std::size_t k) {
  Mesh mesh = build_mesh(form, n);
  const auto pair = assemble(form, mesh);
  auto pairs = solve_gevp(pair, std::min<std::size_t>(k, mesh.dof_count()));
  refine_ritz(form, mesh, pair, pairs);
  return {form, std::move(mesh), std::move(pairs)};
}

}  // namespace chainspec
