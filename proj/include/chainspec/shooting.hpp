#pragma once

// Shooting on the quasi-derivative system
//   u1 = u, u2 = u', u3 = P u'', u4 = (P u'')' - Q u'
//   u1' = u2, u2' = u3 / P, u3' = u4 + Q u2, u4' = lambda R u1
// with u3 += w u2 across an atom of weight w. The characteristic function is
// evaluated from the exterior square of the solution space, which stays well
// conditioned where the two fundamental solutions become nearly parallel.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chainspec/chain_transform.hpp"
#include "chainspec/fem.hpp"
#include "chainspec/pencil.hpp"

namespace chainspec {

class IntegrationOverflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using QuasiState = Eigen::Vector4d;

/// Coefficients sampled at the RK4 stage points of a fixed grid, plus atom jumps.
class ShootingGrid {
 public:
  struct Cell {
    double t0, h;
    double jump;  // atom weight applied at t0 before the step (0 if none)
    std::array<double, 3> P, Q, R;  // at t0, t0 + h/2, t0 + h
  };

  ShootingGrid(const PencilForm& form, double steps_per_unit = 4096.0)
      : c_(form.end_slope_stiffness), a_(form.end_slope_mass), b_(form.end_value_mass) {
    std::vector<double> segs = detail::merge_points(form.singular_points());
    segs.front() = 0.0;
    segs.back() = 1.0;
    for (std::size_t sj = 0; sj + 1 < segs.size(); ++sj) {
      const double a = segs[sj], b = segs[sj + 1];
      double jump = 0.0;
      if (sj > 0)
        for (const auto& atom : form.atoms)
          if (std::abs(atom.location - a) <= 1e-12) jump += atom.weight;
      const std::size_t jp = form.stiffness.piece_for_interval(a, b);
      const std::size_t jq = form.first_order.piece_for_interval(a, b);
      const std::size_t jr = form.mass.piece_for_interval(a, b);
      const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((b - a) * steps_per_unit - 1e-9)));
      const double h = (b - a) / static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i) {
        Cell c{};
        c.t0 = a + h * static_cast<double>(i);
        c.h = h;
        c.jump = i == 0 ? jump : 0.0;
        const std::array<double, 3> ts{c.t0, c.t0 + 0.5 * h, i + 1 == m ? b : c.t0 + h};
        for (int k = 0; k < 3; ++k) {
          c.P[k] = form.stiffness.on_piece(jp, ts[k]);
          c.Q[k] = form.first_order.on_piece(jq, ts[k]);
          c.R[k] = form.mass.on_piece(jr, ts[k]);
        }
        cells_.push_back(c);
      }
    }
  }

  [[nodiscard]] const std::vector<Cell>& cells() const noexcept { return cells_; }

  /// Boundary functionals at 1: rows applied to (u1, u2, u3, u4).
  [[nodiscard]] Eigen::Matrix<double, 2, 4> end_functionals(double lambda) const {
    Eigen::Matrix<double, 2, 4> C;
    C << 0.0, c_ - lambda * a_, 1.0, 0.0, lambda * b_, 0.0, 0.0, 1.0;
    return C;
  }

  [[nodiscard]] static Eigen::Matrix4d system(const Cell& c, int k, double lambda) {
    Eigen::Matrix4d M = Eigen::Matrix4d::Zero();
    M(0, 1) = 1.0;
    M(1, 2) = 1.0 / c.P[k];
    M(2, 1) = c.Q[k];
    M(2, 3) = 1.0;
    M(3, 0) = lambda * c.R[k];
    return M;
  }

 private:
  std::vector<Cell> cells_;
  double c_, a_, b_;
};

namespace detail {

inline Eigen::Matrix4d atom_jump(double w) {
  Eigen::Matrix4d J = Eigen::Matrix4d::Identity();
  J(2, 1) = w;
  return J;
}

template <class State, class Rhs>
State rk4_step(const State& y, double h, const Rhs& f) {
  const State k1 = f(0, y);
  const State k2 = f(1, State(y + 0.5 * h * k1));
  const State k3 = f(1, State(y + 0.5 * h * k2));
  const State k4 = f(2, State(y + h * k3));
  return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

/// Plain propagation of the two solutions starting from (u3,u4)(0) = (1,0) and (0,1).
/// Columns of the result are their states at t = 1.
inline Eigen::Matrix<double, 4, 2> integrate_fundamental(const ShootingGrid& grid, double lambda) {
  Eigen::Matrix<double, 4, 2> Y = Eigen::Matrix<double, 4, 2>::Zero();
  Y(2, 0) = 1.0;
  Y(3, 1) = 1.0;
  for (const auto& c : grid.cells()) {
    if (c.jump != 0.0) Y = detail::atom_jump(c.jump) * Y;
    Y = detail::rk4_step(Y, c.h, [&](int k, const Eigen::Matrix<double, 4, 2>& y) {
      return Eigen::Matrix<double, 4, 2>(ShootingGrid::system(c, k, lambda) * y);
    });
  }
  if (!Y.allFinite()) throw IntegrationOverflow("non-finite state: lambda = " + detail::num(lambda) + " out of range");
  return Y;
}

inline Eigen::Matrix<double, 4, 2> integrate_fundamental(const PencilForm& form, double lambda) {
  return integrate_fundamental(ShootingGrid(form), lambda);
}

struct Characteristic {
  double value = 0.0;     // D scaled by exp(-log_scale)
  double relative = 0.0;  // D / (|W| |c1| |c2|), in [-1, 1]
  double log_scale = 0.0;
};

/// D(lambda) = c1^T W(1) c2 where W_ij = y1_i y2_j - y1_j y2_i is the exterior product
/// of the fundamental solutions, evolved as W' = M W + W M^T and rescaled in flight.
inline Characteristic characteristic(const ShootingGrid& grid, double lambda) {
  Eigen::Matrix4d W = Eigen::Matrix4d::Zero();
  W(2, 3) = 1.0;
  W(3, 2) = -1.0;
  double log_scale = 0.0;
  for (const auto& c : grid.cells()) {
    if (c.jump != 0.0) {
      const Eigen::Matrix4d J = detail::atom_jump(c.jump);
      W = J * W * J.transpose();
    }
    W = detail::rk4_step(W, c.h, [&](int k, const Eigen::Matrix4d& w) {
      const Eigen::Matrix4d M = ShootingGrid::system(c, k, lambda);
      return Eigen::Matrix4d(M * w + w * M.transpose());
    });
    const double s = W.cwiseAbs().maxCoeff();
    if (!std::isfinite(s) || s == 0.0)
      throw IntegrationOverflow("non-finite state: lambda = " + detail::num(lambda) + " out of range");
    if (s > 1e50 || s < 1e-50) {
      W /= s;
      log_scale += std::log(s);
    }
  }
  const auto C = grid.end_functionals(lambda);
  const Eigen::Vector4d c1 = C.row(0).transpose(), c2 = C.row(1).transpose();
  Characteristic out;
  out.value = c1.dot(W * c2);
  out.log_scale = log_scale;
  out.relative = out.value / (W.cwiseAbs().maxCoeff() * c1.norm() * c2.norm());
  return out;
}

inline Characteristic characteristic(const PencilForm& form, double lambda) {
  return characteristic(ShootingGrid(form), lambda);
}

struct ScanPoint {
  double lambda = 0.0;
  double relative = 0.0;
};

struct ShootingOptions {
  double lambda_cap = 1e6;
  double relative_width = 1e-10;
  double double_root_threshold = 1e-6;
  double steps_per_unit = 4096.0;
};

struct ShootingResult {
  std::vector<double> eigenvalues;
  std::vector<double> suspected_double;  // |D| minima without a sign change
  std::vector<ScanPoint> scan;
  bool complete = false;
  std::string diagnostic;
};

namespace detail {

inline double bisect_root(const ShootingGrid& grid, double lo, double hi, double flo, double rel) {
  while (hi - lo > rel * std::max(std::abs(hi), 1e-300)) {
    const double mid = 0.5 * (lo + hi);
    const double fm = characteristic(grid, mid).relative;
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Golden-section refinement of a |D| minimum bracketed by [a, c].
inline std::pair<double, double> refine_minimum(const ShootingGrid& grid, double a, double c) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = c - g * (c - a), x2 = a + g * (c - a);
  double f1 = std::abs(characteristic(grid, x1).relative), f2 = std::abs(characteristic(grid, x2).relative);
  for (int it = 0; it < 60 && c - a > 1e-12 * c; ++it) {
    if (f1 < f2) {
      c = x2;
      x2 = x1;
      f2 = f1;
      x1 = c - g * (c - a);
      f1 = std::abs(characteristic(grid, x1).relative);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (c - a);
      f2 = std::abs(characteristic(grid, x2).relative);
    }
  }
  return f1 < f2 ? std::pair{x1, f1} : std::pair{x2, f2};
}

}  // namespace detail

/// Scans lambda from 0 with step max(1, gap/4) (gap = previous root spacing, or the
/// current lambda before the first root), bisects sign changes, and flags |D| minima.
inline ShootingResult find_eigenvalues(const PencilForm& form, std::size_t k, const ShootingOptions& opt = {}) {
  if (k == 0) throw std::invalid_argument("find_eigenvalues needs k >= 1");
  const ShootingGrid grid(form, opt.steps_per_unit);
  ShootingResult out;
  double lam = 0.0;
  double f = characteristic(grid, lam).relative;
  out.scan.push_back({lam, f});
  double prev_root = 0.0;
  std::optional<double> gap;
  while (out.eigenvalues.size() < k) {
    const double step = std::max(1.0, (gap ? *gap : lam) / 4.0);
    const double next = lam + step;
    if (next > opt.lambda_cap) {
      out.diagnostic = "found " + std::to_string(out.eigenvalues.size()) + " of " + std::to_string(k) +
                       " roots below lambda cap " + detail::num(opt.lambda_cap);
      return out;
    }
    double fn;
    try {
      fn = characteristic(grid, next).relative;
    } catch (const IntegrationOverflow& e) {
      out.diagnostic = e.what();
      return out;
    }
    out.scan.push_back({next, fn});
    if (f == 0.0 || (fn < 0.0) != (f < 0.0)) {
      const double root = f == 0.0 ? lam : detail::bisect_root(grid, lam, next, f, opt.relative_width);
      gap = root - prev_root;
      prev_root = root;
      out.eigenvalues.push_back(root);
    } else if (out.scan.size() >= 3) {
      const auto& s0 = out.scan[out.scan.size() - 3];
      const auto& s1 = out.scan[out.scan.size() - 2];
      if (std::abs(s1.relative) < std::abs(s0.relative) && std::abs(s1.relative) < std::abs(fn) &&
          (s0.relative < 0.0) == (s1.relative < 0.0)) {
        const auto [x, fx] = detail::refine_minimum(grid, s0.lambda, next);
        if (fx < opt.double_root_threshold) out.suspected_double.push_back(x);
      }
    }
    lam = next;
    f = fn;
  }
  out.complete = true;
  return out;
}

struct ShootingEigenfunction {
  std::vector<double> t, u, du;
};

/// Eigenfunction at a located eigenvalue by matching solutions shot from both ends.
/// Normalized to max |u| = 1 with the largest-magnitude value positive.
inline ShootingEigenfunction shoot_eigenfunction(const PencilForm& form, double lambda,
                                                 double steps_per_unit = 4096.0) {
  const ShootingGrid grid(form, steps_per_unit);
  const auto& cells = grid.cells();
  const std::size_t N = cells.size();
  using Block = Eigen::Matrix<double, 4, 2>;
  std::vector<Block> fwd(N + 1), bwd(N + 1);  // state at cell starts (after jumps); index N is t=1

  // Cell index for matching: the cell start nearest to 1/2.
  std::size_t m = 0;
  for (std::size_t c = 0; c < N; ++c)
    if (std::abs(cells[c].t0 - 0.5) < std::abs(cells[m].t0 - 0.5)) m = c;
  if (m == 0) m = N / 2;

  Block Y = Block::Zero();
  Y(2, 0) = 1.0;
  Y(3, 1) = 1.0;
  for (std::size_t c = 0; c < m; ++c) {
    if (cells[c].jump != 0.0) Y = detail::atom_jump(cells[c].jump) * Y;
    fwd[c] = Y;
    Y = detail::rk4_step(Y, cells[c].h, [&](int k, const Block& y) {
      return Block(ShootingGrid::system(cells[c], k, lambda) * y);
    });
  }
  if (cells[m].jump != 0.0) Y = detail::atom_jump(cells[m].jump) * Y;
  fwd[m] = Y;

  const auto C = grid.end_functionals(lambda);
  Block Z = Block::Zero();  // right-end states satisfying both end conditions
  Z(0, 0) = 1.0;
  Z(3, 0) = -C(1, 0);
  Z(1, 1) = 1.0;
  Z(2, 1) = -C(0, 1);
  bwd[N] = Z;
  for (std::size_t c = N; c-- > m;) {
    Z = detail::rk4_step(Z, -cells[c].h, [&](int k, const Block& y) {
      return Block(ShootingGrid::system(cells[c], 2 - k, lambda) * y);
    });
    bwd[c] = Z;
    if (c > m && cells[c].jump != 0.0) Z = detail::atom_jump(-cells[c].jump) * Z;
  }

  Eigen::Matrix4d S;
  S << fwd[m], -bwd[m];
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(S, Eigen::ComputeFullV);
  const Eigen::Vector4d coef = svd.matrixV().col(3);
  const Eigen::Vector2d cl = coef.head<2>(), cr = coef.tail<2>();

  ShootingEigenfunction out;
  for (std::size_t c = 0; c <= N; ++c) {
    const QuasiState s = c < m ? QuasiState(fwd[c] * cl) : QuasiState(bwd[c] * cr);
    out.t.push_back(c < N ? cells[c].t0 : 1.0);
    out.u.push_back(s(0));
    out.du.push_back(s(1));
  }
  std::size_t imax = 0;
  for (std::size_t i = 0; i < out.u.size(); ++i)
    if (std::abs(out.u[i]) > std::abs(out.u[imax])) imax = i;
  const double scale = out.u[imax];
  if (scale != 0.0)
    for (std::size_t i = 0; i < out.u.size(); ++i) {
      out.u[i] /= scale;
      out.du[i] /= scale;
    }
  return out;
}

}  // namespace chainspec
