#pragma once

// Common description of the pencils that the solvers discretize:
//
//   A(u,v) = int P u''v'' + int Q u'v' + sum_i w_i u'(t_i) v'(t_i) + c u'(1) v'(1)
//   B(u,v) = int R u v + a u'(1) v'(1) + b u(1) v(1)
//
// with natural boundary conditions at 1
//   (P u'')(1) + (c - lambda a) u'(1) = 0,  [(P u'')' - Q u'](1) + lambda b u(1) = 0.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "chainspec/problem.hpp"

namespace chainspec {

/// Piecewise function with side-aware evaluation: piece j's formula is used on
/// the closed interval [b_j, b_{j+1}], so discontinuities at breakpoints are
/// resolved by the caller's choice of piece.
class PiecewiseFunction {
 public:
  using PieceEval = std::function<double(std::size_t, double)>;

  PiecewiseFunction(std::vector<double> breakpoints, PieceEval eval)
      : breakpoints_(std::move(breakpoints)), eval_(std::move(eval)) {
    if (breakpoints_.size() < 2 || breakpoints_.front() != 0.0 || breakpoints_.back() != 1.0)
      throw std::invalid_argument("piecewise function must cover [0,1]");
  }

  // NOLINTNEXTLINE(google-explicit-constructor)
  PiecewiseFunction(const PiecewiseCoefficient& c)
      : breakpoints_(c.breakpoints()),
        eval_([coef = std::make_shared<const PiecewiseCoefficient>(c)](std::size_t j, double x) {
          return coef->on_piece(j, x);
        }) {}

  [[nodiscard]] const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
  [[nodiscard]] std::size_t piece_count() const noexcept { return breakpoints_.size() - 1; }

  [[nodiscard]] std::size_t piece_index(double x) const {
    auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x);
    auto j = static_cast<std::size_t>(it - breakpoints_.begin());
    if (j == 0) return 0;
    return std::min(j - 1, piece_count() - 1);
  }

  /// Piece that contains the open interval (a, b).
  [[nodiscard]] std::size_t piece_for_interval(double a, double b) const { return piece_index(0.5 * (a + b)); }

  [[nodiscard]] double on_piece(std::size_t j, double x) const { return eval_(j, x); }
  [[nodiscard]] double operator()(double x) const { return eval_(piece_index(x), x); }

 private:
  std::vector<double> breakpoints_;
  PieceEval eval_;
};

struct ValueSlope {
  double value = 0.0;
  double slope = 0.0;
};

struct Atom {
  double location = 0.5;
  double weight = 0.0;
};

struct PencilForm {
  PiecewiseFunction stiffness;    // P
  PiecewiseFunction first_order;  // Q (density part)
  PiecewiseFunction mass;         // R
  std::vector<Atom> atoms;
  double end_slope_stiffness = 0.0;  // c
  double end_slope_mass = 0.0;       // a
  double end_value_mass = 0.0;       // b

  // Optional mesh grading: meshes are built on mesh_map_points and mapped through
  // mesh_map, which must send mesh_map_points onto the singular points.
  std::function<double(double)> mesh_map;
  std::vector<double> mesh_map_points;

  /// Every point where a coefficient may be non-smooth, plus atom locations, plus 0 and 1.
  [[nodiscard]] std::vector<double> singular_points() const {
    std::vector<double> pts;
    for (const auto* f : {&stiffness, &first_order, &mass})
      pts.insert(pts.end(), f->breakpoints().begin(), f->breakpoints().end());
    for (const auto& a : atoms) pts.push_back(a.location);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
  }
};

}  // namespace chainspec
