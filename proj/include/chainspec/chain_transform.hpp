#pragma once

// Piecewise-linear change of variables that removes the interface kinks, and
// the push-forward of the multipoint problem to a single-interval pencil whose
// first-order coefficient carries point masses at the images of the interfaces.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "chainspec/pencil.hpp"
#include "chainspec/problem.hpp"

namespace chainspec {

class PiecewiseLinearMap {
 public:
  PiecewiseLinearMap() : PiecewiseLinearMap({0.0, 1.0}, {1.0}) {}

  PiecewiseLinearMap(std::vector<double> knots, std::vector<double> slopes)
      : knots_(std::move(knots)), slopes_(std::move(slopes)) {
    if (knots_.size() != slopes_.size() + 1 || knots_.front() != 0.0 || knots_.back() != 1.0)
      throw std::invalid_argument("piecewise-linear map needs knots 0 < ... < 1 and one slope per segment");
    images_.resize(knots_.size());
    images_[0] = 0.0;
    for (std::size_t k = 0; k < slopes_.size(); ++k) {
      if (!(slopes_[k] > 0.0)) throw std::invalid_argument("piecewise-linear map slopes must be positive");
      if (!(knots_[k + 1] > knots_[k])) throw std::invalid_argument("knots must be strictly ascending");
      images_[k + 1] = images_[k] + slopes_[k] * (knots_[k + 1] - knots_[k]);
    }
    if (std::abs(images_.back() - 1.0) > 1e-12) throw std::invalid_argument("map must send 1 to 1");
    images_.back() = 1.0;
  }

  [[nodiscard]] const std::vector<double>& knots() const noexcept { return knots_; }
  [[nodiscard]] const std::vector<double>& slopes() const noexcept { return slopes_; }
  [[nodiscard]] const std::vector<double>& knot_images() const noexcept { return images_; }

  /// Segment owning x (right-continuous, last segment owns 1).
  [[nodiscard]] std::size_t segment(double x) const { return locate(knots_, x); }
  [[nodiscard]] std::size_t image_segment(double t) const { return locate(images_, t); }

  [[nodiscard]] double operator()(double x) const {
    const std::size_t k = segment(x);
    return images_[k] + slopes_[k] * (x - knots_[k]);
  }

  [[nodiscard]] double inverse(double t) const {
    const std::size_t k = image_segment(t);
    return knots_[k] + (t - images_[k]) / slopes_[k];
  }

  [[nodiscard]] double slope(double x) const { return slopes_[segment(x)]; }

 private:
  static std::size_t locate(const std::vector<double>& v, double x) {
    auto it = std::upper_bound(v.begin(), v.end(), x);
    auto j = static_cast<std::size_t>(it - v.begin());
    if (j == 0) return 0;
    return std::min(j - 1, v.size() - 2);
  }

  std::vector<double> knots_;
  std::vector<double> slopes_;
  std::vector<double> images_;
};

/// Kinks at the interface points with slope ratios eta_i, normalized to map [0,1] onto itself.
inline PiecewiseLinearMap build_tau(std::span<const InterfacePoint> interfaces) {
  std::vector<double> knots{0.0};
  for (const auto& ip : interfaces) knots.push_back(ip.xi);
  knots.push_back(1.0);
  std::vector<double> rel(knots.size() - 1);
  double prod = 1.0, total = 0.0;
  for (std::size_t k = 0; k < rel.size(); ++k) {
    if (k > 0) prod *= interfaces[k - 1].eta;
    rel[k] = prod;
    total += prod * (knots[k + 1] - knots[k]);
  }
  for (double& s : rel) s /= total;
  return {std::move(knots), std::move(rel)};
}

struct HatPencil {
  PiecewiseCoefficient p_hat;
  PiecewiseCoefficient q_hat_density;
  PiecewiseCoefficient r_hat;
  std::vector<Atom> q_hat_atoms;
  double alpha_hat = 0.0;
  double beta = 0.0;
};

inline PencilForm form_of(const HatPencil& hat) {
  return {hat.p_hat, hat.q_hat_density, hat.r_hat, hat.q_hat_atoms, 0.0, hat.alpha_hat, hat.beta};
}

namespace detail {

/// Sorted union with near-duplicates (closer than tol) collapsed.
inline std::vector<double> merge_points(std::vector<double> pts, double tol = 1e-12) {
  std::sort(pts.begin(), pts.end());
  std::vector<double> out;
  for (double x : pts)
    if (out.empty() || x - out.back() > tol) out.push_back(x);
  return out;
}

// Coefficient c in x, pushed to t = tau(x) and multiplied by slope^power on each segment.
inline PiecewiseCoefficient push_coefficient(const PiecewiseCoefficient& c, const PiecewiseLinearMap& tau,
                                             int power) {
  std::vector<double> pts = tau.knot_images();
  for (double b : c.breakpoints()) pts.push_back(tau(b));
  pts = merge_points(std::move(pts));
  pts.front() = 0.0;
  pts.back() = 1.0;
  std::vector<Quadratic> pieces;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double t0 = pts[i];
    const std::size_t seg = tau.image_segment(0.5 * (t0 + pts[i + 1]));
    const double s = tau.slopes()[seg];
    const double x0 = tau.knots()[seg] + (t0 - tau.knot_images()[seg]) / s;
    const std::size_t j = c.piece_index(std::clamp(tau.inverse(0.5 * (t0 + pts[i + 1])), 0.0, 1.0));
    const auto& a = c.pieces()[j];
    const double e = x0 - c.breakpoints()[j];
    const double scale = std::pow(s, power);
    pieces.push_back({scale * (a[0] + e * (a[1] + e * a[2])), scale * (a[1] + 2.0 * a[2] * e) / s,
                      scale * a[2] / (s * s)});
  }
  return {std::move(pts), std::move(pieces)};
}

}  // namespace detail

inline HatPencil push_forward(const ProblemSpec& spec, const PiecewiseLinearMap& tau) {
  const auto& knots = tau.knots();
  if (knots.size() != spec.interfaces.size() + 2)
    throw std::invalid_argument("tau knots do not match the problem interfaces");
  for (std::size_t i = 0; i < spec.interfaces.size(); ++i)
    if (knots[i + 1] != spec.interfaces[i].xi)
      throw std::invalid_argument("tau knots do not match the problem interfaces");

  HatPencil hat;
  hat.p_hat = detail::push_coefficient(spec.p, tau, 3);
  hat.r_hat = detail::push_coefficient(spec.r, tau, -1);
  hat.q_hat_density = detail::push_coefficient(spec.q, tau, 1);
  for (std::size_t i = 0; i < spec.interfaces.size(); ++i) {
    const double w = spec.interfaces[i].alpha_i * tau.slopes()[i] * tau.slopes()[i];
    if (w != 0.0) hat.q_hat_atoms.push_back({tau.knot_images()[i + 1], w});
  }
  const double s_last = tau.slopes().back();
  hat.alpha_hat = spec.alpha * s_last * s_last;
  hat.beta = spec.beta;
  return hat;
}

struct PulledBack {
  std::vector<double> x, y, dy;
};

/// y = u o tau and y' = (u' o tau) tau' on the grid xs.
inline PulledBack pull_back_function(const std::function<ValueSlope(double)>& u_eval, const PiecewiseLinearMap& tau,
                                     std::span<const double> xs) {
  PulledBack out;
  for (double x : xs) {
    const ValueSlope u = u_eval(tau(x));
    out.x.push_back(x);
    out.y.push_back(u.value);
    out.dy.push_back(u.slope * tau.slope(x));
  }
  return out;
}

}  // namespace chainspec
