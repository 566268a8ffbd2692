#pragma once

// Ground-state substitution for the hat pencil: a uniformly positive solution
// sigma of -(p sigma')' + q sigma = 0 (atoms in q make p sigma' jump) with
// positive end flux gamma, the map omega with omega' = sigma, and the classical
// two-point problem whose first-order term has been eliminated.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "chainspec/chain_transform.hpp"
#include "chainspec/fem.hpp"
#include "chainspec/pencil.hpp"
#include "chainspec/quadrature.hpp"

namespace chainspec {

/// Thrown when the hypotheses needed for the reduction do not hold numerically.
class HypothesisViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PositivityResult {
  bool positive_definite = false;
  double margin = 0.0;  // smallest LDL^T pivot of the assembled A
  std::size_t mesh_elements = 0;
  std::string diagnostic;
};

/// Positive definiteness of the discrete hat pencil at lambda = 0. Since B is positive
/// definite this is equivalent to every pencil eigenvalue being positive.
inline PositivityResult check_pencil_positivity(const HatPencil& hat, std::size_t n) {
  const auto form = form_of(hat);
  const Mesh mesh = build_mesh(form, n);
  const auto pair = assemble(form, mesh);
  const auto r = check_positive_definite(pair.A);
  PositivityResult out{r.positive_definite, r.smallest_pivot, mesh.element_count(), {}};
  out.diagnostic = r.positive_definite ? "A(0) positive definite"
                                       : "A(0) not positive definite: smallest pivot " + detail::num(r.smallest_pivot);
  return out;
}

/// Piecewise cubic Hermite interpolant on a cell partition of [0,1]. Adjacent cells
/// share values but may disagree on derivatives (kinks at atoms).
class HermiteTrack {
 public:
  struct Cell {
    double t0, t1, v0, v1, d0, d1;
  };

  HermiteTrack() = default;
  explicit HermiteTrack(std::vector<Cell> cells) : cells_(std::move(cells)) {
    starts_.reserve(cells_.size());
    cumulative_.reserve(cells_.size() + 1);
    cumulative_.push_back(0.0);
    for (const auto& c : cells_) {
      starts_.push_back(c.t0);
      const double H = c.t1 - c.t0;
      cumulative_.push_back(cumulative_.back() + H * (0.5 * (c.v0 + c.v1) + H * (c.d0 - c.d1) / 12.0));
    }
  }

  [[nodiscard]] const std::vector<Cell>& cells() const noexcept { return cells_; }

  [[nodiscard]] std::size_t cell_of(double t, Side side = Side::right) const {
    auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
    auto j = static_cast<std::size_t>(it - starts_.begin());
    std::size_t c = j == 0 ? 0 : std::min(j - 1, cells_.size() - 1);
    if (side == Side::left && c > 0 && t == cells_[c].t0) --c;
    return c;
  }

  [[nodiscard]] double value_in(std::size_t j, double t) const {
    const auto& c = cells_[j];
    const double H = c.t1 - c.t0, s = (t - c.t0) / H, s2 = s * s, s3 = s2 * s;
    return c.v0 * (2 * s3 - 3 * s2 + 1) + H * c.d0 * (s3 - 2 * s2 + s) + c.v1 * (3 * s2 - 2 * s3) + H * c.d1 * (s3 - s2);
  }

  [[nodiscard]] double derivative_in(std::size_t j, double t) const {
    const auto& c = cells_[j];
    const double H = c.t1 - c.t0, s = (t - c.t0) / H, s2 = s * s;
    return (c.v0 * (6 * s2 - 6 * s) + c.v1 * (6 * s - 6 * s2)) / H + c.d0 * (3 * s2 - 4 * s + 1) + c.d1 * (3 * s2 - 2 * s);
  }

  [[nodiscard]] double integral_in(std::size_t j, double t) const {
    const auto& c = cells_[j];
    const double H = c.t1 - c.t0, s = (t - c.t0) / H, s2 = s * s, s3 = s2 * s, s4 = s3 * s;
    const double part = c.v0 * (s - s3 + 0.5 * s4) + H * c.d0 * (0.5 * s2 - 2.0 * s3 / 3.0 + 0.25 * s4) +
                        c.v1 * (s3 - 0.5 * s4) + H * c.d1 * (0.25 * s4 - s3 / 3.0);
    return cumulative_[j] + H * part;
  }

  [[nodiscard]] double value(double t) const { return value_in(cell_of(t), t); }
  [[nodiscard]] double derivative(double t, Side side = Side::right) const { return derivative_in(cell_of(t, side), t); }
  /// int_0^t of the interpolant, exact.
  [[nodiscard]] double integral(double t) const { return integral_in(cell_of(t), t); }
  [[nodiscard]] double total() const { return cumulative_.back(); }

 private:
  std::vector<Cell> cells_;
  std::vector<double> starts_;
  std::vector<double> cumulative_;
};

struct AtomJump {
  double location = 0.0;
  double weight = 0.0;
  double sigma = 0.0;
  double flux_left = 0.0;   // (p sigma')(t-)
  double flux_right = 0.0;  // (p sigma')(t+)
};

struct SigmaData {
  HermiteTrack sigma;             // normalized so that int sigma = 1
  std::vector<double> nodes;      // integration grid
  std::vector<double> values;     // sigma at grid nodes
  std::vector<AtomJump> jumps;
  double gamma = 0.0;             // (p sigma')(1)
  double sigma_at_1 = 0.0;
  double min_sigma = 0.0;
  double shift = 0.0;             // the B of g + B h
  double unnormalized_integral = 0.0;
  std::vector<double> segments;   // singular points of the hat pencil (pieces of the tilde problem)
};

struct SigmaOptions {
  double steps_per_unit = 2048.0;
  std::optional<double> shift;  // overrides the automatic rule
  double extra_shift = 0.0;     // added to the automatic rule (family-invariance checks)
};

namespace detail {

struct SigmaTrack {
  std::vector<double> t;
  // per cell: state at left end (right limit) and at right end (left limit)
  std::vector<std::array<double, 2>> left, right;
  std::vector<std::size_t> segment;  // segment index of each cell
};

// RK4 for y' = f / p, f' = q y across the hat segments, applying f += w y at atoms.
inline SigmaTrack integrate_sigma_system(const PencilForm& form, const std::vector<double>& segs,
                                         std::array<double, 2> state, double steps_per_unit) {
  SigmaTrack tr;
  for (std::size_t sj = 0; sj + 1 < segs.size(); ++sj) {
    const double a = segs[sj], b = segs[sj + 1];
    if (sj > 0)
      for (const auto& atom : form.atoms)
        if (std::abs(atom.location - a) <= 1e-12) state[1] += atom.weight * state[0];
    const std::size_t jp = form.stiffness.piece_for_interval(a, b);
    const std::size_t jq = form.first_order.piece_for_interval(a, b);
    auto rhs = [&](double t, const std::array<double, 2>& y) {
      return std::array<double, 2>{y[1] / form.stiffness.on_piece(jp, t), form.first_order.on_piece(jq, t) * y[0]};
    };
    const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((b - a) * steps_per_unit - 1e-9)));
    const double h = (b - a) / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double t = a + h * static_cast<double>(i);
      const double tn = i + 1 == m ? b : a + h * static_cast<double>(i + 1);
      tr.t.push_back(t);
      tr.left.push_back(state);
      tr.segment.push_back(sj);
      const auto k1 = rhs(t, state);
      const auto k2 = rhs(t + 0.5 * h, {state[0] + 0.5 * h * k1[0], state[1] + 0.5 * h * k1[1]});
      const auto k3 = rhs(t + 0.5 * h, {state[0] + 0.5 * h * k2[0], state[1] + 0.5 * h * k2[1]});
      const auto k4 = rhs(tn, {state[0] + h * k3[0], state[1] + h * k3[1]});
      for (int c = 0; c < 2; ++c) state[c] += h / 6.0 * (k1[c] + 2 * k2[c] + 2 * k3[c] + k4[c]);
      tr.right.push_back(state);
    }
  }
  tr.t.push_back(1.0);
  return tr;
}

}  // namespace detail

/// Positive sigma = (g + B h) / int(g + B h), where g(0)=1, (p g')(0)=0 and h(0)=0,
/// (p h')(0)=1 are the fundamental solutions. B = max(1, B_pos, B_flux) + extra:
/// B_pos keeps g + B h above half of g's starting level, B_flux makes the end flux >= 1.
inline SigmaData solve_sigma(const HatPencil& hat, const SigmaOptions& opt = {}) {
  const PencilForm form = form_of(hat);
  SigmaData out;
  out.segments = detail::merge_points(form.singular_points());
  out.segments.front() = 0.0;
  out.segments.back() = 1.0;
  const auto g = detail::integrate_sigma_system(form, out.segments, {1.0, 0.0}, opt.steps_per_unit);
  const auto h = detail::integrate_sigma_system(form, out.segments, {0.0, 1.0}, opt.steps_per_unit);
  const std::size_t cells = g.left.size();

  for (std::size_t c = 0; c < cells; ++c)
    if (!(h.right[c][0] > 0.0))
      throw HypothesisViolation("second-order form is numerically indefinite: h vanishes at t = " +
                                detail::num(g.t[c + 1]));
  const double G = g.right.back()[1], H = h.right.back()[1];
  if (!(H > 0.0)) throw HypothesisViolation("second-order form is numerically indefinite: (p h')(1) <= 0");

  const double floor_level = 0.5 * std::min(g.left[0][0], g.right[0][0]);
  double b_pos = -INFINITY;
  for (std::size_t c = 0; c < cells; ++c) b_pos = std::max(b_pos, (floor_level - g.right[c][0]) / h.right[c][0]);
  const double b_flux = (1.0 - G) / H;
  const double B = opt.shift ? *opt.shift : std::max({1.0, b_pos, b_flux}) + opt.extra_shift;
  out.shift = B;

  std::vector<HermiteTrack::Cell> hc;
  hc.reserve(cells);
  double integral = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    const double t0 = g.t[c], t1 = g.t[c + 1];
    const std::size_t jp = form.stiffness.piece_for_interval(t0, t1);
    const double v0 = g.left[c][0] + B * h.left[c][0], v1 = g.right[c][0] + B * h.right[c][0];
    const double f0 = g.left[c][1] + B * h.left[c][1], f1 = g.right[c][1] + B * h.right[c][1];
    hc.push_back({t0, t1, v0, v1, f0 / form.stiffness.on_piece(jp, t0), f1 / form.stiffness.on_piece(jp, t1)});
    integral += (t1 - t0) * (0.5 * (v0 + v1) + (t1 - t0) * (hc.back().d0 - hc.back().d1) / 12.0);
  }
  if (!(integral > 0.0)) throw HypothesisViolation("sigma has non-positive integral");
  out.unnormalized_integral = integral;
  for (auto& c : hc) {
    c.v0 /= integral;
    c.v1 /= integral;
    c.d0 /= integral;
    c.d1 /= integral;
  }
  out.sigma = HermiteTrack(std::move(hc));
  out.nodes = g.t;
  out.min_sigma = INFINITY;
  for (std::size_t c = 0; c <= cells; ++c) {
    const double v = c < cells ? out.sigma.cells()[c].v0 : out.sigma.cells().back().v1;
    out.values.push_back(v);
    out.min_sigma = std::min(out.min_sigma, v);
  }
  if (!(out.min_sigma > 0.0)) throw HypothesisViolation("sigma is not positive on the grid");
  out.gamma = (G + B * H) / integral;
  out.sigma_at_1 = out.values.back();

  for (const auto& atom : form.atoms) {
    auto it = std::lower_bound(g.t.begin(), g.t.end(), atom.location - 1e-12);
    const auto c = static_cast<std::size_t>(it - g.t.begin());
    if (c == 0 || c >= cells) continue;
    AtomJump j;
    j.location = atom.location;
    j.weight = atom.weight;
    j.sigma = out.values[c];
    j.flux_left = (g.right[c - 1][1] + B * h.right[c - 1][1]) / integral;
    j.flux_right = (g.left[c][1] + B * h.left[c][1]) / integral;
    out.jumps.push_back(j);
  }
  return out;
}

/// Residual of int p sigma' v' + int q sigma v + sum w sigma(t_i) v(t_i) - gamma v(1) for a
/// test function with v(0) = 0, relative to the sum of the absolute terms.
inline double sigma_weak_residual(const HatPencil& hat, const SigmaData& sd, const std::function<ValueSlope(double)>& v) {
  const PencilForm form = form_of(hat);
  double res = 0.0, scale = 0.0;
  for (std::size_t c = 0; c < sd.sigma.cells().size(); ++c) {
    const auto& cell = sd.sigma.cells()[c];
    const std::size_t jp = form.stiffness.piece_for_interval(cell.t0, cell.t1);
    const std::size_t jq = form.first_order.piece_for_interval(cell.t0, cell.t1);
    const double H = cell.t1 - cell.t0;
    for (std::size_t g = 0; g < 5; ++g) {
      const double t = cell.t0 + H * Gauss5::nodes[g];
      const double w = Gauss5::weights[g] * H;
      const ValueSlope tv = v(t);
      const double a = form.stiffness.on_piece(jp, t) * sd.sigma.derivative_in(c, t) * tv.slope;
      const double b = form.first_order.on_piece(jq, t) * sd.sigma.value_in(c, t) * tv.value;
      res += w * (a + b);
      scale += w * (std::abs(a) + std::abs(b));
    }
  }
  for (const auto& atom : form.atoms) {
    const double term = atom.weight * sd.sigma.value(atom.location) * v(atom.location).value;
    res += term;
    scale += std::abs(term);
  }
  const double end = sd.gamma * v(1.0).value;
  res -= end;
  scale += std::abs(end);
  return scale > 0.0 ? std::abs(res) / scale : 0.0;
}

/// omega(t) = int_0^t sigma, with inverse and derivative.
class MonotoneMap {
 public:
  MonotoneMap() = default;
  explicit MonotoneMap(HermiteTrack sigma) : sigma_(std::move(sigma)) {}

  [[nodiscard]] double operator()(double t) const { return sigma_.integral(t); }
  [[nodiscard]] double derivative(double t) const { return sigma_.value(t); }
  [[nodiscard]] const HermiteTrack& density() const noexcept { return sigma_; }

  /// Solves omega(t) = s, optionally restricted to t in [lo, hi].
  [[nodiscard]] double inverse(double s, double lo = 0.0, double hi = 1.0) const {
    const auto& cells = sigma_.cells();
    std::size_t a = sigma_.cell_of(lo), b = sigma_.cell_of(hi, Side::left);
    while (a < b) {
      const std::size_t mid = (a + b + 1) / 2;
      if (sigma_.integral_in(mid, cells[mid].t0) <= s)
        a = mid;
      else
        b = mid - 1;
    }
    const auto& c = cells[a];
    double tl = std::max(c.t0, lo), tr = std::min(c.t1, hi);
    double t = std::clamp(c.t0 + (s - sigma_.integral_in(a, c.t0)) / std::max(c.v0, 1e-300), tl, tr);
    for (int it = 0; it < 60; ++it) {
      const double f = sigma_.integral_in(a, t) - s;
      if (f > 0.0) tr = t; else tl = t;
      double tn = t - f / sigma_.value_in(a, t);
      if (!(tn > tl && tn < tr)) tn = 0.5 * (tl + tr);
      if (std::abs(tn - t) <= 1e-16 * std::max(1.0, std::abs(t))) {
        t = tn;
        break;
      }
      t = tn;
    }
    return t;
  }

 private:
  HermiteTrack sigma_;
};

inline MonotoneMap build_omega(const SigmaData& sd) { return MonotoneMap(sd.sigma); }

struct TildeProblem {
  PiecewiseFunction p_tilde{PiecewiseCoefficient::constant(1.0)};
  PiecewiseFunction r_tilde{PiecewiseCoefficient::constant(1.0)};
  double alpha_tilde = 0.0;
  double gamma_sigma1 = 0.0;
  double beta = 0.0;
  // Meshes for the tilde problem are omega-images of meshes in the hat variable.
  std::function<double(double)> omega;
  std::vector<double> hat_points;
};

inline PencilForm form_of(const TildeProblem& tp) {
  return {tp.p_tilde, PiecewiseCoefficient::constant(0.0), tp.r_tilde, {}, tp.gamma_sigma1,
          tp.alpha_tilde, tp.beta, tp.omega, tp.hat_points};
}

/// p~(omega(t)) = p^(t) sigma(t)^3, r~(omega(t)) = r^(t) / sigma(t), alpha~ = alpha^ sigma(1)^2.
inline TildeProblem transform_tilde(const HatPencil& hat, const SigmaData& sd, const MonotoneMap& omega) {
  struct Context {
    HatPencil hat;
    MonotoneMap omega;
    std::vector<double> t_segments;
    std::vector<std::size_t> p_piece, r_piece;
  };
  auto ctx = std::make_shared<Context>();
  ctx->hat = hat;
  ctx->omega = omega;
  ctx->t_segments = sd.segments;
  std::vector<double> s_segments;
  for (std::size_t j = 0; j + 1 < sd.segments.size(); ++j) {
    const double a = sd.segments[j], b = sd.segments[j + 1];
    ctx->p_piece.push_back(hat.p_hat.piece_index(0.5 * (a + b)));
    ctx->r_piece.push_back(hat.r_hat.piece_index(0.5 * (a + b)));
    s_segments.push_back(j == 0 ? 0.0 : omega(a));
  }
  s_segments.push_back(1.0);

  auto locate = [ctx](std::size_t j, double s) {
    const double lo = ctx->t_segments[j], hi = ctx->t_segments[j + 1];
    const double t = std::clamp(ctx->omega.inverse(s, lo, hi), lo, hi);
    const auto& dens = ctx->omega.density();
    const std::size_t c = std::clamp(dens.cell_of(t), dens.cell_of(lo), dens.cell_of(hi, Side::left));
    return std::pair{t, dens.value_in(c, t)};
  };
  TildeProblem tp{
      PiecewiseFunction(s_segments,
                        [ctx, locate](std::size_t j, double s) {
                          const auto [t, sig] = locate(j, s);
                          return ctx->hat.p_hat.on_piece(ctx->p_piece[j], t) * sig * sig * sig;
                        }),
      PiecewiseFunction(s_segments,
                        [ctx, locate](std::size_t j, double s) {
                          const auto [t, sig] = locate(j, s);
                          return ctx->hat.r_hat.on_piece(ctx->r_piece[j], t) / sig;
                        }),
      hat.alpha_hat * sd.sigma_at_1 * sd.sigma_at_1, sd.gamma * sd.sigma_at_1, hat.beta,
      [omega](double t) { return omega(t); }, sd.segments};
  return tp;
}

struct ComposedSamples {
  std::vector<double> t, value, slope;
};

/// [Vu](t) = u(omega(t)) and [Vu]'(t) = u'(omega(t)) sigma(t).
inline ComposedSamples compose_V(const std::function<ValueSlope(double)>& u_eval, const MonotoneMap& omega,
                                 std::span<const double> ts) {
  ComposedSamples out;
  for (double t : ts) {
    const ValueSlope u = u_eval(std::clamp(omega(t), 0.0, 1.0));
    out.t.push_back(t);
    out.value.push_back(u.value);
    out.slope.push_back(u.slope * omega.derivative(t));
  }
  return out;
}

/// The whole reduction from the original problem to the classical two-point problem.
struct ReductionChain {
  ProblemSpec spec;
  PiecewiseLinearMap tau;
  HatPencil hat;
  PositivityResult positivity;
  SigmaData sigma;
  MonotoneMap omega;
  TildeProblem tilde;
};

/// Throws HypothesisViolation if the hat pencil is not positive definite at lambda = 0.
inline ReductionChain build_chain(const ProblemSpec& spec, std::size_t positivity_mesh = 256,
                                  const SigmaOptions& sigma_options = {}) {
  ReductionChain ch;
  ch.spec = spec;
  ch.tau = build_tau(spec.interfaces);
  ch.hat = push_forward(spec, ch.tau);
  ch.positivity = check_pencil_positivity(ch.hat, positivity_mesh);
  if (!ch.positivity.positive_definite) throw HypothesisViolation(ch.positivity.diagnostic);
  ch.sigma = solve_sigma(ch.hat, sigma_options);
  ch.omega = build_omega(ch.sigma);
  ch.tilde = transform_tilde(ch.hat, ch.sigma, ch.omega);
  return ch;
}

}  // namespace chainspec
