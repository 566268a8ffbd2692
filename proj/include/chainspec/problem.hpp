#pragma once

// Problem data for the multipoint fourth-order boundary problem
//
//   (p y'')'' - (q y')' = lambda r y   on [0,1],
//   y(0) = y'(0) = 0,
//   interface conditions at 0 < xi_0 < ... < xi_m < 1,
//   (p y'')(1) - alpha lambda y'(1) = [(p y'')' - q y'](1) + beta lambda y(1) = 0.
//
// Coefficients are piecewise polynomials of degree <= 2; each piece stores
// its coefficients in the local variable (x - left breakpoint).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace chainspec {

/// Malformed problem document (missing field, wrong type).
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed document whose data violates a problem hypothesis.
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Quadratic = std::array<double, 3>;

inline double eval_quadratic(const Quadratic& c, double d) { return c[0] + d * (c[1] + d * c[2]); }

class PiecewiseCoefficient {
 public:
  PiecewiseCoefficient() : PiecewiseCoefficient(constant(0.0)) {}

  PiecewiseCoefficient(std::vector<double> breakpoints, std::vector<Quadratic> pieces)
      : breakpoints_(std::move(breakpoints)), pieces_(std::move(pieces)) {
    if (breakpoints_.size() < 2) throw std::invalid_argument("coefficient needs at least two breakpoints");
    if (pieces_.size() + 1 != breakpoints_.size())
      throw std::invalid_argument("coefficient needs exactly one piece per interval");
    if (breakpoints_.front() != 0.0 || breakpoints_.back() != 1.0)
      throw std::invalid_argument("coefficient breakpoints must start at 0 and end at 1");
    for (std::size_t i = 1; i < breakpoints_.size(); ++i)
      if (!(breakpoints_[i] > breakpoints_[i - 1]))
        throw std::invalid_argument("coefficient breakpoints must be strictly ascending");
    for (const auto& c : pieces_)
      for (double v : c)
        if (!std::isfinite(v)) throw std::invalid_argument("coefficient values must be finite");
  }

  static PiecewiseCoefficient constant(double c) { return {{0.0, 1.0}, {Quadratic{c, 0.0, 0.0}}}; }

  [[nodiscard]] const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
  [[nodiscard]] const std::vector<Quadratic>& pieces() const noexcept { return pieces_; }
  [[nodiscard]] std::size_t piece_count() const noexcept { return pieces_.size(); }

  /// Piece containing x: right-continuous, the last piece owns x = 1.
  [[nodiscard]] std::size_t piece_index(double x) const {
    if (!(x >= 0.0 && x <= 1.0)) throw std::out_of_range("coefficient evaluated outside [0,1]");
    auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x);
    auto j = static_cast<std::size_t>(it - breakpoints_.begin());
    if (j == 0) return 0;
    return std::min(j - 1, pieces_.size() - 1);
  }

  /// Polynomial of piece j at x; x need not lie inside the piece.
  [[nodiscard]] double on_piece(std::size_t j, double x) const {
    return eval_quadratic(pieces_[j], x - breakpoints_[j]);
  }

  [[nodiscard]] double derivative_on_piece(std::size_t j, double x) const {
    const auto& c = pieces_[j];
    return c[1] + 2.0 * c[2] * (x - breakpoints_[j]);
  }

  [[nodiscard]] double operator()(double x) const { return on_piece(piece_index(x), x); }

  /// Exact extremum of the piece polynomial over its closed interval.
  [[nodiscard]] std::pair<double, double> range_on_piece(std::size_t j) const {
    const double a = breakpoints_[j], b = breakpoints_[j + 1];
    double lo = std::min(on_piece(j, a), on_piece(j, b));
    double hi = std::max(on_piece(j, a), on_piece(j, b));
    const auto& c = pieces_[j];
    if (c[2] != 0.0) {
      const double v = a - c[1] / (2.0 * c[2]);
      if (v > a && v < b) {
        lo = std::min(lo, on_piece(j, v));
        hi = std::max(hi, on_piece(j, v));
      }
    }
    return {lo, hi};
  }

  /// True iff the piece is strictly positive on the open interval (zeros at its ends allowed).
  [[nodiscard]] bool positive_inside(std::size_t j) const {
    const double a = breakpoints_[j], b = breakpoints_[j + 1];
    if (on_piece(j, a) < 0.0 || on_piece(j, b) < 0.0) return false;
    if (!(on_piece(j, 0.5 * (a + b)) > 0.0)) return false;
    const auto& c = pieces_[j];
    if (c[2] != 0.0) {
      const double v = a - c[1] / (2.0 * c[2]);
      if (v > a && v < b && !(on_piece(j, v) > 0.0)) return false;
    }
    return true;
  }

  friend bool operator==(const PiecewiseCoefficient&, const PiecewiseCoefficient&) = default;

 private:
  std::vector<double> breakpoints_;
  std::vector<Quadratic> pieces_;
};

inline double eval_coefficient(const PiecewiseCoefficient& c, double x) { return c(x); }

struct InterfacePoint {
  double xi = 0.5;
  double eta = 1.0;
  double alpha_i = 0.0;
  friend bool operator==(const InterfacePoint&, const InterfacePoint&) = default;
};

enum class ProblemMode { theorem, validation };

inline std::string to_string(ProblemMode m) { return m == ProblemMode::theorem ? "theorem" : "validation"; }

struct ProblemSpec {
  PiecewiseCoefficient p = PiecewiseCoefficient::constant(1.0);
  PiecewiseCoefficient q = PiecewiseCoefficient::constant(0.0);
  PiecewiseCoefficient r = PiecewiseCoefficient::constant(1.0);
  std::vector<InterfacePoint> interfaces;
  double alpha = 0.0;
  double beta = 1.0;
  ProblemMode mode = ProblemMode::theorem;
  friend bool operator==(const ProblemSpec&, const ProblemSpec&) = default;
};

/// Human-readable statement of the boundary and interface conditions of a problem.
struct BoundaryForm {
  std::vector<std::string> at_zero;
  std::vector<std::vector<std::string>> at_interfaces;
  std::vector<std::string> at_one;
};

namespace detail {
inline std::string num(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}
}  // namespace detail

inline BoundaryForm boundary_form(const ProblemSpec& spec) {
  using detail::num;
  BoundaryForm f;
  f.at_zero = {"y(0) = 0", "y'(0) = 0"};
  for (const auto& ip : spec.interfaces) {
    const std::string x = num(ip.xi);
    f.at_interfaces.push_back({
        "y(" + x + "+0) - y(" + x + "-0) = 0",
        "y'(" + x + "+0) - " + num(ip.eta) + " y'(" + x + "-0) = 0",
        num(ip.eta) + " (p y'')(" + x + "+0) - (p y'')(" + x + "-0) - " + num(ip.alpha_i) + " y'(" + x +
            "-0) = 0",
        "[(p y'')' - q y'](" + x + "+0) - [(p y'')' - q y'](" + x + "-0) = 0",
    });
  }
  f.at_one = {"(p y'')(1) - " + num(spec.alpha) + " lambda y'(1) = 0",
              "[(p y'')' - q y'](1) + " + num(spec.beta) + " lambda y(1) = 0"};
  return f;
}

struct ProblemCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// One record per hypothesis; failures are returned as data.
inline std::vector<ProblemCheck> validate_problem(const ProblemSpec& spec) {
  std::vector<ProblemCheck> out;
  auto add = [&](std::string name, bool ok, std::string detail = {}) {
    out.push_back({std::move(name), ok, std::move(detail)});
  };

  double pmin = INFINITY, pmax = -INFINITY;
  for (std::size_t j = 0; j < spec.p.piece_count(); ++j) {
    auto [lo, hi] = spec.p.range_on_piece(j);
    pmin = std::min(pmin, lo);
    pmax = std::max(pmax, hi);
  }
  add("p strictly positive", pmin > 0.0, "min p = " + detail::num(pmin));
  add("p bounded", std::isfinite(pmax), "max p = " + detail::num(pmax));

  bool r_ok = true;
  std::string r_detail;
  for (std::size_t j = 0; j < spec.r.piece_count(); ++j)
    if (!spec.r.positive_inside(j)) {
      r_ok = false;
      r_detail = "piece " + std::to_string(j) + " not positive";
    }
  add("r positive almost everywhere", r_ok, r_detail);

  bool inside = true, eta_ok = true, ordered = true;
  for (std::size_t i = 0; i < spec.interfaces.size(); ++i) {
    const auto& ip = spec.interfaces[i];
    if (!(ip.xi > 0.0 && ip.xi < 1.0)) inside = false;
    if (!(ip.eta > 0.0) || !std::isfinite(ip.eta)) eta_ok = false;
    if (!std::isfinite(ip.alpha_i)) eta_ok = false;
    if (i > 0 && !(ip.xi > spec.interfaces[i - 1].xi)) ordered = false;
  }
  add("0 < xi < 1", inside);
  add("eta > 0", eta_ok);
  add("interfaces strictly ordered", ordered);
  add("alpha >= 0", spec.alpha >= 0.0 && std::isfinite(spec.alpha), "alpha = " + detail::num(spec.alpha));
  if (spec.mode == ProblemMode::theorem)
    add("beta > 0", spec.beta > 0.0 && std::isfinite(spec.beta), "beta = " + detail::num(spec.beta));
  else
    add("beta >= 0", spec.beta >= 0.0 && std::isfinite(spec.beta), "beta = " + detail::num(spec.beta));
  return out;
}

// ---------------------------------------------------------------------------
// JSON

using nlohmann::json;

namespace detail {

inline double number_field(const json& j, const std::string& where) {
  if (!j.is_number()) throw SchemaError("field '" + where + "' must be a number");
  return j.get<double>();
}

inline PiecewiseCoefficient coefficient_from_json(const json& j, const std::string& name) {
  if (j.is_number()) return PiecewiseCoefficient::constant(j.get<double>());
  if (!j.is_object()) throw SchemaError("field '" + name + "' must be a number or a piecewise object");
  if (!j.contains("breakpoints")) throw SchemaError("field '" + name + ".breakpoints' is missing");
  if (!j.contains("pieces")) throw SchemaError("field '" + name + ".pieces' is missing");
  const auto& bj = j.at("breakpoints");
  const auto& pj = j.at("pieces");
  if (!bj.is_array()) throw SchemaError("field '" + name + ".breakpoints' must be an array");
  if (!pj.is_array()) throw SchemaError("field '" + name + ".pieces' must be an array");
  std::vector<double> bps;
  for (std::size_t i = 0; i < bj.size(); ++i)
    bps.push_back(number_field(bj[i], name + ".breakpoints[" + std::to_string(i) + "]"));
  std::vector<Quadratic> pieces;
  for (std::size_t i = 0; i < pj.size(); ++i) {
    const std::string where = name + ".pieces[" + std::to_string(i) + "]";
    Quadratic c{0.0, 0.0, 0.0};
    if (pj[i].is_number()) {
      c[0] = pj[i].get<double>();
    } else if (pj[i].is_array() && !pj[i].empty() && pj[i].size() <= 3) {
      for (std::size_t k = 0; k < pj[i].size(); ++k) c[k] = number_field(pj[i][k], where);
    } else {
      throw SchemaError("field '" + where + "' must be a list of 1 to 3 polynomial coefficients");
    }
    pieces.push_back(c);
  }
  try {
    return PiecewiseCoefficient(std::move(bps), std::move(pieces));
  } catch (const std::invalid_argument& e) {
    throw SchemaError("field '" + name + "': " + e.what());
  }
}

inline json coefficient_to_json(const PiecewiseCoefficient& c) {
  if (c.piece_count() == 1 && c.pieces()[0][1] == 0.0 && c.pieces()[0][2] == 0.0) return c.pieces()[0][0];
  json pieces = json::array();
  for (const auto& q : c.pieces()) pieces.push_back({q[0], q[1], q[2]});
  return {{"breakpoints", c.breakpoints()}, {"pieces", pieces}};
}

}  // namespace detail

/// Builds a ProblemSpec from a parsed document without checking hypotheses.
inline ProblemSpec problem_from_json(const json& doc) {
  if (!doc.is_object()) throw SchemaError("problem document must be a JSON object");
  ProblemSpec spec;
  for (const char* key : {"p", "q", "r", "alpha", "beta"})
    if (!doc.contains(key)) throw SchemaError(std::string("field '") + key + "' is missing");
  spec.p = detail::coefficient_from_json(doc.at("p"), "p");
  spec.q = detail::coefficient_from_json(doc.at("q"), "q");
  spec.r = detail::coefficient_from_json(doc.at("r"), "r");
  spec.alpha = detail::number_field(doc.at("alpha"), "alpha");
  spec.beta = detail::number_field(doc.at("beta"), "beta");
  if (doc.contains("interfaces")) {
    const auto& arr = doc.at("interfaces");
    if (!arr.is_array()) throw SchemaError("field 'interfaces' must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = "interfaces[" + std::to_string(i) + "]";
      const auto& e = arr[i];
      if (!e.is_object()) throw SchemaError("field '" + where + "' must be an object");
      InterfacePoint ip;
      for (const char* key : {"xi", "eta"})
        if (!e.contains(key)) throw SchemaError("field '" + where + "." + key + "' is missing");
      ip.xi = detail::number_field(e.at("xi"), where + ".xi");
      ip.eta = detail::number_field(e.at("eta"), where + ".eta");
      ip.alpha_i = e.contains("alpha_i") ? detail::number_field(e.at("alpha_i"), where + ".alpha_i") : 0.0;
      spec.interfaces.push_back(ip);
    }
  }
  if (doc.contains("mode")) {
    const auto& m = doc.at("mode");
    if (m == "theorem")
      spec.mode = ProblemMode::theorem;
    else if (m == "validation")
      spec.mode = ProblemMode::validation;
    else
      throw SchemaError("field 'mode' must be \"theorem\" or \"validation\"");
  }
  return spec;
}

/// Throws InvariantViolation naming the first failed hypothesis.
inline void require_valid(const ProblemSpec& spec) {
  for (const auto& c : validate_problem(spec))
    if (!c.passed)
      throw InvariantViolation("invariant violated: " + c.name + (c.detail.empty() ? "" : " (" + c.detail + ")"));
}

inline ProblemSpec parse_problem(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("problem document is not valid JSON: ") + e.what());
  }
  ProblemSpec spec = problem_from_json(doc);
  require_valid(spec);
  return spec;
}

inline json problem_to_json(const ProblemSpec& spec) {
  json ifs = json::array();
  for (const auto& ip : spec.interfaces) ifs.push_back({{"xi", ip.xi}, {"eta", ip.eta}, {"alpha_i", ip.alpha_i}});
  return {{"p", detail::coefficient_to_json(spec.p)},
          {"q", detail::coefficient_to_json(spec.q)},
          {"r", detail::coefficient_to_json(spec.r)},
          {"interfaces", ifs},
          {"alpha", spec.alpha},
          {"beta", spec.beta},
          {"mode", to_string(spec.mode)}};
}

inline std::string serialize_problem(const ProblemSpec& spec) { return problem_to_json(spec).dump(); }

}  // namespace chainspec
