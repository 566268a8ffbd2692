#pragma once

#include <array>

namespace chainspec {

/// Five-point Gauss-Legendre rule on [0,1]; exact through degree 9.
struct Gauss5 {
  static constexpr std::array<double, 5> nodes{
      0.046910077030668003601186560850304,
      0.230765344947158454481842811430692,
      0.5,
      0.769234655052841545518157188569308,
      0.953089922969331996398813439149696,
  };
  static constexpr std::array<double, 5> weights{
      0.118463442528094543757132020359959,
      0.239314335249683234020645757417819,
      0.284444444444444444444444444444444,
      0.239314335249683234020645757417819,
      0.118463442528094543757132020359959,
  };

  template <class F>
  static double integrate(F&& f, double a, double b) {
    const double h = b - a;
    double s = 0.0;
    for (std::size_t i = 0; i < 5; ++i) s += weights[i] * f(a + h * nodes[i]);
    return s * h;
  }
};

}  // namespace chainspec
