#pragma once

#include <cmath>
#include <functional>

#include "bandlab/market.hpp"
#include "bandlab/rng.hpp"

namespace testsup {

// 8-point Gauss-Legendre on [a, b]; independent quadrature oracle for the
// piecewise-polynomial densities (exact up to degree 15).
inline double gauss8(const std::function<double(double)>& f, double a,
                     double b) {
  static const double nodes[4] = {0.1834346424956498, 0.5255324099163290,
                                  0.7966664774136267, 0.9602898564975363};
  static const double weights[4] = {0.3626837833783620, 0.3137066458778873,
                                    0.2223810344533745, 0.1012285362903763};
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double sum = 0.0;
  for (int i = 0; i < 4; ++i)
    sum += weights[i] * (f(mid + half * nodes[i]) + f(mid - half * nodes[i]));
  return half * sum;
}

inline double uniform_in(bandlab::PathRng& rng, double lo, double hi) {
  return lo + (hi - lo) * rng.uniform01();
}

// Reference market from the examples: mu=0.1, r=0.02, sigma=0.2, p=-3, T=1.
inline bandlab::MertonSolution reference_merton() {
  return bandlab::MertonSolution(bandlab::MarketParams{0.1, 0.02, 0.2},
                                 bandlab::CrraUtility{-3.0}, 1.0);
}

}  // namespace testsup
