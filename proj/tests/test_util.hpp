#pragma once

#include <cmath>
#include <random>

#include "platedg/dgspace.hpp"

namespace testutil {

inline platedg::Field random_field(const platedg::DgSpace& s, std::mt19937& rng, platedg::BoundaryData data = {},
                                   double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  platedg::Field f(s, std::move(data));
  for (long i = 0; i < f.coeffs.size(); ++i) f.coeffs(i) = n(rng);
  return f;
}

inline platedg::Vector random_vector(long n, std::mt19937& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  platedg::Vector v(n);
  for (long i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

// Flat state plus a small smooth perturbation that keeps boundary data exact
// on the left and bottom sides of (0,L)^2.
inline platedg::Field bent_state(const platedg::DgSpace& s, double amplitude, platedg::BoundaryData data) {
  return platedg::interpolate(
      s,
      [amplitude](const platedg::Point2& x) {
        return platedg::Vec3(x(0), x(1), amplitude * x(0) * x(0) * x(1) * x(1));
      },
      std::move(data));
}

}  // namespace testutil
