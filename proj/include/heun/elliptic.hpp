#pragma once

#include <array>
#include <utility>
#include <vector>

#include "heun/types.hpp"

namespace heun {

/// Weierstrass invariants (g2, g3) of the lattice spanned by omega1, omega2.
std::pair<Complex, Complex> invariants(Complex omega1, Complex omega2);

/// A period lattice together with everything needed to evaluate the
/// Weierstrass function on it: invariants, Laurent coefficients of the
/// expansion at 0, a reduced basis for argument reduction, and the
/// half-period values e_1, e_2, e_3.
///
/// The constructor orients the basis so that Im(omega2 / omega1) > 0,
/// swapping the two periods when necessary.
class Lattice {
 public:
  Lattice(Complex omega1, Complex omega2);

  Complex omega1() const { return omega1_; }
  Complex omega2() const { return omega2_; }
  Complex tau() const { return omega2_ / omega1_; }
  Complex g2() const { return g2_; }
  Complex g3() const { return g3_; }

  /// omega_j / 2 with omega_0 = 0 and omega_3 = omega_1 + omega_2.
  Complex half_period(int j) const;
  /// e_j = wp(omega_j / 2) for j = 1, 2, 3.
  Complex e(int j) const;
  /// Length of the shortest nonzero lattice vector.
  double shortest_period() const { return std::abs(reduced_[0]); }

  Complex wp(Complex z) const { return wp_pair(z).first; }
  Complex wp_prime(Complex z) const { return wp_pair(z).second; }
  /// (wp(z), wp'(z)) in one pass.
  std::pair<Complex, Complex> wp_pair(Complex z) const;

  /// Translate z by a lattice vector so that it lies in the Voronoi cell
  /// of the origin.
  Complex reduce(Complex z) const;

  /// Taylor coefficients d_0..d_{n-1} of wp(z0 + u) in u. z0 must not be a
  /// lattice point.
  std::vector<Complex> taylor(Complex z0, int n) const;

  /// Laurent coefficients of wp at 0: wp(z) = z^-2 + sum_{k>=2} c_k z^{2k-2}.
  /// Entry k of the returned span is c_k (entries 0 and 1 are zero).
  const std::vector<Complex>& laurent() const { return laurent_; }

 private:
  std::pair<Complex, Complex> series_pair(Complex z) const;

  Complex omega1_;
  Complex omega2_;
  std::array<Complex, 2> reduced_;
  // Real 2x2 inverse of [Re u, Re v; Im u, Im v] for the reduced basis.
  std::array<double, 4> reduced_inverse_;
  Complex g2_;
  Complex g3_;
  std::vector<Complex> laurent_;
  std::array<Complex, 3> e_;
};

}  // namespace heun
