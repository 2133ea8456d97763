#pragma once

#include <array>
#include <memory>
#include <string>

#include "heun/elliptic.hpp"
#include "heun/types.hpp"

namespace heun {

/// Label of the singular point at infinity of the sphere form.
inline constexpr int kInfinity = 3;

enum class Form { sphere, torus };

/// Local exponents at a singular point; plus - minus is the exponent
/// difference (angle / 2pi on the sphere, twice that on the torus).
struct ExponentPair {
  Complex minus;
  Complex plus;

  Complex difference() const { return plus - minus; }
};

double coefficient_A(const std::array<double, 4>& alpha);
double k_from_alpha(double alpha);
double alpha_from_k(double k);

/// True when x is within tol of an integer.
bool is_integer(double x, double tol = 1e-12);

/// Heun's equation on the Riemann sphere with singular points
/// a0, a1, a2 and infinity:
///
///   w'' + (sum_j (1 - alpha_j)/(z - a_j)) w' + (A z - q)/prod_j(z - a_j) w = 0.
class SphereHeun {
 public:
  SphereHeun(std::array<Complex, 3> points, std::array<double, 4> alpha, Complex q);

  const std::array<Complex, 3>& points() const { return points_; }
  const std::array<double, 4>& alpha() const { return alpha_; }
  Complex q() const { return q_; }
  /// Recomputed from the angles on every call.
  double A() const { return coefficient_A(alpha_); }

  SphereHeun with_q(Complex q) const;

  /// First-derivative coefficient p(z).
  Complex p(Complex z) const;
  /// Zeroth-order coefficient r(z) = (A z - q) / prod (z - a_j).
  Complex r(Complex z) const;

  ExponentPair exponents(int label) const;

  /// Smallest pairwise distance between the finite singular points.
  double min_separation() const;

 private:
  std::array<Complex, 3> points_;
  std::array<double, 4> alpha_;
  Complex q_;
};

/// Heun's equation in elliptic form on the torus C / (omega1 Z + omega2 Z):
///
///   w'' = (sum_j k_j wp(z - omega_j/2) + lambda) w,   k_j = alpha_j^2 - 1/4.
///
/// Angles are stored; k_j is derived.
class TorusHeun {
 public:
  TorusHeun(Complex omega1, Complex omega2, std::array<double, 4> alpha, Complex lambda);

  static TorusHeun from_k(Complex omega1, Complex omega2, const std::array<double, 4>& k,
                          Complex lambda);

  Complex omega1() const { return lattice_->omega1(); }
  Complex omega2() const { return lattice_->omega2(); }
  /// Period omega_j for j = 1, 2.
  Complex period(int j) const;
  const Lattice& lattice() const { return *lattice_; }
  const std::array<double, 4>& alpha() const { return alpha_; }
  double k(int j) const { return k_.at(j); }
  const std::array<double, 4>& k() const { return k_; }
  Complex lambda() const { return lambda_; }
  Complex half_period(int j) const { return lattice_->half_period(j); }

  TorusHeun with_lambda(Complex lambda) const;

  /// True when k_j != 0, i.e. omega_j/2 is a genuine singular point.
  bool is_singular(int j) const;

  /// V(z) = sum_j k_j wp(z - omega_j/2) + lambda.
  Complex potential(Complex z) const;

  ExponentPair exponents(int label) const;

  /// Smallest distance between two points of the half-period lattice.
  double min_separation() const { return 0.5 * lattice_->shortest_period(); }

 private:
  std::shared_ptr<const Lattice> lattice_;
  std::array<double, 4> alpha_;
  std::array<double, 4> k_;  // derived from alpha_
  Complex lambda_;
};

}  // namespace heun
