#include "heun/heun_core.hpp"

#include <cmath>

namespace heun {

namespace {

void check_alpha(double a, int j) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw HeunError(ErrorKind::invalid_argument,
                    "angle must be positive (alpha_" + std::to_string(j) + ")");
  }
}

void check_label(int label) {
  if (label < 0 || label > 3) {
    throw HeunError(ErrorKind::invalid_argument,
                    "unknown singularity label " + std::to_string(label));
  }
}

}  // namespace

double coefficient_A(const std::array<double, 4>& alpha) {
  const double s = alpha[0] + alpha[1] + alpha[2];
  return (2.0 + alpha[3] - s) * (2.0 - alpha[3] - s) / 4.0;
}

double k_from_alpha(double alpha) {
  check_alpha(alpha, 0);
  return alpha * alpha - 0.25;
}

double alpha_from_k(double k) {
  if (!(k > -0.25) || !std::isfinite(k)) {
    throw HeunError(ErrorKind::invalid_argument, "angle must be positive (k <= -1/4)");
  }
  return std::sqrt(k + 0.25);
}

bool is_integer(double x, double tol) { return std::abs(x - std::round(x)) <= tol; }

SphereHeun::SphereHeun(std::array<Complex, 3> points, std::array<double, 4> alpha, Complex q)
    : points_(points), alpha_(alpha), q_(q) {
  for (int j = 0; j < 4; ++j) check_alpha(alpha_[j], j);
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      if (std::abs(points_[i] - points_[j]) == 0.0) {
        throw HeunError(ErrorKind::invalid_argument, "singular points must be distinct");
      }
    }
  }
}

SphereHeun SphereHeun::with_q(Complex q) const { return SphereHeun(points_, alpha_, q); }

Complex SphereHeun::p(Complex z) const {
  Complex s{0.0, 0.0};
  for (int j = 0; j < 3; ++j) s += (1.0 - alpha_[j]) / (z - points_[j]);
  return s;
}

Complex SphereHeun::r(Complex z) const {
  return (A() * z - q_) / ((z - points_[0]) * (z - points_[1]) * (z - points_[2]));
}

ExponentPair SphereHeun::exponents(int label) const {
  check_label(label);
  if (label == kInfinity) {
    const double s = alpha_[0] + alpha_[1] + alpha_[2];
    return {(2.0 - s - alpha_[3]) / 2.0, (2.0 - s + alpha_[3]) / 2.0};
  }
  return {0.0, alpha_[label]};
}

double SphereHeun::min_separation() const {
  return std::min({std::abs(points_[0] - points_[1]), std::abs(points_[0] - points_[2]),
                   std::abs(points_[1] - points_[2])});
}

TorusHeun::TorusHeun(Complex omega1, Complex omega2, std::array<double, 4> alpha,
                     Complex lambda)
    : lattice_(std::make_shared<const Lattice>(omega1, omega2)), alpha_(alpha), lambda_(lambda) {
  for (int j = 0; j < 4; ++j) {
    check_alpha(alpha_[j], j);
    k_[j] = k_from_alpha(alpha_[j]);
  }
}

TorusHeun TorusHeun::from_k(Complex omega1, Complex omega2, const std::array<double, 4>& k,
                            Complex lambda) {
  std::array<double, 4> alpha{};
  for (int j = 0; j < 4; ++j) alpha[j] = alpha_from_k(k[j]);
  return TorusHeun(omega1, omega2, alpha, lambda);
}

Complex TorusHeun::period(int j) const {
  if (j == 1) return omega1();
  if (j == 2) return omega2();
  throw HeunError(ErrorKind::invalid_argument, "period index must be 1 or 2");
}

TorusHeun TorusHeun::with_lambda(Complex lambda) const {
  TorusHeun copy = *this;
  copy.lambda_ = lambda;
  return copy;
}

bool TorusHeun::is_singular(int j) const { return k_.at(j) != 0.0; }

Complex TorusHeun::potential(Complex z) const {
  Complex v = lambda_;
  for (int j = 0; j < 4; ++j) {
    const double kj = k_[j];
    if (kj != 0.0) v += kj * lattice_->wp(z - lattice_->half_period(j));
  }
  return v;
}

ExponentPair TorusHeun::exponents(int label) const {
  check_label(label);
  return {0.5 - alpha_[label], 0.5 + alpha_[label]};
}

}  // namespace heun
