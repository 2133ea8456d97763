#include "heun/elliptic.hpp"

#include <cmath>
#include <string>

namespace heun {

namespace {

constexpr int kLaurentTerms = 48;
// Arguments farther than this fraction of the shortest period from the
// origin are halved (and the result doubled back) before the series is used.
constexpr double kSeriesRadius = 0.5;

struct ReducedBasis {
  Complex u;
  Complex v;
};

// Lagrange-Gauss reduction: |u| <= |v| and |Re(v/u)| <= 1/2, Im(v/u) > 0.
ReducedBasis gauss_reduce(Complex u, Complex v) {
  for (int iter = 0; iter < 200; ++iter) {
    if (std::norm(v) < std::norm(u)) std::swap(u, v);
    const double m = std::round((v * std::conj(u)).real() / std::norm(u));
    if (m == 0.0) break;
    v -= m * u;
  }
  if ((v / u).imag() < 0.0) v = -v;
  return {u, v};
}

// Eisenstein series E4, E6 from the nome expansion; tau in the upper
// half-plane, ideally reduced so that |q| is small.
std::pair<Complex, Complex> eisenstein_e4_e6(Complex tau) {
  const Complex q = std::exp(2.0 * kPi * kI * tau);
  Complex s3{0.0, 0.0};
  Complex s5{0.0, 0.0};
  Complex qn = q;
  for (int n = 1; n < 2000; ++n) {
    const double n3 = static_cast<double>(n) * n * n;
    const double n5 = n3 * n * n;
    const Complex frac = qn / (1.0 - qn);
    const Complex t3 = n3 * frac;
    const Complex t5 = n5 * frac;
    s3 += t3;
    s5 += t5;
    if (std::abs(t5) < 1e-18 * (1.0 + std::abs(s5)) &&
        std::abs(t3) < 1e-18 * (1.0 + std::abs(s3))) {
      break;
    }
    qn *= q;
  }
  return {1.0 + 240.0 * s3, 1.0 - 504.0 * s5};
}

void check_periods(Complex omega1, Complex omega2) {
  if (omega1 == 0.0 || omega2 == 0.0) {
    throw HeunError(ErrorKind::invalid_argument, "degenerate lattice: zero period");
  }
  const Complex tau = omega2 / omega1;
  if (!std::isfinite(tau.real()) || !std::isfinite(tau.imag()) ||
      std::abs(tau.imag()) < 1e-12 * std::abs(tau)) {
    throw HeunError(ErrorKind::invalid_argument,
                    "degenerate lattice: omega2/omega1 is real");
  }
}

}  // namespace

std::pair<Complex, Complex> invariants(Complex omega1, Complex omega2) {
  check_periods(omega1, omega2);
  const auto [u, v] = gauss_reduce(omega1, omega2);
  const auto [e4, e6] = eisenstein_e4_e6(v / u);
  const double pi2 = kPi * kPi;
  const double pi4 = pi2 * pi2;
  const double pi6 = pi4 * pi2;
  const Complex u2 = u * u;
  const Complex u4 = u2 * u2;
  const Complex g2 = (4.0 * pi4 / 3.0) * e4 / u4;
  const Complex g3 = (8.0 * pi6 / 27.0) * e6 / (u4 * u2);
  return {g2, g3};
}

Lattice::Lattice(Complex omega1, Complex omega2) {
  check_periods(omega1, omega2);
  if ((omega2 / omega1).imag() < 0.0) std::swap(omega1, omega2);
  omega1_ = omega1;
  omega2_ = omega2;

  const auto [u, v] = gauss_reduce(omega1, omega2);
  reduced_ = {u, v};
  const double det = u.real() * v.imag() - v.real() * u.imag();
  reduced_inverse_ = {v.imag() / det, -v.real() / det, -u.imag() / det,
                      u.real() / det};

  std::tie(g2_, g3_) = invariants(omega1, omega2);

  laurent_.assign(kLaurentTerms + 1, Complex{0.0, 0.0});
  laurent_[2] = g2_ / 20.0;
  laurent_[3] = g3_ / 28.0;
  for (int k = 4; k <= kLaurentTerms; ++k) {
    Complex acc{0.0, 0.0};
    for (int m = 2; m <= k - 2; ++m) acc += laurent_[m] * laurent_[k - m];
    laurent_[k] = 3.0 / ((2.0 * k + 1.0) * (k - 3.0)) * acc;
  }

  for (int j = 1; j <= 3; ++j) e_[j - 1] = wp(half_period(j));
}

Complex Lattice::half_period(int j) const {
  switch (j) {
    case 0:
      return {0.0, 0.0};
    case 1:
      return 0.5 * omega1_;
    case 2:
      return 0.5 * omega2_;
    case 3:
      return 0.5 * (omega1_ + omega2_);
    default:
      throw HeunError(ErrorKind::invalid_argument,
                      "half-period index must be 0..3, got " + std::to_string(j));
  }
}

Complex Lattice::e(int j) const {
  if (j < 1 || j > 3) {
    throw HeunError(ErrorKind::invalid_argument,
                    "e_j is defined for j = 1, 2, 3, got " + std::to_string(j));
  }
  return e_[j - 1];
}

Complex Lattice::reduce(Complex z) const {
  const auto& [u, v] = reduced_;
  const auto& m = reduced_inverse_;
  const double a = m[0] * z.real() + m[1] * z.imag();
  const double b = m[2] * z.real() + m[3] * z.imag();
  const Complex base = z - std::round(a) * u - std::round(b) * v;
  Complex best = base;
  double best_norm = std::norm(base);
  for (int i = -1; i <= 1; ++i) {
    for (int j = -1; j <= 1; ++j) {
      const Complex c = base - static_cast<double>(i) * u - static_cast<double>(j) * v;
      const double n = std::norm(c);
      if (n < best_norm) {
        best = c;
        best_norm = n;
      }
    }
  }
  return best;
}

std::pair<Complex, Complex> Lattice::series_pair(Complex z) const {
  const double ratio = std::abs(z) / shortest_period();
  int n = kLaurentTerms;
  if (ratio > 0.0) {
    const double need = 3.0 + std::log(1e-19) / (2.0 * std::log(ratio));
    if (need < n) n = std::max(4, static_cast<int>(std::ceil(need)));
  }
  const Complex t = z * z;
  Complex h = laurent_[n];
  Complex hd = (2.0 * n - 2.0) * laurent_[n];
  for (int k = n - 1; k >= 2; --k) {
    h = h * t + laurent_[k];
    hd = hd * t + (2.0 * k - 2.0) * laurent_[k];
  }
  return {1.0 / t + t * h, -2.0 / (z * t) + z * hd};
}

std::pair<Complex, Complex> Lattice::wp_pair(Complex z) const {
  const Complex r = reduce(z);
  if (std::abs(r) < 1e-12 * std::abs(omega1_)) {
    throw HeunError(ErrorKind::pole, "wp evaluated at a lattice point (pole)");
  }
  int halvings = 0;
  Complex s = r;
  const double limit = kSeriesRadius * shortest_period();
  while (std::abs(s) > limit) {
    s *= 0.5;
    ++halvings;
  }
  auto [p, dp] = series_pair(s);
  for (int i = 0; i < halvings; ++i) {
    const Complex d2 = 6.0 * p * p - 0.5 * g2_;
    const Complex inv = 1.0 / dp;
    const Complex ratio = d2 * inv;
    const Complex p2 = -2.0 * p + 0.25 * ratio * ratio;
    const Complex dp2 = -dp + 3.0 * p * ratio - 0.25 * ratio * ratio * ratio;
    p = p2;
    dp = dp2;
  }
  return {p, dp};
}

std::vector<Complex> Lattice::taylor(Complex z0, int n) const {
  std::vector<Complex> d(std::max(n, 2), Complex{0.0, 0.0});
  const auto [p, dp] = wp_pair(z0);
  d[0] = p;
  d[1] = dp;
  for (int m = 0; m + 2 < n; ++m) {
    Complex acc{0.0, 0.0};
    for (int i = 0; i <= m; ++i) acc += d[i] * d[m - i];
    acc *= 6.0;
    if (m == 0) acc -= 0.5 * g2_;
    d[m + 2] = acc / ((m + 2.0) * (m + 1.0));
  }
  d.resize(n);
  return d;
}

}  // namespace heun
