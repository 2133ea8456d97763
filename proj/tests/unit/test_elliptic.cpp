#include <doctest.h>

#include <random>

#include "heun/elliptic.hpp"
#include "oracles.hpp"

using namespace heun;

namespace {

const Complex kI1(0.0, 1.0);

std::vector<std::pair<Complex, Complex>> lattice_family() {
  return {{1.0, kI1},
          {1.0, std::exp(kI1 * kPi / 3.0)},
          {1.0, Complex(0.0, 2.0)},
          {Complex(0.7, 0.2), Complex(-0.3, 1.1)},
          {Complex(2.0, -1.0), Complex(0.4, 1.9)}};
}

Complex random_point(std::mt19937_64& rng, const Lattice& lat) {
  std::uniform_real_distribution<double> u(0.03, 0.97);
  return u(rng) * lat.omega1() + u(rng) * lat.omega2();
}

}  // namespace

TEST_CASE("symmetric lattices force vanishing invariants") {
  const Lattice square(1.0, kI1);
  CHECK(std::abs(square.g3()) < 1e-12);
  const Lattice hex(1.0, std::exp(kI1 * kPi / 3.0));
  CHECK(std::abs(hex.g2()) < 1e-12);
}

TEST_CASE("invariants match brute-force Eisenstein sums") {
  for (auto [w1, w2] : {std::pair<Complex, Complex>{1.0, Complex(0.0, 2.0)},
                        std::pair<Complex, Complex>{Complex(0.7, 0.2), Complex(-0.3, 1.1)}}) {
    const auto [s4, s6] = oracle::eisenstein_disc(w1, w2, 400.0);
    const auto [g2, g3] = invariants(w1, w2);
    CHECK(std::abs(g2 - 60.0 * s4) < 1e-8 * std::abs(g2));
    CHECK(std::abs(g3 - 140.0 * s6) < 1e-8 * std::max(1.0, std::abs(g3)));
  }
}

TEST_CASE("wp matches its defining lattice sum") {
  const Lattice lat(1.0, Complex(0.0, 2.0));
  for (Complex z : {Complex(0.5, 0.0), Complex(0.21, 0.37), Complex(-0.4, 0.9)}) {
    const Complex ref = oracle::wp_sum(z, 1.0, Complex(0.0, 2.0), 400.0);
    CHECK(std::abs(lat.wp(z) - ref) < 1e-7 * std::abs(ref));
  }
}

TEST_CASE("half-period values") {
  for (auto [w1, w2] : lattice_family()) {
    const Lattice lat(w1, w2);
    double scale = 0.0;
    for (int j = 1; j <= 3; ++j) {
      scale = std::max(scale, std::abs(lat.e(j)));
      CHECK(std::abs(lat.wp(lat.half_period(j)) - lat.e(j)) < 1e-10 * std::abs(lat.e(j)) + 1e-12);
    }
    CHECK(std::abs(lat.e(1) + lat.e(2) + lat.e(3)) < 1e-10 * scale);
  }
  // Square lattice: wp((1+i)/2) = 0 and wp(i/2) = -wp(1/2), with wp(1/2) the
  // series value as well.
  const Lattice square(1.0, kI1);
  CHECK(std::abs(square.e(3)) < 1e-10);
  CHECK(std::abs(square.e(1) + square.e(2)) < 1e-10);
  const Complex ref = oracle::wp_sum(0.5, 1.0, kI1, 400.0);
  CHECK(std::abs(square.e(1) - ref) < 1e-7 * std::abs(ref));
}

TEST_CASE("differential identity on a family of lattices") {
  std::mt19937_64 rng(11);
  for (auto [w1, w2] : lattice_family()) {
    const Lattice lat(w1, w2);
    for (int i = 0; i < 100; ++i) {
      const Complex z = random_point(rng, lat);
      const auto [p, dp] = lat.wp_pair(z);
      const Complex res = dp * dp - 4.0 * p * p * p + lat.g2() * p + lat.g3();
      const double scale = std::abs(dp * dp) + std::abs(4.0 * p * p * p) + std::abs(lat.g2() * p) +
                           std::abs(lat.g3());
      CHECK(std::abs(res) < 1e-9 * scale);
    }
  }
}

TEST_CASE("evenness, periodicity and homogeneity") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (auto [w1, w2] : lattice_family()) {
    const Lattice lat(w1, w2);
    for (int i = 0; i < 20; ++i) {
      const Complex z = random_point(rng, lat);
      const Complex p = lat.wp(z);
      CHECK(std::abs(lat.wp(-z) - p) < 1e-11 * std::abs(p));
      CHECK(std::abs(lat.wp(z + w1) - p) < 1e-10 * std::abs(p));
      CHECK(std::abs(lat.wp(z + w2) - p) < 1e-10 * std::abs(p));
      CHECK(std::abs(lat.wp(z - 3.0 * w1 + 2.0 * w2) - p) < 1e-10 * std::abs(p));
      const Complex c(u(rng), u(rng));
      const Lattice scaled(c * w1, c * w2);
      CHECK(std::abs(scaled.wp(c * z) - p / (c * c)) < 1e-10 * std::abs(p / (c * c)));
    }
  }
}

TEST_CASE("wp' against a central difference") {
  const Lattice lat(Complex(0.7, 0.2), Complex(-0.3, 1.1));
  const Complex z(0.31, 0.44);
  const double h = 1e-5;
  const Complex fd = (lat.wp(z + h) - lat.wp(z - h)) / (2.0 * h);
  CHECK(std::abs(lat.wp_prime(z) - fd) < 1e-6 * std::abs(fd));
}

TEST_CASE("taylor coefficients reproduce wp nearby") {
  const Lattice lat(1.0, kI1);
  const Complex z0(0.3, 0.2);
  const auto d = lat.taylor(z0, 30);
  const Complex u(0.01, -0.02);
  Complex s = 0.0, pw = 1.0;
  for (const Complex& c : d) {
    s += c * pw;
    pw *= u;
  }
  CHECK(std::abs(s - lat.wp(z0 + u)) < 1e-11 * std::abs(s));
}
