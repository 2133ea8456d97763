#include <doctest.h>

#include "heun/scanner.hpp"

using namespace heun;

namespace {

const Complex kI1(0.0, 1.0);

TorusHeun square(std::array<double, 4> alpha) { return TorusHeun(1.0, kI1, alpha, 0.0); }

// Largest |d(x_{i+1}) - d(x_i)| / h on n equal steps of [a, b].
double lipschitz_estimate(const TorusHeun& eq, Complex a, Complex b, int n) {
  const double h = std::abs(b - a) / n;
  double prev = defect(eq, a), L = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double d = defect(eq, a + (b - a) * (double(i) / n));
    L = std::max(L, std::abs(d - prev) / h);
    prev = d;
  }
  return L;
}

ScanConfig small_scan() {
  ScanConfig cfg;
  cfg.region = Region{-0.5, 0.5, -0.5, 0.5};
  cfg.grid = 8;
  return cfg;
}

}  // namespace

TEST_CASE("trace distance") {
  CHECK(trace_distance(Complex(1.5, 0.0)) == 0.0);
  CHECK(trace_distance(Complex(-2.0, 0.0)) == 0.0);
  CHECK(trace_distance(Complex(2.5, -0.25)) == doctest::Approx(0.75));
  CHECK(trace_distance(Complex(0.0, 0.3)) == doctest::Approx(0.3));
}

TEST_CASE("config validation") {
  ScanConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.grid = 7;
  CHECK_THROWS_AS(cfg.validate(), HeunError);
  cfg = ScanConfig{};
  cfg.cert_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), HeunError);
  cfg = ScanConfig{};
  cfg.dedup_radius = -1.0;
  CHECK_THROWS_AS(cfg.validate(), HeunError);
  cfg = ScanConfig{};
  CHECK(cfg.dedup_at(Complex(3.0, 4.0)) == doctest::Approx(6e-6));
}

TEST_CASE("bound radius for the constant potential") {
  const TorusHeun eq = square({0.5, 0.5, 0.5, 0.5});
  const double R = bound_radius(eq, 4.0);
  CHECK(R <= 100.0);
  // Closed form: on |lambda| = R one of 2cosh(sqrt(lambda)), 2cosh(i sqrt(lambda)) exceeds 6 in modulus.
  for (Complex lambda : bound_circle(R)) {
    const Complex s = std::sqrt(lambda);
    CHECK(std::max(std::abs(2.0 * std::cosh(s)), std::abs(2.0 * std::cosh(kI1 * s))) > 6.0);
    CHECK(defect(eq, lambda) > 0.0);
  }
}

TEST_CASE("defect lower bound from the closed form") {
  const TorusHeun eq = square({0.5, 0.5, 0.5, 0.5});
  for (double lambda : {0.5, 4.0, 20.0}) {
    CHECK(defect(eq, lambda) >= 2.0 * std::cosh(std::sqrt(lambda)) - 2.0 - 1e-9);
  }
}

TEST_CASE("defect is Lipschitz on sampled segments") {
  const TorusHeun eq = square({0.9, 0.9, 0.9, 0.9});
  // One segment along the real axis (trace part zero, certificate term
  // active), one crossing the band where the certificate term ramps in.
  for (auto [a, b] : {std::pair{Complex(-1.6, 0.0), Complex(-1.3, 0.0)},
                      std::pair{Complex(-2.5, -0.4), Complex(-2.5, 0.4)}}) {
    const double coarse = lipschitz_estimate(eq, a, b, 60);
    const double fine = lipschitz_estimate(eq, a, b, 120);
    CHECK(std::isfinite(coarse));
    // A jump would double the estimate with every halving of the step.
    CHECK(fine < 1.5 * coarse + 1e-9);
  }
}

TEST_CASE("find_U on a small window") {
  const TorusHeun eq = square({0.9, 0.9, 0.9, 0.9});
  const ScanConfig cfg = small_scan();
  const ScanResult res = find_U(eq, cfg);
  REQUIRE(res.solutions.size() == 1);
  const Solution& s = res.solutions[0];
  CHECK(std::abs(s.lambda) < 1e-6);
  CHECK(s.defect <= cfg.cert_tol);
  CHECK(s.certificate.status == CertificateStatus::unitarizable);
  CHECK(s.certificate.margin > 0.0);
  for (const Complex& t : s.traces) CHECK(trace_distance(t) < 1e-6);

  {
    // The certificate survives a tighter ODE tolerance.
    ContinuationOptions tight;
    tight.tol = cfg.ode_tol / 10.0;
    const MonodromyRep rep = torus_monodromy(eq.with_lambda(s.lambda), admissible_torus_basepoint(eq), true, tight);
    CHECK(unitarizable(rep, cfg.cert_tol).status == CertificateStatus::unitarizable);
  }
  {
    // The thread count does not change the result.
    ScanConfig threaded = cfg;
    threaded.threads = 3;
    const ScanResult other = find_U(eq, threaded);
    REQUIRE(other.solutions.size() == 1);
    CHECK(other.solutions[0].lambda == s.lambda);
    CHECK(other.solutions[0].defect == s.defect);
    CHECK(other.diagnostics.size() == res.diagnostics.size());
  }
  {
    // A half-cell grid shift finds the same set.
    ScanConfig shifted = cfg;
    shifted.grid_offset = 0.5;
    const ScanResult other = find_U(eq, shifted);
    REQUIRE(other.solutions.size() == 1);
    CHECK(std::abs(other.solutions[0].lambda - s.lambda) < 10.0 * cfg.dedup_at(s.lambda));
  }
}

TEST_CASE("find_U on the constant potential finds nothing") {
  ScanConfig cfg = small_scan();
  cfg.region = Region{-30.0, 30.0, -30.0, 30.0};
  cfg.grid = 32;
  CHECK(find_U(square({0.5, 0.5, 0.5, 0.5}), cfg).solutions.empty());
}

TEST_CASE("real fixed-point products") {
  const SphereHeun fam({0.0, 1.0, -1.0}, {0.6, 0.7, 0.8, 0.9}, 0.0);
  SUBCASE("real along a grid") {
    for (int i = 0; i < 16; ++i) {
      const double q = -20.0 + 40.0 * i / 15.0;
      try {
        const FixedPointProducts p = real_fixed_point_products(fam.with_q(q));
        CHECK(std::abs(p.p_f.imag()) < 1e-8 * std::max(1.0, std::abs(p.p_f)));
        CHECK(std::abs(p.p_g.imag()) < 1e-8 * std::max(1.0, std::abs(p.p_g)));
      } catch (const HeunError& e) {
        CHECK(e.kind() == ErrorKind::pole);
      }
    }
  }
  SUBCASE("preconditions") {
    CHECK_THROWS_AS(real_fixed_point_products(SphereHeun({0.0, 1.0, 2.0}, {0.6, 0.7, 0.8, 0.9}, 0.0)), HeunError);
    CHECK_THROWS_AS(real_fixed_point_products(fam.with_q(Complex(0.0, 1.0))), HeunError);
    CHECK_THROWS_AS(real_fixed_point_products(SphereHeun({0.0, 1.0, -1.0}, {2.0, 0.7, 0.8, 0.9}, 0.0)), HeunError);
  }
  SUBCASE("smooth between poles") {
    // The cubic through the outer four of five samples predicts the middle one.
    const double h = 0.005;
    for (double q0 : {-7.0, 1.0, 12.5}) {
      std::vector<double> v;
      for (int i = 0; i < 5; ++i) v.push_back(real_fixed_point_products(fam.with_q(q0 + i * h)).p_f.real());
      const double predicted = (-v[0] + 4.0 * v[1] + 4.0 * v[3] - v[4]) / 6.0;
      CHECK(std::abs(predicted - v[2]) < 1e-6 * std::max(1.0, std::abs(v[2])));
    }
  }
}

TEST_CASE("real_find") {
  const SphereHeun fam({0.0, 1.0, -1.0}, {0.6, 0.7, 0.8, 0.9}, 0.0);
  const RealScanResult coarse = real_find(fam, -5.0, 5.0, 64);
  const RealScanResult fine = real_find(fam, -5.0, 5.0, 128);
  REQUIRE(coarse.roots.size() == fine.roots.size());
  REQUIRE_FALSE(coarse.roots.empty());
  for (std::size_t i = 0; i < coarse.roots.size(); ++i) {
    const RealRoot& r = coarse.roots[i];
    CHECK(std::abs(r.q - fine.roots[i].q) < 1e-9);
    CHECK(r.p_f < 0.0);
    CHECK(std::abs(r.p_f - r.p_g) < 1e-8 * std::max(1.0, std::abs(r.p_f)));
    CHECK(r.certificate.status == CertificateStatus::unitarizable);
    // Rescaling the basis at 0 by mu = 1/sqrt(-u1 u2) makes the fixed points diametral.
    const FixedPointProducts p = real_fixed_point_products(fam.with_q(r.q));
    const Complex u1 = p.F(0, 0) / p.F(1, 0), u2 = p.F(0, 1) / p.F(1, 1);
    const Complex mu = 1.0 / std::sqrt(-u1 * u2);
    CHECK(std::abs((mu * u1) * std::conj(mu * u2) + 1.0) < 1e-8);
  }
  CHECK(std::abs(coarse.roots[0].q - 0.0456318) < 1e-6);
}
