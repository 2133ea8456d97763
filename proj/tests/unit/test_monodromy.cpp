#include <doctest.h>

#include <random>

#include "heun/monodromy.hpp"
#include "oracles.hpp"

using namespace heun;

namespace {

const Complex kI1(0.0, 1.0);

SphereHeun sphere_fixture() {
  return SphereHeun({0.0, 1.0, Complex(0.4, 1.2)}, {0.3, 0.45, 0.8, 0.6}, Complex(0.3, -0.2));
}

// Eigenvalues of a 2x2 matrix from its characteristic polynomial.
std::pair<Complex, Complex> eigenvalues(const Matrix2& m) {
  const Complex tr = m.trace(), det = m.determinant();
  const Complex disc = std::sqrt(tr * tr - 4.0 * det);
  return {(tr + disc) / 2.0, (tr - disc) / 2.0};
}

bool same_pair(std::pair<Complex, Complex> a, std::pair<Complex, Complex> b, double tol) {
  return (std::abs(a.first - b.first) < tol && std::abs(a.second - b.second) < tol) ||
         (std::abs(a.first - b.second) < tol && std::abs(a.second - b.first) < tol);
}

Matrix2 rotation(double theta, int axis) {
  const Complex c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
  Matrix2 m;
  if (axis == 3) {
    m << std::exp(kI1 * theta / 2.0), 0.0, 0.0, std::exp(-kI1 * theta / 2.0);
  } else {
    m << c, kI1 * s, kI1 * s, c;
  }
  return m;
}

}  // namespace

TEST_CASE("sphere generators: local eigenvalues and the loop relation") {
  const SphereHeun eq = sphere_fixture();
  const MonodromyRep rep = sphere_monodromy(eq);
  for (int j = 0; j < 3; ++j) {
    const Matrix2& m = rep.at("M" + std::to_string(j));
    const auto expected = std::pair{Complex(1.0), std::exp(2.0 * kPi * kI1 * eq.alpha()[j])};
    CHECK(same_pair(eigenvalues(m), expected, 1e-7));
  }
  const Matrix2 rel = rep.at("Minf") * rep.at("M2") * rep.at("M1") * rep.at("M0");
  CHECK(max_abs(rel - Matrix2::Identity()) < 1e-8);

  // A smaller loop radius computes the same local monodromy.
  SphereMonodromyOptions small;
  small.loop_radius = 0.5 * default_clearance(eq);
  const MonodromyRep rep2 = sphere_monodromy(eq, small);
  for (const char* label : {"M0", "M1", "M2", "Minf"}) {
    CHECK(std::abs(rep.at(label).trace() - rep2.at(label).trace()) < 1e-8);
  }
  // Traces do not depend on the basepoint.
  SphereMonodromyOptions moved;
  moved.basepoint = Complex(0.7, -2.3);
  const MonodromyRep rep3 = sphere_monodromy(eq, moved);
  for (const char* label : {"M0", "M1", "M2", "Minf"}) {
    CHECK(std::abs(rep.at(label).trace() - rep3.at(label).trace()) < 1e-8);
  }
}

TEST_CASE("random non-real configurations satisfy the relation") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0), a(0.1, 0.9);
  for (int trial = 0; trial < 3; ++trial) {
    const SphereHeun eq({Complex(u(rng), u(rng)), Complex(u(rng), u(rng)), Complex(u(rng), u(rng))},
                        {a(rng), a(rng), a(rng), a(rng)}, Complex(u(rng), u(rng)));
    const MonodromyRep rep = sphere_monodromy(eq);
    const Matrix2 rel = rep.at("Minf") * rep.at("M2") * rep.at("M1") * rep.at("M0");
    CHECK(max_abs(rel - Matrix2::Identity()) < 1e-8);
  }
}

TEST_CASE("integer angles are rejected") {
  const SphereHeun eq({0.0, 1.0, -1.0}, {1.0, 1.0, 1.0, 1.0}, 0.0);
  CHECK_THROWS_AS(sphere_monodromy(eq), HeunError);
}

TEST_CASE("constant potential translations") {
  for (Complex lambda : {Complex(1.0), kI1, Complex(-4.0)}) {
    const TorusHeun eq(1.0, Complex(0.3, 1.2), {0.5, 0.5, 0.5, 0.5}, lambda);
    const Complex z0 = default_torus_basepoint(eq);
    for (int j = 1; j <= 2; ++j) {
      const Complex expected = 2.0 * std::cosh(eq.period(j) * std::sqrt(lambda));
      CHECK(std::abs(torus_translation(eq, z0, j).trace() - expected) < 1e-9);
      CHECK(std::abs(hill_trace(eq, j, lambda) - expected) < 1e-9);
    }
  }
  const TorusHeun zero(1.0, kI1, {0.5, 0.5, 0.5, 0.5}, 0.0);
  CHECK(std::abs(torus_translation(zero, default_torus_basepoint(zero), 1).trace() - 2.0) < 1e-12);
}

TEST_CASE("torus generators") {
  const TorusHeun eq(1.0, Complex(0.2, 1.1), {0.9, 0.35, 1.3, 0.7}, Complex(1.5, -0.4));
  const Complex z0 = admissible_torus_basepoint(eq);
  const MonodromyRep rep = torus_monodromy(eq, z0);
  for (const auto& g : rep.generators) CHECK(std::abs(g.matrix.determinant() - 1.0) < 1e-9);
  for (int j = 0; j < 4; ++j) {
    const double a = eq.alpha()[j];
    const auto expected = std::pair{-std::exp(2.0 * kPi * kI1 * a), -std::exp(-2.0 * kPi * kI1 * a)};
    CHECK(same_pair(eigenvalues(rep.at("L" + std::to_string(j))), expected, 1e-7));
  }
  const Complex z1 = z0 + Complex(0.07, -0.05);
  for (int j = 1; j <= 2; ++j) {
    CHECK(std::abs(torus_translation(eq, z0, j).trace() - torus_translation(eq, z1, j).trace()) < 1e-8);
  }
  // Regular half-periods give trivial loops.
  const TorusHeun partial(1.0, kI1, {0.5, 0.9, 0.5, 0.5}, 0.0);
  CHECK(max_abs(torus_local_loop(partial, default_torus_basepoint(partial), 0) - Matrix2::Identity()) == 0.0);
}

TEST_CASE("Schwarz reflection on a rectangular torus") {
  const TorusHeun eq(1.0, Complex(0.0, 1.5), {0.9, 0.6, 1.2, 0.8}, 0.0);
  for (Complex lambda : {Complex(2.0, 1.0), Complex(-3.0, 0.5), Complex(0.4, -2.2)}) {
    for (int j = 1; j <= 2; ++j) {
      const Complex a = hill_trace(eq, j, lambda), b = hill_trace(eq, j, std::conj(lambda));
      CHECK(std::abs(b - std::conj(a)) < 1e-9 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST_CASE("unitarizable: simple verdicts") {
  const auto id = unitarizable(std::vector<Matrix2>{Matrix2::Identity()});
  CHECK(id.status == CertificateStatus::unitarizable);
  REQUIRE(id.H);
  CHECK(max_abs(*id.H - 0.5 * Matrix2::Identity()) < 1e-12);
  Matrix2 d;
  d << 2.0, 0.0, 0.0, 0.5;
  CHECK(unitarizable(std::vector<Matrix2>{d}).status == CertificateStatus::not_unitarizable);
}

TEST_CASE("unitarizable recovers a conjugated SU(2) group") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix2 P = oracle::random_matrix(rng) + 1.5 * Matrix2::Identity();
    const Matrix2 Pinv = P.inverse();
    const std::vector<Matrix2> gens{P * oracle::random_su2(rng) * Pinv, P * oracle::random_su2(rng) * Pinv};
    const auto cert = unitarizable(gens);
    REQUIRE(cert.status == CertificateStatus::unitarizable);
    Matrix2 expected = Pinv.adjoint() * Pinv;
    expected /= expected.trace().real();
    CHECK(max_abs(*cert.H - expected) < 1e-6);
    CHECK(cert.margin > 0.0);
    CHECK(cert.trace_criterion.value_or(true));
    // Every short word has |trace| <= 2.
    std::vector<Matrix2> words{Matrix2::Identity()};
    for (int len = 0; len < 4; ++len) {
      std::vector<Matrix2> next;
      for (const auto& w : words)
        for (const auto& g : gens) {
          next.push_back(w * g);
          next.push_back(w * g.inverse());
        }
      for (const auto& w : next) CHECK(std::abs(normalize_det(w).trace()) <= 2.0 + 1e-6);
      words = next;
    }
    // Simultaneous conjugation keeps the verdict.
    const Matrix2 Q = oracle::random_matrix(rng) + 2.0 * Matrix2::Identity();
    const auto cert2 = unitarizable(std::vector<Matrix2>{Q * gens[0] * Q.inverse(), Q * gens[1] * Q.inverse()});
    CHECK(cert2.status == CertificateStatus::unitarizable);
    CHECK(cert2.residual <= 10.0 * std::max(cert.residual, 1e-15));
  }
}

TEST_CASE("two-generator trace criterion") {
  std::mt19937_64 rng(2);
  CHECK(two_generator_trace_criterion(oracle::random_su2(rng), oracle::random_su2(rng)) == std::optional<bool>(true));
  Matrix2 a, b;
  a << 2.0, 1.0, 1.0, 1.0;
  b << 1.0, 0.0, 3.0, 1.0;
  CHECK(two_generator_trace_criterion(a, b) == std::optional<bool>(false));
  CHECK(unitarizable(std::vector<Matrix2>{a, b}).status == CertificateStatus::not_unitarizable);
}

TEST_CASE("coaxial") {
  CHECK(coaxial(std::vector<Matrix2>{Matrix2::Identity()}));
  CHECK(coaxial(std::vector<Matrix2>{rotation(0.3, 3), rotation(1.1, 3), rotation(2.9, 3)}));
  CHECK_FALSE(coaxial(std::vector<Matrix2>{rotation(0.7, 3), rotation(0.7, 1)}));
  // Coaxial with unimodular eigenvalues cannot be declared non-unitarizable.
  std::mt19937_64 rng(9);
  const Matrix2 P = oracle::random_matrix(rng) + 1.5 * Matrix2::Identity();
  const std::vector<Matrix2> gens{P * rotation(0.4, 3) * P.inverse(), P * rotation(2.0, 3) * P.inverse()};
  CHECK(coaxial(gens));
  CHECK(unitarizable(gens).status != CertificateStatus::not_unitarizable);
}

TEST_CASE("developing map: exponential closed form") {
  const Complex lambda = -kPi * kPi;
  const TorusHeun eq(1.0, kI1, {0.5, 0.5, 0.5, 0.5}, lambda);
  const Complex base(0.1, 0.05);
  // Columns: (w, w') of e^{i pi z} and e^{-i pi z} at the base.
  Matrix2 data;
  const Complex e = std::exp(kI1 * kPi * base);
  data << e, 1.0 / e, kI1 * kPi * e, -kI1 * kPi / e;
  const Frame frame{base, data};
  for (Complex z : {Complex(0.6, 0.3), Complex(-0.4, 0.7), Complex(1.2, -0.25)}) {
    const Path path = Path::polyline({base, z});
    const Complex f = std::exp(2.0 * kPi * kI1 * z);
    CHECK(std::abs(developing_map(eq, frame, path) - f) < 1e-9 * std::abs(f));
    const double rho = 4.0 * kPi * std::abs(f) / (1.0 + std::norm(f));
    CHECK(std::abs(metric_density(eq, frame, path) - rho) < 1e-8);
  }
}

TEST_CASE("developing map: curvature and rotation invariance") {
  const TorusHeun eq(1.0, kI1, {0.9, 0.9, 0.9, 0.9}, 0.0);
  const Complex base = default_torus_basepoint(eq);
  const Frame frame{base, Matrix2::Identity()};
  auto rho = [&](const Frame& fr, Complex z) { return metric_density(eq, fr, Path::polyline({base, z})); };
  const double h = 1e-3;
  for (Complex z : {Complex(0.3, 0.35), Complex(0.15, 0.2), Complex(0.38, 0.12)}) {
    const double r0 = rho(frame, z);
    const double lap = (std::log(rho(frame, z + h)) + std::log(rho(frame, z - h)) +
                        std::log(rho(frame, z + kI1 * h)) + std::log(rho(frame, z - kI1 * h)) -
                        4.0 * std::log(r0)) / (h * h);
    CHECK(std::abs(lap + r0 * r0) < 1e-3 * r0 * r0);
  }
  std::mt19937_64 rng(4);
  const Matrix2 U = oracle::random_su2(rng);
  const Frame rotated{base, frame.data * U};
  const Matrix2 S = oracle::random_matrix(rng) + 1.5 * Matrix2::Identity();
  const Frame sheared{base, frame.data * normalize_det(S)};
  for (Complex z : {Complex(0.3, 0.35), Complex(0.45, 0.1)}) {
    CHECK(std::abs(rho(rotated, z) - rho(frame, z)) < 1e-8 * rho(frame, z));
    CHECK(std::abs(rho(sheared, z) - rho(frame, z)) > 1e-4 * rho(frame, z));
  }
}

TEST_CASE("developing map pole") {
  const TorusHeun eq(1.0, kI1, {0.5, 0.5, 0.5, 0.5}, 0.0);
  // w1 = 1, w2 = z - 0.5 vanishes at 0.5: f has a pole there, rho stays finite.
  Matrix2 data;
  data << 1.0, -0.4, 0.0, 1.0;
  const Frame frame{Complex(0.1, 0.0), data};
  const Path path = Path::polyline({Complex(0.1, 0.0), Complex(0.5, 0.0)});
  CHECK_THROWS_AS(developing_map(eq, frame, path), HeunError);
  CHECK(std::abs(metric_density(eq, frame, path) - 2.0) < 1e-9);
}
