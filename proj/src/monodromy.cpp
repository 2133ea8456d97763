#include "heun/monodromy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace heun {

namespace {

Complex unit(Complex z) { return z / std::abs(z); }

double segment_distance(Complex p, Complex a, Complex b) {
  const Complex d = b - a;
  const double len2 = std::norm(d);
  if (len2 == 0.0) return std::abs(p - a);
  const double t = std::clamp(std::real((p - a) * std::conj(d)) / len2, 0.0, 1.0);
  return std::abs(p - (a + t * d));
}

// Loop radius is the clearance itself; the path is checked against a hair
// smaller value so that points exactly on the circle are not rejected.
constexpr double kOnCircle = 1.0 - 1e-9;

// Lasso from `base`: straight approach to the circle of radius `radius`
// around `center`, one full turn (sweep 2pi or -2pi), straight return.
Path lasso(Complex base, Complex center, double radius, double sweep) {
  Path p(base, radius * kOnCircle);
  const Complex entry = center - radius * unit(center - base);
  p.line_to(entry).arc_around(center, sweep).line_to(base);
  return p;
}

// A word in the lasso letters: (index, +1 or -1), read left to right as
// path concatenation.
using Word = std::vector<std::pair<int, int>>;

Word inverse(const Word& w) {
  Word r(w.rbegin(), w.rend());
  for (auto& letter : r) letter.second = -letter.second;
  return r;
}

Word concat(std::initializer_list<const Word*> parts) {
  Word r;
  for (const Word* p : parts) r.insert(r.end(), p->begin(), p->end());
  return r;
}

// Transfer of a concatenation: T(a then b) = T(b) T(a).
Matrix2 evaluate_word(const Word& w, const std::vector<Matrix2>& letters,
                      const std::vector<Matrix2>& inverses) {
  Matrix2 m = Matrix2::Identity();
  for (const auto& [idx, sign] : w) m = (sign > 0 ? letters[idx] : inverses[idx]) * m;
  return m;
}

}  // namespace

const Matrix2& MonodromyRep::at(const std::string& label) const {
  for (const auto& g : generators) {
    if (g.label == label) return g.matrix;
  }
  throw HeunError(ErrorKind::invalid_argument, "no generator labelled " + label);
}

Matrix2 normalize_det(const Matrix2& m) {
  const Complex det = m.determinant();
  if (det == Complex(0.0)) {
    throw HeunError(ErrorKind::invalid_argument, "generator is singular");
  }
  return m / std::sqrt(det);
}

// ---------------------------------------------------------------------------
// Sphere

Complex default_sphere_basepoint(const SphereHeun& eq) {
  const auto& a = eq.points();
  const Complex c = (a[0] + a[1] + a[2]) / 3.0;
  double spread = 0.0;
  for (const auto& p : a) spread = std::max(spread, std::abs(p - c));
  // Spokes from the basepoint to each singular point should pass well clear
  // of the other two; grazing a singular point costs digits in the loops.
  auto spoke_clearance = [&](Complex b) {
    double d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (i != j) d = std::min(d, segment_distance(a[i], b, a[j]));
    return d;
  };
  const Complex straight = c - 1.5 * kI * spread;
  const double wanted = 0.25 * eq.min_separation();
  if (spoke_clearance(straight) >= wanted) return straight;
  Complex best = straight;
  double best_d = spoke_clearance(straight);
  for (int step = 1; step <= 12; ++step) {
    for (int sign : {1, -1}) {
      const double theta = -0.5 * kPi + sign * 0.1 * step;
      const Complex b = c + 1.5 * spread * std::exp(kI * theta);
      const double d = spoke_clearance(b);
      if (d > best_d * (1.0 + 1e-12)) {
        best = b;
        best_d = d;
      }
    }
  }
  return best;
}

MonodromyRep sphere_monodromy(const SphereHeun& eq, const SphereMonodromyOptions& opts) {
  for (int j = 0; j < 4; ++j) {
    if (is_integer(eq.alpha()[j])) {
      throw HeunError(ErrorKind::resonant,
                      "integer angle alpha_" + std::to_string(j) + " is not supported");
    }
  }
  const auto& a = eq.points();
  const Complex c = (a[0] + a[1] + a[2]) / 3.0;
  double spread = 0.0;
  for (const auto& p : a) spread = std::max(spread, std::abs(p - c));

  const Complex b = opts.basepoint.value_or(default_sphere_basepoint(eq));
  const double radius = opts.loop_radius.value_or(default_clearance(eq));
  if (!(radius > 0.0)) throw HeunError(ErrorKind::invalid_argument, "loop radius must be positive");
  for (const auto& p : a) {
    if (std::abs(p - b) <= radius) {
      throw HeunError(ErrorKind::invalid_argument, "basepoint too close to a singular point");
    }
  }

  // The cut runs from b away from the centroid to the big circle.
  const Complex cut = std::abs(b - c) > 1e-12 * (1.0 + spread) ? unit(b - c) : Complex(0.0, -1.0);
  const double big = std::max(3.0 * spread, 2.0 * std::abs(b - c)) + 4.0 * radius;

  Equation e = eq;
  std::vector<Matrix2> loops(3), loops_inv(3);
  for (int j = 0; j < 3; ++j) {
    loops[j] = transfer(e, lasso(b, a[j], radius, 2.0 * kPi), opts.continuation).matrix;
    loops_inv[j] = loops[j].inverse();
  }

  Path outer(b, radius * kOnCircle);
  const Complex rim = c + big * cut;
  outer.line_to(rim).arc_around(c, -2.0 * kPi).line_to(b);
  const Matrix2 m_inf = transfer(e, outer, opts.continuation).matrix;

  // Lassos ordered counterclockwise from the cut compose to the
  // counterclockwise boundary loop. Bubble them into label order with
  // Hurwitz moves (x, y) -> (x y x^-1, x), which preserve the product.
  std::array<double, 3> rel{};
  const double phi = std::arg(cut);
  for (int j = 0; j < 3; ++j) {
    double d = std::arg(a[j] - b) - phi;
    while (d < 0.0) d += 2.0 * kPi;
    while (d >= 2.0 * kPi) d -= 2.0 * kPi;
    rel[j] = d;
  }
  std::vector<int> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int i, int j) { return rel[i] < rel[j]; });

  std::vector<std::pair<int, Word>> seq;
  for (int j : order) seq.push_back({j, Word{{j, 1}}});
  for (std::size_t pass = 0; pass < seq.size(); ++pass) {
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      if (seq[i].first > seq[i + 1].first) {
        const auto [lx, x] = seq[i];
        const auto [ly, y] = seq[i + 1];
        const Word x_inv = inverse(x);
        seq[i] = {ly, concat({&x, &y, &x_inv})};
        seq[i + 1] = {lx, x};
      }
    }
  }

  MonodromyRep rep;
  rep.basepoint = b;
  rep.form = Form::sphere;
  for (int j = 0; j < 3; ++j) {
    rep.generators.push_back({"M" + std::to_string(j), evaluate_word(seq[j].second, loops, loops_inv)});
  }
  rep.generators.push_back({"Minf", m_inf});
  return rep;
}

// ---------------------------------------------------------------------------
// Torus

Complex default_torus_basepoint(const TorusHeun& eq) {
  return (eq.omega1() + eq.omega2()) / 4.0;
}

namespace {

bool lines_clear(const TorusHeun& eq, Complex z0, double clearance) {
  const Equation e = eq;
  for (int j = 1; j <= 2; ++j) {
    const Complex z1 = z0 + eq.period(j);
    const Complex lo(std::min(z0.real(), z1.real()) - 1.0 - clearance,
                     std::min(z0.imag(), z1.imag()) - 1.0 - clearance);
    const Complex hi(std::max(z0.real(), z1.real()) + 1.0 + clearance,
                     std::max(z0.imag(), z1.imag()) + 1.0 + clearance);
    for (const Complex& s : singular_points_in_box(e, lo, hi)) {
      if (segment_distance(s, z0, z1) < clearance) return false;
    }
  }
  return true;
}

// Representative of omega_j / 2 + lattice nearest to z0.
Complex nearest_half_period(const TorusHeun& eq, Complex z0, int j) {
  Complex best = eq.half_period(j);
  double best_d = std::abs(best - z0);
  for (int m = -3; m <= 3; ++m) {
    for (int n = -3; n <= 3; ++n) {
      const Complex p = eq.half_period(j) + double(m) * eq.omega1() + double(n) * eq.omega2();
      const double d = std::abs(p - z0);
      if (d < best_d - 1e-14) {
        best = p;
        best_d = d;
      }
    }
  }
  return best;
}

}  // namespace

Matrix2 torus_translation(const TorusHeun& eq, Complex z0, int j, const ContinuationOptions& opts) {
  if (j != 1 && j != 2) throw HeunError(ErrorKind::invalid_argument, "translation index must be 1 or 2");
  const Equation e = eq;
  const double clearance = default_clearance(e);
  if (!lines_clear(eq, z0, clearance)) {
    const Complex suggestion = admissible_torus_basepoint(eq);
    std::ostringstream os;
    os.precision(17);
    os << "line z0 + t*omega_" << j << " passes within " << clearance
       << " of a singular point; try z0 = " << suggestion.real() << "," << suggestion.imag();
    throw HeunError(ErrorKind::clearance, os.str());
  }
  Path p(z0, clearance);
  p.line_to(z0 + eq.period(j));
  return transfer(e, p, opts).matrix;
}

Complex admissible_torus_basepoint(const TorusHeun& eq, unsigned seed) {
  const double clearance = default_clearance(Equation{eq});
  const Complex z0 = default_torus_basepoint(eq);
  if (lines_clear(eq, z0, clearance)) return z0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
  const double mag = 0.01 * std::abs(eq.omega1());
  for (int attempt = 0; attempt < 64; ++attempt) {
    const Complex z = z0 + std::polar(mag * (1.0 + attempt / 8), angle(rng));
    if (lines_clear(eq, z, clearance)) return z;
  }
  throw HeunError(ErrorKind::clearance, "no admissible basepoint found for the torus lines");
}

Matrix2 torus_local_loop(const TorusHeun& eq, Complex z0, int j, const ContinuationOptions& opts) {
  if (j < 0 || j > 3) throw HeunError(ErrorKind::invalid_argument, "half-period label must be 0..3");
  if (!eq.is_singular(j)) return Matrix2::Identity();
  const Equation e = eq;
  const Complex h = nearest_half_period(eq, z0, j);
  // Large exponent differences make small loops ill-conditioned
  // (|zeta|^(2 alpha) spread between the two local solutions), so the loop
  // is as wide as the neighbouring singular points and z0 allow.
  const double radius = std::min(0.4 * eq.min_separation(), 0.5 * std::abs(z0 - h));
  if (!(radius >= default_clearance(e))) {
    throw HeunError(ErrorKind::clearance, "basepoint too close to a half-period for a local loop");
  }
  Path p = lasso(z0, h, radius, 2.0 * kPi);
  p.set_clearance(default_clearance(e));
  return transfer(e, p, opts).matrix;
}

Complex hill_trace(const TorusHeun& eq, int j, Complex lambda, const ContinuationOptions& opts) {
  const TorusHeun at = eq.with_lambda(lambda);
  return torus_translation(at, admissible_torus_basepoint(at), j, opts).trace();
}

MonodromyRep torus_monodromy(const TorusHeun& eq, Complex z0, bool include_loops,
                             const ContinuationOptions& opts) {
  MonodromyRep rep;
  rep.basepoint = z0;
  rep.form = Form::torus;
  rep.generators.push_back({"T1", torus_translation(eq, z0, 1, opts)});
  rep.generators.push_back({"T2", torus_translation(eq, z0, 2, opts)});
  if (include_loops) {
    for (int j = 0; j < 4; ++j) {
      rep.generators.push_back({"L" + std::to_string(j), torus_local_loop(eq, z0, j, opts)});
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Unitarizability

const char* to_string(CertificateStatus s) {
  switch (s) {
    case CertificateStatus::unitarizable: return "unitarizable";
    case CertificateStatus::not_unitarizable: return "not-unitarizable";
    case CertificateStatus::borderline: return "borderline";
  }
  return "unknown";
}

namespace {

// Orthonormal coordinates on Hermitian matrices:
// H = [[h0, (h1 + i h2)/sqrt2], [(h1 - i h2)/sqrt2, h3]], so ||H||_F = |h|.
const double kRt2 = std::sqrt(2.0);

Matrix2 hermitian(const Eigen::Vector4d& h) {
  Matrix2 m;
  m(0, 0) = h[0];
  m(0, 1) = Complex(h[1], h[2]) / kRt2;
  m(1, 0) = Complex(h[1], -h[2]) / kRt2;
  m(1, 1) = h[3];
  return m;
}

Eigen::Vector4d coords(const Matrix2& m) {
  const Complex off = 0.5 * (m(0, 1) + std::conj(m(1, 0)));
  return {m(0, 0).real(), kRt2 * off.real(), kRt2 * off.imag(), m(1, 1).real()};
}

double residual_of(const std::vector<Matrix2>& gens, const Matrix2& h) {
  const double norm = h.norm();
  if (norm == 0.0) return std::numeric_limits<double>::infinity();
  double r = 0.0;
  for (const auto& m : gens) r = std::max(r, (m.adjoint() * h * m - h).norm() / norm);
  return r;
}

// Unit-trace normalization when the trace is positive; otherwise unit
// Frobenius norm (margin then comes out non-positive).
Matrix2 normalize_form(const Matrix2& h) {
  const double tr = h.trace().real();
  if (tr > 1e-300) return h / tr;
  return h / h.norm();
}

double min_eigenvalue(const Matrix2& h) {
  const double a = h(0, 0).real(), d = h(1, 1).real();
  const double off = std::abs(h(0, 1));
  return 0.5 * (a + d) - std::sqrt(0.25 * (a - d) * (a - d) + off * off);
}

bool is_real_within(Complex z, double tol) { return std::abs(z.imag()) <= tol; }

}  // namespace

std::optional<bool> two_generator_trace_criterion(const Matrix2& a, const Matrix2& b, double tol) {
  const Matrix2 na = normalize_det(a), nb = normalize_det(b);
  const Complex x = na.trace(), y = nb.trace(), z = (na * nb).trace();
  const double s = std::max({1.0, std::abs(x), std::abs(y), std::abs(z)});
  const double band = 10.0 * tol * s;
  // Sign choice of the square roots flips pairs of traces; kappa and the
  // bounds below are invariant under it.
  if (!is_real_within(x, band) || !is_real_within(y, band) || !is_real_within(z, band)) {
    if (std::abs(x.imag()) > 10.0 * band || std::abs(y.imag()) > 10.0 * band ||
        std::abs(z.imag()) > 10.0 * band) {
      return false;
    }
    return std::nullopt;
  }
  const double xr = x.real(), yr = y.real(), zr = z.real();
  const double kappa = xr * xr + yr * yr + zr * zr - xr * yr * zr - 4.0;
  const double kband = band * s * s;
  if (kappa > kband) return false;
  if (kappa < -kband) {
    if (std::abs(xr) > 2.0 + band || std::abs(yr) > 2.0 + band || std::abs(zr) > 2.0 + band) {
      return false;
    }
    return true;
  }
  return std::nullopt;
}

UnitarizationCertificate unitarizable(const std::vector<Matrix2>& generators, double tol) {
  UnitarizationCertificate cert;
  std::vector<Matrix2> gens;
  gens.reserve(generators.size());
  for (const auto& g : generators) gens.push_back(normalize_det(g));

  if (gens.empty()) {
    cert.status = CertificateStatus::unitarizable;
    cert.H = Matrix2::Identity() / 2.0;
    cert.candidate = *cert.H;
    cert.margin = 0.5;
    cert.null_dimension = 4;
    return cert;
  }

  // Real 4n x 4 system: columns are images of the basis forms.
  Eigen::MatrixXd sys(4 * gens.size(), 4);
  double scale = 1.0;
  for (std::size_t i = 0; i < gens.size(); ++i) {
    scale = std::max(scale, gens[i].squaredNorm());
    for (int c = 0; c < 4; ++c) {
      Eigen::Vector4d e = Eigen::Vector4d::Zero();
      e[c] = 1.0;
      const Matrix2 h = hermitian(e);
      sys.block<4, 1>(4 * i, c) = coords(gens[i].adjoint() * h * gens[i] - h);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const Eigen::MatrixXd& v = svd.matrixV();
  const double threshold = tol * scale;
  int dim = 0;
  for (int c = 0; c < 4; ++c) {
    if (c < sv.size() && sv[c] <= threshold) ++dim;
  }
  if (sys.rows() < 4) dim = std::max(dim, 4 - static_cast<int>(sys.rows()));
  cert.null_dimension = dim;

  std::vector<Eigen::Vector4d> candidates;
  if (dim > 0) {
    const Eigen::MatrixXd basis = v.rightCols(dim);
    const Eigen::Vector4d iota(1.0, 0.0, 0.0, 1.0);
    const Eigen::Vector4d proj = basis * (basis.transpose() * iota);
    if (proj.norm() > 1e-12) candidates.push_back(proj);
    for (int c = 0; c < dim; ++c) {
      candidates.push_back(basis.col(c));
      candidates.push_back(-basis.col(c));
    }
  } else {
    candidates.push_back(v.col(3));
    candidates.push_back(-v.col(3));
  }

  double best_margin = -std::numeric_limits<double>::infinity();
  Matrix2 best = Matrix2::Zero();
  for (const auto& h : candidates) {
    const Matrix2 form = normalize_form(hermitian(h));
    const double m = min_eigenvalue(form);
    if (m > best_margin) {
      best_margin = m;
      best = form;
    }
  }
  cert.candidate = best;
  cert.margin = best_margin;
  cert.residual = residual_of(gens, best);

  if (cert.residual <= tol && cert.margin > tol) {
    cert.status = CertificateStatus::unitarizable;
  } else if (cert.residual <= 100.0 * tol && cert.margin > 0.0) {
    cert.status = CertificateStatus::borderline;
  } else {
    cert.status = CertificateStatus::not_unitarizable;
  }

  if (gens.size() == 2) {
    cert.trace_criterion = two_generator_trace_criterion(gens[0], gens[1], tol);
    if (cert.trace_criterion && cert.status != CertificateStatus::borderline &&
        *cert.trace_criterion != (cert.status == CertificateStatus::unitarizable)) {
      cert.status = CertificateStatus::borderline;
    }
  }
  if (cert.status == CertificateStatus::unitarizable) cert.H = best;
  return cert;
}

UnitarizationCertificate unitarizable(const MonodromyRep& rep, double tol) {
  std::vector<Matrix2> gens;
  for (const auto& g : rep.generators) gens.push_back(g.matrix);
  return unitarizable(gens, tol);
}

bool coaxial(const std::vector<Matrix2>& generators, double tol) {
  std::vector<Matrix2> gens;
  for (const auto& g : generators) gens.push_back(normalize_det(g));
  for (std::size_t i = 0; i < gens.size(); ++i) {
    for (std::size_t j = i + 1; j < gens.size(); ++j) {
      const double s = std::max(1.0, gens[i].norm() * gens[j].norm());
      if ((gens[i] * gens[j] - gens[j] * gens[i]).norm() > tol * s) return false;
    }
  }
  return true;
}

bool coaxial(const MonodromyRep& rep, double tol) {
  std::vector<Matrix2> gens;
  for (const auto& g : rep.generators) gens.push_back(g.matrix);
  return coaxial(gens, tol);
}

// ---------------------------------------------------------------------------
// Developing map

DevelopedPoint develop(const Equation& eq, const Frame& frame, const Path& path,
                       const ContinuationOptions& opts) {
  if (std::abs(path.start() - frame.base) > 1e-12 * (1.0 + std::abs(frame.base))) {
    throw HeunError(ErrorKind::invalid_argument, "path must start at the frame base point");
  }
  const Matrix2 d = transfer(eq, path, opts).matrix * frame.data;
  return {d(0, 0), d(0, 1), d(0, 0) * d(1, 1) - d(0, 1) * d(1, 0)};
}

Complex developing_map(const Equation& eq, const Frame& frame, const Path& path,
                       const ContinuationOptions& opts) {
  const DevelopedPoint p = develop(eq, frame, path, opts);
  if (std::abs(p.w2) <= 1e-13 * std::abs(p.w1)) {
    throw HeunError(ErrorKind::pole, "developing map has a pole here");
  }
  return p.w1 / p.w2;
}

double metric_density(const Equation& eq, const Frame& frame, const Path& path,
                      const ContinuationOptions& opts) {
  const DevelopedPoint p = develop(eq, frame, path, opts);
  return 2.0 * std::abs(p.wronskian) / (std::norm(p.w1) + std::norm(p.w2));
}

}  // namespace heun
