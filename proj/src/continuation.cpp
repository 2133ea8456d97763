#include "heun/continuation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include <Eigen/LU>

namespace heun {

namespace {

// Dormand-Prince 8(5,3) tableau (Hairer, Norsett & Wanner), 12 stages.
constexpr int kStages = 12;

constexpr std::array<double, kStages> kC = {
    0.0,
    0.526001519587677318785587544488e-01,
    0.789002279381515978178381316732e-01,
    0.118350341907227396726757197510,
    0.281649658092772603273242802490,
    0.333333333333333333333333333333,
    0.25,
    0.307692307692307692307692307692,
    0.651282051282051282051282051282,
    0.6,
    0.857142857142857142857142857142,
    1.0};

struct Tableau {
  std::array<std::array<double, kStages>, kStages> a{};
  std::array<double, kStages> b{};
  std::array<double, kStages> e3{};
  std::array<double, kStages> e5{};
};

Tableau make_tableau() {
  Tableau t;
  auto& a = t.a;
  a[1][0] = 5.26001519587677318785587544488e-2;

  a[2][0] = 1.97250569845378994544595329183e-2;
  a[2][1] = 5.91751709536136983633785987549e-2;

  a[3][0] = 2.95875854768068491816892993775e-2;
  a[3][2] = 8.87627564304205475450678981324e-2;

  a[4][0] = 2.41365134159266685502369798665e-1;
  a[4][2] = -8.84549479328286085344864962717e-1;
  a[4][3] = 9.24834003261792003115737966543e-1;

  a[5][0] = 3.7037037037037037037037037037e-2;
  a[5][3] = 1.70828608729473871279604482173e-1;
  a[5][4] = 1.25467687566822425016691814123e-1;

  a[6][0] = 3.7109375e-2;
  a[6][3] = 1.70252211019544039314978060272e-1;
  a[6][4] = 6.02165389804559606850219397283e-2;
  a[6][5] = -1.7578125e-2;

  a[7][0] = 3.70920001185047927108779319836e-2;
  a[7][3] = 1.70383925712239993810214054705e-1;
  a[7][4] = 1.07262030446373284651809199168e-1;
  a[7][5] = -1.53194377486244017527936158236e-2;
  a[7][6] = 8.27378916381402288758473766002e-3;

  a[8][0] = 6.24110958716075717114429577812e-1;
  a[8][3] = -3.36089262944694129406857109825;
  a[8][4] = -8.68219346841726006818189891453e-1;
  a[8][5] = 2.75920996994467083049415600797e1;
  a[8][6] = 2.01540675504778934086186788979e1;
  a[8][7] = -4.34898841810699588477366255144e1;

  a[9][0] = 4.77662536438264365890433908527e-1;
  a[9][3] = -2.48811461997166764192642586468;
  a[9][4] = -5.90290826836842996371446475743e-1;
  a[9][5] = 2.12300514481811942347288949897e1;
  a[9][6] = 1.52792336328824235832596922938e1;
  a[9][7] = -3.32882109689848629194453265587e1;
  a[9][8] = -2.03312017085086261358222928593e-2;

  a[10][0] = -9.3714243008598732571704021658e-1;
  a[10][3] = 5.18637242884406370830023853209;
  a[10][4] = 1.09143734899672957818500254654;
  a[10][5] = -8.14978701074692612513997267357;
  a[10][6] = -1.85200656599969598641566180701e1;
  a[10][7] = 2.27394870993505042818970056734e1;
  a[10][8] = 2.49360555267965238987089396762;
  a[10][9] = -3.0467644718982195003823669022;

  a[11][0] = 2.27331014751653820792359768449;
  a[11][3] = -1.05344954667372501984066689879e1;
  a[11][4] = -2.00087205822486249909675718444;
  a[11][5] = -1.79589318631187989172765950534e1;
  a[11][6] = 2.79488845294199600508499808837e1;
  a[11][7] = -2.85899827713502369474065508674;
  a[11][8] = -8.87285693353062954433549289258;
  a[11][9] = 1.23605671757943030647266201528e1;
  a[11][10] = 6.43392746015763530355970484046e-1;

  t.b = {5.42937341165687622380535766363e-2,
         0.0,
         0.0,
         0.0,
         0.0,
         4.45031289275240888144113950566,
         1.89151789931450038304281599044,
         -5.8012039600105847814672114227,
         3.1116436695781989440891606237e-1,
         -1.52160949662516078556178806805e-1,
         2.01365400804030348374776537501e-1,
         4.47106157277725905176885569043e-2};

  t.e3 = t.b;
  t.e3[0] -= 0.244094488188976377952755905512;
  t.e3[8] -= 0.733846688281611857341361741547;
  t.e3[11] -= 0.220588235294117647058823529412e-1;

  t.e5 = {0.1312004499419488073250102996e-1,
          0.0,
          0.0,
          0.0,
          0.0,
          -0.1225156446376204440720569753e+1,
          -0.4957589496572501915214079952,
          0.1664377182454986536961530415e+1,
          -0.3503288487499736816886487290,
          0.3341791187130174790297318841,
          0.8192320648511571246570742613e-1,
          -0.2235530786388629525884427845e-1};
  return t;
}

const Tableau& tableau() {
  static const Tableau t = make_tableau();
  return t;
}

// Column-major 2x2 state: entries (w, w') of solution 0 then solution 1.
using State = std::array<Complex, 4>;

struct Geometry {
  const Segment* seg;

  Complex point(double s) const {
    if (const auto* l = std::get_if<LineSegment>(seg)) return l->from + s * (l->to - l->from);
    return std::get<ArcSegment>(*seg).point(s);
  }
  Complex velocity(double s) const {
    if (const auto* l = std::get_if<LineSegment>(seg)) return l->to - l->from;
    const auto& a = std::get<ArcSegment>(*seg);
    return kI * a.sweep * (a.point(s) - a.center);
  }
  double length() const {
    if (const auto* l = std::get_if<LineSegment>(seg)) return std::abs(l->to - l->from);
    const auto& a = std::get<ArcSegment>(*seg);
    return a.radius * std::abs(a.sweep);
  }
};

std::string describe(const Segment& seg) {
  std::ostringstream os;
  os.precision(6);
  if (const auto* l = std::get_if<LineSegment>(&seg)) {
    os << "line " << l->from << " -> " << l->to;
  } else {
    const auto& a = std::get<ArcSegment>(seg);
    os << "arc center " << a.center << " radius " << a.radius << " sweep " << a.sweep;
  }
  return os.str();
}

struct SphereCoefficients {
  const SphereHeun* eq;
  double A;
  void operator()(Complex z, Complex& p, Complex& r) const {
    const auto& a = eq->points();
    const auto& al = eq->alpha();
    const Complex d0 = z - a[0];
    const Complex d1 = z - a[1];
    const Complex d2 = z - a[2];
    p = (1.0 - al[0]) / d0 + (1.0 - al[1]) / d1 + (1.0 - al[2]) / d2;
    r = (A * z - eq->q()) / (d0 * d1 * d2);
  }
};

struct TorusCoefficients {
  const TorusHeun* eq;
  void operator()(Complex z, Complex& p, Complex& r) const {
    p = Complex{0.0, 0.0};
    r = -eq->potential(z);
  }
};

template <class Coeff>
void rhs(const Coeff& coeff, const Geometry& geo, double s, const State& y, State& k) {
  Complex p;
  Complex r;
  coeff(geo.point(s), p, r);
  const Complex dz = geo.velocity(s);
  for (int c = 0; c < 2; ++c) {
    const Complex w = y[2 * c];
    const Complex v = y[2 * c + 1];
    k[2 * c] = dz * v;
    k[2 * c + 1] = dz * (-p * v - r * w);
  }
}

template <class Coeff>
void integrate_segment(const Coeff& coeff, const Segment& seg, State& y, double tol,
                       TransferMatrix& out) {
  const Tableau& tab = tableau();
  const Geometry geo{&seg};
  if (geo.length() == 0.0) return;

  std::array<State, kStages> K;
  rhs(coeff, geo, 0.0, y, K[0]);

  double h;
  {
    Complex p;
    Complex r;
    coeff(geo.point(0.0), p, r);
    const double scale = geo.length() * (1.0 + std::abs(p) + std::sqrt(std::abs(r)));
    h = std::min(1.0, 0.1 / scale);
  }

  constexpr double kSafety = 0.9;
  constexpr double kMinFactor = 0.2;
  constexpr double kMaxFactor = 10.0;
  constexpr double kExponent = -1.0 / 8.0;
  constexpr double kHuge = 1e250;

  double s = 0.0;
  bool rejected = false;
  State stage;
  State y_new;
  while (s < 1.0) {
    if (h < 1e-14) {
      throw HeunError(ErrorKind::step_underflow,
                      "step size underflow on segment " + describe(seg));
    }
    const double step = std::min(h, 1.0 - s);
    for (int i = 1; i < kStages; ++i) {
      for (int c = 0; c < 4; ++c) {
        Complex acc{0.0, 0.0};
        for (int j = 0; j < i; ++j) {
          if (tab.a[i][j] != 0.0) acc += tab.a[i][j] * K[j][c];
        }
        stage[c] = y[c] + step * acc;
      }
      rhs(coeff, geo, s + kC[i] * step, stage, K[i]);
    }

    State err3;
    State err5;
    for (int c = 0; c < 4; ++c) {
      Complex acc{0.0, 0.0};
      Complex a3{0.0, 0.0};
      Complex a5{0.0, 0.0};
      for (int j = 0; j < kStages; ++j) {
        acc += tab.b[j] * K[j][c];
        a3 += tab.e3[j] * K[j][c];
        a5 += tab.e5[j] * K[j][c];
      }
      y_new[c] = y[c] + step * acc;
      err3[c] = a3;
      err5[c] = a5;
    }

    double e3n = 0.0;
    double e5n = 0.0;
    bool finite = true;
    for (int col = 0; col < 2; ++col) {
      const double old_norm = std::hypot(std::abs(y[2 * col]), std::abs(y[2 * col + 1]));
      const double new_norm =
          std::hypot(std::abs(y_new[2 * col]), std::abs(y_new[2 * col + 1]));
      if (!std::isfinite(new_norm)) finite = false;
      const double sc = tol * (1.0 + std::max(old_norm, new_norm));
      for (int c = 2 * col; c < 2 * col + 2; ++c) {
        e3n += std::norm(err3[c] / sc);
        e5n += std::norm(err5[c] / sc);
      }
    }
    if (!finite) {
      throw HeunError(ErrorKind::overflow, "solution overflow on segment " + describe(seg));
    }
    const double denom = e5n + 0.01 * e3n;
    const double err = denom > 0.0 ? step * e5n / std::sqrt(denom * 8.0) : 0.0;

    if (err < 1.0) {
      s = (step == 1.0 - s) ? 1.0 : s + step;
      y = y_new;
      out.error_estimate += err * tol;
      ++out.steps;
      for (const auto& v : y) {
        if (std::abs(v) > kHuge) {
          throw HeunError(ErrorKind::overflow, "solution overflow on segment " + describe(seg));
        }
      }
      if (s < 1.0) rhs(coeff, geo, s, y, K[0]);
      double factor = err == 0.0 ? kMaxFactor : std::min(kMaxFactor, kSafety * std::pow(err, kExponent));
      if (rejected) factor = std::min(1.0, factor);
      h = step * factor;
      rejected = false;
    } else {
      h = step * std::max(kMinFactor, kSafety * std::pow(err, kExponent));
      rejected = true;
    }
  }
}

double point_segment_distance(Complex p, const Segment& seg) {
  if (const auto* l = std::get_if<LineSegment>(&seg)) {
    const Complex d = l->to - l->from;
    const double len2 = std::norm(d);
    if (len2 == 0.0) return std::abs(p - l->from);
    const double t = std::clamp(((p - l->from) * std::conj(d)).real() / len2, 0.0, 1.0);
    return std::abs(p - (l->from + t * d));
  }
  const auto& a = std::get<ArcSegment>(seg);
  const Complex rel = p - a.center;
  const double dist_center = std::abs(rel);
  if (std::abs(a.sweep) >= 2.0 * kPi - 1e-15) return std::abs(dist_center - a.radius);
  // Is the direction of p inside the swept angular range?
  if (dist_center > 0.0) {
    double ang = std::arg(rel) - a.start_angle;
    if (a.sweep >= 0.0) {
      ang = std::fmod(ang, 2.0 * kPi);
      if (ang < 0.0) ang += 2.0 * kPi;
      if (ang <= a.sweep) return std::abs(dist_center - a.radius);
    } else {
      ang = std::fmod(-ang, 2.0 * kPi);
      if (ang < 0.0) ang += 2.0 * kPi;
      if (ang <= -a.sweep) return std::abs(dist_center - a.radius);
    }
  }
  return std::min(std::abs(p - a.point(0.0)), std::abs(p - a.point(1.0)));
}

void segment_box(const Segment& seg, double pad, Complex& lo, Complex& hi) {
  if (const auto* l = std::get_if<LineSegment>(&seg)) {
    lo = {std::min(l->from.real(), l->to.real()) - pad,
          std::min(l->from.imag(), l->to.imag()) - pad};
    hi = {std::max(l->from.real(), l->to.real()) + pad,
          std::max(l->from.imag(), l->to.imag()) + pad};
    return;
  }
  const auto& a = std::get<ArcSegment>(seg);
  const double r = a.radius + pad;
  lo = a.center - Complex{r, r};
  hi = a.center + Complex{r, r};
}

void check_clearance(const Equation& eq, const Segment& seg, double clearance) {
  Complex lo;
  Complex hi;
  segment_box(seg, clearance * 1.01 + 1e-12, lo, hi);
  for (const Complex s : singular_points_in_box(eq, lo, hi)) {
    const double d = point_segment_distance(s, seg);
    if (d < clearance) {
      std::ostringstream os;
      os.precision(6);
      os << "path violates clearance " << clearance << " near singular point " << s
         << " (distance " << d << ") on segment " << describe(seg);
      throw HeunError(ErrorKind::clearance, os.str());
    }
  }
}

Complex unit(Complex z) { return z / std::abs(z); }

// Truncated power series helpers.
using Series = std::vector<Complex>;

// 1 / (u + d) = sum_n (-1)^n u^n / d^(n+1)
Series inverse_linear(Complex d, int n) {
  Series s(n);
  Complex term = 1.0 / d;
  for (int i = 0; i < n; ++i) {
    s[i] = term;
    term *= -1.0 / d;
  }
  return s;
}

// 1 / (1 - a x) = sum_n a^n x^n
Series geometric(Complex a, int n) {
  Series s(n);
  Complex term{1.0, 0.0};
  for (int i = 0; i < n; ++i) {
    s[i] = term;
    term *= a;
  }
  return s;
}

Series multiply(const Series& x, const Series& y, int n) {
  Series out(n, Complex{0.0, 0.0});
  for (int i = 0; i < n && i < static_cast<int>(x.size()); ++i) {
    if (x[i] == 0.0) continue;
    for (int j = 0; i + j < n && j < static_cast<int>(y.size()); ++j) out[i + j] += x[i] * y[j];
  }
  return out;
}

struct LocalSeries {
  Series P;
  Series Q;
  Complex base;
  bool at_infinity = false;
  double radius = 0.0;
};

LocalSeries sphere_local(const SphereHeun& eq, int label, int n) {
  LocalSeries ls;
  ls.P.assign(n, Complex{0.0, 0.0});
  ls.Q.assign(n, Complex{0.0, 0.0});
  const auto& a = eq.points();
  const auto& al = eq.alpha();
  const double A = eq.A();
  if (label == kInfinity) {
    ls.at_infinity = true;
    ls.base = Complex{0.0, 0.0};
    ls.P[0] = 2.0;
    Series prod(n, Complex{0.0, 0.0});
    prod[0] = 1.0;
    double nearest = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
      const Series g = geometric(a[i], n);
      for (int m = 0; m < n; ++m) ls.P[m] -= (1.0 - al[i]) * g[m];
      prod = multiply(prod, g, n);
      if (std::abs(a[i]) > 0.0) nearest = std::min(nearest, 1.0 / std::abs(a[i]));
    }
    const Series numer = {A, -eq.q()};
    ls.Q = multiply(numer, prod, n);
    ls.radius = 0.5 * nearest;
    return ls;
  }

  const Complex aj = a[label];
  ls.base = aj;
  ls.P[0] = 1.0 - al[label];
  Series prod(n, Complex{0.0, 0.0});
  prod[0] = 1.0;
  double nearest = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (i == label) continue;
    const Complex d = aj - a[i];
    nearest = std::min(nearest, std::abs(d));
    const Series inv = inverse_linear(d, n);
    // (1 - alpha_i) u / (u + d)
    for (int m = 1; m < n; ++m) ls.P[m] += (1.0 - al[i]) * inv[m - 1];
    prod = multiply(prod, inv, n);
  }
  // u (A (u + a_j) - q) prod
  const Series numer = {Complex{0.0, 0.0}, A * aj - eq.q(), Complex{A, 0.0}};
  ls.Q = multiply(numer, prod, n);
  ls.radius = 0.5 * nearest;
  return ls;
}

LocalSeries torus_local(const TorusHeun& eq, int label, int n) {
  LocalSeries ls;
  ls.P.assign(n, Complex{0.0, 0.0});
  ls.Q.assign(n, Complex{0.0, 0.0});
  const Lattice& lat = eq.lattice();
  const Complex hj = eq.half_period(label);
  ls.base = hj;

  // -k_j u^2 wp(u) = -k_j (1 + sum_k c_k u^{2k})
  const double kj = eq.k(label);
  const auto& c = lat.laurent();
  ls.Q[0] = -kj;
  for (int k = 2; k < static_cast<int>(c.size()) && 2 * k < n; ++k) ls.Q[2 * k] -= kj * c[k];

  // -u^2 (lambda + sum_{i != j} k_i wp(u + h_j - h_i))
  Series rest(n, Complex{0.0, 0.0});
  rest[0] = eq.lambda();
  for (int i = 0; i < 4; ++i) {
    if (i == label || !eq.is_singular(i)) continue;
    const Series t = lat.taylor(hj - eq.half_period(i), n);
    for (int m = 0; m < n; ++m) rest[m] += eq.k(i) * t[m];
  }
  for (int m = 0; m + 2 < n; ++m) ls.Q[m + 2] -= rest[m];

  const double span = lat.shortest_period() * 1.01;
  double nearest = std::numeric_limits<double>::infinity();
  for (const Complex s : singular_points_in_box(eq, hj - Complex{span, span}, hj + Complex{span, span})) {
    const double d = std::abs(s - hj);
    if (d > 1e-12 * span) nearest = std::min(nearest, d);
  }
  if (!std::isfinite(nearest)) nearest = lat.shortest_period();
  ls.radius = 0.5 * nearest;
  return ls;
}

}  // namespace

Form form_of(const Equation& eq) {
  return std::holds_alternative<SphereHeun>(eq) ? Form::sphere : Form::torus;
}

double default_clearance(const Equation& eq) {
  return std::visit([](const auto& e) { return 0.05 * e.min_separation(); }, eq);
}

std::vector<Complex> singular_points_in_box(const Equation& eq, Complex lo, Complex hi) {
  std::vector<Complex> out;
  auto inside = [&](Complex z) {
    return z.real() >= lo.real() && z.real() <= hi.real() && z.imag() >= lo.imag() &&
           z.imag() <= hi.imag();
  };
  if (const auto* s = std::get_if<SphereHeun>(&eq)) {
    for (const Complex a : s->points()) {
      if (inside(a)) out.push_back(a);
    }
    return out;
  }
  const auto& t = std::get<TorusHeun>(eq);
  const Complex b1 = 0.5 * t.omega1();
  const Complex b2 = 0.5 * t.omega2();
  const double det = b1.real() * b2.imag() - b2.real() * b1.imag();
  auto coords = [&](Complex z) {
    return std::pair<double, double>{(b2.imag() * z.real() - b2.real() * z.imag()) / det,
                                     (-b1.imag() * z.real() + b1.real() * z.imag()) / det};
  };
  double smin = std::numeric_limits<double>::infinity();
  double smax = -smin;
  double tmin = smin;
  double tmax = -smin;
  for (const Complex corner : {lo, hi, Complex{lo.real(), hi.imag()}, Complex{hi.real(), lo.imag()}}) {
    const auto [sc, tc] = coords(corner);
    smin = std::min(smin, sc);
    smax = std::max(smax, sc);
    tmin = std::min(tmin, tc);
    tmax = std::max(tmax, tc);
  }
  const long m0 = static_cast<long>(std::floor(smin));
  const long m1 = static_cast<long>(std::ceil(smax));
  const long n0 = static_cast<long>(std::floor(tmin));
  const long n1 = static_cast<long>(std::ceil(tmax));
  for (long m = m0; m <= m1; ++m) {
    for (long n = n0; n <= n1; ++n) {
      const int label = static_cast<int>(((m % 2) + 2) % 2) + 2 * static_cast<int>(((n % 2) + 2) % 2);
      if (!t.is_singular(label)) continue;
      const Complex z = static_cast<double>(m) * b1 + static_cast<double>(n) * b2;
      if (inside(z)) out.push_back(z);
    }
  }
  return out;
}

Complex ArcSegment::point(double s) const {
  return center + radius * std::exp(kI * (start_angle + s * sweep));
}

Path Path::polyline(const std::vector<Complex>& vertices, std::optional<double> clearance) {
  if (vertices.empty()) {
    throw HeunError(ErrorKind::invalid_argument, "polyline needs at least one vertex");
  }
  Path p(vertices.front(), clearance);
  for (std::size_t i = 1; i < vertices.size(); ++i) p.line_to(vertices[i]);
  return p;
}

Path& Path::line_to(Complex z) {
  if (z != end_) segments_.push_back(LineSegment{end_, z});
  end_ = z;
  return *this;
}

Path& Path::arc_around(Complex center, double sweep) {
  const Complex rel = end_ - center;
  const ArcSegment arc{center, std::abs(rel), std::arg(rel), sweep};
  segments_.push_back(arc);
  end_ = arc.point(1.0);
  return *this;
}

Path& Path::append(const Path& other) {
  if (std::abs(other.start_ - end_) > 1e-12 * (1.0 + std::abs(end_))) {
    throw HeunError(ErrorKind::invalid_argument, "appended path does not start at the end point");
  }
  segments_.insert(segments_.end(), other.segments_.begin(), other.segments_.end());
  end_ = other.end_;
  return *this;
}

Path Path::reversed() const {
  Path p(end_, clearance_);
  for (auto it = segments_.rbegin(); it != segments_.rend(); ++it) {
    if (const auto* l = std::get_if<LineSegment>(&*it)) {
      p.segments_.push_back(LineSegment{l->to, l->from});
    } else {
      const auto& a = std::get<ArcSegment>(*it);
      p.segments_.push_back(ArcSegment{a.center, a.radius, a.start_angle + a.sweep, -a.sweep});
    }
  }
  p.end_ = start_;
  return p;
}

TransferMatrix transfer(const Equation& eq, const Path& path, const ContinuationOptions& opts) {
  const double clearance = path.clearance().value_or(default_clearance(eq));
  if (!(clearance > 0.0)) {
    throw HeunError(ErrorKind::invalid_argument, "clearance must be positive");
  }
  for (const auto& seg : path.segments()) check_clearance(eq, seg, clearance);

  TransferMatrix out;
  State y = {1.0, 0.0, 0.0, 1.0};
  for (const auto& seg : path.segments()) {
    if (const auto* s = std::get_if<SphereHeun>(&eq)) {
      integrate_segment(SphereCoefficients{s, s->A()}, seg, y, opts.tol, out);
    } else {
      integrate_segment(TorusCoefficients{&std::get<TorusHeun>(eq)}, seg, y, opts.tol, out);
    }
  }
  out.matrix << y[0], y[2], y[1], y[3];
  return out;
}

Complex SolutionGerm::local_coordinate(Complex z) const {
  return at_infinity ? direction / z : direction * (z - base);
}

Vector2 SolutionGerm::evaluate(Complex z) const {
  const Complex zeta = local_coordinate(z);
  if (zeta == 0.0) {
    throw HeunError(ErrorKind::invalid_argument, "germ evaluated at its singular point");
  }
  const int n = static_cast<int>(coefficients.size()) - 1;
  Complex s = coefficients[n];
  Complex ds{0.0, 0.0};
  for (int k = n - 1; k >= 0; --k) {
    ds = ds * zeta + s;
    s = s * zeta + coefficients[k];
  }
  const Complex power = std::pow(zeta, rho);
  const Complex w = power * s;
  const Complex dw_dzeta = power * (rho * s / zeta + ds);
  const Complex dzeta_dz = at_infinity ? -direction / (z * z) : direction;
  return Vector2{w, dw_dzeta * dzeta_dz};
}

Complex singular_point(const Equation& eq, int label) {
  if (label < 0 || label > 3) {
    throw HeunError(ErrorKind::invalid_argument, "unknown singularity label " + std::to_string(label));
  }
  if (const auto* s = std::get_if<SphereHeun>(&eq)) {
    if (label == kInfinity) {
      throw HeunError(ErrorKind::invalid_argument, "infinity has no finite location");
    }
    return s->points()[label];
  }
  return std::get<TorusHeun>(eq).half_period(label);
}

SolutionGerm frobenius_germ(const Equation& eq, int label, Branch which, int order,
                            Complex direction) {
  if (order < 10) throw HeunError(ErrorKind::invalid_argument, "germ order must be >= 10");
  if (label < 0 || label > 3) {
    throw HeunError(ErrorKind::invalid_argument, "unknown singularity label " + std::to_string(label));
  }
  if (std::abs(direction) == 0.0) {
    throw HeunError(ErrorKind::invalid_argument, "germ direction must be nonzero");
  }
  direction = unit(direction);

  const ExponentPair ex = std::visit([&](const auto& e) { return e.exponents(label); }, eq);
  if (const auto* t = std::get_if<TorusHeun>(&eq); t != nullptr && !t->is_singular(label)) {
    throw HeunError(ErrorKind::not_singular,
                    "not a singular point: k_" + std::to_string(label) + " = 0");
  }
  const Complex diff = ex.difference();
  if (std::abs(diff.imag()) < 1e-12 && is_integer(diff.real(), 1e-9)) {
    throw HeunError(ErrorKind::resonant,
                    "resonant case unsupported: integer exponent difference at singularity " +
                        std::to_string(label));
  }

  const int n = order + 1;
  LocalSeries ls = std::holds_alternative<SphereHeun>(eq)
                       ? sphere_local(std::get<SphereHeun>(eq), label, n)
                       : torus_local(std::get<TorusHeun>(eq), label, n);
  // Rescale u-series to zeta = direction * u.
  Complex inv_dir = 1.0 / direction;
  Complex pw{1.0, 0.0};
  for (int m = 0; m < n; ++m) {
    ls.P[m] *= pw;
    ls.Q[m] *= pw;
    pw *= inv_dir;
  }

  SolutionGerm g;
  g.base = ls.base;
  g.at_infinity = ls.at_infinity;
  g.direction = direction;
  g.rho = which == Branch::minus ? ex.minus : ex.plus;
  g.radius = ls.radius;
  g.order = order;

  const Complex p0 = ls.P[0];
  const Complex q0 = ls.Q[0];
  std::vector<Complex> c(n, Complex{0.0, 0.0});
  c[0] = 1.0;
  for (int k = 1; k < n; ++k) {
    const Complex s = g.rho + static_cast<double>(k);
    const Complex f = s * (s - 1.0) + p0 * s + q0;
    Complex acc{0.0, 0.0};
    for (int m = 1; m <= k; ++m) {
      acc += ((g.rho + static_cast<double>(k - m)) * ls.P[m] + ls.Q[m]) * c[k - m];
    }
    c[k] = -acc / f;
  }

  const double x = 0.5 * g.radius;
  double max_term = 1.0;
  std::vector<double> terms(n);
  double xp = 1.0;
  for (int k = 0; k < n; ++k) {
    terms[k] = std::abs(c[k]) * xp;
    max_term = std::max(max_term, terms[k]);
    xp *= x;
  }
  const double tail = std::max({terms[n - 1], terms[n - 2], terms[n - 3]});
  if (!(tail <= 1e-12 * max_term)) {
    throw HeunError(ErrorKind::did_not_converge,
                    "Frobenius series did not converge at order " + std::to_string(order) +
                        " (tail " + std::to_string(tail / max_term) + ")");
  }
  // Drop terms that cannot matter anywhere inside the matching disc.
  int keep = n;
  while (keep > 4 && terms[keep - 1] < 1e-18 * max_term && terms[keep - 2] < 1e-18 * max_term) {
    --keep;
  }
  c.resize(keep);
  g.coefficients = std::move(c);
  return g;
}

Path matching_path(const Equation& eq, int from, int to) {
  const Complex a = singular_point(eq, from);
  const Complex b = singular_point(eq, to);
  // Germ radii only depend on geometry; the branch is irrelevant here.
  auto radius = [&](int label) {
    const int n = 8;
    return std::holds_alternative<SphereHeun>(eq)
               ? sphere_local(std::get<SphereHeun>(eq), label, n).radius
               : torus_local(std::get<TorusHeun>(eq), label, n).radius;
  };
  if (from == to) {
    const Complex z = a + 0.5 * radius(from);
    return Path(z);
  }
  const Complex dir = unit(b - a);
  const Complex za = a + 0.5 * radius(from) * dir;
  const Complex zb = b - 0.5 * radius(to) * dir;
  return Path::polyline({za, zb});
}

Matrix2 connection_matrix(const Equation& eq, int from, int to, const Path& path,
                          const ContinuationOptions& opts) {
  auto germ_pair = [&](int label, Complex z) {
    Complex dir;
    if (std::holds_alternative<SphereHeun>(eq) && label == kInfinity) {
      dir = unit(z);
    } else {
      dir = std::conj(unit(z - singular_point(eq, label)));
    }
    SolutionGerm lo = frobenius_germ(eq, label, Branch::minus, opts.germ_order, dir);
    SolutionGerm hi = frobenius_germ(eq, label, Branch::plus, opts.germ_order, dir);
    if (std::abs(lo.local_coordinate(z)) > lo.radius * (1.0 + 1e-12)) {
      throw HeunError(ErrorKind::invalid_argument,
                      "path end point lies outside the germ validity disc of singularity " +
                          std::to_string(label));
    }
    Matrix2 data;
    data.col(0) = lo.evaluate(z);
    data.col(1) = hi.evaluate(z);
    return data;
  };

  const Matrix2 from_start = germ_pair(from, path.start());
  const Matrix2 to_end = germ_pair(to, path.end());
  const Matrix2 from_end = transfer(eq, path, opts).matrix * from_start;
  return (to_end.inverse() * from_end).transpose();
}

Matrix2 connection_matrix(const Equation& eq, int from, int to, const ContinuationOptions& opts) {
  return connection_matrix(eq, from, to, matching_path(eq, from, to), opts);
}

}  // namespace heun
