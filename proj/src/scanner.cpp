#include "heun/scanner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <thread>

namespace heun {

namespace {

// Defect assigned when the transfer overflows: traces are astronomically
// far from [-2, 2].
constexpr double kOverflowDefect = 1e100;
// Trace distance below which the unitarization term enters the defect.
constexpr double kCertificateOn = 0.1;

void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = next++; i < n; i = next++) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct RefineResult {
  Complex x;
  double fx = 0.0;
  int steps = 0;
};

// Nelder-Mead on the plane with a shrinking simplex, restarted from the best
// vertex when the simplex collapses without reaching `target`. Stops early
// when progress stalls.
RefineResult nelder_mead(const std::function<double(Complex)>& f, Complex x0, double size,
                         double angle, int max_steps, double target) {
  std::array<Complex, 3> p{x0, x0 + std::polar(size, angle),
                           x0 + std::polar(size, angle + kPi / 2.0)};
  std::array<double, 3> v{f(p[0]), f(p[1]), f(p[2])};
  int steps = 0;
  int restarts = 0;
  auto order = [&] {
    std::array<int, 3> idx{0, 1, 2};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
    std::array<Complex, 3> q;
    std::array<double, 3> w;
    for (int i = 0; i < 3; ++i) {
      q[i] = p[idx[i]];
      w[i] = v[idx[i]];
    }
    p = q;
    v = w;
  };
  order();
  // Stalled: the best value has not dropped by a relative 1e-9 in 60 steps.
  double anchor = v[0];
  int since = 0;
  while (steps < max_steps && v[0] >= target) {
    ++steps;
    if (v[0] < anchor * (1.0 - 1e-9)) {
      anchor = v[0];
      since = 0;
    } else if (++since >= 60) {
      break;
    }
    const double diam = std::max(std::abs(p[1] - p[0]), std::abs(p[2] - p[0]));
    if (diam < 1e-14 * (1.0 + std::abs(p[0]))) {
      if (restarts >= 3) break;
      ++restarts;
      const double s = std::max(1e-6 * (1.0 + std::abs(p[0])), 1e3 * diam);
      p[1] = p[0] + std::polar(s, angle + 0.3 * restarts);
      p[2] = p[0] + std::polar(s, angle + 0.3 * restarts + kPi / 2.0);
      v[1] = f(p[1]);
      v[2] = f(p[2]);
      order();
      continue;
    }
    const Complex c = 0.5 * (p[0] + p[1]);
    const Complex r = c + (c - p[2]);
    const double fr = f(r);
    if (fr < v[0]) {
      const Complex e = c + 2.0 * (c - p[2]);
      const double fe = f(e);
      if (fe < fr) {
        p[2] = e;
        v[2] = fe;
      } else {
        p[2] = r;
        v[2] = fr;
      }
    } else if (fr < v[1]) {
      p[2] = r;
      v[2] = fr;
    } else {
      const bool outside = fr < v[2];
      const Complex k = outside ? c + 0.5 * (r - c) : c + 0.5 * (p[2] - c);
      const double fk = f(k);
      if (fk < (outside ? fr : v[2])) {
        p[2] = k;
        v[2] = fk;
      } else {
        for (int i = 1; i < 3; ++i) {
          p[i] = p[0] + 0.5 * (p[i] - p[0]);
          v[i] = f(p[i]);
        }
      }
    }
    order();
  }
  return {p[0], v[0], steps};
}

bool lex_less(Complex a, Complex b) {
  if (a.real() != b.real()) return a.real() < b.real();
  return a.imag() < b.imag();
}

}  // namespace

// ---------------------------------------------------------------------------

void ScanConfig::validate() const {
  auto bad = [](const std::string& m) { throw HeunError(ErrorKind::invalid_argument, m); };
  if (grid < 8) bad("grid must be at least 8");
  if (!(ode_tol > 0.0) || !(cert_tol > 0.0)) bad("tolerances must be positive");
  if (dedup_radius && !(*dedup_radius > 0.0)) bad("dedup radius must be positive");
  if (max_refine_steps < 1) bad("max_refine_steps must be positive");
  if (threads < 1) bad("threads must be positive");
  if (!(bound_margin > 0.0)) bad("bound margin must be positive");
  if (!(seed_threshold > 0.0)) bad("seed threshold must be positive");
  if (region && !(region->re1 > region->re0 && region->im1 > region->im0)) {
    bad("region must have re0 < re1 and im0 < im1");
  }
}

double ScanConfig::dedup_at(Complex lambda) const {
  return dedup_radius.value_or(1e-6 * (1.0 + std::abs(lambda)));
}

double trace_distance(Complex w) {
  const double re = w.real();
  const double out = re > 2.0 ? re - 2.0 : (re < -2.0 ? -2.0 - re : 0.0);
  return std::abs(w.imag()) + out;
}

DefectValue evaluate_defect(const TorusHeun& eq, Complex lambda, Complex z0,
                            const ContinuationOptions& opts, double cert_tol) {
  DefectValue out;
  const TorusHeun at = eq.with_lambda(lambda);
  try {
    const Matrix2 t1 = torus_translation(at, z0, 1, opts);
    const Matrix2 t2 = torus_translation(at, z0, 2, opts);
    out.traces = {t1.trace(), t2.trace()};
    const double d1 = trace_distance(out.traces[0]);
    const double d2 = trace_distance(out.traces[1]);
    out.trace_part = d1 + d2;
    out.value = out.trace_part;
    const double worst = std::max(d1, d2);
    if (worst < kCertificateOn) {
      std::vector<Matrix2> gens{t1, t2};
      for (int j = 0; j < 4; ++j) gens.push_back(torus_local_loop(at, z0, j, opts));
      const UnitarizationCertificate cert = unitarizable(gens, cert_tol);
      // A preserved form that is not positive definite (indefinite or
      // degenerate) is penalized by its margin. The weight ramps the term in
      // so the defect stays continuous where it switches on.
      const double weight = std::clamp((kCertificateOn - worst) / (0.5 * kCertificateOn), 0.0, 1.0);
      out.value += weight * (cert.residual + std::max(0.0, -cert.margin));
      out.certificate = cert;
    }
  } catch (const HeunError& e) {
    if (e.kind() != ErrorKind::overflow) throw;
    out.overflow = true;
    out.value = kOverflowDefect;
    out.trace_part = kOverflowDefect;
  }
  return out;
}

double defect(const TorusHeun& eq, Complex lambda, const ContinuationOptions& opts,
              double cert_tol) {
  return evaluate_defect(eq, lambda, admissible_torus_basepoint(eq), opts, cert_tol).value;
}

std::vector<Complex> bound_circle(double r) {
  std::vector<Complex> pts;
  for (int k = 0; k < 64; ++k) pts.push_back(std::polar(r, 2.0 * kPi * k / 64.0));
  return pts;
}

double bound_radius(const TorusHeun& eq, double margin, const ContinuationOptions& opts) {
  if (!(margin > 0.0)) throw HeunError(ErrorKind::invalid_argument, "margin must be positive");
  const Complex z0 = admissible_torus_basepoint(eq);
  auto certified = [&](double r) {
    for (const Complex lambda : bound_circle(r)) {
      const TorusHeun at = eq.with_lambda(lambda);
      bool ok = false;
      for (int j = 1; j <= 2 && !ok; ++j) {
        try {
          ok = std::abs(torus_translation(at, z0, j, opts).trace()) > 2.0 + margin;
        } catch (const HeunError& e) {
          if (e.kind() != ErrorKind::overflow) throw;
          ok = true;
        }
      }
      if (!ok) return false;
    }
    return true;
  };
  constexpr double kLimit = 1048576.0;  // 2^20
  double r = 1.0;
  bool here = certified(r);
  while (r <= kLimit) {
    const bool next = certified(2.0 * r);
    if (here && next) return r;
    r *= 2.0;
    here = next;
  }
  throw HeunError(ErrorKind::did_not_converge,
                  "bound_radius: traces not certified outside [-2, 2] by |lambda| = 2^20; "
                  "supply the region manually");
}

ScanResult find_U(const TorusHeun& eq, const ScanConfig& config) {
  config.validate();
  ScanResult result;
  ContinuationOptions opts;
  opts.tol = config.ode_tol;
  const Complex z0 = admissible_torus_basepoint(eq, static_cast<unsigned>(config.seed));

  std::optional<double> disc;
  if (config.region) {
    result.region = *config.region;
  } else {
    const double r = bound_radius(eq, config.bound_margin, opts);
    result.bound = r;
    disc = r;
    result.region = {-r, r, -r, r};
  }
  const Region reg = result.region;
  const int n = config.grid;
  const double hx = (reg.re1 - reg.re0) / n;
  const double hy = (reg.im1 - reg.im0) / n;
  auto node = [&](int i, int j) {
    return Complex(reg.re0 + (i + 0.5 + config.grid_offset) * hx,
                   reg.im0 + (j + 0.5 + config.grid_offset) * hy);
  };
  const double inf = std::numeric_limits<double>::infinity();

  // Two fields per node: the full defect and its trace part. The
  // certificate term switches on steeply, so the full defect alone can hide
  // the basin of a solution; the trace part is smooth.
  std::vector<double> values(n * n, inf), traces_only(n * n, inf);
  parallel_for(n * n, config.threads, [&](int idx) {
    const Complex lambda = node(idx % n, idx / n);
    if (disc && std::abs(lambda) > *disc) return;
    const DefectValue d = evaluate_defect(eq, lambda, z0, opts, config.cert_tol);
    values[idx] = d.value;
    traces_only[idx] = d.trace_part;
  });
  result.evaluations = n * n;

  // Grid-local minima (8-neighbourhood, ties broken by index) of either field.
  auto local_minimum = [&](const std::vector<double>& field, int i, int j) {
    const int idx = i + n * j;
    const double v = field[idx];
    if (!(v < config.seed_threshold)) return false;
    for (int dj = -1; dj <= 1; ++dj) {
      for (int di = -1; di <= 1; ++di) {
        if (di == 0 && dj == 0) continue;
        const int a = i + di, b = j + dj;
        if (a < 0 || b < 0 || a >= n || b >= n) continue;
        const int other = a + n * b;
        if (field[other] < v || (field[other] == v && other < idx)) return false;
      }
    }
    return true;
  };
  std::vector<int> seeds;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (local_minimum(values, i, j) || local_minimum(traces_only, i, j)) seeds.push_back(i + n * j);
    }
  }
  result.seeds = static_cast<int>(seeds.size());

  struct Candidate {
    RefineResult refined;
    DefectValue value;
    bool accepted = false;
    std::string reason;
  };
  std::vector<Candidate> cands(seeds.size());
  std::atomic<int> evals{0};
  const double cell = std::max(std::abs(hx), std::abs(hy));
  parallel_for(static_cast<int>(seeds.size()), config.threads, [&](int s) {
    const int idx = seeds[s];
    std::mt19937_64 rng(config.seed * 1000003ULL + static_cast<std::uint64_t>(idx));
    const double angle = std::uniform_real_distribution<double>(0.0, 2.0 * kPi)(rng);
    auto f = [&](Complex lambda) {
      ++evals;
      return evaluate_defect(eq, lambda, z0, opts, config.cert_tol).value;
    };
    Candidate& c = cands[s];
    c.refined = nelder_mead(f, node(idx % n, idx / n), 0.5 * cell, angle,
                            config.max_refine_steps, 0.01 * config.cert_tol);
    c.value = evaluate_defect(eq, c.refined.x, z0, opts, config.cert_tol);
    if (!(c.value.value < config.cert_tol)) {
      // Second try: walk onto the curve of real traces first, then minimize
      // the full defect from there.
      auto g = [&](Complex lambda) {
        ++evals;
        return evaluate_defect(eq, lambda, z0, opts, config.cert_tol).trace_part;
      };
      const RefineResult onto = nelder_mead(g, node(idx % n, idx / n), 0.5 * cell, angle,
                                            config.max_refine_steps, 1e-3 * config.cert_tol);
      const RefineResult along = nelder_mead(f, onto.x, 0.25 * cell, angle + kPi / 4.0,
                                             config.max_refine_steps, 0.01 * config.cert_tol);
      const DefectValue v = evaluate_defect(eq, along.x, z0, opts, config.cert_tol);
      if (v.value < c.value.value) {
        c.refined = along;
        c.value = v;
      }
    }
    if (!(c.value.value < config.cert_tol)) {
      c.reason = "refinement stopped at defect " + std::to_string(c.value.value);
      return;
    }
    if (!c.value.certificate || c.value.certificate->status != CertificateStatus::unitarizable) {
      c.reason = "defect below tolerance but certificate not unitarizable";
      return;
    }
    c.accepted = true;
  });
  result.evaluations += evals.load();

  auto inside = [&](Complex z) {
    return z.real() >= reg.re0 - cell && z.real() <= reg.re1 + cell && z.imag() >= reg.im0 - cell &&
           z.imag() <= reg.im1 + cell;
  };
  std::vector<int> accepted;
  for (std::size_t s = 0; s < cands.size(); ++s) {
    const Candidate& c = cands[s];
    if (c.accepted && inside(c.refined.x)) {
      accepted.push_back(static_cast<int>(s));
      continue;
    }
    const std::string kind = c.accepted ? "outside-region" : "refinement";
    const std::string reason = c.accepted ? "refinement converged outside the scanned region" : c.reason;
    // Seeds that stall at the same point are reported once.
    bool seen = false;
    for (const auto& d : result.diagnostics) {
      if (d.kind == kind && std::abs(d.at - c.refined.x) <= 1e-4 * (1.0 + std::abs(c.refined.x))) {
        seen = true;
      }
    }
    if (!seen) result.diagnostics.push_back({kind, c.refined.x, reason});
  }
  // Deduplicate keeping the lowest defect; order ties by position.
  std::sort(accepted.begin(), accepted.end(), [&](int a, int b) {
    if (cands[a].value.value != cands[b].value.value) {
      return cands[a].value.value < cands[b].value.value;
    }
    return lex_less(cands[a].refined.x, cands[b].refined.x);
  });
  std::vector<int> kept;
  for (int a : accepted) {
    bool dup = false;
    for (int b : kept) {
      const double r = std::max(config.dedup_at(cands[a].refined.x), config.dedup_at(cands[b].refined.x));
      if (std::abs(cands[a].refined.x - cands[b].refined.x) <= r) dup = true;
    }
    if (!dup) kept.push_back(a);
  }

  for (int a : kept) {
    const Candidate& c = cands[a];
    Solution sol;
    sol.lambda = c.refined.x;
    sol.defect = c.value.value;
    sol.traces = c.value.traces;
    const TorusHeun at = eq.with_lambda(sol.lambda);
    const MonodromyRep rep = torus_monodromy(at, z0, true, opts);
    sol.certificate = unitarizable(rep, config.cert_tol);
    if (sol.certificate.status == CertificateStatus::borderline) {
      // Borderline: recompute the generators at a tighter ODE tolerance.
      ContinuationOptions tight = opts;
      tight.tol = std::max(opts.tol * 1e-2, 1e-14);
      sol.certificate = unitarizable(torus_monodromy(at, z0, true, tight), config.cert_tol);
    }
    if (sol.certificate.status != CertificateStatus::unitarizable) {
      result.diagnostics.push_back({"certificate", sol.lambda,
                                    std::string("full certificate came out ") +
                                        to_string(sol.certificate.status)});
      continue;
    }
    sol.coaxial = coaxial(rep, config.cert_tol);
    sol.translations_only = unitarizable(std::vector<Matrix2>{rep.at("T1"), rep.at("T2")},
                                         config.cert_tol);
    result.solutions.push_back(std::move(sol));
  }
  std::sort(result.solutions.begin(), result.solutions.end(),
            [](const Solution& a, const Solution& b) { return lex_less(a.lambda, b.lambda); });
  std::sort(result.diagnostics.begin(), result.diagnostics.end(),
            [](const Diagnostic& a, const Diagnostic& b) {
              if (a.kind != b.kind) return a.kind < b.kind;
              return lex_less(a.at, b.at);
            });
  return result;
}

// ---------------------------------------------------------------------------
// Real case

namespace {

void check_real_configuration(const SphereHeun& eq) {
  const auto& a = eq.points();
  const bool layout = a[0] == Complex(0.0) && a[1] == Complex(1.0) && a[2].imag() == 0.0 &&
                      a[2].real() < 0.0;
  if (!layout) {
    throw HeunError(ErrorKind::invalid_argument, "real case needs points (0, 1, t) with t < 0");
  }
  if (eq.q().imag() != 0.0) throw HeunError(ErrorKind::invalid_argument, "real case needs real q");
  for (double al : eq.alpha()) {
    if (is_integer(al)) throw HeunError(ErrorKind::resonant, "real case needs non-integer angles");
  }
}

// Each product P = N / D is a point of the real projective line, carried by
// the unit vector (N, D) / |(N, D)| up to sign. N and D are entire in q, so
// the unit vector is continuous except at common zeros of N and D, where it
// reverses. Tracking those reversals (orientation signs) makes the cross
// product of the f and g vectors change sign exactly where P_f = P_g,
// including where both pass through infinity.
struct Direction {
  double n = 0.0;
  double d = 1.0;
};

Direction product_direction(const Matrix2& m) {
  const double n = (m(0, 0) * m(0, 1)).real(), d = (m(1, 0) * m(1, 1)).real();
  const double r = std::hypot(n, d);
  if (r == 0.0) return {0.0, 1.0};
  return {n / r, d / r};
}

double dot(const Direction& a, const Direction& b) { return a.n * b.n + a.d * b.d; }

struct Lifted {
  Direction f;
  Direction g;
  double sf = 1.0;
  double sg = 1.0;
  double cross() const { return sf * sg * (f.n * g.d - f.d * g.n); }
};

// Carries the orientation of `prev` over to `next` (raw directions). Only
// valid when the step is small; see the refinement in real_find.
Lifted carry(Lifted next, const Lifted& prev) {
  next.sf = dot(next.f, prev.f) < 0.0 ? -prev.sf : prev.sf;
  next.sg = dot(next.g, prev.g) < 0.0 ? -prev.sg : prev.sg;
  return next;
}

struct ConnectionPair {
  Matrix2 F;
  Matrix2 G;
};

ConnectionPair connections(const SphereHeun& eq, const ContinuationOptions& opts) {
  const Equation e = eq;
  return {connection_matrix(e, 0, 1, opts), connection_matrix(e, 0, 2, opts)};
}

}  // namespace

FixedPointProducts real_fixed_point_products(const SphereHeun& eq, const ContinuationOptions& opts) {
  check_real_configuration(eq);
  const ConnectionPair c = connections(eq, opts);
  const Complex df = c.F(1, 0) * c.F(1, 1);
  const Complex dg = c.G(1, 0) * c.G(1, 1);
  if (std::abs(df) <= 1e-300 || std::abs(dg) <= 1e-300) {
    throw HeunError(ErrorKind::pole, "fixed point at infinity (vanishing denominator)");
  }
  FixedPointProducts out;
  out.F = c.F;
  out.G = c.G;
  out.p_f = c.F(0, 0) * c.F(0, 1) / df;
  out.p_g = c.G(0, 0) * c.G(0, 1) / dg;
  return out;
}

RealScanResult real_find(const SphereHeun& family, double q_min, double q_max, int samples,
                         const ContinuationOptions& opts, double cert_tol) {
  if (!(q_min < q_max)) throw HeunError(ErrorKind::invalid_argument, "need q_min < q_max");
  if (samples < 16) throw HeunError(ErrorKind::invalid_argument, "samples must be at least 16");
  check_real_configuration(family.with_q(q_min));

  auto raw = [&](double q) {
    const ConnectionPair c = connections(family.with_q(q), opts);
    return Lifted{product_direction(c.F), product_direction(c.G)};
  };
  // Steps are accepted once both directions turn by less than ~30 degrees;
  // a reversal that persists down to width 1e-9 is a common zero.
  auto small_step = [](const Lifted& a, const Lifted& b) {
    return dot(a.f, b.f) >= 0.85 && dot(a.g, b.g) >= 0.85;
  };
  std::vector<double> qs;
  std::vector<Lifted> ls;
  {
    const double h = (q_max - q_min) / (samples - 1);
    qs.push_back(q_min);
    ls.push_back(raw(q_min));
    for (int i = 1; i < samples; ++i) {
      std::vector<std::pair<double, Lifted>> pending{{q_min + h * i, raw(q_min + h * i)}};
      while (!pending.empty()) {
        const auto [q, l] = pending.back();
        if (small_step(l, ls.back()) || q - qs.back() < 1e-9) {
          qs.push_back(q);
          ls.push_back(carry(l, ls.back()));
          pending.pop_back();
        } else {
          const double mid = 0.5 * (qs.back() + q);
          pending.push_back({mid, raw(mid)});
        }
      }
    }
  }
  auto lifted = [&](double q, const Lifted* ref) {
    Lifted l = raw(q);
    return ref ? carry(l, *ref) : l;
  };

  RealScanResult result;
  for (std::size_t i = 0; i + 1 < qs.size(); ++i) {
    const double c0 = ls[i].cross(), c1 = ls[i + 1].cross();
    if (c0 == 0.0 || (c0 > 0.0) != (c1 > 0.0)) {
      ++result.brackets;
      double lo = qs[i], hi = qs[i + 1];
      Lifted llo = ls[i];
      if (c0 == 0.0) hi = lo;
      while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        const Lifted lm = lifted(mid, &llo);
        const double cm = lm.cross();
        if (cm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((cm > 0.0) == (llo.cross() > 0.0)) {
          lo = mid;
          llo = lm;
        } else {
          hi = mid;
        }
      }
      const double q = 0.5 * (lo + hi);
      FixedPointProducts p;
      try {
        p = real_fixed_point_products(family.with_q(q), opts);
      } catch (const HeunError& e) {
        if (e.kind() != ErrorKind::pole) throw;
        result.diagnostics.push_back({"fixed-point-at-infinity", q, e.what()});
        continue;
      }
      const double pf = p.p_f.real(), pg = p.p_g.real();
      if (std::abs(pf - pg) > 1e-8 * std::max(1.0, std::abs(pf))) {
        result.diagnostics.push_back(
            {"bracket", q, "bisection ended with |P_f - P_g| above 1e-8 (steep crossing)"});
        continue;
      }
      if (std::abs(pf) <= 1e-8) {
        result.diagnostics.push_back(
            {"degenerate", q, "P_f = P_g = 0: a fixed point at 0 cannot satisfy u1 conj(u2) = -1"});
        continue;
      }
      if (!(pf < 0.0)) continue;
      RealRoot root;
      root.q = q;
      root.p_f = pf;
      root.p_g = pg;
      SphereMonodromyOptions mo;
      mo.continuation = opts;
      root.certificate = unitarizable(sphere_monodromy(family.with_q(q), mo), cert_tol);
      if (root.certificate.status == CertificateStatus::borderline) {
        mo.continuation.tol = std::max(opts.tol * 1e-2, 1e-14);
        root.certificate = unitarizable(sphere_monodromy(family.with_q(q), mo), cert_tol);
      }
      result.roots.push_back(root);
    }
  }
  return result;
}

}  // namespace heun
