#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "heun/continuation.hpp"
#include "heun/heun_core.hpp"
#include "heun/monodromy.hpp"

namespace heun {

/// Axis-aligned rectangle [re0, re1] x [im0, im1] in the parameter plane.
struct Region {
  double re0 = 0.0;
  double re1 = 0.0;
  double im0 = 0.0;
  double im1 = 0.0;
};

struct ScanConfig {
  /// nullopt means "auto": the square around the disc of bound_radius.
  std::optional<Region> region;
  int grid = 64;
  double ode_tol = 1e-12;
  double cert_tol = 1e-7;
  /// Absolute dedup radius; nullopt means 1e-6 * (1 + |lambda|).
  std::optional<double> dedup_radius;
  int max_refine_steps = 400;
  std::uint64_t seed = 1;
  int threads = 1;
  /// Margin for bound_radius when the region is automatic.
  double bound_margin = 10.0;
  /// Grid-local minima with defect below this value seed a refinement.
  double seed_threshold = 1.0;
  /// Shift of the grid in units of a cell (for the half-cell invariance check).
  double grid_offset = 0.0;

  /// Throws invalid_argument if the config is not usable.
  void validate() const;
  double dedup_at(Complex lambda) const;
};

struct Solution {
  Complex lambda;
  double defect = 0.0;
  UnitarizationCertificate certificate;
  std::array<Complex, 2> traces{};
  bool coaxial = false;
  /// Certificate of the group generated by T1, T2 alone (diagnostic).
  UnitarizationCertificate translations_only;
};

struct Diagnostic {
  std::string kind;
  Complex at;
  std::string message;
};

struct ScanResult {
  std::vector<Solution> solutions;
  std::vector<Diagnostic> diagnostics;
  Region region;
  std::optional<double> bound;
  int seeds = 0;
  int evaluations = 0;
};

/// Parts of the defect at one parameter value.
struct DefectValue {
  double value = 0.0;
  std::array<Complex, 2> traces{};
  double trace_part = 0.0;
  /// Present when both trace terms were small enough to add the
  /// unitarization term.
  std::optional<UnitarizationCertificate> certificate;
  bool overflow = false;
};

/// d(w) = |Im w| + dist(Re w, [-2, 2]).
double trace_distance(Complex w);

/// Defect at lambda with basepoint z0 (must be admissible for eq):
///   d(tr T1) + d(tr T2) + w * (residual + max(0, -margin)),
/// where the certificate uses all six generators and the weight w ramps from
/// 0 at max d = 0.1 to 1 at max d = 0.05.
DefectValue evaluate_defect(const TorusHeun& eq, Complex lambda, Complex z0,
                            const ContinuationOptions& opts = {}, double cert_tol = 1e-7);

/// Defect with the default admissible basepoint.
double defect(const TorusHeun& eq, Complex lambda, const ContinuationOptions& opts = {},
              double cert_tol = 1e-7);

/// Radius beyond which no sampled lambda has both traces within [-2-margin,
/// 2+margin]. Doubles from 1; throws did_not_converge above 2^20.
double bound_radius(const TorusHeun& eq, double margin = 10.0,
                    const ContinuationOptions& opts = {});

/// Samples used by bound_radius on the circle |lambda| = r.
std::vector<Complex> bound_circle(double r);

ScanResult find_U(const TorusHeun& eq, const ScanConfig& config);

/// Products of the fixed points of the connection matrices on (0,1) and (t,0).
struct FixedPointProducts {
  Complex p_f;
  Complex p_g;
  Matrix2 F;
  Matrix2 G;
};

/// Requires points (0, 1, t) with t < 0 and real q. Throws `pole` when a
/// denominator vanishes (fixed point at infinity).
FixedPointProducts real_fixed_point_products(const SphereHeun& eq,
                                             const ContinuationOptions& opts = {});

struct RealRoot {
  double q = 0.0;
  double p_f = 0.0;
  double p_g = 0.0;
  UnitarizationCertificate certificate;
};

struct RealScanResult {
  std::vector<RealRoot> roots;
  std::vector<Diagnostic> diagnostics;
  int brackets = 0;
};

/// Real q in [q_min, q_max] with P_f = P_g < 0, located by sign changes on
/// `samples` equispaced points and bisection to width 1e-10.
RealScanResult real_find(const SphereHeun& family, double q_min, double q_max, int samples,
                         const ContinuationOptions& opts = {}, double cert_tol = 1e-7);

}  // namespace heun
