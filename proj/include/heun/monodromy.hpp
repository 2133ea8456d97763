#pragma once

#include <optional>
#include <string>
#include <vector>

#include "heun/continuation.hpp"
#include "heun/heun_core.hpp"
#include "heun/types.hpp"

namespace heun {

struct Generator {
  std::string label;
  Matrix2 matrix;
};

/// Monodromy representation: generator matrices acting on the (w, w') data
/// of solutions at `basepoint`.
///
/// Sphere form: generators M0, M1, M2, Minf with Minf * M2 * M1 * M0 = I.
/// Torus form: translations T1, T2 followed by local loops L0..L3.
struct MonodromyRep {
  Complex basepoint;
  std::vector<Generator> generators;
  Form form = Form::sphere;

  const Matrix2& at(const std::string& label) const;
};

/// Rescale to determinant 1 using the principal square root of det(m).
Matrix2 normalize_det(const Matrix2& m);

struct SphereMonodromyOptions {
  ContinuationOptions continuation;
  /// Defaults to a point below the configuration (lower half-plane).
  std::optional<Complex> basepoint;
  /// Loop radius around the finite singular points; defaults to the
  /// equation's default clearance.
  std::optional<double> loop_radius;
};

/// Default basepoint for sphere monodromy: centroid - 1.5 i * spread, or the
/// point on the lower arc of that circle (within 1.2 rad of straight down)
/// whose spokes to the singular points best avoid the other singular points
/// when the straight-down choice passes closer than 0.25 * min_separation.
Complex default_sphere_basepoint(const SphereHeun& eq);

/// Throws `resonant` when an angle is an integer.
MonodromyRep sphere_monodromy(const SphereHeun& eq, const SphereMonodromyOptions& opts = {});

/// Default basepoint (omega1 + omega2) / 4 for the torus lines L_j.
Complex default_torus_basepoint(const TorusHeun& eq);

/// Transfer along the straight segment [z0, z0 + omega_j], j in {1, 2}.
Matrix2 torus_translation(const TorusHeun& eq, Complex z0, int j,
                          const ContinuationOptions& opts = {});

/// Loop based at z0 going once counterclockwise around the representative of
/// omega_j / 2 nearest to z0. The radius is min(0.4 * min_separation,
/// |z0 - h| / 2), never below the default clearance.
Matrix2 torus_local_loop(const TorusHeun& eq, Complex z0, int j,
                         const ContinuationOptions& opts = {});

/// Hill discriminant tr T_j(lambda) with the default basepoint. Falls back to
/// seeded perturbations of the basepoint when the default line is blocked.
Complex hill_trace(const TorusHeun& eq, int j, Complex lambda,
                   const ContinuationOptions& opts = {});

/// Basepoint whose lines z0 + t omega_1 and z0 + t omega_2 clear every
/// singular point. Tries the default first, then seeded perturbations.
Complex admissible_torus_basepoint(const TorusHeun& eq, unsigned seed = 1);

/// T1, T2 and (optionally) the four local loops, all based at z0. Local
/// loops at regular half-periods (k_j = 0) are the identity.
MonodromyRep torus_monodromy(const TorusHeun& eq, Complex z0, bool include_loops = true,
                             const ContinuationOptions& opts = {});

enum class CertificateStatus { unitarizable, not_unitarizable, borderline };

const char* to_string(CertificateStatus s);

struct UnitarizationCertificate {
  CertificateStatus status = CertificateStatus::not_unitarizable;
  /// Positive-definite invariant form with unit trace; set iff unitarizable.
  std::optional<Matrix2> H;
  /// max_i ||M_i^* H M_i - H|| / ||H|| for the best candidate form.
  double residual = 0.0;
  /// Smallest eigenvalue of the unit-trace candidate (<= 0 when none is
  /// positive definite).
  double margin = 0.0;
  /// Best candidate form, also when it is not positive definite.
  Matrix2 candidate = Matrix2::Zero();
  /// Dimension of the numerically invariant subspace of Hermitian forms.
  int null_dimension = 0;
  /// Verdict of the two-generator trace criterion when it is decisive.
  std::optional<bool> trace_criterion;
};

/// Searches for a positive-definite Hermitian form preserved by every
/// (determinant-normalized) generator.
UnitarizationCertificate unitarizable(const MonodromyRep& rep, double tol = 1e-7);
UnitarizationCertificate unitarizable(const std::vector<Matrix2>& generators, double tol = 1e-7);

/// Trace criterion for <A, B>: nullopt when not decisive (reducible pairs).
std::optional<bool> two_generator_trace_criterion(const Matrix2& a, const Matrix2& b,
                                                  double tol = 1e-7);

/// True iff all determinant-normalized generators pairwise commute.
bool coaxial(const MonodromyRep& rep, double tol = 1e-7);
bool coaxial(const std::vector<Matrix2>& generators, double tol = 1e-7);

/// A pair of solutions given by their (w, w') data (columns) at `base`.
struct Frame {
  Complex base;
  Matrix2 data;
};

struct DevelopedPoint {
  Complex w1;
  Complex w2;
  Complex wronskian;
};

/// Continues the frame along `path` (which must start at frame.base).
DevelopedPoint develop(const Equation& eq, const Frame& frame, const Path& path,
                       const ContinuationOptions& opts = {});

/// f = w1 / w2 at the path end. Throws `pole` when |w2| <= 1e-13 |w1|.
Complex developing_map(const Equation& eq, const Frame& frame, const Path& path,
                       const ContinuationOptions& opts = {});

/// Pullback of the curvature-1 spherical metric, 2|f'| / (1 + |f|^2), at the
/// path end; finite also where f has a pole.
double metric_density(const Equation& eq, const Frame& frame, const Path& path,
                      const ContinuationOptions& opts = {});

}  // namespace heun
