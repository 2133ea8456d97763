#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "heun/heun_core.hpp"
#include "heun/types.hpp"

namespace heun {

/// Either form of the equation. Everything in this module treats it as
/// w'' + p(z) w' + r(z) w = 0 (for the torus p = 0, r = -V).
using Equation = std::variant<SphereHeun, TorusHeun>;

Form form_of(const Equation& eq);

/// Default clearance: 0.05 times the shortest distance between singular points.
double default_clearance(const Equation& eq);

/// Singular points of eq lying in the closed box [lo, hi] (componentwise).
/// For the torus form this enumerates the half-period lattice, skipping
/// points where k_j = 0.
std::vector<Complex> singular_points_in_box(const Equation& eq, Complex lo, Complex hi);

struct LineSegment {
  Complex from;
  Complex to;
};

/// Circular arc around `center`, starting at angle `start_angle` and turning
/// by `sweep` radians (positive = counterclockwise).
struct ArcSegment {
  Complex center;
  double radius;
  double start_angle;
  double sweep;

  Complex point(double s) const;
};

using Segment = std::variant<LineSegment, ArcSegment>;

/// A continuation path made of straight segments and circular arcs. Every
/// segment must stay at least `clearance` away from each singular point of
/// the equation it is used with; this is checked when the path is used.
class Path {
 public:
  explicit Path(Complex start, std::optional<double> clearance = std::nullopt)
      : start_(start), end_(start), clearance_(clearance) {}

  static Path polyline(const std::vector<Complex>& vertices,
                       std::optional<double> clearance = std::nullopt);

  Path& line_to(Complex z);
  /// Arc around `center` starting from the current end point.
  Path& arc_around(Complex center, double sweep);
  /// Append another path whose start coincides with this path's end.
  Path& append(const Path& other);

  Path reversed() const;

  Complex start() const { return start_; }
  Complex end() const { return end_; }
  const std::vector<Segment>& segments() const { return segments_; }
  std::optional<double> clearance() const { return clearance_; }
  void set_clearance(std::optional<double> c) { clearance_ = c; }

 private:
  Complex start_;
  Complex end_;
  std::vector<Segment> segments_;
  std::optional<double> clearance_;
};

struct ContinuationOptions {
  double tol = 1e-12;
  int germ_order = 160;
};

/// Maps the column (w, w') at the path start to its value at the path end:
/// column k of `matrix` is the continued data of the solution whose initial
/// data is the k-th unit vector.
struct TransferMatrix {
  Matrix2 matrix;
  double error_estimate = 0.0;
  int steps = 0;
};

TransferMatrix transfer(const Equation& eq, const Path& path,
                        const ContinuationOptions& opts = {});

enum class Branch { minus, plus };

/// Local Frobenius solution zeta^rho (1 + g(zeta)) at a singular point, in
/// the local coordinate zeta = direction * (z - base) (finite points) or
/// zeta = direction / z (infinity). The leading coefficient is exactly 1.
struct SolutionGerm {
  Complex base;
  bool at_infinity = false;
  Complex direction{1.0, 0.0};
  Complex rho;
  std::vector<Complex> coefficients;
  int order = 0;
  /// Radius of validity in |zeta|: half the distance to the nearest other
  /// singular point.
  double radius = 0.0;

  Complex local_coordinate(Complex z) const;
  /// (w(z), w'(z)); z must satisfy |zeta(z)| <= radius.
  Vector2 evaluate(Complex z) const;
};

/// Frobenius germ at singularity `label` (0..3; 3 is infinity for the
/// sphere form). Throws `resonant` for integer exponent differences,
/// `not_singular` at regular half-periods of the torus form and
/// `did_not_converge` when `order` terms do not reach the tail bound.
SolutionGerm frobenius_germ(const Equation& eq, int label, Branch which, int order = 160,
                            Complex direction = {1.0, 0.0});

/// Location of singularity `label` (finite labels only).
Complex singular_point(const Equation& eq, int label);

/// Connection matrix F with w_from = F w_to, each basis the normalized
/// (minus, plus) Frobenius pair. The path must start inside the validity
/// disc of `from` and end inside that of `to`; the germ branches are chosen
/// so that zeta^rho is positive at the path end points.
Matrix2 connection_matrix(const Equation& eq, int from, int to, const Path& path,
                          const ContinuationOptions& opts = {});

/// Straight-line version: path from the matching point of `from` (at half
/// the germ radius toward `to`) to the matching point of `to`.
Matrix2 connection_matrix(const Equation& eq, int from, int to,
                          const ContinuationOptions& opts = {});

/// Straight path between the matching points of two singularities, as used
/// by the convenience overload above.
Path matching_path(const Equation& eq, int from, int to);

}  // namespace heun
