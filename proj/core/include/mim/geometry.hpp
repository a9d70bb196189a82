#pragma once

// Domains, samplers and the boundary fields used by the trial constructions.
//
// Points are stored as columns. Time-dependent domains append t as the last
// coordinate, so their points have d + 1 rows.

#include "mim/ad/jet.hpp"
#include "mim/random.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mim::geo {

using ad::Index;
using ad::Matrix;

enum class Shape {
  UnitBall,     // |x| < 1
  UnitCube01,   // (0, 1)^d
  CubePM1,      // (-1, 1)^d
  Annulus,      // 0.5 < |x| < 1
  Polygon2DxCube,  // quadrilateral in (x1, x2) times (0, 1)^(d-2)
};

std::string_view to_string(Shape s);

struct Domain {
  Shape shape = Shape::UnitBall;
  int d = 2;
  bool time = false;  // cylinder (0, 1) x base, t last

  int input_dim() const noexcept { return d + (time ? 1 : 0); }
  /// Positive inside, zero on the boundary, negative outside. For the convex
  /// shapes and the annulus this is the Euclidean distance inside.
  double boundary_distance(const Eigen::VectorXd& x) const;
  bool contains(const Eigen::VectorXd& x) const { return boundary_distance(x) > 0.0; }
  /// Lebesgue measure of the spatial base.
  double volume() const;
};

/// Vertices of the quadrilateral cross-section, counterclockwise.
const std::vector<Eigen::Vector2d>& polygon_vertices();

enum class Portion { All, Dirichlet, Neumann, Initial };

std::string_view to_string(Portion p);

struct BoundarySamples {
  Matrix x;       // input_dim x count
  Matrix normal;  // input_dim x count, unit outward normals
};

/// Uniform i.i.d. points in the domain, input_dim x count.
Matrix sample_interior(const Domain& domain, Index count, Rng& rng);

/// Uniform points on a boundary portion (uniform in surface measure).
/// Dirichlet and Neumann portions exist only where a mixed problem defines
/// them; Initial is the t = 0 slice of a time cylinder.
BoundarySamples sample_boundary(const Domain& domain, Portion portion, Index count, Rng& rng);
bool has_portion(const Domain& domain, Portion portion);

/// A field of the inputs, evaluated on a jet so that its input derivatives
/// come along.
using Field = std::function<ad::Jet(const ad::Jet&)>;

/// Fields that define one exact construction.
///
/// For Neumann and Robin data `denominator` extends a grad L . nu from the
/// boundary into the domain; when it is empty the constructions use
/// a grad_L . normal. Componentwise entries (cube faces) set `componentwise`:
/// L and G then have one row per coordinate and act on each component of the
/// flux separately.
struct BoundaryData {
  Field L;
  Field grad_L;
  Field G;
  Field normal;
  Field denominator;
  // Second multiplier and extension, used by the split Robin construction.
  Field L2;
  Field G2;
  double a = 1.0;
  bool componentwise = false;
  /// Lower bound of |denominator| on the closed domain; 0 when not applicable.
  double denominator_bound = 0.0;
};

struct BoundarySet {
  std::optional<BoundaryData> dirichlet;
  std::optional<BoundaryData> neumann;
  std::optional<BoundaryData> robin;
};

/// Boundary fields of a catalogued experiment in dimension d. Besides the
/// experiment ids, "robin-ball" and "robin-interval" name the fixtures used
/// to exercise the generic Robin constructions.
BoundarySet boundary_functions(std::string_view experiment_id, int d);

// Field helpers on the spatial part of an input jet.
ad::Jet spatial(const ad::Jet& x, int d);
ad::Jet squared_norm(const ad::Jet& x, int d);
ad::Jet constant_field(const ad::Jet& like, double value, Index rows = 1);

}  // namespace mim::geo
