#include "mim/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mim::geo {
namespace {

constexpr double kE = std::numbers::e;

struct Edge {
  Eigen::Vector2d a, b, normal;
  double length;
};

const std::vector<Edge>& polygon_edges() {
  static const std::vector<Edge> edges = [] {
    const auto& v = polygon_vertices();
    std::vector<Edge> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Eigen::Vector2d a = v[i], b = v[(i + 1) % v.size()];
      const Eigen::Vector2d t = b - a;
      out.push_back({a, b, Eigen::Vector2d(t.y(), -t.x()).normalized(), t.norm()});
    }
    return out;
  }();
  return edges;
}

double polygon_distance(double x1, double x2) {
  double dist = INFINITY;
  for (const Edge& e : polygon_edges()) {
    dist = std::min(dist, -(Eigen::Vector2d(x1, x2) - e.a).dot(e.normal));
  }
  return dist;
}

double polygon_perimeter() {
  double p = 0.0;
  for (const Edge& e : polygon_edges()) p += e.length;
  return p;
}

constexpr double kPolygonArea = 0.17;

Eigen::VectorXd unit_direction(int d, Rng& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(d);
  do {
    for (int i = 0; i < d; ++i) v(i) = g(rng);
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

void sample_polygon(Rng& rng, double& x1, double& x2) {
  std::uniform_real_distribution<double> ux(-1.0, -0.4), uy(0.0, 0.5);
  do {
    x1 = ux(rng);
    x2 = uy(rng);
  } while (polygon_distance(x1, x2) <= 0.0);
}

void require_dims(const Domain& dom) {
  if (dom.d < 1) throw std::invalid_argument("domain: dimension must be positive");
  if (dom.shape == Shape::Polygon2DxCube && dom.d < 2) {
    throw std::invalid_argument("domain: the polygon cross-section needs d >= 2");
  }
}

// Fills the spatial rows of column j with an interior point of the base.
void interior_point(const Domain& dom, Rng& rng, Eigen::Ref<Eigen::VectorXd> x) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int d = dom.d;
  switch (dom.shape) {
    case Shape::UnitBall:
      x.head(d) = unit_direction(d, rng) * std::pow(u01(rng), 1.0 / d);
      break;
    case Shape::Annulus: {
      const double r0 = std::pow(0.5, d);
      x.head(d) = unit_direction(d, rng) * std::pow(r0 + (1.0 - r0) * u01(rng), 1.0 / d);
      break;
    }
    case Shape::UnitCube01:
      for (int i = 0; i < d; ++i) x(i) = u01(rng);
      break;
    case Shape::CubePM1:
      for (int i = 0; i < d; ++i) x(i) = 2.0 * u01(rng) - 1.0;
      break;
    case Shape::Polygon2DxCube:
      sample_polygon(rng, x(0), x(1));
      for (int i = 2; i < d; ++i) x(i) = u01(rng);
      break;
  }
}

// Point on face x_i = side of a box [lo, hi]^d, the rest of the point interior.
void box_face_point(const Domain& dom, int i, bool upper, Rng& rng, Eigen::Ref<Eigen::VectorXd> x,
                    Eigen::Ref<Eigen::VectorXd> n) {
  interior_point(dom, rng, x);
  const double lo = dom.shape == Shape::CubePM1 ? -1.0 : 0.0;
  x(i) = upper ? 1.0 : lo;
  n.setZero();
  n(i) = upper ? 1.0 : -1.0;
}

}  // namespace

std::string_view to_string(Shape s) {
  switch (s) {
    case Shape::UnitBall: return "unit-ball";
    case Shape::UnitCube01: return "unit-cube";
    case Shape::CubePM1: return "cube-pm1";
    case Shape::Annulus: return "annulus";
    case Shape::Polygon2DxCube: return "polygon-x-cube";
  }
  return "?";
}

std::string_view to_string(Portion p) {
  switch (p) {
    case Portion::All: return "all";
    case Portion::Dirichlet: return "dirichlet";
    case Portion::Neumann: return "neumann";
    case Portion::Initial: return "initial";
  }
  return "?";
}

const std::vector<Eigen::Vector2d>& polygon_vertices() {
  static const std::vector<Eigen::Vector2d> v{
      {-1.0, 0.0}, {-0.4, 0.0}, {-0.4, 0.4}, {-0.5, 0.5}};
  return v;
}

double Domain::boundary_distance(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim()) {
    throw std::invalid_argument("boundary_distance: expected " + std::to_string(input_dim()) +
                                " coordinates, got " + std::to_string(x.size()));
  }
  double dist = INFINITY;
  const Eigen::VectorXd s = x.head(d);
  switch (shape) {
    case Shape::UnitBall: dist = 1.0 - s.norm(); break;
    case Shape::Annulus: dist = std::min(s.norm() - 0.5, 1.0 - s.norm()); break;
    case Shape::UnitCube01:
      for (int i = 0; i < d; ++i) dist = std::min({dist, s(i), 1.0 - s(i)});
      break;
    case Shape::CubePM1:
      for (int i = 0; i < d; ++i) dist = std::min({dist, 1.0 + s(i), 1.0 - s(i)});
      break;
    case Shape::Polygon2DxCube:
      dist = polygon_distance(s(0), s(1));
      for (int i = 2; i < d; ++i) dist = std::min({dist, s(i), 1.0 - s(i)});
      break;
  }
  if (time) dist = std::min({dist, x(d), 1.0 - x(d)});
  return dist;
}

double Domain::volume() const {
  switch (shape) {
    case Shape::UnitBall:
      return std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0 + 1.0);
    case Shape::Annulus:
      return (1.0 - std::pow(0.5, d)) * std::pow(std::numbers::pi, d / 2.0) /
             std::tgamma(d / 2.0 + 1.0);
    case Shape::UnitCube01: return 1.0;
    case Shape::CubePM1: return std::pow(2.0, d);
    case Shape::Polygon2DxCube: return kPolygonArea;
  }
  return 0.0;
}

Matrix sample_interior(const Domain& dom, Index count, Rng& rng) {
  require_dims(dom);
  if (count < 1) throw std::invalid_argument("sample_interior: count must be positive");
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Matrix x(dom.input_dim(), count);
  for (Index j = 0; j < count; ++j) {
    Eigen::VectorXd col(dom.input_dim());
    interior_point(dom, rng, col);
    if (dom.time) col(dom.d) = u01(rng);
    x.col(j) = col;
  }
  return x;
}

bool has_portion(const Domain& dom, Portion p) {
  switch (p) {
    case Portion::All: return true;
    case Portion::Initial: return dom.time;
    case Portion::Dirichlet:
      return !dom.time && (dom.shape == Shape::Annulus || dom.shape == Shape::UnitCube01 ||
                           dom.shape == Shape::Polygon2DxCube);
    case Portion::Neumann:
      return !dom.time && (dom.shape == Shape::Annulus ||
                           (dom.shape == Shape::UnitCube01 && dom.d >= 2) ||
                           (dom.shape == Shape::Polygon2DxCube && dom.d >= 3));
  }
  return false;
}

BoundarySamples sample_boundary(const Domain& dom, Portion portion, Index count, Rng& rng) {
  require_dims(dom);
  if (!has_portion(dom, portion)) {
    throw std::invalid_argument("sample_boundary: portion '" + std::string(to_string(portion)) +
                                "' is not defined for " + std::string(to_string(dom.shape)) +
                                (dom.time ? " x time" : "") + " in d=" + std::to_string(dom.d));
  }
  const int d = dom.d;
  const int D = dom.input_dim();
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  BoundarySamples out{Matrix::Zero(D, count), Matrix::Zero(D, count)};

  for (Index j = 0; j < count; ++j) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(D), n = Eigen::VectorXd::Zero(D);
    if (portion == Portion::Initial) {
      interior_point(dom, rng, x);
      x(d) = 0.0;
      n(d) = -1.0;
    } else {
      switch (dom.shape) {
        case Shape::UnitBall: {
          const Eigen::VectorXd v = unit_direction(d, rng);
          x.head(d) = v;
          n.head(d) = v;
          break;
        }
        case Shape::Annulus: {
          bool inner;
          if (portion == Portion::Dirichlet) {
            inner = true;
          } else if (portion == Portion::Neumann) {
            inner = false;
          } else {
            const double wi = std::pow(0.5, d - 1);
            inner = u01(rng) < wi / (1.0 + wi);
          }
          const Eigen::VectorXd v = unit_direction(d, rng);
          x.head(d) = inner ? Eigen::VectorXd(0.5 * v) : v;
          n.head(d) = inner ? Eigen::VectorXd(-v) : v;
          break;
        }
        case Shape::UnitCube01:
        case Shape::CubePM1: {
          int i0 = 0, i1 = d;  // faces of coordinates [i0, i1)
          if (portion == Portion::Dirichlet) i1 = 1;
          if (portion == Portion::Neumann) i0 = 1;
          const int face = i0 * 2 + static_cast<int>(u01(rng) * 2 * (i1 - i0));
          box_face_point(dom, std::min(face / 2, i1 - 1), face % 2 == 1, rng, x.head(d),
                         n.head(d));
          break;
        }
        case Shape::Polygon2DxCube: {
          const double wd = polygon_perimeter();
          const double wn = 2.0 * (d - 2) * kPolygonArea;
          bool dirichlet = portion == Portion::Dirichlet ||
                           (portion == Portion::All && u01(rng) * (wd + wn) < wd);
          interior_point(dom, rng, x.head(d));
          if (dirichlet) {
            double s = u01(rng) * wd;
            const auto& edges = polygon_edges();
            std::size_t e = 0;
            while (e + 1 < edges.size() && s > edges[e].length) s -= edges[e++].length;
            const Eigen::Vector2d p =
                edges[e].a + (edges[e].b - edges[e].a) * std::min(1.0, s / edges[e].length);
            x(0) = p.x();
            x(1) = p.y();
            n(0) = edges[e].normal.x();
            n(1) = edges[e].normal.y();
          } else {
            const int face = static_cast<int>(u01(rng) * 2 * (d - 2));
            const int i = 2 + std::min(face / 2, d - 3);
            x(i) = face % 2 == 1 ? 1.0 : 0.0;
            n(i) = face % 2 == 1 ? 1.0 : -1.0;
          }
          break;
        }
      }
      if (dom.time) x(d) = u01(rng);
    }
    out.x.col(j) = x;
    out.normal.col(j) = n;
  }
  return out;
}

ad::Jet spatial(const ad::Jet& x, int d) { return x.rows() == d ? x : x.rows(0, d); }

ad::Jet squared_norm(const ad::Jet& x, int d) {
  const ad::Jet s = spatial(x, d);
  return ad::sum_rows(s * s);
}

ad::Jet constant_field(const ad::Jet& like, double value, Index rows) {
  return ad::jet_constant(like, Matrix::Constant(rows, like.batch(), value));
}

namespace {

// x_i (1 - x_i) for each spatial row.
ad::Jet bubble(const ad::Jet& x, int d) {
  const ad::Jet s = spatial(x, d);
  return s * (1.0 - s);
}

// Rows i < first are replaced by ones.
ad::Jet free_rows(const ad::Jet& rows, int first) {
  if (first == 0) return rows;
  std::vector<ad::Jet> parts{constant_field(rows, 1.0, first)};
  if (first < rows.rows()) parts.push_back(rows.rows(first, rows.rows() - first));
  return ad::vcat(parts);
}

// Sum of the spatial coordinates with x_i removed, one row per i.
ad::Jet sum_without(const ad::Jet& x, int d) {
  const ad::Jet s = spatial(x, d);
  return ad::broadcast_rows(ad::sum_rows(s), d) - s;
}

ad::Jet sphere_flux_data(const ad::Jet& x, int d) { return spatial(x, d); }

BoundaryData sphere_neumann(int d, double g) {
  BoundaryData b;
  b.L = [d](const ad::Jet& x) { return 0.5 * (squared_norm(x, d) - 1.0); };
  b.grad_L = [d](const ad::Jet& x) { return sphere_flux_data(x, d); };
  b.normal = [d](const ad::Jet& x) { return sphere_flux_data(x, d); };
  b.denominator = [](const ad::Jet& x) { return constant_field(x, 1.0); };
  b.G = [g](const ad::Jet& x) { return constant_field(x, g); };
  b.denominator_bound = 1.0;
  return b;
}

BoundaryData dirichlet(Field L, double g) {
  BoundaryData b;
  b.L = std::move(L);
  b.G = [g](const ad::Jet& x) { return constant_field(x, g); };
  return b;
}

}  // namespace

BoundarySet boundary_functions(std::string_view id, int d) {
  if (d < 1) throw std::invalid_argument("boundary_functions: d must be positive");
  BoundarySet set;
  if (id == "dirichlet-elliptic-ball") {
    set.dirichlet = dirichlet([d](const ad::Jet& x) { return ad::sqrt(squared_norm(x, d)) - 1.0; },
                              kE);
  } else if (id == "monge-ampere") {
    set.dirichlet =
        dirichlet([d](const ad::Jet& x) { return 1.0 - squared_norm(x, d); }, std::exp(1.0 / d));
  } else if (id == "neumann-ball") {
    set.neumann = sphere_neumann(d, 0.0);
  } else if (id == "neumann-cube") {
    BoundaryData b;
    b.componentwise = true;
    b.L = [d](const ad::Jet& x) { return bubble(x, d); };
    b.G = [d](const ad::Jet& x) { return (kE - 1.0) * spatial(x, d) + 1.0; };
    set.neumann = b;
  } else if (id == "mixed-slab") {
    set.dirichlet = dirichlet(
        [](const ad::Jet& x) {
          const ad::Jet x1 = x.row(0);
          return x1 * (1.0 - x1);
        },
        0.0);
    BoundaryData n;
    n.componentwise = true;
    n.L = [d](const ad::Jet& x) { return free_rows(bubble(x, d), 1); };
    n.G = [d](const ad::Jet& x) { return constant_field(x, 0.0, d); };
    set.neumann = n;
  } else if (id == "mixed-complex2d") {
    if (d < 2) throw std::invalid_argument("mixed-complex2d needs d >= 2");
    set.dirichlet = dirichlet(
        [](const ad::Jet& x) {
          const ad::Jet x1 = x.row(0), x2 = x.row(1);
          return (x1 - x2 + 1.0) * (x1 + x2) * (x1 + 0.4) * x2 * (x2 - 1.0);
        },
        0.0);
    BoundaryData n;
    n.componentwise = true;
    n.L = [d](const ad::Jet& x) { return free_rows(bubble(x, d), 2); };
    n.G = [d](const ad::Jet& x) { return constant_field(x, 0.0, d); };
    set.neumann = n;
  } else if (id == "mixed-annulus") {
    set.dirichlet =
        dirichlet([d](const ad::Jet& x) { return squared_norm(x, d) - 0.25; }, std::cos(0.75));
    set.neumann = sphere_neumann(d, 0.0);
  } else if (id == "robin-sumdiff") {
    // r1 ~ u - grad u is fixed on the faces x_i = 0, r2 ~ u + grad u on x_i = 1.
    BoundaryData b;
    b.componentwise = true;
    b.L = [d](const ad::Jet& x) { return spatial(x, d); };
    b.L2 = [d](const ad::Jet& x) { return 1.0 - spatial(x, d); };
    b.G = [d](const ad::Jet& x) {
      const ad::Jet s = sum_without(x, d);
      return ad::sin(s) - ad::cos(s);
    };
    b.G2 = [d](const ad::Jet& x) {
      const ad::Jet s = sum_without(x, d) + 1.0;
      return ad::sin(s) + ad::cos(s);
    };
    set.robin = b;
  } else if (id == "robin-augmented") {
    // r ~ u + grad u, interpolating its traces on the faces x_i = 0 and 1.
    BoundaryData b;
    b.componentwise = true;
    b.L = [d](const ad::Jet& x) { return bubble(x, d); };
    b.G = [d](const ad::Jet& x) {
      const ad::Jet s = sum_without(x, d);
      const ad::Jet xi = spatial(x, d);
      const ad::Jet t0 = ad::sin(s) + ad::cos(s);
      const ad::Jet t1 = ad::sin(s + 1.0) + ad::cos(s + 1.0);
      return (1.0 - xi) * t0 + xi * t1;
    };
    set.robin = b;
  } else if (id == "robin-ball") {
    // u = cos(|x|^2 - 1) has du/dnu + u = 1 on the unit sphere.
    set.robin = sphere_neumann(d, 1.0);
  } else if (id == "robin-interval") {
    if (d != 1) throw std::invalid_argument("robin-interval is one-dimensional");
    // u = sin(x): g(0) = -1, g(1) = cos 1 + sin 1.
    BoundaryData b;
    b.L = [](const ad::Jet& x) { return x * (1.0 - x); };
    b.grad_L = [](const ad::Jet& x) { return 1.0 - 2.0 * x; };
    b.normal = [](const ad::Jet& x) { return 2.0 * x - 1.0; };
    b.denominator = [](const ad::Jet& x) { return constant_field(x, -1.0); };
    const double g1 = std::cos(1.0) + std::sin(1.0);
    b.G = [g1](const ad::Jet& x) { return -1.0 * (1.0 - x) + g1 * x; };
    b.denominator_bound = 1.0;
    set.robin = b;
  } else if (id == "parabolic" || id == "wave") {
    BoundaryData b;
    b.L = [d](const ad::Jet& x) {
      ad::Jet acc = x.row(d);
      for (int i = 0; i < d; ++i) {
        const ad::Jet xi = x.row(i);
        acc = acc * (xi - xi * xi);
      }
      return acc;
    };
    b.G = [](const ad::Jet& x) { return constant_field(x, 0.0); };
    if (id == "wave") {
      b.L2 = [d](const ad::Jet& x) { return x.row(d); };
      b.G2 = [](const ad::Jet& x) { return constant_field(x, 0.0); };
    }
    set.dirichlet = b;
  } else if (id == "periodic-sum" || id == "periodic-product" || id == "periodic-1d-highfreq") {
    // Periodicity comes from the input features; nothing to construct.
  } else {
    throw std::invalid_argument("boundary_functions: unknown experiment '" + std::string(id) + "'");
  }
  return set;
}

}  // namespace mim::geo
