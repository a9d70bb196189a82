#include "mim/geometry.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace mim::geo {
namespace {

Matrix eval(const Field& f, const Matrix& x, ad::Order order = ad::Order::Value) {
  ad::Tape tape;
  return f(ad::lift_inputs(tape, x, order)).value_matrix();
}

std::vector<Domain> all_domains() {
  std::vector<Domain> out;
  for (int d : {1, 2, 3, 5}) {
    out.push_back({Shape::UnitBall, d, false});
    out.push_back({Shape::UnitCube01, d, false});
    out.push_back({Shape::CubePM1, d, false});
    out.push_back({Shape::Annulus, d, false});
    if (d >= 2) out.push_back({Shape::Polygon2DxCube, d, false});
    out.push_back({Shape::UnitCube01, d, true});
  }
  return out;
}

TEST(Sampling, InteriorPointsLieInside) {
  Rng rng(1);
  for (const Domain& dom : all_domains()) {
    const Matrix x = sample_interior(dom, 500, rng);
    ASSERT_EQ(x.rows(), dom.input_dim());
    for (Index j = 0; j < x.cols(); ++j) {
      EXPECT_GT(dom.boundary_distance(x.col(j)), 0.0) << to_string(dom.shape) << " d=" << dom.d;
    }
  }
}

TEST(Sampling, BallRadiusMomentsMatchUniform) {
  Rng rng(2);
  for (int d : {1, 2, 4}) {
    const Index n = 20000;
    const Matrix x = sample_interior({Shape::UnitBall, d, false}, n, rng);
    const Eigen::ArrayXd r = x.colwise().norm().transpose().array();
    const double mean = d / (d + 1.0);
    const double sd = std::sqrt(d / (d + 2.0) - mean * mean);
    EXPECT_NEAR(r.mean(), mean, 3.0 * sd / std::sqrt(double(n))) << "d=" << d;
  }
}

TEST(Sampling, AnnulusRadiusMatchesUniform) {
  Rng rng(3);
  const int d = 3;
  const Index n = 20000;
  const Matrix x = sample_interior({Shape::Annulus, d, false}, n, rng);
  const Eigen::ArrayXd r = x.colwise().norm().transpose().array();
  EXPECT_GT(r.minCoeff(), 0.5);
  EXPECT_LT(r.maxCoeff(), 1.0);
  // Density of r is proportional to r^(d-1) on (0.5, 1).
  const double norm = (1.0 - std::pow(0.5, d)) / d;
  const double mean = (1.0 - std::pow(0.5, d + 1)) / (d + 1) / norm;
  const double second = (1.0 - std::pow(0.5, d + 2)) / (d + 2) / norm;
  EXPECT_NEAR(r.mean(), mean, 3.0 * std::sqrt((second - mean * mean) / n));
}

TEST(Sampling, PolygonAreaMatchesShoelace) {
  const auto& v = polygon_vertices();
  double twice = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& a = v[i];
    const auto& b = v[(i + 1) % v.size()];
    twice += a.x() * b.y() - b.x() * a.y();
  }
  EXPECT_GT(twice, 0.0);  // counterclockwise
  const Domain dom{Shape::Polygon2DxCube, 2, false};
  EXPECT_NEAR(dom.volume(), 0.5 * twice, 1e-12);

  // Hit fraction in the bounding box [-1, -0.4] x [0, 0.5].
  Rng rng(4);
  std::uniform_real_distribution<double> ux(-1.0, -0.4), uy(0.0, 0.5);
  const int n = 40000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += dom.contains(Eigen::Vector2d(ux(rng), uy(rng)));
  const double p = 0.5 * twice / 0.3;
  EXPECT_NEAR(double(hits) / n, p, 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST(Sampling, VolumesOfKnownShapes) {
  EXPECT_NEAR((Domain{Shape::UnitBall, 2, false}).volume(), std::numbers::pi, 1e-12);
  EXPECT_NEAR((Domain{Shape::UnitBall, 3, false}).volume(), 4.0 * std::numbers::pi / 3.0, 1e-12);
  EXPECT_NEAR((Domain{Shape::Annulus, 2, false}).volume(), 0.75 * std::numbers::pi, 1e-12);
  EXPECT_EQ((Domain{Shape::CubePM1, 3, false}).volume(), 8.0);
}

TEST(Sampling, BoundaryPointsHaveUnitOutwardNormals) {
  Rng rng(5);
  for (const Domain& dom : all_domains()) {
    for (Portion p : {Portion::All, Portion::Dirichlet, Portion::Neumann, Portion::Initial}) {
      if (!has_portion(dom, p)) continue;
      const BoundarySamples b = sample_boundary(dom, p, 300, rng);
      for (Index j = 0; j < b.x.cols(); ++j) {
        const Eigen::VectorXd x = b.x.col(j), n = b.normal.col(j);
        SCOPED_TRACE(std::string(to_string(dom.shape)) + " d=" + std::to_string(dom.d) + " " +
                     std::string(to_string(p)));
        EXPECT_NEAR(n.norm(), 1.0, 1e-12);
        EXPECT_NEAR(dom.boundary_distance(x), 0.0, 1e-12);
        // Edges and corners aside, stepping inward enters the domain.
        const Eigen::VectorXd in = x - 1e-7 * n, out = x + 1e-7 * n;
        EXPECT_FALSE(dom.contains(out));
        if (dom.boundary_distance(in) <= 0.0) {
          EXPECT_GT(dom.boundary_distance(x - 1e-9 * n), -1e-12);
        }
      }
    }
  }
}

TEST(Sampling, PortionsSelectTheRightFaces) {
  Rng rng(6);
  const Domain cube{Shape::UnitCube01, 3, false};
  const BoundarySamples dir = sample_boundary(cube, Portion::Dirichlet, 200, rng);
  EXPECT_TRUE((dir.normal.row(0).array().abs() == 1.0).all());
  const BoundarySamples neu = sample_boundary(cube, Portion::Neumann, 200, rng);
  EXPECT_TRUE((neu.normal.row(0).array() == 0.0).all());

  const Domain ann{Shape::Annulus, 2, false};
  const BoundarySamples inner = sample_boundary(ann, Portion::Dirichlet, 100, rng);
  for (Index j = 0; j < 100; ++j) {
    const Eigen::VectorXd x = inner.x.col(j);
    EXPECT_NEAR(x.norm(), 0.5, 1e-14);
    EXPECT_LT((inner.normal.col(j) + x / x.norm()).norm(), 1e-14);
  }

  const Domain cyl{Shape::UnitCube01, 2, true};
  const BoundarySamples init = sample_boundary(cyl, Portion::Initial, 100, rng);
  EXPECT_TRUE((init.x.row(2).array() == 0.0).all());
  EXPECT_TRUE((init.normal.row(2).array() == -1.0).all());
}

TEST(Sampling, AnnulusSplitsBySurfaceMeasure) {
  Rng rng(7);
  const int d = 3;
  const int n = 20000;
  const BoundarySamples b = sample_boundary({Shape::Annulus, d, false}, Portion::All, n, rng);
  const double inner = (b.x.colwise().norm().array() < 0.75).cast<double>().sum() / n;
  const double p = 0.25 / 1.25;
  EXPECT_NEAR(inner, p, 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST(Sampling, CubeFacesAreEquallyLikely) {
  Rng rng(8);
  const int n = 24000;
  const BoundarySamples b = sample_boundary({Shape::CubePM1, 3, false}, Portion::All, n, rng);
  Eigen::ArrayXd counts = Eigen::ArrayXd::Zero(6);
  for (Index j = 0; j < n; ++j) {
    Eigen::Index i;
    b.normal.col(j).cwiseAbs().maxCoeff(&i);
    counts(2 * i + (b.normal(i, j) > 0 ? 1 : 0)) += 1;
  }
  const double p = 1.0 / 6.0;
  EXPECT_LT(((counts / n - p).abs()).maxCoeff(), 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST(Sampling, SameSeedSamePoints) {
  const Domain dom{Shape::Polygon2DxCube, 3, false};
  Rng a(9), b(9);
  EXPECT_EQ(sample_interior(dom, 50, a), sample_interior(dom, 50, b));
  EXPECT_EQ(sample_boundary(dom, Portion::All, 50, a).x,
            sample_boundary(dom, Portion::All, 50, b).x);
}

TEST(Sampling, RejectsUndefinedPortions) {
  Rng rng(10);
  EXPECT_THROW(sample_boundary({Shape::UnitBall, 2, false}, Portion::Neumann, 10, rng),
               std::invalid_argument);
  EXPECT_THROW(sample_boundary({Shape::UnitBall, 2, false}, Portion::Initial, 10, rng),
               std::invalid_argument);
  EXPECT_THROW(sample_interior({Shape::Polygon2DxCube, 1, false}, 10, rng),
               std::invalid_argument);
  EXPECT_THROW((Domain{Shape::UnitBall, 2, false}).boundary_distance(Eigen::VectorXd(3)),
               std::invalid_argument);
}

struct Case {
  const char* id;
  Domain domain;
};

const std::vector<Case>& cases() {
  static const std::vector<Case> c{
      {"dirichlet-elliptic-ball", {Shape::UnitBall, 3, false}},
      {"monge-ampere", {Shape::UnitBall, 2, false}},
      {"neumann-ball", {Shape::UnitBall, 3, false}},
      {"neumann-cube", {Shape::UnitCube01, 3, false}},
      {"mixed-slab", {Shape::UnitCube01, 3, false}},
      {"mixed-complex2d", {Shape::Polygon2DxCube, 4, false}},
      {"mixed-annulus", {Shape::Annulus, 3, false}},
      {"robin-sumdiff", {Shape::UnitCube01, 3, false}},
      {"robin-augmented", {Shape::UnitCube01, 3, false}},
      {"robin-ball", {Shape::UnitBall, 2, false}},
      {"robin-interval", {Shape::UnitCube01, 1, false}},
      {"parabolic", {Shape::UnitCube01, 2, true}},
      {"wave", {Shape::UnitCube01, 3, true}},
  };
  return c;
}

// Rows of L that should vanish at a boundary point with the given normal.
bool row_applies(const BoundaryData& b, Index row, const Eigen::VectorXd& normal) {
  return !b.componentwise || normal(row) != 0.0;
}

void expect_vanishes(const BoundaryData& b, const Field& L, const BoundarySamples& s) {
  const Matrix v = eval(L, s.x);
  for (Index j = 0; j < v.cols(); ++j) {
    for (Index r = 0; r < v.rows(); ++r) {
      if (row_applies(b, r, s.normal.col(j))) EXPECT_NEAR(v(r, j), 0.0, 1e-12);
    }
  }
}

TEST(BoundaryFunctions, MultipliersVanishOnTheirPortion) {
  Rng rng(11);
  for (const Case& c : cases()) {
    SCOPED_TRACE(c.id);
    const BoundarySet set = boundary_functions(c.id, c.domain.d);
    const bool mixed = set.dirichlet && set.neumann;
    if (set.dirichlet) {
      const Portion p = c.domain.time ? Portion::All : mixed ? Portion::Dirichlet : Portion::All;
      const BoundarySamples s = sample_boundary(c.domain, p, 200, rng);
      expect_vanishes(*set.dirichlet, set.dirichlet->L, s);
      if (c.domain.time) {
        expect_vanishes(*set.dirichlet, set.dirichlet->L,
                        sample_boundary(c.domain, Portion::Initial, 100, rng));
      }
    }
    if (set.neumann) {
      const BoundarySamples s =
          sample_boundary(c.domain, mixed ? Portion::Neumann : Portion::All, 200, rng);
      expect_vanishes(*set.neumann, set.neumann->L, s);
    }
    if (set.robin && !set.robin->L2) {
      expect_vanishes(*set.robin, set.robin->L, sample_boundary(c.domain, Portion::All, 200, rng));
    }
  }
}

TEST(BoundaryFunctions, MultipliersArePositiveInside) {
  Rng rng(12);
  for (const Case& c : cases()) {
    SCOPED_TRACE(c.id);
    const BoundarySet set = boundary_functions(c.id, c.domain.d);
    const Matrix x = sample_interior(c.domain, 300, rng);
    for (const auto* b : {&set.dirichlet, &set.neumann, &set.robin}) {
      if (!*b) continue;
      const Matrix v = eval((*b)->L, x);
      EXPECT_GT(v.cwiseAbs().minCoeff(), 0.0);
    }
  }
}

TEST(BoundaryFunctions, GradientOfLMatchesDifferences) {
  Rng rng(13);
  for (const char* id : {"neumann-ball", "mixed-annulus", "robin-ball", "robin-interval"}) {
    SCOPED_TRACE(id);
    const Case& c = *std::find_if(cases().begin(), cases().end(),
                                  [&](const Case& k) { return std::string(k.id) == id; });
    const BoundarySet set = boundary_functions(id, c.domain.d);
    const BoundaryData& b = set.neumann ? *set.neumann : *set.robin;
    const Matrix x = sample_interior(c.domain, 20, rng);
    ad::Tape tape;
    const ad::Jet L = b.L(ad::lift_inputs(tape, x, ad::Order::First));
    const Matrix g = eval(b.grad_L, x);
    for (int i = 0; i < c.domain.d; ++i) {
      EXPECT_LT((L.tangent_matrix(i) - g.row(i)).cwiseAbs().maxCoeff(), 1e-13);
    }
  }
}

TEST(BoundaryFunctions, DenominatorsRespectTheirBound) {
  Rng rng(14);
  for (const Case& c : cases()) {
    const BoundarySet set = boundary_functions(c.id, c.domain.d);
    for (const auto* b : {&set.neumann, &set.robin}) {
      if (!*b || !(*b)->denominator) continue;
      SCOPED_TRACE(c.id);
      const Matrix x = sample_interior(c.domain, 300, rng);
      EXPECT_GE(eval((*b)->denominator, x).cwiseAbs().minCoeff(), (*b)->denominator_bound);
      // On the boundary it equals a grad L . nu.
      const Portion portion = set.dirichlet ? Portion::Neumann : Portion::All;
      const BoundarySamples s = sample_boundary(c.domain, portion, 100, rng);
      const Matrix den = eval((*b)->denominator, s.x);
      const Matrix g = eval((*b)->grad_L, s.x);
      const Matrix nu = eval((*b)->normal, s.x);
      for (Index j = 0; j < s.x.cols(); ++j) {
        EXPECT_NEAR(den(0, j), (*b)->a * g.col(j).dot(nu.col(j)), 1e-12);
        EXPECT_LT((nu.col(j) - s.normal.col(j)).norm(), 1e-12);
      }
    }
  }
}

TEST(BoundaryFunctions, RobinFixturesCarryTheTraceOfTheirSolutions) {
  Rng rng(15);
  // u = cos(|x|^2 - 1) on the unit disc: du/dnu + u = 1.
  {
    const BoundarySet set = boundary_functions("robin-ball", 2);
    const BoundarySamples s = sample_boundary({Shape::UnitBall, 2, false}, Portion::All, 50, rng);
    const Matrix g = eval(set.robin->G, s.x);
    for (Index j = 0; j < 50; ++j) {
      const double r2 = s.x.col(j).squaredNorm();
      const double dudn = -std::sin(r2 - 1.0) * 2.0 * r2;
      EXPECT_NEAR(g(0, j), dudn + std::cos(r2 - 1.0), 1e-12);
    }
  }
  // u = sin x on [0, 1]: du/dnu + u.
  {
    const BoundarySet set = boundary_functions("robin-interval", 1);
    Matrix x(1, 2);
    x << 0.0, 1.0;
    const Matrix g = eval(set.robin->G, x);
    EXPECT_NEAR(g(0, 0), -std::cos(0.0) + std::sin(0.0), 1e-15);
    EXPECT_NEAR(g(0, 1), std::cos(1.0) + std::sin(1.0), 1e-15);
  }
  // u = sin(x_1 + ... + x_d) on the cube.
  const int d = 3;
  const BoundarySamples s = sample_boundary({Shape::UnitCube01, d, false}, Portion::All, 200, rng);
  const BoundarySet split = boundary_functions("robin-sumdiff", d);
  const BoundarySet aug = boundary_functions("robin-augmented", d);
  const Matrix g1 = eval(split.robin->G, s.x), g2 = eval(split.robin->G2, s.x);
  const Matrix ga = eval(aug.robin->G, s.x);
  for (Index j = 0; j < s.x.cols(); ++j) {
    const double S = s.x.col(j).sum();
    for (int i = 0; i < d; ++i) {
      if (s.normal(i, j) < 0) {
        EXPECT_NEAR(g1(i, j), std::sin(S) - std::cos(S), 1e-12);
        EXPECT_NEAR(ga(i, j), std::sin(S) + std::cos(S), 1e-12);
      } else if (s.normal(i, j) > 0) {
        EXPECT_NEAR(g2(i, j), std::sin(S) + std::cos(S), 1e-12);
        EXPECT_NEAR(ga(i, j), std::sin(S) + std::cos(S), 1e-12);
      }
    }
  }
}

TEST(BoundaryFunctions, UnknownIdsAreRejected) {
  EXPECT_THROW(boundary_functions("no-such-experiment", 2), std::invalid_argument);
  EXPECT_THROW(boundary_functions("robin-interval", 2), std::invalid_argument);
  EXPECT_THROW(boundary_functions("mixed-complex2d", 1), std::invalid_argument);
  EXPECT_NO_THROW(boundary_functions("periodic-sum", 2));
}

}  // namespace
}  // namespace mim::geo
