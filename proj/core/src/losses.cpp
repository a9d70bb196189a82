#include "mim/losses.hpp"

#include <Eigen/LU>

#include <cmath>
#include <numbers>

namespace mim::loss {
namespace {

constexpr double kPi = std::numbers::pi;

using Vec = Eigen::VectorXd;

double sum_cos_from(const Vec& x, int first, int d) {
  double s = 0.0;
  for (int i = first; i < d; ++i) s += std::cos(kPi * x(i));
  return s;
}

// psi(x1, x2) of the quadrilateral domain as a product of affine factors.
struct Psi {
  static constexpr double a[5][3] = {
      {1.0, -1.0, 1.0}, {1.0, 1.0, 0.0}, {1.0, 0.0, 0.4}, {0.0, 1.0, 0.0}, {0.0, 1.0, -1.0}};

  static double factor(int k, double x1, double x2) { return a[k][0] * x1 + a[k][1] * x2 + a[k][2]; }
  static double product_except(double x1, double x2, int skip1, int skip2) {
    double p = 1.0;
    for (int k = 0; k < 5; ++k) {
      if (k != skip1 && k != skip2) p *= factor(k, x1, x2);
    }
    return p;
  }
  static double value(double x1, double x2) { return product_except(x1, x2, -1, -1); }
  static Eigen::Vector2d gradient(double x1, double x2) {
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    for (int k = 0; k < 5; ++k) {
      const double rest = product_except(x1, x2, k, -1);
      g += rest * Eigen::Vector2d(a[k][0], a[k][1]);
    }
    return g;
  }
  static double laplacian(double x1, double x2) {
    double s = 0.0;
    for (int k = 0; k < 5; ++k) {
      for (int l = 0; l < 5; ++l) {
        if (k == l) continue;
        s += (a[k][0] * a[l][0] + a[k][1] * a[l][1]) * product_except(x1, x2, k, l);
      }
    }
    return s;
  }
};

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::DGM: return "DGM";
    case Method::MIM: return "MIM";
    case Method::MIM1: return "MIM1";
    case Method::MIM2: return "MIM2";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  for (Method m : {Method::DGM, Method::MIM, Method::MIM1, Method::MIM2}) {
    std::string lower(to_string(m));
    for (char& c : lower) c = static_cast<char>(std::tolower(c));
    if (s == to_string(m) || s == lower) return m;
  }
  throw std::invalid_argument("unknown method '" + std::string(s) + "' (DGM, MIM, MIM1, MIM2)");
}

std::string_view to_string(Family f) {
  switch (f) {
    case Family::Elliptic: return "elliptic";
    case Family::MongeAmpere: return "monge-ampere";
    case Family::Parabolic: return "parabolic";
    case Family::Wave: return "wave";
  }
  return "?";
}

Matrix Source::u_values(const Matrix& x) const {
  Matrix out(1, x.cols());
  for (Index j = 0; j < x.cols(); ++j) out(0, j) = u(x.col(j));
  return out;
}

Matrix Source::f_values(const Matrix& x) const {
  Matrix out(1, x.cols());
  for (Index j = 0; j < x.cols(); ++j) out(0, j) = f(x.col(j));
  return out;
}

Matrix Source::boundary_values(BoundaryOp op, const geo::BoundarySamples& s) const {
  Matrix out(1, s.x.cols());
  for (Index j = 0; j < s.x.cols(); ++j) {
    const Vec x = s.x.col(j);
    double v = 0.0;
    if (op != BoundaryOp::Dirichlet) v += grad_u(x).dot(s.normal.col(j).head(d));
    if (op != BoundaryOp::Neumann) v += u(x);
    out(0, j) = v;
  }
  return out;
}

Source manufactured_source(std::string_view id, int d) {
  if (d < 1) throw std::invalid_argument("manufactured_source: d must be positive");
  Source s;
  s.id = std::string(id);
  s.d = d;
  const double dd = d;

  if (id == "dirichlet-elliptic-ball") {
    s.q = 1.0;
    s.u = [](const Vec& x) { return std::exp(x.squaredNorm()); };
    s.grad_u = [](const Vec& x) { return Vec(2.0 * std::exp(x.squaredNorm()) * x); };
    s.f = [dd](const Vec& x) {
      const double r2 = x.squaredNorm();
      return -(2.0 * dd + 4.0 * r2) * std::exp(r2) + std::exp(2.0 * r2);
    };
  } else if (id == "monge-ampere") {
    s.family = Family::MongeAmpere;
    s.u = [dd](const Vec& x) { return std::exp(x.squaredNorm() / dd); };
    s.grad_u = [dd](const Vec& x) { return Vec(2.0 / dd * std::exp(x.squaredNorm() / dd) * x); };
    s.f = [dd](const Vec& x) {
      const double r2 = x.squaredNorm();
      return std::exp(r2) * std::pow(2.0 / dd, dd) * (1.0 + 2.0 * r2 / dd);
    };
  } else if (id == "neumann-cube") {
    s.c = 1.0;
    s.u = [](const Vec& x) { return x.array().exp().sum(); };
    s.grad_u = [](const Vec& x) { return Vec(x.array().exp()); };
    s.f = [](const Vec&) { return 0.0; };
  } else if (id == "neumann-ball" || id == "mixed-annulus") {
    // u = cos(|x|^2 - 1): Lap u = -4 |x|^2 cos - 2 d sin.
    s.c = id == "neumann-ball" ? -1.0 : 0.0;
    s.u = [](const Vec& x) { return std::cos(x.squaredNorm() - 1.0); };
    s.grad_u = [](const Vec& x) { return Vec(-2.0 * std::sin(x.squaredNorm() - 1.0) * x); };
    const double c = s.c;
    s.f = [dd, c](const Vec& x) {
      const double r2 = x.squaredNorm(), a = r2 - 1.0;
      return 4.0 * r2 * std::cos(a) + 2.0 * dd * std::sin(a) + c * std::cos(a);
    };
  } else if (id == "robin-sumdiff" || id == "robin-augmented") {
    s.c = kPi * kPi;
    s.u = [](const Vec& x) { return std::sin(x.sum()); };
    s.grad_u = [](const Vec& x) { return Vec(Vec::Constant(x.size(), std::cos(x.sum()))); };
    s.f = [dd](const Vec& x) { return (dd + kPi * kPi) * std::sin(x.sum()); };
  } else if (id == "mixed-slab") {
    if (d < 2) throw std::invalid_argument("mixed-slab needs d >= 2");
    s.u = [d](const Vec& x) { return x(0) * (1.0 - x(0)) * sum_cos_from(x, 1, d); };
    s.grad_u = [d](const Vec& x) {
      Vec g(d);
      g(0) = (1.0 - 2.0 * x(0)) * sum_cos_from(x, 1, d);
      for (int i = 1; i < d; ++i) g(i) = -kPi * x(0) * (1.0 - x(0)) * std::sin(kPi * x(i));
      return g;
    };
    s.f = [d](const Vec& x) {
      return (2.0 + kPi * kPi * x(0) * (1.0 - x(0))) * sum_cos_from(x, 1, d);
    };
  } else if (id == "mixed-complex2d") {
    if (d < 2) throw std::invalid_argument("mixed-complex2d needs d >= 2");
    s.u = [d](const Vec& x) { return Psi::value(x(0), x(1)) * sum_cos_from(x, 1, d); };
    s.grad_u = [d](const Vec& x) {
      const double c = sum_cos_from(x, 1, d), psi = Psi::value(x(0), x(1));
      Vec g = Vec::Zero(d);
      g.head(2) = c * Psi::gradient(x(0), x(1));
      for (int i = 1; i < d; ++i) g(i) += -kPi * std::sin(kPi * x(i)) * psi;
      return g;
    };
    s.f = [d](const Vec& x) {
      const double c = sum_cos_from(x, 1, d), psi = Psi::value(x(0), x(1));
      const Eigen::Vector2d gp = Psi::gradient(x(0), x(1));
      // Lap(psi C) = C Lap psi + 2 grad psi . grad C + psi Lap C, Lap C = -pi^2 C.
      const double cross = 2.0 * gp(1) * (-kPi * std::sin(kPi * x(1)));
      return -(c * Psi::laplacian(x(0), x(1)) + cross - kPi * kPi * psi * c);
    };
  } else if (id == "periodic-sum") {
    s.c = kPi * kPi;
    s.u = [](const Vec& x) {
      return ((kPi * x).array().cos() + (2.0 * kPi * x).array().cos()).sum();
    };
    s.grad_u = [](const Vec& x) {
      return Vec(-kPi * (kPi * x).array().sin() - 2.0 * kPi * (2.0 * kPi * x).array().sin());
    };
    s.f = [](const Vec& x) {
      return kPi * kPi *
             (2.0 * (kPi * x).array().cos() + 5.0 * (2.0 * kPi * x).array().cos()).sum();
    };
  } else if (id == "periodic-product") {
    s.c = kPi * kPi;
    s.u = [](const Vec& x) {
      return ((kPi * x).array().cos() * (2.0 * kPi * x).array().cos()).sum();
    };
    s.grad_u = [](const Vec& x) {
      const auto a = (kPi * x).array(), b = (2.0 * kPi * x).array();
      return Vec(-kPi * a.sin() * b.cos() - 2.0 * kPi * a.cos() * b.sin());
    };
    s.f = [](const Vec& x) {
      return kPi * kPi * ((kPi * x).array().cos() + 5.0 * (3.0 * kPi * x).array().cos()).sum();
    };
  } else if (id == "periodic-1d-highfreq") {
    if (d != 1) throw std::invalid_argument("periodic-1d-highfreq is one-dimensional");
    s.c = kPi * kPi;
    static constexpr double ks[] = {1.0, 2.0, 4.0, 8.0};
    s.u = [](const Vec& x) {
      double v = 0.0;
      for (double k : ks) v += std::cos(k * kPi * x(0));
      return v;
    };
    s.grad_u = [](const Vec& x) {
      double v = 0.0;
      for (double k : ks) v -= k * kPi * std::sin(k * kPi * x(0));
      return Vec(Vec::Constant(1, v));
    };
    s.f = [](const Vec& x) {
      double v = 0.0;
      for (double k : ks) v += (k * k + 1.0) * kPi * kPi * std::cos(k * kPi * x(0));
      return v;
    };
  } else if (id == "parabolic" || id == "wave") {
    const bool wave = id == "wave";
    s.time = true;
    s.family = wave ? Family::Wave : Family::Parabolic;
    auto prod_sin = [d](const Vec& x) {
      double p = 1.0;
      for (int i = 0; i < d; ++i) p *= std::sin(kPi * x(i));
      return p;
    };
    auto tpow = [wave](double t) { return wave ? t * t : t; };
    s.u = [=](const Vec& x) { return tpow(x(d)) * prod_sin(x); };
    s.grad_u = [=](const Vec& x) {
      Vec g(d);
      for (int i = 0; i < d; ++i) {
        double p = kPi * std::cos(kPi * x(i));
        for (int j = 0; j < d; ++j) {
          if (j != i) p *= std::sin(kPi * x(j));
        }
        g(i) = tpow(x(d)) * p;
      }
      return g;
    };
    s.f = [=](const Vec& x) {
      const double t = x(d);
      return prod_sin(x) * (wave ? 2.0 + dd * kPi * kPi * t * t : 1.0 + dd * kPi * kPi * t);
    };
  } else {
    throw std::invalid_argument("manufactured_source: unknown experiment '" + std::string(id) +
                                "'");
  }
  return s;
}

namespace {

constexpr double kStencil1[5] = {1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0};
constexpr double kStencil2[5] = {-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0};

double fd_second(const PointFn& u, Vec x, int i, double h) {
  const double x0 = x(i);
  double s = 0.0;
  for (int k = 0; k < 5; ++k) {
    x(i) = x0 + (k - 2) * h;
    s += kStencil2[k] * u(x);
  }
  return s / (h * h);
}

double fd_first(const PointFn& u, Vec x, int i, double h) {
  const double x0 = x(i);
  double s = 0.0;
  for (int k = 0; k < 5; ++k) {
    x(i) = x0 + (k - 2) * h;
    s += kStencil1[k] * u(x);
  }
  return s / h;
}

double fd_mixed(const PointFn& u, Vec x, int i, int j, double h) {
  const double xi = x(i);
  double s = 0.0;
  for (int k = 0; k < 5; ++k) {
    if (kStencil1[k] == 0.0) continue;
    x(i) = xi + (k - 2) * h;
    s += kStencil1[k] * fd_first(u, x, j, h);
  }
  return s / h;
}

}  // namespace

double validate_source(const Source& s, const Matrix& x, double h) {
  if (x.rows() != s.input_dim()) throw std::invalid_argument("validate_source: dimension mismatch");
  const int d = s.d;
  double max_err = 0.0, max_f = 0.0;
  for (Index j = 0; j < x.cols(); ++j) {
    const Vec p = x.col(j);
    double lap = 0.0;
    for (int i = 0; i < d; ++i) lap += fd_second(s.u, p, i, h);
    double op = 0.0;
    switch (s.family) {
      case Family::Elliptic: {
        const double u = s.u(p);
        op = -lap + s.c * u + s.q * u * u;
        break;
      }
      case Family::MongeAmpere: {
        Matrix hess(d, d);
        for (int a = 0; a < d; ++a) {
          hess(a, a) = fd_second(s.u, p, a, h);
          for (int b = 0; b < a; ++b) hess(a, b) = hess(b, a) = fd_mixed(s.u, p, a, b, h);
        }
        op = hess.determinant();
        break;
      }
      case Family::Parabolic: op = fd_first(s.u, p, d, h) - lap; break;
      case Family::Wave: op = fd_second(s.u, p, d, h) - lap; break;
    }
    const double f = s.f(p);
    max_err = std::max(max_err, std::abs(op - f));
    max_f = std::max(max_f, std::abs(f));
    if (!std::isfinite(op - f)) return INFINITY;
  }
  return max_err / std::max(1.0, max_f);
}

ad::Order required_order(Family family, Method method) {
  switch (family) {
    case Family::Elliptic:
    case Family::Parabolic: return method == Method::DGM ? ad::Order::Second : ad::Order::First;
    case Family::MongeAmpere: return ad::Order::First;
    case Family::Wave: return method == Method::MIM2 ? ad::Order::First : ad::Order::Second;
  }
  return ad::Order::Second;
}

namespace {

void require_methods(Family family, Method method) {
  bool ok = false;
  switch (family) {
    case Family::Elliptic: ok = method == Method::DGM || method == Method::MIM; break;
    case Family::MongeAmpere: ok = method == Method::MIM; break;
    case Family::Parabolic:
    case Family::Wave: ok = method != Method::MIM; break;
  }
  if (!ok) {
    throw std::invalid_argument(std::string(to_string(family)) + " problems have no " +
                                std::string(to_string(method)) + " loss");
  }
}

const ad::Jet& need(const std::optional<ad::Jet>& field, const char* name, Method method) {
  if (!field) {
    throw std::invalid_argument(std::string(to_string(method)) + " loss needs the " + name +
                                " field");
  }
  return *field;
}

ad::Var reaction(const Source& s, const ad::Var& u) {
  ad::Var r = s.c * u;
  if (s.q != 0.0) r = r + s.q * (u * u);
  return r;
}

}  // namespace

ad::Var interior_terms(Family family, Method method, const Source& s, const con::Fields& fields,
                       const Matrix& f, double total) {
  require_methods(family, method);
  ad::Tape& tape = fields.u.tape();
  const int d = s.d;
  const ad::Var fv = tape.constant(f);
  const ad::Jet& u = fields.u;
  ad::Var sum;

  switch (family) {
    case Family::Elliptic:
      if (method == Method::DGM) {
        sum = ad::sum_squares(u.laplacian(d) - reaction(s, u.value()) + fv);
      } else {
        const ad::Jet& p = need(fields.p, "p", method);
        sum = ad::sum_squares(u.gradient(d) - p.value()) +
              ad::sum_squares(p.divergence(d) - reaction(s, u.value()) + fv);
      }
      break;
    case Family::MongeAmpere: {
      const ad::Jet& p = need(fields.p, "p", method);
      std::vector<ad::Var> cols;
      for (int j = 0; j < d; ++j) cols.push_back(p.tangent(j));
      sum = ad::sum_squares(p.value() - u.gradient(d)) +
            ad::sum_squares(ad::batched_det(cols) - fv);
      break;
    }
    case Family::Parabolic: {
      const ad::Var ut = u.tangent(d);
      if (method == Method::DGM) {
        sum = ad::sum_squares(ut - u.laplacian(d) - fv);
        break;
      }
      const ad::Jet& p = need(fields.p, "p", method);
      const ad::Var flux = ad::sum_squares(p.value() - u.gradient(d));
      if (method == Method::MIM1) {
        const ad::Var v = need(fields.v, "v", method).value();
        sum = ad::sum_squares(v - p.divergence(d) - fv) + flux + ad::sum_squares(v - ut);
      } else {
        sum = ad::sum_squares(ut - p.divergence(d) - fv) + flux;
      }
      break;
    }
    case Family::Wave: {
      if (method == Method::DGM) {
        sum = ad::sum_squares(u.curvature(d) - u.laplacian(d) - fv);
        break;
      }
      const ad::Jet& p = need(fields.p, "p", method);
      const ad::Var flux = ad::sum_squares(p.value() - u.gradient(d));
      if (method == Method::MIM1) {
        sum = ad::sum_squares(u.curvature(d) - p.divergence(d) - fv) + flux;
      } else {
        const ad::Jet& v = need(fields.v, "v", method);
        sum = ad::sum_squares(v.tangent(d) - p.divergence(d) - fv) + flux +
              ad::sum_squares(v.value() - u.tangent(d));
      }
      break;
    }
  }
  return (1.0 / total) * sum;
}

ad::Var boundary_penalty(BoundaryOp op, double a, int d, const con::Fields& fields,
                         const geo::BoundarySamples& s, const Matrix& g, double lambda,
                         double total) {
  ad::Tape& tape = fields.u.tape();
  ad::Var r = tape.constant(-g);
  if (op != BoundaryOp::Dirichlet) {
    const ad::Var nu = tape.constant(s.normal.topRows(d));
    r = r + a * ad::sum_rows(fields.u.gradient(d) * nu);
  }
  if (op != BoundaryOp::Neumann) r = r + fields.u.value();
  return (lambda / total) * ad::sum_squares(r);
}

ad::Var initial_velocity_penalty(const con::Fields& fields, int d, double lambda, double total) {
  return (lambda / total) * ad::sum_squares(fields.u.tangent(d));
}

void LossConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("loss: lambda must be a nonnegative number");
  }
  if (interior < 1) throw std::invalid_argument("loss: interior sample count must be positive");
  if (lambda > 0.0 && boundary < 1) {
    throw std::invalid_argument("loss: a penalty (lambda > 0) needs boundary samples");
  }
  if (lambda == 0.0 && boundary != 0) {
    throw std::invalid_argument("loss: boundary samples are only used with lambda > 0");
  }
}

Objective::Objective(const con::Trial& trial, Source source, LossConfig config)
    : trial_(trial), source_(std::move(source)), config_(config) {
  config_.validate();
  require_methods(source_.family, config_.method);
  if (trial_.domain().input_dim() != source_.input_dim() || trial_.domain().d != source_.d) {
    throw std::invalid_argument("loss: trial and source dimensions differ");
  }
  order_ = required_order(source_.family, config_.method);
  const Method m = config_.method;
  const bool needs_p = m != Method::DGM;
  const bool needs_v = (m == Method::MIM1 && source_.family == Family::Parabolic) ||
                       (m == Method::MIM2 && source_.family == Family::Wave);
  if (needs_p && !trial_.has_p()) {
    throw std::invalid_argument(std::string(to_string(m)) + " loss needs a trial with p");
  }
  if (needs_v && !trial_.has_v()) {
    throw std::invalid_argument(std::string(to_string(m)) + " loss needs a trial with v");
  }
  if (config_.lambda > 0.0 &&
      (source_.family == Family::MongeAmpere || source_.family == Family::Parabolic)) {
    throw std::invalid_argument("loss: no penalty form for " +
                                std::string(to_string(source_.family)) + " problems");
  }
}

Batch Objective::make_batch(Matrix x, geo::BoundarySamples boundary) const {
  Batch b;
  b.f = source_.f_values(x);
  b.x = std::move(x);
  b.boundary = std::move(boundary);
  if (config_.lambda > 0.0 && source_.family != Family::Wave) {
    b.g = source_.boundary_values(config_.penalty_op, b.boundary);
  }
  return b;
}

Batch Objective::sample(Rng& rng) const {
  Matrix x = geo::sample_interior(trial_.domain(), config_.interior, rng);
  geo::BoundarySamples s;
  if (config_.lambda > 0.0) {
    const bool initial = source_.family == Family::Wave;
    s = geo::sample_boundary(trial_.domain(), initial ? geo::Portion::Initial : geo::Portion::All,
                             config_.boundary, rng);
  }
  return make_batch(std::move(x), std::move(s));
}

Index Objective::set_size(const Batch& b, int set) const {
  return set == 0 ? b.x.cols() : b.boundary.x.cols();
}

ad::Var Objective::partial(ad::Tape& tape, const Batch& b, int set, Index c0, Index n) const {
  if (set < 0 || set >= set_count() || c0 < 0 || n < 1 || c0 + n > set_size(b, set)) {
    throw std::out_of_range("Objective::partial: bad set or column range");
  }
  if (set == 0) {
    const ad::Jet x = ad::lift_inputs(tape, b.x.middleCols(c0, n), order_);
    const con::Fields f = trial_.evaluate(tape, x);
    return interior_terms(source_.family, config_.method, source_, f, b.f.middleCols(c0, n),
                          static_cast<double>(b.x.cols()));
  }
  const double total = static_cast<double>(b.boundary.x.cols());
  const bool initial = source_.family == Family::Wave;
  const ad::Order order = initial || config_.penalty_op != BoundaryOp::Dirichlet ? ad::Order::First
                                                                                 : ad::Order::Value;
  const ad::Jet x = ad::lift_inputs(tape, b.boundary.x.middleCols(c0, n), order);
  const con::Fields f = trial_.evaluate(tape, x);
  if (initial) return initial_velocity_penalty(f, source_.d, config_.lambda, total);
  geo::BoundarySamples part{b.boundary.x.middleCols(c0, n), b.boundary.normal.middleCols(c0, n)};
  return boundary_penalty(config_.penalty_op, 1.0, source_.d, f, part, b.g.middleCols(c0, n), config_.lambda,
                          total);
}

ad::Var Objective::evaluate(ad::Tape& tape, const Batch& b) const {
  ad::Var total = partial(tape, b, 0, 0, b.x.cols());
  if (set_count() > 1) total = total + partial(tape, b, 1, 0, b.boundary.x.cols());
  return total;
}

Matrix evaluate_u(const con::Trial& trial, std::span<const double> params, const Matrix& x,
                  Index chunk) {
  Matrix out(1, x.cols());
  for (Index c0 = 0; c0 < x.cols(); c0 += chunk) {
    const Index n = std::min(chunk, x.cols() - c0);
    ad::Tape tape(params, trial.bundle().blocks());
    const ad::Jet xj = ad::lift_inputs(tape, x.middleCols(c0, n), ad::Order::Value);
    out.middleCols(c0, n) = trial.evaluate(tape, xj).u.value_matrix();
  }
  return out;
}

double relative_l2_error(const Matrix& u_hat, const Matrix& u_exact) {
  if (u_hat.size() != u_exact.size()) throw std::invalid_argument("relative_l2_error: size mismatch");
  const double norm = u_exact.norm();
  if (!(norm > 0.0)) throw std::invalid_argument("relative_l2_error: exact solution vanishes");
  return (u_hat - u_exact).norm() / norm;
}

double relative_l2_error(const con::Trial& trial, std::span<const double> params, const Matrix& x,
                         const Matrix& u_exact, Index chunk) {
  return relative_l2_error(evaluate_u(trial, params, x, chunk), u_exact);
}

}  // namespace mim::loss
