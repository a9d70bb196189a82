#include "mim/constructions.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace mim::con {

std::string_view to_string(Construction c) {
  switch (c) {
    case Construction::Penalty: return "penalty";
    case Construction::Dirichlet: return "dirichlet";
    case Construction::NeumannDGM: return "neumann-dgm";
    case Construction::NeumannMIM: return "neumann-mim";
    case Construction::Mixed: return "mixed";
    case Construction::RobinDGM: return "robin-dgm";
    case Construction::RobinMIM: return "robin-mim";
    case Construction::RobinSumDiff: return "robin-sumdiff";
    case Construction::RobinAugmented: return "robin-augmented";
    case Construction::Periodic: return "periodic";
    case Construction::Parabolic: return "parabolic";
    case Construction::WaveMIM2: return "wave-mim2";
  }
  return "?";
}

std::string_view to_string(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::None: return "none";
    case ConstraintKind::Dirichlet: return "dirichlet";
    case ConstraintKind::Neumann: return "neumann";
    case ConstraintKind::Robin: return "robin";
    case ConstraintKind::Mixed: return "mixed";
    case ConstraintKind::Periodic: return "periodic";
    case ConstraintKind::ParabolicIC: return "parabolic-ic";
    case ConstraintKind::WaveIC: return "wave-ic";
  }
  return "?";
}

ConstraintKind constraint_kind(Construction c) {
  switch (c) {
    case Construction::Penalty: return ConstraintKind::None;
    case Construction::Dirichlet: return ConstraintKind::Dirichlet;
    case Construction::NeumannDGM:
    case Construction::NeumannMIM: return ConstraintKind::Neumann;
    case Construction::Mixed: return ConstraintKind::Mixed;
    case Construction::RobinDGM:
    case Construction::RobinMIM:
    case Construction::RobinSumDiff:
    case Construction::RobinAugmented: return ConstraintKind::Robin;
    case Construction::Periodic: return ConstraintKind::Periodic;
    case Construction::Parabolic: return ConstraintKind::ParabolicIC;
    case Construction::WaveMIM2: return ConstraintKind::WaveIC;
  }
  return ConstraintKind::None;
}

namespace {

std::string format_point(const Eigen::VectorXd& x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x(i);
  os << ')';
  return os.str();
}

void check_denominator(const ad::Jet& den, const ad::Jet& x) {
  const Matrix v = den.value_matrix();
  for (Index j = 0; j < v.cols(); ++j) {
    if (!(std::abs(v(0, j)) >= kDenominatorFloor)) {
      throw DenominatorError(x.value_matrix().col(j), v(0, j));
    }
  }
}

// Extends a d-row field with zero rows up to `rows`.
ad::Jet pad_rows(const ad::Jet& a, Index rows) {
  if (a.rows() == rows) return a;
  return ad::vcat({a, geo::constant_field(a, 0.0, rows - a.rows())});
}

ad::Jet denominator(const geo::BoundaryData& b, const ad::Jet& x, const ad::Jet& grad_L,
                    const ad::Jet& nu) {
  ad::Jet den = b.denominator ? b.denominator(x) : b.a * ad::dot(grad_L, nu);
  check_denominator(den, x);
  return den;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void require_flux_data(const geo::BoundaryData& b, Construction c) {
  const std::string name(to_string(c));
  require(static_cast<bool>(b.L) && static_cast<bool>(b.G), name + ": boundary data needs L and G");
  if (!b.componentwise) {
    require(b.grad_L && b.normal, name + ": boundary data needs grad_L and normal");
  }
}

}  // namespace

DenominatorError::DenominatorError(const Eigen::VectorXd& point, double value)
    : std::runtime_error("construction denominator " + std::to_string(value) +
                         " is below the floor at " + format_point(point)),
      point_(point),
      value_(value) {}

ad::Jet periodic_features(const ad::Jet& x, const PeriodicFeatures& f) {
  const Index d = static_cast<Index>(f.periods.size());
  if (x.rows() != d) {
    throw std::invalid_argument("periodic_features: " + std::to_string(x.rows()) +
                                " inputs for " + std::to_string(d) + " periods");
  }
  const Index kd = f.k * d;
  Matrix w = Matrix::Zero(kd, d);
  Matrix perm = Matrix::Zero(2 * kd, 2 * kd);
  for (Index i = 0; i < d; ++i) {
    for (int j = 1; j <= f.k; ++j) {
      const Index r = i * f.k + (j - 1);
      w(r, i) = 2.0 * std::numbers::pi * j / f.periods[i];
      perm(2 * r, r) = 1.0;
      perm(2 * r + 1, kd + r) = 1.0;
    }
  }
  ad::Tape& tape = x.tape();
  const ad::Jet z = ad::linear(tape.constant(std::move(w)), x);
  return ad::linear(tape.constant(std::move(perm)), ad::vcat({ad::sin(z), ad::cos(z)}));
}

Matrix periodic_features(const Matrix& x, const PeriodicFeatures& f) {
  const Index d = static_cast<Index>(f.periods.size());
  if (x.rows() != d) throw std::invalid_argument("periodic_features: dimension mismatch");
  Matrix out(2 * f.k * d, x.cols());
  for (Index i = 0; i < d; ++i) {
    for (int j = 1; j <= f.k; ++j) {
      const Index r = i * f.k + (j - 1);
      const double w = 2.0 * std::numbers::pi * j / f.periods[i];
      for (Index c = 0; c < x.cols(); ++c) {
        out(2 * r, c) = std::sin(w * x(i, c));
        out(2 * r + 1, c) = std::cos(w * x(i, c));
      }
    }
  }
  return out;
}

Trial::Trial(TrialSpec spec) : spec_(std::move(spec)) {
  const Construction c = spec_.construction;
  const std::string name(to_string(c));
  const geo::Domain& dom = spec_.domain;
  const int d = dom.d;

  int in = dom.input_dim();
  if (c == Construction::Periodic) {
    require(spec_.periodic.has_value(), name + ": missing periodic features");
    require(static_cast<int>(spec_.periodic->periods.size()) == d && spec_.periodic->k >= 1,
            name + ": need one period per dimension and k >= 1");
    for (double p : spec_.periodic->periods) require(p > 0.0, name + ": periods must be positive");
    in = spec_.periodic->size();
  }

  const bool needs_p = c == Construction::NeumannMIM || c == Construction::Mixed ||
                       c == Construction::RobinMIM || c == Construction::RobinSumDiff ||
                       c == Construction::RobinAugmented || c == Construction::WaveMIM2;
  require(!needs_p || spec_.p.has_value(), name + ": needs a p network");
  require(c != Construction::WaveMIM2 || spec_.v.has_value(), name + ": needs a v network");
  require(!spec_.v || c == Construction::Penalty || c == Construction::Parabolic ||
              c == Construction::WaveMIM2,
          name + ": takes no v network");

  const int u_out = c == Construction::RobinSumDiff ? d : 1;
  auto check_net = [&](const nn::NetworkSpec& s, int out, const char* which) {
    s.validate();
    require(s.d_in == in, name + ": " + which + " network takes " + std::to_string(s.d_in) +
                              " inputs, expected " + std::to_string(in));
    require(s.d_out == out, name + ": " + which + " network has " + std::to_string(s.d_out) +
                                " outputs, expected " + std::to_string(out));
  };
  std::vector<nn::NetworkSpec> nets{spec_.u};
  check_net(spec_.u, u_out, "u");
  if (spec_.p) {
    check_net(*spec_.p, d, "p");
    p_net_ = static_cast<int>(nets.size());
    nets.push_back(*spec_.p);
  }
  if (spec_.v) {
    check_net(*spec_.v, 1, "v");
    v_net_ = static_cast<int>(nets.size());
    nets.push_back(*spec_.v);
  }
  bundle_ = nn::Bundle(std::move(nets));

  const geo::BoundarySet& data = spec_.data;
  switch (c) {
    case Construction::Penalty:
    case Construction::Periodic: break;
    case Construction::Dirichlet:
      require(data.dirichlet && data.dirichlet->L && data.dirichlet->G,
              name + ": needs Dirichlet L and G");
      break;
    case Construction::NeumannDGM:
      require(data.neumann.has_value(), name + ": needs Neumann data");
      require(!data.neumann->componentwise,
              name + ": componentwise flux data has no scalar construction");
      require_flux_data(*data.neumann, c);
      break;
    case Construction::NeumannMIM:
      require(data.neumann.has_value(), name + ": needs Neumann data");
      require_flux_data(*data.neumann, c);
      break;
    case Construction::Mixed:
      require(data.dirichlet && data.neumann, name + ": needs Dirichlet and Neumann data");
      require(data.dirichlet->L && data.dirichlet->G, name + ": needs Dirichlet L and G");
      require_flux_data(*data.neumann, c);
      break;
    case Construction::RobinDGM:
    case Construction::RobinMIM:
      require(data.robin.has_value(), name + ": needs Robin data");
      require(!data.robin->componentwise, name + ": componentwise data needs a split construction");
      require_flux_data(*data.robin, c);
      break;
    case Construction::RobinSumDiff:
    case Construction::RobinAugmented:
      require(dom.shape == geo::Shape::UnitCube01 && !dom.time,
              name + ": the split constructions need the unit cube");
      require(data.robin && data.robin->componentwise && data.robin->L && data.robin->G,
              name + ": needs componentwise Robin data");
      require(c != Construction::RobinSumDiff || (data.robin->L2 && data.robin->G2),
              name + ": needs the second multiplier and extension");
      break;
    case Construction::Parabolic:
    case Construction::WaveMIM2:
      require(dom.shape == geo::Shape::UnitCube01 && dom.time,
              name + ": needs the unit cube time cylinder");
      require(data.dirichlet && data.dirichlet->L, name + ": needs the space-time multiplier");
      require(c != Construction::WaveMIM2 || data.dirichlet->L2,
              name + ": needs the v multiplier");
      break;
  }
}

ad::Jet Trial::net(int i, ad::Tape& tape, const ad::Jet& x) const {
  return bundle_.forward(static_cast<std::size_t>(i), tape, x);
}

ad::Jet Trial::flux_mim(const geo::BoundaryData& b, const ad::Jet& x, const ad::Jet& n_star,
                        const ad::Jet* u) const {
  if (b.componentwise) return b.L(x) * n_star + b.G(x);
  const ad::Jet grad_L = b.grad_L(x);
  const ad::Jet nu = b.normal(x);
  const ad::Jet den = denominator(b, x, grad_L, nu);
  ad::Jet num = b.G(x) - b.a * ad::dot(n_star, nu);
  if (u != nullptr) num = num - *u;
  return ad::scale_rows(grad_L, num / den) + n_star;
}

ad::Jet Trial::scalar_dgm(const geo::BoundaryData& b, ad::Tape& tape, const ad::Jet& x,
                          bool robin) const {
  const ad::Jet grad_L = b.grad_L(x);
  const ad::Jet nu = b.normal(x);
  const ad::Jet den = denominator(b, x, grad_L, nu);
  const auto [n, dn] = bundle_.forward_directional(0, tape, x, pad_rows(nu, x.rows()));
  ad::Jet num = b.G(x) - b.a * dn;
  if (robin) num = num - n;
  return b.L(x) * (num / den) + n;
}

Fields Trial::evaluate(ad::Tape& tape, const ad::Jet& x) const {
  if (x.rows() != spec_.domain.input_dim()) {
    throw std::invalid_argument("Trial::evaluate: expected " +
                                std::to_string(spec_.domain.input_dim()) + " input rows, got " +
                                std::to_string(x.rows()));
  }
  const geo::BoundarySet& data = spec_.data;
  const int d = spec_.domain.d;
  Fields f;
  auto free_p = [&](const ad::Jet& in) {
    if (p_net_ >= 0) f.p = net(p_net_, tape, in);
  };
  auto free_v = [&](const ad::Jet& in) {
    if (v_net_ >= 0) f.v = net(v_net_, tape, in);
  };

  switch (spec_.construction) {
    case Construction::Penalty:
      f.u = net(0, tape, x);
      free_p(x);
      free_v(x);
      break;
    case Construction::Dirichlet:
      f.u = data.dirichlet->L(x) * net(0, tape, x) + data.dirichlet->G(x);
      free_p(x);
      break;
    case Construction::NeumannDGM:
      f.u = scalar_dgm(*data.neumann, tape, x, false);
      break;
    case Construction::NeumannMIM:
      f.u = net(0, tape, x);
      f.p = flux_mim(*data.neumann, x, net(p_net_, tape, x), nullptr);
      break;
    case Construction::Mixed:
      f.u = data.dirichlet->L(x) * net(0, tape, x) + data.dirichlet->G(x);
      f.p = flux_mim(*data.neumann, x, net(p_net_, tape, x), nullptr);
      break;
    case Construction::RobinDGM:
      f.u = scalar_dgm(*data.robin, tape, x, true);
      break;
    case Construction::RobinMIM:
      f.u = net(0, tape, x);
      f.p = flux_mim(*data.robin, x, net(p_net_, tape, x), &f.u);
      break;
    case Construction::RobinSumDiff: {
      const geo::BoundaryData& b = *data.robin;
      const ad::Jet r1 = b.L(x) * net(0, tape, x) + b.G(x);
      const ad::Jet r2 = b.L2(x) * net(p_net_, tape, x) + b.G2(x);
      f.u = (0.5 / d) * ad::sum_rows(r1 + r2);
      f.p = 0.5 * (r2 - r1);
      f.aux = {r1, r2};
      break;
    }
    case Construction::RobinAugmented: {
      const geo::BoundaryData& b = *data.robin;
      f.u = net(0, tape, x);
      const ad::Jet r = b.L(x) * net(p_net_, tape, x) + b.G(x);
      f.p = r - ad::broadcast_rows(f.u, d);
      f.aux = {r};
      break;
    }
    case Construction::Periodic: {
      const ad::Jet feats = periodic_features(x, *spec_.periodic);
      f.u = net(0, tape, feats);
      free_p(feats);
      break;
    }
    case Construction::Parabolic:
      f.u = data.dirichlet->L(x) * net(0, tape, x);
      free_p(x);
      free_v(x);
      break;
    case Construction::WaveMIM2:
      f.u = data.dirichlet->L(x) * net(0, tape, x);
      f.v = data.dirichlet->L2(x) * net(v_net_, tape, x);
      free_p(x);
      break;
  }
  return f;
}

namespace {

TrialSpec base(Construction c, const geo::Domain& domain, const nn::NetworkSpec& u) {
  TrialSpec s;
  s.construction = c;
  s.domain = domain;
  s.u = u;
  return s;
}

}  // namespace

Trial penalty_trial(const geo::Domain& domain, const nn::NetworkSpec& u,
                    std::optional<nn::NetworkSpec> p, std::optional<nn::NetworkSpec> v) {
  TrialSpec s = base(Construction::Penalty, domain, u);
  s.p = std::move(p);
  s.v = std::move(v);
  return Trial(std::move(s));
}

Trial dirichlet_trial(const geo::Domain& domain, const geo::BoundaryData& data,
                      const nn::NetworkSpec& u, std::optional<nn::NetworkSpec> p) {
  TrialSpec s = base(Construction::Dirichlet, domain, u);
  s.data.dirichlet = data;
  s.p = std::move(p);
  return Trial(std::move(s));
}

Trial neumann_trial_dgm(const geo::Domain& domain, const geo::BoundaryData& data,
                        const nn::NetworkSpec& u) {
  TrialSpec s = base(Construction::NeumannDGM, domain, u);
  s.data.neumann = data;
  return Trial(std::move(s));
}

Trial neumann_trial_mim(const geo::Domain& domain, const geo::BoundaryData& data,
                        const nn::NetworkSpec& u, const nn::NetworkSpec& p) {
  TrialSpec s = base(Construction::NeumannMIM, domain, u);
  s.data.neumann = data;
  s.p = p;
  return Trial(std::move(s));
}

Trial mixed_trial_mim(const geo::Domain& domain, const geo::BoundaryData& dirichlet,
                      const geo::BoundaryData& neumann, const nn::NetworkSpec& u,
                      const nn::NetworkSpec& p) {
  TrialSpec s = base(Construction::Mixed, domain, u);
  s.data.dirichlet = dirichlet;
  s.data.neumann = neumann;
  s.p = p;
  return Trial(std::move(s));
}

Trial robin_trial_dgm(const geo::Domain& domain, const geo::BoundaryData& data,
                      const nn::NetworkSpec& u) {
  TrialSpec s = base(Construction::RobinDGM, domain, u);
  s.data.robin = data;
  return Trial(std::move(s));
}

Trial robin_trial_mim(const geo::Domain& domain, const geo::BoundaryData& data,
                      const nn::NetworkSpec& u, const nn::NetworkSpec& p) {
  TrialSpec s = base(Construction::RobinMIM, domain, u);
  s.data.robin = data;
  s.p = p;
  return Trial(std::move(s));
}

Trial robin_split_trial(const geo::Domain& domain, const geo::BoundaryData& data,
                        const nn::NetworkSpec& u, const nn::NetworkSpec& p, RobinSplit variant) {
  TrialSpec s = base(variant == RobinSplit::SumDiff ? Construction::RobinSumDiff
                                                    : Construction::RobinAugmented,
                     domain, u);
  s.data.robin = data;
  s.p = p;
  return Trial(std::move(s));
}

Trial periodic_trial(const geo::Domain& domain, const PeriodicFeatures& features,
                     const nn::NetworkSpec& u, std::optional<nn::NetworkSpec> p) {
  TrialSpec s = base(Construction::Periodic, domain, u);
  s.periodic = features;
  s.p = std::move(p);
  return Trial(std::move(s));
}

Trial parabolic_trial(const geo::Domain& domain, const nn::NetworkSpec& u,
                      std::optional<nn::NetworkSpec> p, std::optional<nn::NetworkSpec> v) {
  TrialSpec s = base(Construction::Parabolic, domain, u);
  s.data = geo::boundary_functions("parabolic", domain.d);
  s.p = std::move(p);
  s.v = std::move(v);
  return Trial(std::move(s));
}

Trial wave_trial_mim2(const geo::Domain& domain, const nn::NetworkSpec& u,
                      const nn::NetworkSpec& v, const nn::NetworkSpec& p) {
  TrialSpec s = base(Construction::WaveMIM2, domain, u);
  s.data = geo::boundary_functions("wave", domain.d);
  s.p = p;
  s.v = v;
  return Trial(std::move(s));
}

namespace {

struct Evaluation {
  Matrix u, p, v;
  std::vector<Matrix> aux;
  std::vector<Matrix> grad_u;  // d rows of 1 x count
};

Evaluation evaluate_plain(const Trial& trial, std::span<const double> params, const Matrix& x,
                          bool gradient) {
  ad::Tape tape(params, trial.bundle().blocks());
  const ad::Jet xj = ad::lift_inputs(tape, x, gradient ? ad::Order::First : ad::Order::Value);
  const Fields f = trial.evaluate(tape, xj);
  Evaluation e;
  e.u = f.u.value_matrix();
  if (f.p) e.p = f.p->value_matrix();
  if (f.v) e.v = f.v->value_matrix();
  for (const ad::Jet& a : f.aux) e.aux.push_back(a.value_matrix());
  if (gradient) {
    for (int i = 0; i < trial.domain().d; ++i) e.grad_u.push_back(f.u.tangent_matrix(i));
  }
  return e;
}

Matrix eval_field(const geo::Field& field, const Matrix& x) {
  ad::Tape tape;
  return field(ad::lift_inputs(tape, x, ad::Order::Value)).value_matrix();
}

// Residuals are rows x count; NaN counts as an infinite residual.
// The scale is the largest magnitude among the data and the constrained field.
ExactnessReport summarize(std::string name, const Matrix& residual, const Matrix& data,
                          const Matrix& field, const Matrix& points, bool derivative) {
  ExactnessReport r;
  r.constraint = std::move(name);
  r.derivative = derivative;
  r.scale = 1.0;
  for (const Matrix* m : {&data, &field}) {
    if (m->size() && m->allFinite()) r.scale = std::max(r.scale, m->cwiseAbs().maxCoeff());
  }
  r.worst_point = points.col(0);
  for (Index j = 0; j < residual.cols(); ++j) {
    for (Index i = 0; i < residual.rows(); ++i) {
      const double v = std::isnan(residual(i, j)) ? INFINITY : std::abs(residual(i, j));
      if (v > r.max_residual) {
        r.max_residual = v;
        r.worst_point = points.col(j);
      }
    }
  }
  return r;
}

// Residual of the flux condition a p . nu (+ u) = G at boundary samples, or
// p_i = G_i on faces with normal +-e_i for componentwise data.
ExactnessReport flux_report(const geo::BoundaryData& b, const Matrix& p, const Matrix* u,
                            const geo::BoundarySamples& s, int d, std::string name) {
  const Matrix g = eval_field(b.G, s.x);
  Matrix res = Matrix::Zero(b.componentwise ? d : 1, s.x.cols());
  for (Index j = 0; j < s.x.cols(); ++j) {
    if (b.componentwise) {
      for (int i = 0; i < d; ++i) {
        if (s.normal(i, j) != 0.0) res(i, j) = p(i, j) - g(i, j);
      }
    } else {
      double flux = b.a * p.col(j).dot(s.normal.col(j).head(d));
      if (u != nullptr) flux += (*u)(0, j);
      res(0, j) = flux - g(0, j);
    }
  }
  return summarize(std::move(name), res, g, p, s.x, false);
}

}  // namespace

std::vector<ExactnessReport> verify_exactness(const Trial& trial, std::span<const double> params,
                                              Index count, Rng& rng) {
  if (trial.kind() == ConstraintKind::None) {
    throw std::invalid_argument("verify_exactness: penalty trials carry no constraint");
  }
  if (params.size() != trial.parameter_count()) {
    throw std::invalid_argument("verify_exactness: expected " +
                                std::to_string(trial.parameter_count()) + " parameters");
  }
  const geo::Domain& dom = trial.domain();
  const geo::BoundarySet& data = trial.spec().data;
  const int d = dom.d;
  std::vector<ExactnessReport> out;

  auto dirichlet_report = [&](geo::Portion portion) {
    const geo::BoundarySamples s = geo::sample_boundary(dom, portion, count, rng);
    const Evaluation e = evaluate_plain(trial, params, s.x, false);
    const Matrix g = eval_field(data.dirichlet->G, s.x);
    out.push_back(summarize("dirichlet u", e.u - g, g, e.u, s.x, false));
  };

  switch (trial.construction()) {
    case Construction::Penalty: break;
    case Construction::Dirichlet: dirichlet_report(geo::Portion::All); break;
    case Construction::NeumannDGM:
    case Construction::RobinDGM: {
      const bool robin = trial.construction() == Construction::RobinDGM;
      const geo::BoundaryData& b = robin ? *data.robin : *data.neumann;
      const geo::BoundarySamples s = geo::sample_boundary(dom, geo::Portion::All, count, rng);
      const Evaluation e = evaluate_plain(trial, params, s.x, true);
      Matrix grad(d, s.x.cols());
      for (int i = 0; i < d; ++i) grad.row(i) = e.grad_u[i];
      out.push_back(flux_report(b, grad, robin ? &e.u : nullptr, s, d,
                                robin ? "robin a du/dnu + u" : "neumann a du/dnu"));
      out.back().derivative = true;
      break;
    }
    case Construction::NeumannMIM:
    case Construction::RobinMIM: {
      const bool robin = trial.construction() == Construction::RobinMIM;
      const geo::BoundaryData& b = robin ? *data.robin : *data.neumann;
      const geo::BoundarySamples s = geo::sample_boundary(dom, geo::Portion::All, count, rng);
      const Evaluation e = evaluate_plain(trial, params, s.x, false);
      out.push_back(flux_report(b, e.p, robin ? &e.u : nullptr, s, d,
                                robin ? "robin a p.nu + u" : "neumann a p.nu"));
      break;
    }
    case Construction::Mixed: {
      dirichlet_report(geo::Portion::Dirichlet);
      if (!geo::has_portion(dom, geo::Portion::Neumann)) break;  // quadrilateral alone at d = 2
      const geo::BoundarySamples s = geo::sample_boundary(dom, geo::Portion::Neumann, count, rng);
      const Evaluation e = evaluate_plain(trial, params, s.x, false);
      out.push_back(flux_report(*data.neumann, e.p, nullptr, s, d, "neumann a p.nu"));
      break;
    }
    case Construction::RobinSumDiff:
    case Construction::RobinAugmented: {
      const bool split = trial.construction() == Construction::RobinSumDiff;
      const geo::BoundaryData& b = *data.robin;
      const geo::BoundarySamples s = geo::sample_boundary(dom, geo::Portion::All, count, rng);
      const Evaluation e = evaluate_plain(trial, params, s.x, false);
      const Matrix g1 = eval_field(b.G, s.x);
      const Matrix g2 = split ? eval_field(b.G2, s.x) : g1;
      Matrix res = Matrix::Zero(d, s.x.cols());
      for (Index j = 0; j < s.x.cols(); ++j) {
        for (int i = 0; i < d; ++i) {
          if (s.normal(i, j) == 0.0) continue;
          if (split) {
            res(i, j) = s.normal(i, j) < 0 ? e.aux[0](i, j) - g1(i, j) : e.aux[1](i, j) - g2(i, j);
          } else {
            res(i, j) = e.p(i, j) + e.u(0, j) - g1(i, j);
          }
        }
      }
      Matrix scale(2 * d, s.x.cols());
      scale << g1, g2;
      out.push_back(summarize(split ? "robin r1 on x_i=0, r2 on x_i=1" : "robin p_i + u", res,
                              scale, split ? Matrix(e.aux[0]) : Matrix(e.p), s.x, false));
      break;
    }
    case Construction::Periodic: {
      const Matrix x = geo::sample_interior(dom, count, rng);
      const Evaluation e0 = evaluate_plain(trial, params, x, false);
      for (int i = 0; i < d; ++i) {
        Matrix shifted = x;
        shifted.row(i).array() += trial.spec().periodic->periods[i];
        const Evaluation e1 = evaluate_plain(trial, params, shifted, false);
        out.push_back(summarize("periodic u, x_" + std::to_string(i + 1), e1.u - e0.u, e0.u, e1.u, x,
                                false));
        if (trial.has_p()) {
          out.push_back(summarize("periodic p, x_" + std::to_string(i + 1), e1.p - e0.p, e0.p, e1.p, x,
                                  false));
        }
      }
      break;
    }
    case Construction::Parabolic:
    case Construction::WaveMIM2: {
      const geo::BoundarySamples lateral = geo::sample_boundary(dom, geo::Portion::All, count, rng);
      const Evaluation el = evaluate_plain(trial, params, lateral.x, false);
      out.push_back(summarize("boundary u", el.u, Matrix(), Matrix(), lateral.x, false));
      const geo::BoundarySamples init = geo::sample_boundary(dom, geo::Portion::Initial, count, rng);
      const Evaluation ei = evaluate_plain(trial, params, init.x, false);
      out.push_back(summarize("initial u", ei.u, Matrix(), Matrix(), init.x, false));
      if (trial.construction() == Construction::WaveMIM2) {
        out.push_back(summarize("initial v", ei.v, Matrix(), Matrix(), init.x, false));
      }
      break;
    }
  }
  return out;
}

}  // namespace mim::con
