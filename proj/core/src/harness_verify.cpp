#include "mim/harness.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace mim::harness {
namespace {

using ad::Order;
using nn::Activation;

std::vector<double> normal_params(std::size_t n, Rng& rng, double sd = 0.5) {
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> p(n);
  for (double& v : p) v = g(rng);
  return p;
}

template <typename Body>
PropertyResult timed(std::string name, Body&& body) {
  const auto start = std::chrono::steady_clock::now();
  PropertyResult r{std::move(name), true, "", 0.0};
  try {
    body(r);
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

void note_failure(PropertyResult& r, const std::string& what) {
  if (r.pass) r.detail = what;
  r.pass = false;
}

// Dimensions exercised for an entry by the no-training checks.
std::vector<int> check_dims(const CatalogueEntry& e) {
  std::vector<int> out;
  for (int d : {2, 3}) {
    if (d >= e.min_d && d <= e.max_d) out.push_back(d);
  }
  if (out.empty()) out.push_back(e.min_d);
  return out;
}

struct NamedTrial {
  std::string name;
  con::Trial trial;
};

std::vector<NamedTrial> constrained_trials(const VerifyOptions& o) {
  std::vector<NamedTrial> out;
  for (const auto& e : catalogue()) {
    for (Method m : e.methods) {
      for (int d : check_dims(e)) {
        ExperimentConfig c;
        c.experiment = e.id;
        c.method = m;
        c.d = d;
        c.n = 6;
        c.m = 2;
        c.k = e.id == "periodic-product" ? 3 : 1;
        c = with_defaults(c);
        con::Trial t = build_trial(c);
        if (t.kind() == con::ConstraintKind::None) continue;
        out.push_back({e.id + " " + std::string(loss::to_string(m)) + " d=" + std::to_string(d), std::move(t)});
      }
    }
  }
  const geo::Domain ball2{geo::Shape::UnitBall, 2, false};
  const geo::Domain interval{geo::Shape::UnitCube01, 1, false};
  const auto rball = *geo::boundary_functions("robin-ball", 2).robin;
  const auto rint = *geo::boundary_functions("robin-interval", 1).robin;
  const auto S = Activation::Swish;
  out.push_back({"robin-ball DGM d=2", con::robin_trial_dgm(ball2, rball, nn::make_spec(2, 6, 2, 1, S))});
  out.push_back({"robin-ball MIM d=2", con::robin_trial_mim(ball2, rball, nn::make_spec(2, 6, 2, 1, S),
                                                            nn::make_spec(2, 6, 2, 2, S))});
  out.push_back({"robin-interval DGM d=1",
                 con::robin_trial_dgm(interval, rint, nn::make_spec(1, 5, 2, 1, Activation::ReQu))});
  out.push_back({"robin-interval MIM d=1",
                 con::robin_trial_mim(interval, rint, nn::make_spec(1, 5, 2, 1, Activation::ReQu),
                                      nn::make_spec(1, 5, 2, 1, Activation::ReQu))});
  if (o.bad_dirichlet_multiplier) {
    auto data = *geo::boundary_functions("dirichlet-elliptic-ball", 2).dirichlet;
    const geo::Field L = data.L;
    data.L = [L](const ad::Jet& x) { return L(x) + 0.1; };
    out.push_back({"dirichlet-elliptic-ball (shifted multiplier) d=2",
                   con::dirichlet_trial(ball2, data, nn::make_spec(2, 6, 2, 1, Activation::ReQu))});
  }
  return out;
}

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

PropertyResult check_exactness(const VerifyOptions& o) {
  return timed("construction exactness", [&](PropertyResult& r) {
    const auto trials = constrained_trials(o);
    Rng rng(20240601);
    double worst = 0.0;
    std::string worst_name;
    for (const auto& nt : trials) {
      for (int draw = 0; draw < o.draws; ++draw) {
        const auto params = nt.trial.init(rng());
        for (const auto& rep : con::verify_exactness(nt.trial, params, o.samples, rng)) {
          const double tol = (rep.derivative ? 1e-10 : 1e-12) * rep.scale;
          const double ratio = rep.max_residual / tol;
          if (ratio > worst) {
            worst = ratio;
            worst_name = nt.name + " [" + rep.constraint + "]";
          }
          if (rep.max_residual > tol) {
            std::ostringstream s;
            s << nt.name << ": " << rep.constraint << " residual " << rep.max_residual
              << " exceeds " << tol;
            note_failure(r, s.str());
          }
        }
      }
    }
    if (r.pass) {
      std::ostringstream s;
      s << trials.size() << " trials x " << o.draws << " draws x " << o.samples
        << " samples; worst residual/tolerance " << worst << " (" << worst_name << ")";
      r.detail = s.str();
    }
  });
}

PropertyResult check_autodiff() {
  return timed("autodiff vs finite differences", [](PropertyResult& r) {
    Rng rng(77);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    double worst1 = 0.0, worst2 = 0.0;
    for (Activation a : {Activation::ReQu, Activation::ReCu, Activation::Swish}) {
      for (auto [d_in, n] : {std::pair{3, 5}, std::pair{6, 4}}) {
        const nn::NetworkSpec spec = nn::make_spec(d_in, n, 2, 1, a);
        const nn::Bundle bundle({spec});
        const auto theta = normal_params(bundle.parameter_count(), rng);
        auto u = [&](const Eigen::VectorXd& x) { return nn::evaluate(spec, theta, Matrix(x))(0, 0); };
        for (int pt = 0; pt < 100; ++pt) {
          Eigen::VectorXd x(d_in);
          for (int i = 0; i < d_in; ++i) x(i) = unif(rng);
          ad::Tape tape(theta, bundle.blocks());
          auto f = [&](const ad::Jet& xj) { return bundle.forward(0, tape, xj); };
          const std::vector<double> xs(x.data(), x.data() + d_in);
          const Matrix g = ad::grad_wrt_inputs(tape, f, xs).value();
          const double lap = ad::laplacian_wrt_inputs(tape, f, xs).scalar();
          Eigen::VectorXd gfd(d_in);
          double lfd = 0.0;
          for (int i = 0; i < d_in; ++i) {
            auto shifted = [&](double h) {
              Eigen::VectorXd y = x;
              y(i) += h;
              return u(y);
            };
            gfd(i) = (shifted(1e-5) - shifted(-1e-5)) / 2e-5;
            lfd += (shifted(1e-4) - 2.0 * u(x) + shifted(-1e-4)) / 1e-8;
          }
          worst1 = std::max(worst1, (g - gfd).cwiseAbs().maxCoeff() / std::max(gfd.cwiseAbs().maxCoeff(), 1e-3));
          worst2 = std::max(worst2, std::abs(lap - lfd) / std::max(std::abs(lfd), 1e-2));
        }
        // Parameter gradients of a first-order and a second-order loss.
        Matrix xs(d_in, 20);
        for (Index j = 0; j < xs.size(); ++j) xs.data()[j] = unif(rng);
        for (Order order : {Order::Value, Order::Second}) {
          auto loss = [&](ad::Tape& tape) {
            const ad::Jet out = bundle.forward(0, tape, ad::lift_inputs(tape, xs, order));
            return ad::sum_squares(order == Order::Value ? out.value() : out.laplacian());
          };
          ad::Tape tape(theta, bundle.blocks());
          const auto g = ad::param_gradients(loss(tape));
          std::vector<double> t = theta;
          double err = 0.0, scale = 0.0;
          for (std::size_t j = 0; j < t.size(); ++j) {
            const double t0 = t[j];
            t[j] = t0 + 1e-6;
            ad::Tape tp(t, bundle.blocks());
            const double lp = loss(tp).scalar();
            t[j] = t0 - 1e-6;
            ad::Tape tm(t, bundle.blocks());
            const double lm = loss(tm).scalar();
            t[j] = t0;
            const double fd = (lp - lm) / 2e-6;
            err = std::max(err, std::abs(g[j] - fd));
            scale = std::max(scale, std::abs(fd));
          }
          const double rel = err / std::max(scale, 1e-3);
          if (order == Order::Value) {
            worst1 = std::max(worst1, rel);
          } else {
            worst2 = std::max(worst2, rel);
          }
        }
      }
    }
    std::ostringstream s;
    s << "first order worst " << worst1 << " (<= 1e-5), second order worst " << worst2 << " (<= 1e-4)";
    r.detail = s.str();
    r.pass = worst1 <= 1e-5 && worst2 <= 1e-4;
  });
}

PropertyResult check_adam() {
  return timed("ADAM oracle", [](PropertyResult& r) {
    Rng rng(5);
    std::normal_distribution<double> g(0.0, 2.0);
    const std::size_t n = 64;
    std::vector<double> theta(n), scalar(n), m(n, 0.0), v(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) scalar[i] = theta[i] = g(rng);
    opt::AdamState s(n);
    double b1t = 1.0, b2t = 1.0, worst = 0.0;
    for (int step = 0; step < 10; ++step) {
      std::vector<double> grad(n);
      for (double& x : grad) x = g(rng);
      opt::adam_step(s, theta, grad);
      b1t *= 0.9;
      b2t *= 0.999;
      for (std::size_t i = 0; i < n; ++i) {
        m[i] = 0.9 * m[i] + 0.1 * grad[i];
        v[i] = 0.999 * v[i] + 0.001 * grad[i] * grad[i];
        scalar[i] -= 0.001 * (m[i] / (1 - b1t)) / (std::sqrt(v[i] / (1 - b2t)) + 1e-8);
        worst = std::max(worst, std::abs(theta[i] - scalar[i]));
      }
    }
    r.pass = worst <= 1e-15;
    r.detail = "10 steps, max deviation " + fmt17(worst);
  });
}

PropertyResult check_parameter_counts() {
  return timed("parameter counts", [](PropertyResult& r) {
    int checked = 0;
    for (const std::string id : {"T1", "T2", "T3", "T4", "T7"}) {
      for (const auto& row : table(id, Budget::Paper).rows) {
        for (const auto& cell : row.cells) {
          const ExperimentConfig& c = cell.config;
          if (c.experiment == "mixed-complex2d" && c.d < 2) continue;
          const std::size_t m = c.m, n = c.n, d = c.d;
          const std::size_t dgm = (2 * m - 1) * n * n + (2 * m + d + 1) * n + 1;
          const std::size_t mim = (4 * m - 2) * n * n + (4 * m + 3 * d + 1) * n + d + 1;
          const std::size_t expect = c.method == Method::DGM ? dgm : mim;
          const std::size_t got = build_trial(c).parameter_count();
          ++checked;
          if (got != expect) {
            note_failure(r, c.experiment + " d=" + std::to_string(d) + " n=" + std::to_string(n) + " m=" +
                                std::to_string(m) + ": " + std::to_string(got) + " != " + std::to_string(expect));
          }
        }
      }
    }
    if (r.pass) r.detail = std::to_string(checked) + " table configurations";
  });
}

PropertyResult check_sources(const VerifyOptions& o) {
  return timed("source terms vs finite differences", [&](PropertyResult& r) {
    Rng rng(31);
    double worst = 0.0;
    int checked = 0;
    for (const auto& e : catalogue()) {
      for (int d = 1; d <= 4; ++d) {
        if (d < e.min_d || d > e.max_d) continue;
        loss::Source s = loss::manufactured_source(e.id, d);
        if (e.id == o.flip_source) {
          const loss::PointFn f = s.f;
          s.f = [f](const Eigen::VectorXd& x) { return -f(x); };
        }
        const bool time = s.time;
        const geo::Domain dom{e.shape, d, time};
        const double err = loss::validate_source(s, geo::sample_interior(dom, 50, rng));
        worst = std::max(worst, err);
        ++checked;
        if (!(err <= 1e-6)) {
          note_failure(r, e.id + " d=" + std::to_string(d) + ": relative error " + fmt17(err));
        }
      }
    }
    if (r.pass) {
      std::ostringstream s;
      s << checked << " (experiment, d) pairs, worst relative error " << worst;
      r.detail = s.str();
    }
  });
}

PropertyResult check_periodicity() {
  return timed("periodicity", [](PropertyResult& r) {
    Rng rng(41);
    double worst = 0.0;
    for (auto [id, d, k] : {std::tuple{"periodic-sum", 2, 1}, std::tuple{"periodic-product", 2, 3},
                            std::tuple{"periodic-1d-highfreq", 1, 1}, std::tuple{"periodic-sum", 3, 2}}) {
      ExperimentConfig c;
      c.experiment = id;
      c.d = d;
      c.k = k;
      c.n = 8;
      c.m = 3;
      const con::Trial t = build_trial(with_defaults(c));
      const geo::Domain dom = t.domain();
      for (int draw = 0; draw < 5; ++draw) {
        const auto params = normal_params(t.parameter_count(), rng);
        const Matrix x = geo::sample_interior(dom, 200, rng);
        auto fields = [&](const Matrix& pts) {
          ad::Tape tape(params, t.bundle().blocks());
          const con::Fields f = t.evaluate(tape, ad::lift_inputs(tape, pts, Order::Value));
          Matrix out(1 + d, pts.cols());
          out << f.u.value_matrix(), f.p->value_matrix();
          return out;
        };
        const Matrix base = fields(x);
        for (int i = 0; i < d; ++i) {
          Matrix y = x;
          y.row(i).array() += 2.0;
          const double diff = max_abs(fields(y) - base) / std::max(1.0, max_abs(base));
          worst = std::max(worst, diff);
        }
      }
    }
    r.pass = worst <= 1e-12;
    r.detail = "shift by one period in each coordinate, worst relative change " + fmt17(worst);
  });
}

std::vector<PropertyResult> verify(const VerifyOptions& o) {
  return {check_exactness(o), check_autodiff(), check_adam(), check_parameter_counts(),
          check_sources(o), check_periodicity()};
}

}  // namespace mim::harness
