#include "mim/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mim::harness {
namespace {

using geo::Shape;
using nn::Activation;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(std::string(key), "cannot parse '" + std::string(v) + "' as a number");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(std::string(key), "expected true or false, got '" + std::string(v) + "'");
}

bool is_time(loss::Family f) { return f == loss::Family::Parabolic || f == loss::Family::Wave; }

}  // namespace

ConfigError::ConfigError(std::string field, const std::string& message)
    : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

const std::vector<CatalogueEntry>& catalogue() {
  using F = loss::Family;
  using M = Method;
  static const std::vector<CatalogueEntry> entries{
      {"dirichlet-elliptic-ball", "-Lap u + u^2 = f on the unit ball, exact Dirichlet data",
       F::Elliptic, Shape::UnitBall, {M::MIM, M::DGM}},
      {"monge-ampere", "det Hess u = f on the unit ball, exact Dirichlet data", F::MongeAmpere,
       Shape::UnitBall, {M::MIM}, 1, ad::kMaxDeterminantSize},
      {"neumann-cube", "-Lap u + u = 0 on [0,1]^d; MIM exact Neumann, DGM penalty", F::Elliptic,
       Shape::UnitCube01, {M::MIM, M::DGM}},
      {"neumann-ball", "-Lap u - u = f on the unit ball, exact Neumann data", F::Elliptic,
       Shape::UnitBall, {M::MIM, M::DGM}},
      {"robin-sumdiff", "Robin data on [0,1]^d via the sum/difference split", F::Elliptic,
       Shape::UnitCube01, {M::MIM}},
      {"robin-augmented", "Robin data on [0,1]^d via the augmented flux", F::Elliptic,
       Shape::UnitCube01, {M::MIM}},
      {"mixed-slab", "Dirichlet at x1 = 0, 1 and Neumann elsewhere on [0,1]^d", F::Elliptic,
       Shape::UnitCube01, {M::MIM}, 2},
      {"mixed-complex2d", "Dirichlet on a quadrilateral's sides times a Neumann cube", F::Elliptic,
       Shape::Polygon2DxCube, {M::MIM}, 2},
      {"mixed-annulus", "Dirichlet inside, Neumann outside on 0.5 < |x| < 1", F::Elliptic,
       Shape::Annulus, {M::MIM}},
      {"periodic-sum", "sum cos(pi x) + cos(2 pi x), periodic on [-1,1]^d", F::Elliptic,
       Shape::CubePM1, {M::MIM}, 1, 1 << 20, Activation::Swish},
      {"periodic-product", "sum cos(pi x) cos(2 pi x), periodic on [-1,1]^d", F::Elliptic,
       Shape::CubePM1, {M::MIM}, 1, 1 << 20, Activation::Swish},
      {"periodic-1d-highfreq", "cos(k pi x), k = 1, 2, 4, 8, periodic on [-1,1]", F::Elliptic,
       Shape::CubePM1, {M::MIM}, 1, 1, Activation::Swish},
      {"parabolic", "u_t - Lap u = f with exact initial and boundary data", F::Parabolic,
       Shape::UnitCube01, {M::MIM1, M::MIM2, M::DGM}, 1, 1 << 20, Activation::Swish},
      {"wave", "u_tt - Lap u = f; exact u_t(0) only in MIM2", F::Wave, Shape::UnitCube01,
       {M::MIM1, M::MIM2, M::DGM}},
  };
  return entries;
}

const CatalogueEntry& find_experiment(std::string_view id) {
  for (const auto& e : catalogue()) {
    if (e.id == id) return e;
  }
  std::string ids;
  for (const auto& e : catalogue()) ids += (ids.empty() ? "" : ", ") + e.id;
  throw ConfigError("experiment", "unknown experiment '" + std::string(id) + "'; valid ids: " + ids);
}

nn::Activation ExperimentConfig::resolved_activation() const {
  return activation ? *activation : find_experiment(experiment).activation;
}

void ExperimentConfig::validate() const {
  const CatalogueEntry& e = find_experiment(experiment);
  if (std::find(e.methods.begin(), e.methods.end(), method) == e.methods.end()) {
    std::string ok;
    for (Method m : e.methods) ok += (ok.empty() ? "" : ", ") + std::string(loss::to_string(m));
    throw ConfigError("method", std::string(loss::to_string(method)) + " is not run for " +
                                    experiment + " (use " + ok + ")");
  }
  if (d < e.min_d || d > e.max_d) {
    throw ConfigError("d", experiment + " needs " + std::to_string(e.min_d) + " <= d <= " +
                               std::to_string(e.max_d));
  }
  if (n < 1) throw ConfigError("n", "must be positive");
  if (m < 1) throw ConfigError("m", "must be positive");
  if (k < 1) throw ConfigError("k", "must be positive");
  if (interior < 1) throw ConfigError("interior", "must be positive");
  if (eval_points < 1) throw ConfigError("eval_points", "must be positive");
  if (eval_interval < 1) throw ConfigError("eval_interval", "must be positive");
  if (chunk < 1) throw ConfigError("chunk", "must be positive");
  if (!(alpha > 0.0)) throw ConfigError("alpha", "must be positive");
  if (output.empty()) throw ConfigError("output", "must not be empty");
  const bool penalty_pair = (experiment == "neumann-cube" && method == Method::DGM) ||
                            (experiment == "wave" && method != Method::MIM2);
  if (lambda > 0.0 && !penalty_pair) {
    throw ConfigError("lambda", "no penalty term for " + experiment + " " +
                                    std::string(loss::to_string(method)));
  }
  if (std::isnan(lambda) || std::isinf(lambda)) throw ConfigError("lambda", "must be finite");
  if (lambda == 0.0 && boundary > 0) {
    throw ConfigError("boundary", "penalty samples given but lambda = 0");
  }
}

void set_field(ExperimentConfig& c, std::string_view key, std::string_view value) {
  const std::string v = trim(value);
  if (key == "experiment") {
    c.experiment = v;
  } else if (key == "method") {
    try {
      c.method = loss::parse_method(v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("method", e.what());
    }
  } else if (key == "d") {
    c.d = parse_number<int>(key, v);
  } else if (key == "n") {
    c.n = parse_number<int>(key, v);
  } else if (key == "m") {
    c.m = parse_number<int>(key, v);
  } else if (key == "activation") {
    if (v.empty() || v == "default") {
      c.activation.reset();
    } else {
      try {
        c.activation = nn::parse_activation(v);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("activation", e.what());
      }
    }
  } else if (key == "k") {
    c.k = parse_number<int>(key, v);
  } else if (key == "interior") {
    c.interior = parse_number<ad::Index>(key, v);
  } else if (key == "boundary") {
    c.boundary = parse_number<ad::Index>(key, v);
  } else if (key == "lambda") {
    c.lambda = parse_number<double>(key, v);
  } else if (key == "max_epochs") {
    c.max_epochs = parse_number<std::uint64_t>(key, v);
  } else if (key == "eval_interval") {
    c.eval_interval = parse_number<std::uint64_t>(key, v);
  } else if (key == "eval_points") {
    c.eval_points = parse_number<ad::Index>(key, v);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, v);
  } else if (key == "alpha") {
    c.alpha = parse_number<double>(key, v);
  } else if (key == "freeze_samples") {
    c.freeze_samples = parse_bool(key, v);
  } else if (key == "chunk") {
    c.chunk = parse_number<ad::Index>(key, v);
  } else if (key == "output") {
    c.output = v;
  } else {
    throw ConfigError(std::string(key), "unknown key");
  }
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  bool has_experiment = false;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(number), "expected key = value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    set_field(c, key, std::string_view(t).substr(eq + 1));
    has_experiment |= key == "experiment";
  }
  if (!has_experiment) throw ConfigError("experiment", "missing");
  c = with_defaults(std::move(c));
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "experiment = " << c.experiment << "\n"
    << "method = " << loss::to_string(c.method) << "\n"
    << "d = " << c.d << "\n"
    << "n = " << c.n << "\n"
    << "m = " << c.m << "\n"
    << "activation = " << (c.activation ? std::string(nn::to_string(*c.activation)) : "default") << "\n"
    << "k = " << c.k << "\n"
    << "interior = " << c.interior << "\n"
    << "boundary = " << c.boundary << "\n"
    << "lambda = " << fmt17(c.lambda) << "\n"
    << "max_epochs = " << c.max_epochs << "\n"
    << "eval_interval = " << c.eval_interval << "\n"
    << "eval_points = " << c.eval_points << "\n"
    << "seed = " << c.seed << "\n"
    << "alpha = " << fmt17(c.alpha) << "\n"
    << "freeze_samples = " << (c.freeze_samples ? "true" : "false") << "\n"
    << "chunk = " << c.chunk << "\n"
    << "output = " << c.output << "\n";
  return o.str();
}

ExperimentConfig with_defaults(ExperimentConfig c) {
  const bool cube_dgm = c.experiment == "neumann-cube" && c.method == Method::DGM;
  const bool wave_penalty = c.experiment == "wave" && c.method != Method::MIM2;
  if (c.lambda < 0.0) c.lambda = cube_dgm || wave_penalty ? 1.0 : 0.0;
  if (c.boundary < 0) {
    if (c.lambda == 0.0) {
      c.boundary = 0;
    } else if (cube_dgm) {
      c.boundary = 1000 * 2 * c.d;  // 1000 points per face
    } else {
      c.boundary = std::max<ad::Index>(1, c.interior / 10);
    }
  }
  return c;
}

RunSeeds run_seeds(std::uint64_t seed) {
  return {derive_seed(seed, {11}), derive_seed(seed, {12}), seed};
}

con::Trial build_trial(const ExperimentConfig& c) {
  c.validate();
  const CatalogueEntry& e = find_experiment(c.experiment);
  const geo::Domain dom{e.shape, c.d, is_time(e.family)};
  const Activation act = c.resolved_activation();
  const int in = dom.input_dim();
  auto net = [&](int d_in, int d_out) { return nn::make_spec(d_in, c.n, c.m, d_out, act); };
  const bool mim = c.method != Method::DGM;
  const std::string& id = c.experiment;

  if (id == "dirichlet-elliptic-ball" || id == "monge-ampere") {
    const auto data = *geo::boundary_functions(id, c.d).dirichlet;
    return mim ? con::dirichlet_trial(dom, data, net(in, 1), net(in, c.d))
               : con::dirichlet_trial(dom, data, net(in, 1));
  }
  if (id == "neumann-cube" || id == "neumann-ball") {
    if (mim) {
      return con::neumann_trial_mim(dom, *geo::boundary_functions(id, c.d).neumann, net(in, 1),
                                    net(in, c.d));
    }
    if (id == "neumann-cube") return con::penalty_trial(dom, net(in, 1));
    return con::neumann_trial_dgm(dom, *geo::boundary_functions(id, c.d).neumann, net(in, 1));
  }
  if (id == "robin-sumdiff") {
    return con::robin_split_trial(dom, *geo::boundary_functions(id, c.d).robin, net(in, c.d),
                                  net(in, c.d), con::RobinSplit::SumDiff);
  }
  if (id == "robin-augmented") {
    return con::robin_split_trial(dom, *geo::boundary_functions(id, c.d).robin, net(in, 1),
                                  net(in, c.d), con::RobinSplit::Augmented);
  }
  if (id.starts_with("mixed-")) {
    const auto set = geo::boundary_functions(id, c.d);
    return con::mixed_trial_mim(dom, *set.dirichlet, *set.neumann, net(in, 1), net(in, c.d));
  }
  if (id.starts_with("periodic-")) {
    const con::PeriodicFeatures pf{std::vector<double>(c.d, 2.0), c.k};
    return con::periodic_trial(dom, pf, net(pf.size(), 1), net(pf.size(), c.d));
  }
  if (id == "parabolic") {
    switch (c.method) {
      case Method::DGM: return con::parabolic_trial(dom, net(in, 1));
      case Method::MIM1: return con::parabolic_trial(dom, net(in, 1), net(in, c.d), net(in, 1));
      default: return con::parabolic_trial(dom, net(in, 1), net(in, c.d));
    }
  }
  if (id == "wave") {
    switch (c.method) {
      case Method::DGM: return con::parabolic_trial(dom, net(in, 1));
      case Method::MIM1: return con::parabolic_trial(dom, net(in, 1), net(in, c.d));
      default: return con::wave_trial_mim2(dom, net(in, 1), net(in, 1), net(in, c.d));
    }
  }
  throw ConfigError("experiment", "no construction for " + id);
}

Problem build_problem(const ExperimentConfig& raw) {
  const ExperimentConfig c = with_defaults(raw);
  c.validate();
  Problem p;
  p.trial = std::make_unique<con::Trial>(build_trial(c));
  loss::LossConfig lc;
  lc.method = c.method;
  lc.lambda = c.lambda;
  lc.penalty_op = c.experiment == "neumann-cube" ? loss::BoundaryOp::Neumann : loss::BoundaryOp::Dirichlet;
  lc.interior = c.interior;
  lc.boundary = c.boundary;
  loss::Source src = loss::manufactured_source(c.experiment, c.d);
  p.objective = std::make_unique<loss::Objective>(*p.trial, src, lc);
  Rng rng(run_seeds(c.seed).eval);
  p.eval_x = geo::sample_interior(p.trial->domain(), c.eval_points, rng);
  p.eval_u = src.u_values(p.eval_x);
  return p;
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace mim::harness
