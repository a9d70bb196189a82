#pragma once

// Monte Carlo least-squares losses and the manufactured solutions behind them.
//
// Norms are plain sample means. Every term is assembled as a sum over a
// column range divided by the full sample count, so a loss over a batch is
// the sum of its chunk partials.

#include "mim/constructions.hpp"

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace mim::loss {

using ad::Index;
using ad::Matrix;

enum class Method { DGM, MIM, MIM1, MIM2 };
enum class Family { Elliptic, MongeAmpere, Parabolic, Wave };
/// Boundary operator of a penalty term.
enum class BoundaryOp { Dirichlet, Neumann, Robin };

std::string_view to_string(Method m);
Method parse_method(std::string_view s);
std::string_view to_string(Family f);

using PointFn = std::function<double(const Eigen::VectorXd&)>;
using GradFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// A manufactured problem. Elliptic problems read -Lap u + c u + q u^2 = f,
/// Monge-Ampere det(Hess u) = f, parabolic u_t - Lap u = f and wave
/// u_tt - Lap u = f. Time is the last input coordinate.
struct Source {
  std::string id;
  int d = 2;
  bool time = false;
  Family family = Family::Elliptic;
  double c = 0.0;
  double q = 0.0;
  PointFn u;
  GradFn grad_u;  // spatial gradient
  PointFn f;

  int input_dim() const { return d + (time ? 1 : 0); }
  Matrix u_values(const Matrix& x) const;
  Matrix f_values(const Matrix& x) const;
  /// Boundary data of `op` at boundary samples: u, du/dnu or du/dnu + u.
  Matrix boundary_values(BoundaryOp op, const geo::BoundarySamples& s) const;
};

/// Closed-form problem of a catalogued experiment in dimension d.
Source manufactured_source(std::string_view experiment_id, int d);

/// The operator applied to `source.u` by fourth-order central differences,
/// compared with `source.f` at `count` points of `x`. Returns
/// max |f_fd - f| / max(1, max |f|).
double validate_source(const Source& source, const Matrix& x, double h = 1e-3);

/// Jet order each (family, method) pair needs.
ad::Order required_order(Family family, Method method);

/// Sum over the batch of the squared interior residuals of the method,
/// divided by `total`. `f` holds the source values at the batch points (1 x batch).
ad::Var interior_terms(Family family, Method method, const Source& source,
                       const con::Fields& fields, const Matrix& f, double total);

/// lambda / total times the sum of (B u - g)^2, B = op, over boundary samples.
ad::Var boundary_penalty(BoundaryOp op, double a, int d, const con::Fields& fields,
                         const geo::BoundarySamples& s, const Matrix& g, double lambda,
                         double total);
/// lambda / total times the sum of u_t^2 at t = 0 samples.
ad::Var initial_velocity_penalty(const con::Fields& fields, int d, double lambda, double total);

struct LossConfig {
  Method method = Method::MIM;
  double lambda = 0.0;
  BoundaryOp penalty_op = BoundaryOp::Dirichlet;
  Index interior = 1000;
  /// Boundary (or t = 0 slice) samples for the penalty term.
  Index boundary = 0;

  void validate() const;
};

struct Batch {
  Matrix x;  // interior, input_dim x N
  Matrix f;  // 1 x N
  geo::BoundarySamples boundary;  // penalty samples, possibly empty
  Matrix g;  // penalty targets, 1 x Nb
};

/// Loss of one trial for one manufactured problem.
class Objective {
 public:
  Objective(const con::Trial& trial, Source source, LossConfig config);

  const con::Trial& trial() const noexcept { return trial_; }
  const Source& source() const noexcept { return source_; }
  const LossConfig& config() const noexcept { return config_; }
  ad::Order order() const noexcept { return order_; }

  Batch sample(Rng& rng) const;
  /// Builds a batch from given points (source and penalty targets filled in).
  Batch make_batch(Matrix x, geo::BoundarySamples boundary = {}) const;

  /// Set 0 is the interior, set 1 the penalty samples.
  int set_count() const noexcept { return config_.lambda > 0.0 ? 2 : 1; }
  Index set_size(const Batch& b, int set) const;
  /// Contribution of columns [c0, c0 + n) of a set, on a tape over the
  /// trial's bundle.
  ad::Var partial(ad::Tape& tape, const Batch& b, int set, Index c0, Index n) const;

  /// Whole loss on one tape (no chunking), for tests and small batches.
  ad::Var evaluate(ad::Tape& tape, const Batch& b) const;

 private:
  const con::Trial& trial_;
  Source source_;
  LossConfig config_;
  ad::Order order_;
};

/// sqrt(sum (u_hat - u)^2) / sqrt(sum u^2) over the columns of x, evaluated
/// in chunks. Throws when the exact values vanish.
double relative_l2_error(const con::Trial& trial, std::span<const double> params, const Matrix& x,
                         const Matrix& u_exact, Index chunk = 4096);
double relative_l2_error(const Matrix& u_hat, const Matrix& u_exact);
/// Plain u_hat at the columns of x.
Matrix evaluate_u(const con::Trial& trial, std::span<const double> params, const Matrix& x,
                  Index chunk = 4096);

}  // namespace mim::loss
