#pragma once

// Trial functions that satisfy boundary and initial conditions for every
// parameter value.
//
// A Trial owns a Bundle of networks laid out u, p, v (whichever exist) and a
// construction rule. evaluate() runs on a tape built over the bundle blocks:
//
//   ad::Tape tape(params, trial.bundle().blocks());
//   Fields f = trial.evaluate(tape, ad::lift_inputs(tape, x, ad::Order::Second));

#include "mim/geometry.hpp"
#include "mim/nn/network.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mim::con {

using ad::Index;
using ad::Matrix;

enum class Construction {
  Penalty,         // raw networks, conditions left to the loss
  Dirichlet,       // u = L N + G, p free
  NeumannDGM,      // u = L F(N) + N with F from the directional derivative of N
  NeumannMIM,      // u free, p = F(N*) grad L + N* (or L . N* + G componentwise)
  Mixed,           // Dirichlet on u and Neumann on p
  RobinDGM,
  RobinMIM,
  RobinSumDiff,    // r1 = x . N + G1, r2 = (1 - x) . N* + G2
  RobinAugmented,  // u = N, r = x (1 - x) . N* + G, p = r - u
  Periodic,        // networks on periodic features
  Parabolic,       // u = t prod(x_i - x_i^2) N
  WaveMIM2,        // Parabolic u, and v = t N~
};

enum class ConstraintKind { None, Dirichlet, Neumann, Robin, Mixed, Periodic, ParabolicIC, WaveIC };

std::string_view to_string(Construction c);
std::string_view to_string(ConstraintKind k);
ConstraintKind constraint_kind(Construction c);

/// |denominator| below this at an evaluation point is an error.
inline constexpr double kDenominatorFloor = 1e-8;

class DenominatorError : public std::runtime_error {
 public:
  DenominatorError(const Eigen::VectorXd& point, double value);
  const Eigen::VectorXd& point() const noexcept { return point_; }
  double value() const noexcept { return value_; }

 private:
  Eigen::VectorXd point_;
  double value_;
};

/// sin(2 pi j x_i / I_i) then cos(2 pi j x_i / I_i), for i = 1..d, j = 1..k.
struct PeriodicFeatures {
  std::vector<double> periods;
  int k = 1;

  int size() const { return 2 * k * static_cast<int>(periods.size()); }
};

ad::Jet periodic_features(const ad::Jet& x, const PeriodicFeatures& f);
Matrix periodic_features(const Matrix& x, const PeriodicFeatures& f);

struct Fields {
  ad::Jet u;
  std::optional<ad::Jet> p;
  std::optional<ad::Jet> v;
  /// Construction variables the fields are recovered from: {r1, r2} for
  /// SumDiff, {r} for Augmented.
  std::vector<ad::Jet> aux;
};

struct TrialSpec {
  Construction construction = Construction::Penalty;
  geo::Domain domain;
  geo::BoundarySet data;
  nn::NetworkSpec u;
  std::optional<nn::NetworkSpec> p;
  std::optional<nn::NetworkSpec> v;
  std::optional<PeriodicFeatures> periodic;
};

class Trial {
 public:
  /// Validates network shapes and the boundary data the construction needs.
  explicit Trial(TrialSpec spec);

  const TrialSpec& spec() const noexcept { return spec_; }
  Construction construction() const noexcept { return spec_.construction; }
  ConstraintKind kind() const noexcept { return constraint_kind(spec_.construction); }
  const geo::Domain& domain() const noexcept { return spec_.domain; }
  const nn::Bundle& bundle() const noexcept { return bundle_; }
  std::size_t parameter_count() const noexcept { return bundle_.parameter_count(); }
  bool has_p() const noexcept { return p_net_ >= 0; }
  bool has_v() const noexcept { return v_net_ >= 0; }
  /// Index of the u, p or v network in the bundle, -1 when absent.
  int u_net() const noexcept { return 0; }
  int p_net() const noexcept { return p_net_; }
  int v_net() const noexcept { return v_net_; }

  std::vector<double> init(std::uint64_t seed) const { return bundle_.init(seed); }

  /// `x` carries input_dim rows. Throws DenominatorError when a Neumann or
  /// Robin denominator falls below kDenominatorFloor.
  Fields evaluate(ad::Tape& tape, const ad::Jet& x) const;

 private:
  ad::Jet net(int i, ad::Tape& tape, const ad::Jet& x) const;
  ad::Jet flux_mim(const geo::BoundaryData& b, const ad::Jet& x, const ad::Jet& n_star,
                   const ad::Jet* u) const;
  ad::Jet scalar_dgm(const geo::BoundaryData& b, ad::Tape& tape, const ad::Jet& x,
                     bool robin) const;

  TrialSpec spec_;
  nn::Bundle bundle_;
  int p_net_ = -1;
  int v_net_ = -1;
};

// Factories. Network specs must have d_in equal to the network input size
// (input_dim, or the feature count for periodic trials); output sizes are
// checked against the construction.
Trial penalty_trial(const geo::Domain& domain, const nn::NetworkSpec& u,
                    std::optional<nn::NetworkSpec> p = {}, std::optional<nn::NetworkSpec> v = {});
Trial dirichlet_trial(const geo::Domain& domain, const geo::BoundaryData& data,
                      const nn::NetworkSpec& u, std::optional<nn::NetworkSpec> p = {});
Trial neumann_trial_dgm(const geo::Domain& domain, const geo::BoundaryData& data,
                        const nn::NetworkSpec& u);
Trial neumann_trial_mim(const geo::Domain& domain, const geo::BoundaryData& data,
                        const nn::NetworkSpec& u, const nn::NetworkSpec& p);
Trial mixed_trial_mim(const geo::Domain& domain, const geo::BoundaryData& dirichlet,
                      const geo::BoundaryData& neumann, const nn::NetworkSpec& u,
                      const nn::NetworkSpec& p);
Trial robin_trial_dgm(const geo::Domain& domain, const geo::BoundaryData& data,
                      const nn::NetworkSpec& u);
Trial robin_trial_mim(const geo::Domain& domain, const geo::BoundaryData& data,
                      const nn::NetworkSpec& u, const nn::NetworkSpec& p);
enum class RobinSplit { SumDiff, Augmented };
Trial robin_split_trial(const geo::Domain& domain, const geo::BoundaryData& data,
                        const nn::NetworkSpec& u, const nn::NetworkSpec& p, RobinSplit variant);
Trial periodic_trial(const geo::Domain& domain, const PeriodicFeatures& features,
                     const nn::NetworkSpec& u, std::optional<nn::NetworkSpec> p = {});
/// Unit cube time cylinder; p and v are free networks when given.
Trial parabolic_trial(const geo::Domain& domain, const nn::NetworkSpec& u,
                      std::optional<nn::NetworkSpec> p = {}, std::optional<nn::NetworkSpec> v = {});
Trial wave_trial_mim2(const geo::Domain& domain, const nn::NetworkSpec& u,
                      const nn::NetworkSpec& v, const nn::NetworkSpec& p);

struct ExactnessReport {
  std::string constraint;
  double max_residual = 0.0;
  /// Magnitude of the prescribed data, for relative tolerances (at least 1).
  double scale = 1.0;
  /// True when the constraint involves input derivatives.
  bool derivative = false;
  Eigen::VectorXd worst_point;
};

/// Samples `count` points on every constraint set of the trial and returns the
/// largest residual. Penalty trials are rejected.
std::vector<ExactnessReport> verify_exactness(const Trial& trial, std::span<const double> params,
                                              Index count, Rng& rng);

}  // namespace mim::con
