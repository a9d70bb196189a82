#pragma once

// Residual networks built on the jet API.
//
// Parameter layout of one network, each block column-major:
//   [A (n x d_in), c (n)]            Linear lift only
//   for k = 1..m: W1_k, b1_k, W2_k, b2_k
//   W_out (d_out x n), b_out (d_out)
// With the ZeroPad lift W1_1 is n x d_in: it acts on the unpadded input, which
// is all the padded product ever sees.

#include "mim/ad/jet.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mim::nn {

using ad::Index;
using ad::Matrix;

enum class Activation { ReQu, ReCu, Swish };
enum class Lift { ZeroPad, Linear };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view s);

double activation_eval(Activation a, double x);
ad::Unary activation_unary(Activation a);

struct NetworkSpec {
  int d_in = 1;
  int n = 10;
  int m = 2;
  int d_out = 1;
  Activation activation = Activation::ReQu;
  Lift lift = Lift::ZeroPad;

  /// Throws std::invalid_argument when the invariants do not hold.
  void validate() const;
};

/// ZeroPad when d_in <= n, Linear otherwise.
Lift default_lift(int d_in, int n);
NetworkSpec make_spec(int d_in, int n, int m, int d_out, Activation a);

/// Parameter blocks of one network, starting at `offset` in a flat vector.
std::vector<ad::ParamBlock> layout(const NetworkSpec& spec, std::size_t offset = 0);
std::size_t count_parameters(const NetworkSpec& spec);

enum class Method { DGM, MIM };
/// Closed-form count for the u-network (DGM) or the u- and p-networks (MIM).
std::size_t count_parameters(Method method, int m, int n, int d);

/// Xavier-uniform weights, zero biases.
std::vector<double> init_parameters(const NetworkSpec& spec, std::uint64_t seed);

/// Forward pass; the network's blocks are tape leaves first_block,
/// first_block + 1, ... in layout() order.
ad::Jet forward(const NetworkSpec& spec, ad::Tape& tape, std::size_t first_block,
                const ad::Jet& x);

/// The network and its derivative along the field `dir`, (N, grad N . dir),
/// both as jets in the inputs of `x`. `dir` has d_in rows.
std::pair<ad::Jet, ad::Jet> forward_directional(const NetworkSpec& spec, ad::Tape& tape,
                                                std::size_t first_block, const ad::Jet& x,
                                                const ad::Jet& dir);

/// Plain evaluation at the columns of `x` (d_in x batch).
Matrix evaluate(const NetworkSpec& spec, std::span<const double> params, const Matrix& x);

/// Several networks sharing one flat parameter vector, laid out back to back.
class Bundle {
 public:
  Bundle() = default;
  explicit Bundle(std::vector<NetworkSpec> specs);

  std::size_t size() const noexcept { return specs_.size(); }
  const NetworkSpec& spec(std::size_t i) const { return specs_.at(i); }
  std::size_t parameter_count() const noexcept { return total_; }
  /// Offset of network i in the flat vector, and its parameter count.
  std::size_t offset(std::size_t i) const { return offsets_.at(i); }
  std::size_t count(std::size_t i) const { return count_parameters(specs_.at(i)); }
  /// Leaf layout for a tape over the whole vector.
  const std::vector<ad::ParamBlock>& blocks() const noexcept { return blocks_; }

  ad::Jet forward(std::size_t i, ad::Tape& tape, const ad::Jet& x) const;
  std::pair<ad::Jet, ad::Jet> forward_directional(std::size_t i, ad::Tape& tape, const ad::Jet& x,
                                                  const ad::Jet& dir) const;
  std::vector<double> init(std::uint64_t seed) const;

 private:
  std::vector<NetworkSpec> specs_;
  std::vector<std::size_t> offsets_, first_block_;
  std::vector<ad::ParamBlock> blocks_;
  std::size_t total_ = 0;
};

}  // namespace mim::nn
