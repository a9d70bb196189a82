#pragma once

// Batched truncated Taylor jets in the input variables, recorded on a Tape.
//
// A Jet describes a field with `rows` components evaluated at `batch` points.
// Its values and input derivatives are packed side by side into one tape node
// of shape rows x (batch * channels):
//
//   [ value | d/dx_1 ... d/dx_T | d2/dx_1^2 ... d2/dx_T^2 ]
//
// Only pure second derivatives are carried, which is all a Laplacian or u_tt
// needs. Because every channel is an ordinary tape value, reverse sweeps
// differentiate input-derivative expressions with respect to parameters.

#include "mim/ad/ops.hpp"

#include <functional>

namespace mim::ad {

/// Derivative order carried by a jet: 0 values only, 1 adds gradients,
/// 2 adds pure second derivatives.
enum class Order : int { Value = 0, First = 1, Second = 2 };

class Jet {
 public:
  Jet() = default;
  Jet(Var packed, Index batch, int tangents, bool curvature);

  const Var& packed() const noexcept { return packed_; }
  Tape& tape() const { return packed_.tape(); }
  Index rows() const { return packed_.rows(); }
  Index batch() const noexcept { return batch_; }
  int tangents() const noexcept { return tangents_; }
  bool has_curvature() const noexcept { return curvature_; }
  int channels() const noexcept { return 1 + tangents_ + (curvature_ ? tangents_ : 0); }
  Order order() const noexcept;

  /// rows x batch blocks of the packed node.
  Var value() const;
  Var tangent(int i) const;
  Var curvature(int i) const;

  // Copies of channel data; no tape nodes are created.
  Matrix value_matrix() const;
  Matrix tangent_matrix(int i) const;
  Matrix curvature_matrix(int i) const;

  /// Row r as a 1-row jet.
  Jet row(Index r) const;
  Jet rows(Index r0, Index n) const;

  /// For a scalar jet: d x batch matrix of first derivatives over the first
  /// `dims` inputs (all tangents when dims < 0).
  Var gradient(int dims = -1) const;
  /// For a scalar jet: sum of pure second derivatives over the first `dims`
  /// inputs.
  Var laplacian(int dims = -1) const;
  /// For a jet with rows >= dims: sum_i d(row i)/dx_i over i < dims.
  Var divergence(int dims = -1) const;

 private:
  Var packed_;
  Index batch_ = 0;
  int tangents_ = 0;
  bool curvature_ = false;
};

/// Seeds input derivatives. `x` is d x batch; component i gets tangent e_i and
/// zero curvature. Rejects non-finite input.
Jet lift_inputs(Tape& tape, const Matrix& x, Order order);
/// Single point convenience.
Jet lift_input(Tape& tape, std::span<const double> x, Order order);

/// A jet with the given values and zero input derivatives, laid out like `like`.
Jet jet_constant(const Jet& like, const Matrix& value);
/// Reshapes a plain rows x batch tape value into a jet with zero derivatives.
Jet jet_from_value(const Var& value, const Jet& like);

Jet operator+(const Jet& a, const Jet& b);
Jet operator-(const Jet& a, const Jet& b);
Jet operator*(const Jet& a, const Jet& b);
Jet operator/(const Jet& a, const Jet& b);
Jet operator-(const Jet& a);
Jet operator*(double s, const Jet& a);
Jet operator+(const Jet& a, double s);
Jet operator-(const Jet& a, double s);
inline Jet operator*(const Jet& a, double s) { return s * a; }
inline Jet operator+(double s, const Jet& a) { return a + s; }
inline Jet operator-(double s, const Jet& a) { return -a + s; }

Jet jet_apply(Unary f, const Jet& a, double p = 0.0);
/// f^(k)(a) for k in {0, 1}.
Jet jet_apply_derivative(Unary f, const Jet& a, int k, double p = 0.0);
inline Jet exp(const Jet& a) { return jet_apply(Unary::Exp, a); }
inline Jet sin(const Jet& a) { return jet_apply(Unary::Sin, a); }
inline Jet cos(const Jet& a) { return jet_apply(Unary::Cos, a); }
inline Jet sqrt(const Jet& a) { return jet_apply(Unary::Sqrt, a); }
inline Jet square(const Jet& a) { return jet_apply(Unary::Square, a); }
inline Jet pow(const Jet& a, double p) { return jet_apply(Unary::Pow, a, p); }

/// W * a applied to every channel (W is out x rows).
Jet linear(const Var& weight, const Jet& a);
/// W * a + b in one node (b is a column added to the value channel only).
Jet affine(const Var& weight, const Jet& a, const Var& bias);
/// Adds a rows x 1 bias to the value channel.
Jet add_bias(const Jet& a, const Var& bias);
/// Adds a rows x batch matrix to the value channel.
Jet add_values(const Jet& a, const Matrix& values);

Jet vcat(const std::vector<Jet>& parts);
/// Sum over rows, giving a 1-row jet.
Jet sum_rows(const Jet& a);
/// Repeats a 1-row jet `rows` times.
Jet broadcast_rows(const Jet& a, Index rows);
/// Componentwise product of a multi-row jet with a 1-row jet.
Jet scale_rows(const Jet& a, const Jet& scalar);
/// Sum_i a_i b_i over rows.
Jet dot(const Jet& a, const Jet& b);

using JetFunction = std::function<Jet(const Jet&)>;

/// Gradient of a scalar field at one point; the result (d x 1) stays on the
/// tape so losses may depend on it.
Var grad_wrt_inputs(Tape& tape, const JetFunction& f, std::span<const double> x);
/// Laplacian of a scalar field at one point (1 x 1, on the tape).
Var laplacian_wrt_inputs(Tape& tape, const JetFunction& f, std::span<const double> x);

/// Gradient of a 1x1 node with respect to every parameter of its tape.
std::vector<double> param_gradients(const Var& loss);

}  // namespace mim::ad
