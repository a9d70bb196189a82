#pragma once

#include "mim/ad/tape.hpp"

#include <vector>

namespace mim::ad {

/// Scalar functions that can be applied elementwise, both to plain nodes and
/// to jets. Each knows its first three derivatives.
enum class Unary {
  Exp,
  Sin,
  Cos,
  Sqrt,
  Reciprocal,
  Square,
  Cube,
  Pow,  // x^p, p given separately
  ReQu,
  ReCu,
  Swish,
};

const char* unary_name(Unary f);

/// f(x) and derivatives up to `order` (<= 4), elementwise.
struct UnaryDerivatives {
  Matrix f, d1, d2, d3, d4;
};
UnaryDerivatives unary_derivatives(Unary f, const Matrix& x, int order, double p = 0.0);

// Elementwise arithmetic. Shapes must agree exactly.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var apply(Unary f, const Var& a, double p = 0.0);
Var square(const Var& a);

/// Plain a * b with a summation order that does not depend on operand size.
Matrix gemm(const Matrix& a, const Matrix& b);

/// Matrix product a * b.
Var matmul(const Var& a, const Var& b);

/// Adds the column vector `bias` (rows x 1) to columns [c0, c0 + nc) of `x`.
Var add_bias(const Var& x, const Var& bias, Index c0, Index nc);

/// Repeats a 1 x c row `rows` times.
Var broadcast_rows(const Var& row, Index rows);

Var block(const Var& a, Index r0, Index c0, Index nr, Index nc);
Var hcat(const std::vector<Var>& parts);
Var vcat(const std::vector<Var>& parts);

/// Sum of all entries (1x1).
Var sum(const Var& a);
/// Column sums (1 x cols).
Var sum_rows(const Var& a);
/// Sum of squares of all entries (1x1).
Var sum_squares(const Var& a);

inline constexpr int kMaxDeterminantSize = 8;
/// Pointwise determinant: columns[j] is d x batch and holds column j of a
/// d x d matrix at every point. Returns 1 x batch. d <= kMaxDeterminantSize.
Var batched_det(const std::vector<Var>& columns);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& a) { return neg(a); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }
inline Var operator+(const Var& a, double s) { return add_scalar(a, s); }
inline Var operator-(const Var& a, double s) { return add_scalar(a, -s); }

}  // namespace mim::ad
