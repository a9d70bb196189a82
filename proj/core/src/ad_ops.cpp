#include "mim/ad/ops.hpp"

#include <Eigen/LU>

#include <cmath>

namespace mim::ad {
namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                "x" + std::to_string(b.cols()));
  }
  if (&a.tape() != &b.tape()) throw std::invalid_argument(std::string(op) + ": tapes differ");
}

}  // namespace

const char* unary_name(Unary f) {
  switch (f) {
    case Unary::Exp: return "exp";
    case Unary::Sin: return "sin";
    case Unary::Cos: return "cos";
    case Unary::Sqrt: return "sqrt";
    case Unary::Reciprocal: return "reciprocal";
    case Unary::Square: return "square";
    case Unary::Cube: return "cube";
    case Unary::Pow: return "pow";
    case Unary::ReQu: return "requ";
    case Unary::ReCu: return "recu";
    case Unary::Swish: return "swish";
  }
  return "?";
}

UnaryDerivatives unary_derivatives(Unary f, const Matrix& x, int order, double p) {
  UnaryDerivatives r;
  const auto xa = x.array();
  switch (f) {
    case Unary::Exp: {
      r.f = xa.exp().matrix();
      if (order >= 1) r.d1 = r.f;
      if (order >= 2) r.d2 = r.f;
      if (order >= 3) r.d3 = r.f;
      if (order >= 4) r.d4 = r.f;
      break;
    }
    case Unary::Sin: {
      const Matrix s = xa.sin().matrix();
      r.f = s;
      if (order >= 1) r.d1 = xa.cos().matrix();
      if (order >= 2) r.d2 = -s;
      if (order >= 3) r.d3 = -r.d1;
      if (order >= 4) r.d4 = s;
      break;
    }
    case Unary::Cos: {
      const Matrix c = xa.cos().matrix();
      r.f = c;
      if (order >= 1) r.d1 = -xa.sin().matrix();
      if (order >= 2) r.d2 = -c;
      if (order >= 3) r.d3 = -r.d1;
      if (order >= 4) r.d4 = c;
      break;
    }
    case Unary::Sqrt: {
      r.f = xa.sqrt().matrix();
      if (order >= 1) r.d1 = (0.5 / r.f.array()).matrix();
      if (order >= 2) r.d2 = (-0.25 / (xa * r.f.array())).matrix();
      if (order >= 3) r.d3 = (0.375 / (xa * xa * r.f.array())).matrix();
      if (order >= 4) r.d4 = (-0.9375 / (xa * xa * xa * r.f.array())).matrix();
      break;
    }
    case Unary::Reciprocal: {
      r.f = xa.inverse().matrix();
      if (order >= 1) r.d1 = (-r.f.array().square()).matrix();
      if (order >= 2) r.d2 = (2.0 * r.f.array().cube()).matrix();
      if (order >= 3) r.d3 = (-6.0 * r.f.array().square().square()).matrix();
      if (order >= 4) r.d4 = (24.0 * r.f.array().square().square() * r.f.array()).matrix();
      break;
    }
    case Unary::Square: {
      r.f = xa.square().matrix();
      if (order >= 1) r.d1 = (2.0 * xa).matrix();
      if (order >= 2) r.d2 = Matrix::Constant(x.rows(), x.cols(), 2.0);
      if (order >= 3) r.d3 = Matrix::Zero(x.rows(), x.cols());
      if (order >= 4) r.d4 = Matrix::Zero(x.rows(), x.cols());
      break;
    }
    case Unary::Cube: {
      r.f = xa.cube().matrix();
      if (order >= 1) r.d1 = (3.0 * xa.square()).matrix();
      if (order >= 2) r.d2 = (6.0 * xa).matrix();
      if (order >= 3) r.d3 = Matrix::Constant(x.rows(), x.cols(), 6.0);
      if (order >= 4) r.d4 = Matrix::Zero(x.rows(), x.cols());
      break;
    }
    case Unary::Pow: {
      r.f = xa.pow(p).matrix();
      if (order >= 1) r.d1 = (p * xa.pow(p - 1.0)).matrix();
      if (order >= 2) r.d2 = (p * (p - 1.0) * xa.pow(p - 2.0)).matrix();
      if (order >= 3) r.d3 = (p * (p - 1.0) * (p - 2.0) * xa.pow(p - 3.0)).matrix();
      if (order >= 4) r.d4 = (p * (p - 1.0) * (p - 2.0) * (p - 3.0) * xa.pow(p - 4.0)).matrix();
      break;
    }
    case Unary::ReQu: {
      // Second derivative at exactly 0 takes the zero branch.
      const auto pos = xa.max(0.0);
      r.f = pos.square().matrix();
      if (order >= 1) r.d1 = (2.0 * pos).matrix();
      if (order >= 2) r.d2 = (xa > 0.0).select(2.0, Matrix::Zero(x.rows(), x.cols())).matrix();
      if (order >= 3) r.d3 = Matrix::Zero(x.rows(), x.cols());
      if (order >= 4) r.d4 = Matrix::Zero(x.rows(), x.cols());
      break;
    }
    case Unary::ReCu: {
      const auto pos = xa.max(0.0);
      r.f = pos.cube().matrix();
      if (order >= 1) r.d1 = (3.0 * pos.square()).matrix();
      if (order >= 2) r.d2 = (6.0 * pos).matrix();
      if (order >= 3) r.d3 = (xa > 0.0).select(6.0, Matrix::Zero(x.rows(), x.cols())).matrix();
      if (order >= 4) r.d4 = Matrix::Zero(x.rows(), x.cols());
      break;
    }
    case Unary::Swish: {
      // s = sigmoid(x); f = x s; f' = s + x s(1-s);
      // f'' = s(1-s)(2 + x(1-2s)); f''' = s(1-s)(3(1-2s) + x(1 - 6s + 6s^2));
      // f'''' = s(1-s)(4(1 - 6s + 6s^2) + x(1-2s)(1 - 12s + 12s^2)).
      const Eigen::ArrayXXd s = (1.0 + (-xa).exp()).inverse();
      const Eigen::ArrayXXd q = s * (1.0 - s);
      r.f = (xa * s).matrix();
      if (order >= 1) r.d1 = (s + xa * q).matrix();
      if (order >= 2) r.d2 = (q * (2.0 + xa * (1.0 - 2.0 * s))).matrix();
      if (order >= 3) r.d3 = (q * (3.0 * (1.0 - 2.0 * s) + xa * (1.0 - 6.0 * s + 6.0 * s * s))).matrix();
      if (order >= 4) {
        r.d4 = (q * (4.0 * (1.0 - 6.0 * s + 6.0 * s * s) +
                     xa * (1.0 - 2.0 * s) * (1.0 - 12.0 * s + 12.0 * s * s)))
                   .matrix();
      }
      break;
    }
  }
  return r;
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  const std::size_t ia = a.index(), ib = b.index();
  return a.tape().push(a.value() + b.value(), "add", {a, b}, [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  const std::size_t ia = a.index(), ib = b.index();
  return a.tape().push(a.value() - b.value(), "sub", {a, b}, [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, -t.grad(self));
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  const std::size_t ia = a.index(), ib = b.index();
  return a.tape().push(a.value().cwiseProduct(b.value()), "mul", {a, b},
                       [ia, ib](Tape& t, std::size_t self) {
                         const Matrix& g = t.grad(self);
                         if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
                         if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
                       });
}

Var div(const Var& a, const Var& b) { return mul(a, apply(Unary::Reciprocal, b)); }

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double s) {
  const std::size_t ia = a.index();
  return a.tape().push(s * a.value(), "scale", {a}, [ia, s](Tape& t, std::size_t self) {
    t.accumulate(ia, s * t.grad(self));
  });
}

Var add_scalar(const Var& a, double s) {
  const std::size_t ia = a.index();
  return a.tape().push((a.value().array() + s).matrix(), "add_scalar", {a},
                       [ia](Tape& t, std::size_t self) { t.accumulate(ia, t.grad(self)); });
}

Var apply(Unary f, const Var& a, double p) {
  UnaryDerivatives d = unary_derivatives(f, a.value(), 1, p);
  const std::size_t ia = a.index();
  return a.tape().push(std::move(d.f), unary_name(f), {a},
                       [ia, d1 = std::move(d.d1)](Tape& t, std::size_t self) {
                         t.accumulate(ia, t.grad(self).cwiseProduct(d1));
                       });
}

Var square(const Var& a) { return apply(Unary::Square, a); }

Matrix gemm(const Matrix& a, const Matrix& b) {
  // Always the blocked kernel: Eigen would otherwise switch to a
  // coefficient-wise product for small operands, and the two round
  // differently, so values would depend on the batch width.
  Matrix v = Matrix::Zero(a.rows(), b.cols());
  Eigen::internal::generic_product_impl<Matrix, Matrix, Eigen::DenseShape, Eigen::DenseShape,
                                        Eigen::GemmProduct>::scaleAndAddTo(v, a, b, 1.0);
  return v;
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions " + std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()));
  }
  const std::size_t ia = a.index(), ib = b.index();
  Matrix v = gemm(a.value(), b.value());
  return a.tape().push(std::move(v), "matmul", {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

Var add_bias(const Var& x, const Var& bias, Index c0, Index nc) {
  if (bias.cols() != 1 || bias.rows() != x.rows() || c0 < 0 || c0 + nc > x.cols()) {
    throw std::invalid_argument("add_bias: bias " + std::to_string(bias.rows()) + "x" +
                                std::to_string(bias.cols()) + " does not fit " +
                                std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
  }
  Matrix v = x.value();
  v.middleCols(c0, nc).colwise() += bias.value().col(0);
  const std::size_t ix = x.index(), ib = bias.index();
  return x.tape().push(std::move(v), "add_bias", {x, bias},
                       [ix, ib, c0, nc](Tape& t, std::size_t self) {
                         const Matrix& g = t.grad(self);
                         t.accumulate(ix, g);
                         if (t.requires_grad(ib)) t.accumulate(ib, g.middleCols(c0, nc).rowwise().sum());
                       });
}

Var broadcast_rows(const Var& row, Index rows) {
  if (row.rows() != 1) throw std::invalid_argument("broadcast_rows: expected a single row");
  const std::size_t ir = row.index();
  return row.tape().push(row.value().replicate(rows, 1), "broadcast_rows", {row},
                         [ir](Tape& t, std::size_t self) {
                           t.accumulate(ir, t.grad(self).colwise().sum());
                         });
}

Var block(const Var& a, Index r0, Index c0, Index nr, Index nc) {
  if (r0 < 0 || c0 < 0 || r0 + nr > a.rows() || c0 + nc > a.cols()) {
    throw std::out_of_range("block: out of range");
  }
  const std::size_t ia = a.index();
  return a.tape().push(a.value().block(r0, c0, nr, nc), "block", {a},
                       [ia, r0, c0](Tape& t, std::size_t self) {
                         t.accumulate_block(ia, r0, c0, t.grad(self));
                       });
}

Var hcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("hcat: nothing to concatenate");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("hcat: row mismatch");
    cols += p.cols();
  }
  Matrix v(rows, cols);
  std::vector<std::pair<std::size_t, Index>> spans;
  std::vector<Index> widths;
  Index c = 0;
  for (const Var& p : parts) {
    v.middleCols(c, p.cols()) = p.value();
    spans.emplace_back(p.index(), c);
    widths.push_back(p.cols());
    c += p.cols();
  }
  return parts.front().tape().push(std::move(v), "hcat", parts,
                                   [spans, widths](Tape& t, std::size_t self) {
                                     const Matrix& g = t.grad(self);
                                     for (std::size_t k = 0; k < spans.size(); ++k) {
                                       t.accumulate(spans[k].first,
                                                    g.middleCols(spans[k].second, widths[k]));
                                     }
                                   });
}

Var vcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("vcat: nothing to concatenate");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("vcat: column mismatch");
    rows += p.rows();
  }
  Matrix v(rows, cols);
  std::vector<std::pair<std::size_t, Index>> spans;
  std::vector<Index> heights;
  Index r = 0;
  for (const Var& p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    spans.emplace_back(p.index(), r);
    heights.push_back(p.rows());
    r += p.rows();
  }
  return parts.front().tape().push(std::move(v), "vcat", parts,
                                   [spans, heights](Tape& t, std::size_t self) {
                                     const Matrix& g = t.grad(self);
                                     for (std::size_t k = 0; k < spans.size(); ++k) {
                                       t.accumulate(spans[k].first,
                                                    g.middleRows(spans[k].second, heights[k]));
                                     }
                                   });
}

Var sum(const Var& a) {
  const std::size_t ia = a.index();
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  const Index r = a.rows(), c = a.cols();
  return a.tape().push(std::move(v), "sum", {a}, [ia, r, c](Tape& t, std::size_t self) {
    t.accumulate(ia, Matrix::Constant(r, c, t.grad(self)(0, 0)));
  });
}

Var sum_rows(const Var& a) {
  const std::size_t ia = a.index();
  const Index r = a.rows();
  return a.tape().push(a.value().colwise().sum(), "sum_rows", {a},
                       [ia, r](Tape& t, std::size_t self) {
                         t.accumulate(ia, t.grad(self).replicate(r, 1));
                       });
}

Var sum_squares(const Var& a) {
  const std::size_t ia = a.index();
  Matrix v(1, 1);
  v(0, 0) = a.value().squaredNorm();
  return a.tape().push(std::move(v), "sum_squares", {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, (2.0 * t.grad(self)(0, 0)) * t.value(ia));
  });
}

namespace {

using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDeterminantSize,
                                  kMaxDeterminantSize>;

double small_det(const SmallMatrix& m) {
  switch (m.rows()) {
    case 0: return 1.0;
    case 1: return m(0, 0);
    case 2: return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    default: return Eigen::PartialPivLU<SmallMatrix>(m).determinant();
  }
}

// Cofactor matrix from minors, so it stays defined for singular inputs.
SmallMatrix cofactors(const SmallMatrix& m) {
  const Index d = m.rows();
  SmallMatrix c(d, d);
  SmallMatrix minor(d - 1, d - 1);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      for (Index r = 0, mr = 0; r < d; ++r) {
        if (r == i) continue;
        for (Index k = 0, mk = 0; k < d; ++k) {
          if (k == j) continue;
          minor(mr, mk++) = m(r, k);
        }
        ++mr;
      }
      c(i, j) = ((i + j) % 2 ? -1.0 : 1.0) * small_det(minor);
    }
  }
  return c;
}

}  // namespace

Var batched_det(const std::vector<Var>& columns) {
  const Index d = static_cast<Index>(columns.size());
  if (d < 1 || d > kMaxDeterminantSize) {
    throw std::invalid_argument("batched_det: size " + std::to_string(d) + " outside [1, " +
                                std::to_string(kMaxDeterminantSize) + "]");
  }
  const Index batch = columns[0].cols();
  for (const Var& c : columns) {
    if (c.rows() != d || c.cols() != batch) {
      throw std::invalid_argument("batched_det: every column must be " + std::to_string(d) + "x" +
                                  std::to_string(batch));
    }
  }
  auto gather = [d](const Tape& t, const std::vector<std::size_t>& idx, Index b) {
    SmallMatrix m(d, d);
    for (Index j = 0; j < d; ++j) m.col(j) = t.value(idx[j]).col(b);
    return m;
  };
  std::vector<std::size_t> idx;
  for (const Var& c : columns) idx.push_back(c.index());
  Tape& tape = columns[0].tape();
  Matrix v(1, batch);
  for (Index b = 0; b < batch; ++b) v(0, b) = small_det(gather(tape, idx, b));
  return tape.push(std::move(v), "det", columns, [idx, d, batch, gather](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    std::vector<Matrix> out(d, Matrix(d, batch));
    for (Index b = 0; b < batch; ++b) {
      const SmallMatrix c = cofactors(gather(t, idx, b));
      for (Index j = 0; j < d; ++j) out[j].col(b) = g(0, b) * c.col(j);
    }
    for (Index j = 0; j < d; ++j) {
      if (t.requires_grad(idx[j])) t.accumulate(idx[j], out[j]);
    }
  });
}

}  // namespace mim::ad
