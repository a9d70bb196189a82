#include "mim/ad/jet.hpp"

#include <cmath>
#include <string>

namespace mim::ad {
namespace {

auto channel(Matrix& m, Index batch, int c) { return m.middleCols(c * batch, batch); }
auto channel(const Matrix& m, Index batch, int c) { return m.middleCols(c * batch, batch); }

void require_compatible(const Jet& a, const Jet& b, const char* op) {
  if (a.batch() != b.batch() || a.tangents() != b.tangents() ||
      a.has_curvature() != b.has_curvature()) {
    throw std::invalid_argument(std::string(op) + ": jets have different layouts");
  }
  if (a.rows() != b.rows()) {
    throw std::invalid_argument(std::string(op) + ": row mismatch " + std::to_string(a.rows()) +
                                " vs " + std::to_string(b.rows()));
  }
}

}  // namespace

Jet::Jet(Var packed, Index batch, int tangents, bool curvature)
    : packed_(std::move(packed)), batch_(batch), tangents_(tangents), curvature_(curvature) {
  if (packed_.cols() != batch_ * channels()) {
    throw std::invalid_argument("Jet: packed width " + std::to_string(packed_.cols()) +
                                " does not match " + std::to_string(channels()) + " channels of " +
                                std::to_string(batch_));
  }
}

Order Jet::order() const noexcept {
  if (tangents_ == 0) return Order::Value;
  return curvature_ ? Order::Second : Order::First;
}

Var Jet::value() const { return block(packed_, 0, 0, rows(), batch_); }

Var Jet::tangent(int i) const {
  if (i < 0 || i >= tangents_) throw std::out_of_range("Jet::tangent: no such direction");
  return block(packed_, 0, (1 + i) * batch_, rows(), batch_);
}

Var Jet::curvature(int i) const {
  if (!curvature_ || i < 0 || i >= tangents_) {
    throw std::out_of_range("Jet::curvature: second derivatives not carried");
  }
  return block(packed_, 0, (1 + tangents_ + i) * batch_, rows(), batch_);
}

Matrix Jet::value_matrix() const { return packed_.value().leftCols(batch_); }

Matrix Jet::tangent_matrix(int i) const {
  if (i < 0 || i >= tangents_) throw std::out_of_range("Jet::tangent_matrix");
  return packed_.value().middleCols((1 + i) * batch_, batch_);
}

Matrix Jet::curvature_matrix(int i) const {
  if (!curvature_ || i < 0 || i >= tangents_) throw std::out_of_range("Jet::curvature_matrix");
  return packed_.value().middleCols((1 + tangents_ + i) * batch_, batch_);
}

Jet Jet::row(Index r) const { return rows(r, 1); }

Jet Jet::rows(Index r0, Index n) const {
  return Jet(block(packed_, r0, 0, n, packed_.cols()), batch_, tangents_, curvature_);
}

Var Jet::gradient(int dims) const {
  if (rows() != 1) throw std::invalid_argument("Jet::gradient: scalar field expected");
  const int n = dims < 0 ? tangents_ : dims;
  if (n > tangents_) throw std::out_of_range("Jet::gradient: not enough tangents");
  std::vector<Var> parts;
  parts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) parts.push_back(tangent(i));
  return ad::vcat(parts);
}

Var Jet::laplacian(int dims) const {
  if (rows() != 1) throw std::invalid_argument("Jet::laplacian: scalar field expected");
  const int n = dims < 0 ? tangents_ : dims;
  if (!curvature_ || n > tangents_) throw std::out_of_range("Jet::laplacian: needs second order");
  Var acc = curvature(0);
  for (int i = 1; i < n; ++i) acc = acc + curvature(i);
  return acc;
}

Var Jet::divergence(int dims) const {
  const int n = dims < 0 ? tangents_ : dims;
  if (n > tangents_ || rows() < n) throw std::out_of_range("Jet::divergence: shape");
  Var acc = block(packed_, 0, batch_, 1, batch_);
  for (int i = 1; i < n; ++i) acc = acc + block(packed_, i, (1 + i) * batch_, 1, batch_);
  return acc;
}

Jet lift_inputs(Tape& tape, const Matrix& x, Order order) {
  if (!x.allFinite()) throw std::invalid_argument("lift_inputs: non-finite input");
  const Index d = x.rows(), batch = x.cols();
  const int tangents = order == Order::Value ? 0 : static_cast<int>(d);
  const bool curv = order == Order::Second;
  const int channels = 1 + tangents + (curv ? tangents : 0);
  Matrix packed = Matrix::Zero(d, batch * channels);
  channel(packed, batch, 0) = x;
  for (int i = 0; i < tangents; ++i) channel(packed, batch, 1 + i).row(i).setOnes();
  return Jet(tape.constant(std::move(packed)), batch, tangents, curv);
}

Jet lift_input(Tape& tape, std::span<const double> x, Order order) {
  Matrix m(static_cast<Index>(x.size()), 1);
  for (std::size_t i = 0; i < x.size(); ++i) m(static_cast<Index>(i), 0) = x[i];
  return lift_inputs(tape, m, order);
}

Jet jet_constant(const Jet& like, const Matrix& value) {
  if (value.cols() != like.batch()) throw std::invalid_argument("jet_constant: batch mismatch");
  Matrix packed = Matrix::Zero(value.rows(), like.batch() * like.channels());
  packed.leftCols(like.batch()) = value;
  return Jet(like.tape().constant(std::move(packed)), like.batch(), like.tangents(),
             like.has_curvature());
}

Jet jet_from_value(const Var& value, const Jet& like) {
  if (value.cols() != like.batch()) throw std::invalid_argument("jet_from_value: batch mismatch");
  std::vector<Var> parts{value};
  if (like.channels() > 1) {
    parts.push_back(
        value.tape().constant(Matrix::Zero(value.rows(), like.batch() * (like.channels() - 1))));
  }
  return Jet(hcat(parts), like.batch(), like.tangents(), like.has_curvature());
}

Jet operator+(const Jet& a, const Jet& b) {
  require_compatible(a, b, "jet add");
  return Jet(add(a.packed(), b.packed()), a.batch(), a.tangents(), a.has_curvature());
}

Jet operator-(const Jet& a, const Jet& b) {
  require_compatible(a, b, "jet sub");
  return Jet(sub(a.packed(), b.packed()), a.batch(), a.tangents(), a.has_curvature());
}

Jet operator-(const Jet& a) { return -1.0 * a; }

Jet operator*(double s, const Jet& a) {
  return Jet(scale(a.packed(), s), a.batch(), a.tangents(), a.has_curvature());
}

Jet operator+(const Jet& a, double s) {
  return add_values(a, Matrix::Constant(a.rows(), a.batch(), s));
}

Jet operator-(const Jet& a, double s) { return a + (-s); }

Jet operator*(const Jet& a, const Jet& b) {
  require_compatible(a, b, "jet mul");
  const Index B = a.batch();
  const int T = a.tangents();
  const bool curv = a.has_curvature();
  const Matrix& A = a.packed().value();
  const Matrix& Bm = b.packed().value();
  Matrix out(A.rows(), A.cols());
  channel(out, B, 0) = channel(A, B, 0).cwiseProduct(channel(Bm, B, 0));
  for (int i = 0; i < T; ++i) {
    channel(out, B, 1 + i) = channel(A, B, 1 + i).cwiseProduct(channel(Bm, B, 0)) +
                             channel(A, B, 0).cwiseProduct(channel(Bm, B, 1 + i));
    if (curv) {
      const int c = 1 + T + i;
      channel(out, B, c) = channel(A, B, c).cwiseProduct(channel(Bm, B, 0)) +
                           2.0 * channel(A, B, 1 + i).cwiseProduct(channel(Bm, B, 1 + i)) +
                           channel(A, B, 0).cwiseProduct(channel(Bm, B, c));
    }
  }
  const std::size_t ia = a.packed().index(), ib = b.packed().index();
  // Adjoint of one factor given the other (the product rule is symmetric).
  auto partner_adjoint = [B, T, curv](const Matrix& g, const Matrix& other) {
    Matrix r(g.rows(), g.cols());
    auto r0 = channel(r, B, 0);
    r0 = channel(g, B, 0).cwiseProduct(channel(other, B, 0));
    for (int i = 0; i < T; ++i) {
      r0 += channel(g, B, 1 + i).cwiseProduct(channel(other, B, 1 + i));
      channel(r, B, 1 + i) = channel(g, B, 1 + i).cwiseProduct(channel(other, B, 0));
      if (curv) {
        const int c = 1 + T + i;
        r0 += channel(g, B, c).cwiseProduct(channel(other, B, c));
        channel(r, B, 1 + i) += 2.0 * channel(g, B, c).cwiseProduct(channel(other, B, 1 + i));
        channel(r, B, c) = channel(g, B, c).cwiseProduct(channel(other, B, 0));
      }
    }
    return r;
  };
  Var v = a.tape().push(std::move(out), "jet_mul", {a.packed(), b.packed()},
                        [ia, ib, partner_adjoint](Tape& t, std::size_t self) {
                          const Matrix& g = t.grad(self);
                          if (t.requires_grad(ia)) t.accumulate(ia, partner_adjoint(g, t.value(ib)));
                          if (t.requires_grad(ib)) t.accumulate(ib, partner_adjoint(g, t.value(ia)));
                        });
  return Jet(v, B, T, curv);
}

Jet operator/(const Jet& a, const Jet& b) { return a * jet_apply(Unary::Reciprocal, b); }

Jet jet_apply(Unary f, const Jet& a, double p) { return jet_apply_derivative(f, a, 0, p); }

Jet jet_apply_derivative(Unary f, const Jet& a, int k, double p) {
  if (k < 0 || k > 1) throw std::invalid_argument("jet_apply_derivative: k must be 0 or 1");
  const Index B = a.batch();
  const int T = a.tangents();
  const bool curv = a.has_curvature();
  const int order = static_cast<int>(a.order());
  const Matrix& A = a.packed().value();
  // Derivatives of f are needed one order beyond the jet for the reverse sweep.
  UnaryDerivatives all = unary_derivatives(f, Matrix(channel(A, B, 0)), order + 1 + k, p);
  Matrix* by_order[] = {&all.f, &all.d1, &all.d2, &all.d3, &all.d4};
  auto take = [&](int j) { return j <= order + 1 ? std::move(*by_order[k + j]) : Matrix(); };
  struct {
    Matrix f, d1, d2, d3;
  } d{take(0), take(1), take(2), take(3)};

  Matrix out(A.rows(), A.cols());
  channel(out, B, 0) = d.f;
  for (int i = 0; i < T; ++i) {
    channel(out, B, 1 + i) = d.d1.cwiseProduct(channel(A, B, 1 + i));
    if (curv) {
      const int c = 1 + T + i;
      channel(out, B, c) = d.d2.cwiseProduct(channel(A, B, 1 + i).cwiseAbs2()) +
                           d.d1.cwiseProduct(channel(A, B, c));
    }
  }
  const std::size_t ia = a.packed().index();
  Var v = a.tape().push(
      std::move(out), k == 0 ? unary_name(f) : "unary_derivative", {a.packed()},
      [ia, B, T, curv, d1 = std::move(d.d1), d2 = std::move(d.d2), d3 = std::move(d.d3)](
          Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        const Matrix& A = t.value(ia);
        Matrix r(g.rows(), g.cols());
        auto r0 = channel(r, B, 0);
        r0 = channel(g, B, 0).cwiseProduct(d1);
        for (int i = 0; i < T; ++i) {
          const auto ti = channel(A, B, 1 + i);
          r0 += channel(g, B, 1 + i).cwiseProduct(d2).cwiseProduct(ti);
          channel(r, B, 1 + i) = channel(g, B, 1 + i).cwiseProduct(d1);
          if (curv) {
            const int c = 1 + T + i;
            const auto gc = channel(g, B, c);
            r0 += gc.cwiseProduct(d3.cwiseProduct(ti.cwiseAbs2()) + d2.cwiseProduct(channel(A, B, c)));
            channel(r, B, 1 + i) += 2.0 * gc.cwiseProduct(d2).cwiseProduct(ti);
            channel(r, B, c) = gc.cwiseProduct(d1);
          }
        }
        t.accumulate(ia, r);
      });
  return Jet(v, B, T, curv);
}

Jet linear(const Var& weight, const Jet& a) {
  return Jet(matmul(weight, a.packed()), a.batch(), a.tangents(), a.has_curvature());
}

Jet affine(const Var& weight, const Jet& a, const Var& bias) {
  const Var& x = a.packed();
  if (weight.cols() != x.rows() || bias.rows() != weight.rows() || bias.cols() != 1) {
    throw std::invalid_argument("affine: weight " + std::to_string(weight.rows()) + "x" +
                                std::to_string(weight.cols()) + ", bias " +
                                std::to_string(bias.rows()) + "x" + std::to_string(bias.cols()) +
                                ", input rows " + std::to_string(x.rows()));
  }
  const Index B = a.batch();
  Matrix v = gemm(weight.value(), x.value());
  v.leftCols(B).colwise() += bias.value().col(0);
  const std::size_t iw = weight.index(), ix = x.index(), ib = bias.index();
  Var out = a.tape().push(std::move(v), "affine", {weight, x, bias},
                          [iw, ix, ib, B](Tape& t, std::size_t self) {
                            const Matrix& g = t.grad(self);
                            if (t.requires_grad(iw)) t.accumulate(iw, g * t.value(ix).transpose());
                            if (t.requires_grad(ix)) t.accumulate(ix, t.value(iw).transpose() * g);
                            if (t.requires_grad(ib)) t.accumulate(ib, g.leftCols(B).rowwise().sum());
                          });
  return Jet(out, B, a.tangents(), a.has_curvature());
}

Jet add_bias(const Jet& a, const Var& bias) {
  return Jet(ad::add_bias(a.packed(), bias, 0, a.batch()), a.batch(), a.tangents(),
             a.has_curvature());
}

Jet add_values(const Jet& a, const Matrix& values) {
  if (values.rows() != a.rows() || values.cols() != a.batch()) {
    throw std::invalid_argument("add_values: shape mismatch");
  }
  Matrix v = a.packed().value();
  v.leftCols(a.batch()) += values;
  const std::size_t ia = a.packed().index();
  Var out = a.tape().push(std::move(v), "jet_add_values", {a.packed()},
                          [ia](Tape& t, std::size_t self) { t.accumulate(ia, t.grad(self)); });
  return Jet(out, a.batch(), a.tangents(), a.has_curvature());
}

Jet vcat(const std::vector<Jet>& parts) {
  if (parts.empty()) throw std::invalid_argument("vcat: no jets");
  std::vector<Var> packed;
  for (const Jet& j : parts) {
    if (j.batch() != parts.front().batch() || j.tangents() != parts.front().tangents() ||
        j.has_curvature() != parts.front().has_curvature()) {
      throw std::invalid_argument("vcat: jets have different layouts");
    }
    packed.push_back(j.packed());
  }
  const Jet& f = parts.front();
  return Jet(ad::vcat(packed), f.batch(), f.tangents(), f.has_curvature());
}

Jet sum_rows(const Jet& a) {
  return Jet(ad::sum_rows(a.packed()), a.batch(), a.tangents(), a.has_curvature());
}

Jet broadcast_rows(const Jet& a, Index rows) {
  return Jet(ad::broadcast_rows(a.packed(), rows), a.batch(), a.tangents(), a.has_curvature());
}

Jet scale_rows(const Jet& a, const Jet& scalar) {
  if (scalar.rows() != 1) throw std::invalid_argument("scale_rows: scalar jet expected");
  return a * (a.rows() == 1 ? scalar : broadcast_rows(scalar, a.rows()));
}

Jet dot(const Jet& a, const Jet& b) { return sum_rows(a * b); }

Var grad_wrt_inputs(Tape& tape, const JetFunction& f, std::span<const double> x) {
  Jet out = f(lift_input(tape, x, Order::First));
  return out.gradient();
}

Var laplacian_wrt_inputs(Tape& tape, const JetFunction& f, std::span<const double> x) {
  Jet out = f(lift_input(tape, x, Order::Second));
  return out.laplacian();
}

std::vector<double> param_gradients(const Var& loss) { return loss.tape().gradient(loss); }

}  // namespace mim::ad
