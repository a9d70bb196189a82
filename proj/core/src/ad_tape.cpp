#include "mim/ad/tape.hpp"

namespace mim::ad {
namespace {

// x * 0 is 0 for finite x and NaN otherwise; the sum vectorizes, unlike
// DenseBase::allFinite.
bool finite(const Matrix& m) { return (m.array() * 0.0).sum() == 0.0; }

}  // namespace

Tape& Var::tape() const {
  if (tape_ == nullptr) throw std::logic_error("Var: empty handle");
  return *tape_;
}

const Matrix& Var::value() const {
  const Tape& t = tape();
  t.check(*this);
  return t.value(index_);
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw std::invalid_argument("Var::scalar: node is " + std::to_string(v.rows()) + "x" +
                                std::to_string(v.cols()));
  }
  return v(0, 0);
}

Tape::Tape() = default;

Tape::Tape(std::span<const double> params, std::vector<ParamBlock> blocks)
    : params_(params), blocks_(std::move(blocks)) {
  nodes_.reserve(blocks_.size() + 256);
  for (const ParamBlock& b : blocks_) {
    if (b.offset + b.size() > params_.size()) {
      throw std::out_of_range("Tape: parameter block [" + std::to_string(b.offset) + ", " +
                              std::to_string(b.offset + b.size()) + ") exceeds " +
                              std::to_string(params_.size()) + " parameters");
    }
    Node n;
    n.value = Eigen::Map<const Matrix>(params_.data() + b.offset, b.rows, b.cols);
    n.op = "param";
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
  }
}

Var Tape::param(std::size_t block) {
  if (block >= blocks_.size()) throw std::out_of_range("Tape::param: no such block");
  return Var(this, block, generation_);
}

Var Tape::constant(Matrix value) {
  return push(std::move(value), "const", {}, nullptr);
}

Var Tape::constant(double value) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m));
}

const Var& Tape::check(const Var& v) const {
  if (v.tape_ != this) throw std::invalid_argument("Var belongs to a different tape");
  if (v.index_ >= nodes_.size() || (v.index_ >= blocks_.size() && v.generation_ != generation_)) {
    throw std::invalid_argument("stale tape handle #" + std::to_string(v.index_));
  }
  return v;
}

Var Tape::push(Matrix value, const char* op, std::span<const Var> parents,
               Backward backward) {
  bool needs = false;
  for (const Var& p : parents) {
    check(p);
    needs = needs || nodes_[p.index_].requires_grad;
  }
  const std::size_t idx = nodes_.size();
  if (check_finite_ && !finite(value)) throw NonFiniteError(idx, op);
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.requires_grad = needs;
  if (needs) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, idx, generation_);
}

void Tape::require_finite(const Var& v) const {
  check(v);
  if (finite(nodes_[v.index_].value)) return;
  for (std::size_t i = 0; i <= v.index_; ++i) {
    if (!finite(nodes_[i].value)) throw NonFiniteError(i, nodes_[i].op);
  }
}

void Tape::clear() {
  nodes_.resize(blocks_.size());
  for (Node& n : nodes_) n.grad.resize(0, 0);
  ++generation_;
}

void Tape::ensure_grad(std::size_t node) {
  Node& n = nodes_[node];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
}

std::vector<double> Tape::gradient(const Var& root) {
  check(root);
  const Matrix& rv = nodes_[root.index_].value;
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw std::invalid_argument("Tape::gradient: root must be 1x1");
  }
  for (Node& n : nodes_) n.grad.resize(0, 0);

  std::vector<double> out(params_.size(), 0.0);
  if (!nodes_[root.index_].requires_grad) return out;

  nodes_[root.index_].grad = Matrix::Ones(1, 1);
  for (std::size_t i = root.index_ + 1; i-- > blocks_.size();) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, i);
    n.grad.resize(0, 0);
  }
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const Matrix& g = nodes_[b].grad;
    if (g.size() == 0) continue;
    Eigen::Map<Matrix>(out.data() + blocks_[b].offset, blocks_[b].rows, blocks_[b].cols) += g;
  }
  return out;
}

}  // namespace mim::ad
