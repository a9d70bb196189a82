#pragma once

// Reverse-mode tape over dense matrix-valued nodes.
//
// Every node holds a matrix value. Parameter leaves are declared once, up
// front, from a flat parameter vector and a block layout; everything else is
// appended by the operations in ops.hpp and jet.hpp. Input derivatives are not
// handled here: they are carried forward as extra value channels (see Jet),
// so one reverse sweep over this tape yields parameter gradients of losses
// that already contain input derivatives.

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mim::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

class Tape;

/// Raised when an operation produces NaN or infinity.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::size_t node, std::string op)
      : std::runtime_error("non-finite value produced by node #" + std::to_string(node) +
                           " (" + op + ")"),
        node_(node),
        op_(std::move(op)) {}

  std::size_t node() const noexcept { return node_; }
  const std::string& op() const noexcept { return op_; }

 private:
  std::size_t node_;
  std::string op_;
};

/// A contiguous rows x cols column-major slice of the flat parameter vector.
struct ParamBlock {
  std::size_t offset = 0;
  Index rows = 0;
  Index cols = 0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(rows * cols); }
};

/// Handle to a tape node. Handles are invalidated by Tape::clear().
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const;
  std::size_t index() const noexcept { return index_; }
  std::uint64_t generation() const noexcept { return generation_; }

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index, std::uint64_t generation)
      : tape_(tape), index_(index), generation_(generation) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
  std::uint64_t generation_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  /// Tape with no parameters (constants only).
  Tape();
  /// Declares one leaf per block. The parameter span must outlive the tape.
  Tape(std::span<const double> params, std::vector<ParamBlock> blocks);

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t leaf_count() const noexcept { return blocks_.size(); }
  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::uint64_t generation() const noexcept { return generation_; }

  /// Leaf for parameter block `block`.
  Var param(std::size_t block);
  const std::vector<ParamBlock>& blocks() const noexcept { return blocks_; }

  Var constant(Matrix value);
  Var constant(double value);

  /// Appends a node. `backward` receives the node index and must accumulate
  /// into parents through accumulate(). Parents that do not require gradients
  /// are ignored by accumulate().
  Var push(Matrix value, const char* op, std::span<const Var> parents, Backward backward);
  Var push(Matrix value, const char* op, std::initializer_list<Var> parents, Backward backward) {
    return push(std::move(value), op, std::span<const Var>(parents.begin(), parents.size()),
                std::move(backward));
  }

  /// Drops every non-leaf node and invalidates outstanding handles.
  void clear();

  /// Reverse sweep from a 1x1 node; returns d(root)/d(theta) with zeros for
  /// unreachable parameters.
  std::vector<double> gradient(const Var& root);

  // Accessors used by backward closures.
  const Matrix& value(std::size_t node) const { return nodes_[node].value; }
  const Matrix& grad(std::size_t node) const { return nodes_[node].grad; }
  bool has_grad(std::size_t node) const { return nodes_[node].grad.size() != 0; }
  bool requires_grad(std::size_t node) const { return nodes_[node].requires_grad; }
  template <typename Derived>
  void accumulate(std::size_t node, const Eigen::MatrixBase<Derived>& g);
  /// Adds `g` into a sub-block of the gradient of `node`.
  template <typename Derived>
  void accumulate_block(std::size_t node, Index r0, Index c0, const Eigen::MatrixBase<Derived>& g);

  const Var& check(const Var& v) const;

  /// With eager checks off, push() skips the per-node scan; call
  /// require_finite() on the result instead, which names the first offending
  /// node when the result is not finite.
  void set_finite_checks(bool on) noexcept { check_finite_ = on; }
  bool finite_checks() const noexcept { return check_finite_; }
  void require_finite(const Var& v) const;

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    const char* op = "";
    bool requires_grad = false;
    Backward backward;
  };

  void ensure_grad(std::size_t node);

  std::span<const double> params_;
  std::vector<ParamBlock> blocks_;
  std::vector<Node> nodes_;
  std::uint64_t generation_ = 1;
  bool check_finite_ = true;
};

template <typename Derived>
void Tape::accumulate(std::size_t node, const Eigen::MatrixBase<Derived>& g) {
  Node& n = nodes_[node];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

template <typename Derived>
void Tape::accumulate_block(std::size_t node, Index r0, Index c0,
                            const Eigen::MatrixBase<Derived>& g) {
  if (!nodes_[node].requires_grad) return;
  ensure_grad(node);
  nodes_[node].grad.block(r0, c0, g.rows(), g.cols()) += g;
}

}  // namespace mim::ad
