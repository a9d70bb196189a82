#include "mim/nn/network.hpp"

#include "mim/random.hpp"

#include <cmath>
#include <stdexcept>

namespace mim::nn {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::ReQu: return "requ";
    case Activation::ReCu: return "recu";
    case Activation::Swish: return "swish";
  }
  return "?";
}

Activation parse_activation(std::string_view s) {
  if (s == "requ" || s == "ReQu") return Activation::ReQu;
  if (s == "recu" || s == "ReCu") return Activation::ReCu;
  if (s == "swish") return Activation::Swish;
  throw std::invalid_argument("unknown activation '" + std::string(s) +
                              "' (expected requ, recu or swish)");
}

double activation_eval(Activation a, double x) {
  switch (a) {
    case Activation::ReQu: return x > 0 ? x * x : 0.0;
    case Activation::ReCu: return x > 0 ? x * x * x : 0.0;
    case Activation::Swish: return x / (1.0 + std::exp(-x));
  }
  return 0.0;
}

ad::Unary activation_unary(Activation a) {
  switch (a) {
    case Activation::ReQu: return ad::Unary::ReQu;
    case Activation::ReCu: return ad::Unary::ReCu;
    case Activation::Swish: return ad::Unary::Swish;
  }
  return ad::Unary::ReQu;
}

void NetworkSpec::validate() const {
  if (d_in < 1 || n < 1 || m < 1 || d_out < 1) {
    throw std::invalid_argument("network: d_in, n, m and d_out must be positive (got d_in=" +
                                std::to_string(d_in) + ", n=" + std::to_string(n) +
                                ", m=" + std::to_string(m) + ", d_out=" + std::to_string(d_out) +
                                ")");
  }
  if (lift == Lift::ZeroPad && d_in > n) {
    throw std::invalid_argument("network: zero padding needs d_in <= n (d_in=" +
                                std::to_string(d_in) + ", n=" + std::to_string(n) + ")");
  }
}

Lift default_lift(int d_in, int n) { return d_in <= n ? Lift::ZeroPad : Lift::Linear; }

NetworkSpec make_spec(int d_in, int n, int m, int d_out, Activation a) {
  NetworkSpec s{d_in, n, m, d_out, a, default_lift(d_in, n)};
  s.validate();
  return s;
}

std::vector<ad::ParamBlock> layout(const NetworkSpec& spec, std::size_t offset) {
  spec.validate();
  std::vector<ad::ParamBlock> out;
  auto add = [&](Index r, Index c) {
    out.push_back({offset, r, c});
    offset += static_cast<std::size_t>(r * c);
  };
  const Index n = spec.n;
  if (spec.lift == Lift::Linear) {
    add(n, spec.d_in);
    add(n, 1);
  }
  for (int k = 0; k < spec.m; ++k) {
    add(n, (k == 0 && spec.lift == Lift::ZeroPad) ? spec.d_in : n);
    add(n, 1);
    add(n, n);
    add(n, 1);
  }
  add(spec.d_out, n);
  add(spec.d_out, 1);
  return out;
}

std::size_t count_parameters(const NetworkSpec& spec) {
  std::size_t total = 0;
  for (const auto& b : layout(spec)) total += b.size();
  return total;
}

std::size_t count_parameters(Method method, int m, int n, int d) {
  const auto M = static_cast<std::size_t>(m), N = static_cast<std::size_t>(n),
             D = static_cast<std::size_t>(d);
  if (method == Method::DGM) return (2 * M - 1) * N * N + (2 * M + D + 1) * N + 1;
  return (4 * M - 2) * N * N + (4 * M + 3 * D + 1) * N + D + 1;
}

std::vector<double> init_parameters(const NetworkSpec& spec, std::uint64_t seed) {
  const auto blocks = layout(spec);
  std::vector<double> theta(count_parameters(spec), 0.0);
  Rng rng(derive_seed(seed, {0x1417}));
  for (const auto& b : blocks) {
    if (b.cols == 1) continue;  // biases stay zero
    const double a = std::sqrt(6.0 / static_cast<double>(b.rows + b.cols));
    std::uniform_real_distribution<double> u(-a, a);
    for (std::size_t j = 0; j < b.size(); ++j) theta[b.offset + j] = u(rng);
  }
  return theta;
}

namespace {

// Shared by the plain and directional passes; `dir` non-null selects the
// latter and receives the directional derivative.
ad::Jet forward_impl(const NetworkSpec& spec, ad::Tape& tape, std::size_t first_block,
                     const ad::Jet& x, const ad::Jet* dir, ad::Jet* dout) {
  if (x.rows() != spec.d_in || (dir && dir->rows() != spec.d_in)) {
    throw std::invalid_argument("network forward: expected " + std::to_string(spec.d_in) +
                                " inputs, got " + std::to_string(x.rows()));
  }
  const ad::Unary act = activation_unary(spec.activation);
  std::size_t blk = first_block;
  auto next = [&] { return tape.param(blk++); };
  auto pad = [&](const ad::Jet& v) {
    return ad::vcat({v, ad::jet_constant(v, Matrix::Zero(spec.n - spec.d_in, v.batch()))});
  };

  ad::Jet s, ds;
  ad::Jet first_in = x, dfirst_in;
  if (dir) dfirst_in = *dir;
  if (spec.lift == Lift::Linear) {
    ad::Var a = next();
    ad::Var c = next();
    s = ad::affine(a, x, c);
    first_in = s;
    if (dir) {
      ds = ad::linear(a, *dir);
      dfirst_in = ds;
    }
  } else if (spec.d_in < spec.n) {
    s = pad(x);
    if (dir) ds = pad(*dir);
  } else {
    s = x;
    if (dir) ds = *dir;
  }
  for (int k = 0; k < spec.m; ++k) {
    ad::Var w1 = next(), b1 = next(), w2 = next(), b2 = next();
    const ad::Jet& in = (k == 0) ? first_in : s;
    ad::Jet z1 = ad::affine(w1, in, b1);
    ad::Jet h = ad::jet_apply(act, z1);
    ad::Jet z2 = ad::affine(w2, h, b2);
    if (dir) {
      const ad::Jet& din = (k == 0) ? dfirst_in : ds;
      ad::Jet dh = ad::jet_apply_derivative(act, z1, 1) * ad::linear(w1, din);
      ds = ad::jet_apply_derivative(act, z2, 1) * ad::linear(w2, dh) + ds;
    }
    s = ad::jet_apply(act, z2) + s;
  }
  ad::Var wo = next(), bo = next();
  if (dir) *dout = ad::linear(wo, ds);
  return ad::affine(wo, s, bo);
}

}  // namespace

ad::Jet forward(const NetworkSpec& spec, ad::Tape& tape, std::size_t first_block,
                const ad::Jet& x) {
  return forward_impl(spec, tape, first_block, x, nullptr, nullptr);
}

std::pair<ad::Jet, ad::Jet> forward_directional(const NetworkSpec& spec, ad::Tape& tape,
                                                std::size_t first_block, const ad::Jet& x,
                                                const ad::Jet& dir) {
  ad::Jet d;
  ad::Jet v = forward_impl(spec, tape, first_block, x, &dir, &d);
  return {v, d};
}

Matrix evaluate(const NetworkSpec& spec, std::span<const double> params, const Matrix& x) {
  ad::Tape tape(params, layout(spec));
  return forward(spec, tape, 0, ad::lift_inputs(tape, x, ad::Order::Value)).value_matrix();
}

Bundle::Bundle(std::vector<NetworkSpec> specs) : specs_(std::move(specs)) {
  for (const auto& s : specs_) {
    offsets_.push_back(total_);
    first_block_.push_back(blocks_.size());
    for (const auto& b : layout(s, total_)) blocks_.push_back(b);
    total_ += count_parameters(s);
  }
}

ad::Jet Bundle::forward(std::size_t i, ad::Tape& tape, const ad::Jet& x) const {
  return nn::forward(specs_.at(i), tape, first_block_.at(i), x);
}

std::pair<ad::Jet, ad::Jet> Bundle::forward_directional(std::size_t i, ad::Tape& tape,
                                                        const ad::Jet& x,
                                                        const ad::Jet& dir) const {
  return nn::forward_directional(specs_.at(i), tape, first_block_.at(i), x, dir);
}

std::vector<double> Bundle::init(std::uint64_t seed) const {
  std::vector<double> theta;
  theta.reserve(total_);
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const auto part = init_parameters(specs_[i], derive_seed(seed, {i}));
    theta.insert(theta.end(), part.begin(), part.end());
  }
  return theta;
}

}  // namespace mim::nn
