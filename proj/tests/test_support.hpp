#pragma once

// Finite-difference oracles and small helpers shared by the test suites.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace mim::testing {

using ScalarField = std::function<double(const Eigen::VectorXd&)>;

inline double central_diff(const ScalarField& f, Eigen::VectorXd x, int i, double h) {
  const double x0 = x(i);
  x(i) = x0 + h;
  const double fp = f(x);
  x(i) = x0 - h;
  const double fm = f(x);
  return (fp - fm) / (2.0 * h);
}

inline double central_second_diff(const ScalarField& f, Eigen::VectorXd x, int i, double h) {
  const double x0 = x(i);
  const double f0 = f(x);
  x(i) = x0 + h;
  const double fp = f(x);
  x(i) = x0 - h;
  const double fm = f(x);
  return (fp - 2.0 * f0 + fm) / (h * h);
}

/// Fourth-order accurate second derivative.
inline double fourth_order_second_diff(const ScalarField& f, Eigen::VectorXd x, int i, double h) {
  const double x0 = x(i);
  auto at = [&](double s) {
    x(i) = x0 + s * h;
    return f(x);
  };
  return (-at(2) + 16.0 * at(1) - 30.0 * at(0) + 16.0 * at(-1) - at(-2)) / (12.0 * h * h);
}

inline double fourth_order_diff(const ScalarField& f, Eigen::VectorXd x, int i, double h) {
  const double x0 = x(i);
  auto at = [&](double s) {
    x(i) = x0 + s * h;
    return f(x);
  };
  return (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h);
}

/// Gradient of f over a flat vector by central differences.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> theta, double h) {
  std::vector<double> g(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double t0 = theta[j];
    theta[j] = t0 + h;
    const double fp = f(theta);
    theta[j] = t0 - h;
    const double fm = f(theta);
    theta[j] = t0;
    g[j] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// max|a - b| / max|b|.
inline double relative_max_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return den == 0.0 ? num : num / den;
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace mim::testing
