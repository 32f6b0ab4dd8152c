#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cmeta {

/// Nodes and weights for integrals of the form  int f(x) exp(-x^2) dx.
template <typename Scalar>
struct GaussHermiteRule {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> nodes;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights;
};

/// Golub-Welsch: nodes are the eigenvalues of the symmetric Jacobi matrix of
/// the Hermite recurrence (off-diagonal sqrt(k/2)); weights are
/// sqrt(pi) times the squared first components of the eigenvectors.
template <typename Scalar>
GaussHermiteRule<Scalar> gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("Gauss-Hermite rule needs at least one node");
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix jacobi = Matrix::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const Scalar off = std::sqrt(Scalar(k) / Scalar(2));
    jacobi(k, k - 1) = off;
    jacobi(k - 1, k) = off;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(jacobi);
  GaussHermiteRule<Scalar> rule;
  rule.nodes = solver.eigenvalues();
  rule.weights = Scalar(std::sqrt(std::numbers::pi)) * solver.eigenvectors().row(0).transpose().array().square();
  return rule;
}

/// E[f(Z)] for Z ~ N(0, I_2), tensor-product rule with `n` nodes per axis.
template <typename Scalar, typename F>
Scalar expect_standard_normal_2d(F&& f, int n) {
  const auto rule = gauss_hermite<Scalar>(n);
  const Scalar scale = std::sqrt(Scalar(2));
  Scalar total(0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::Matrix<Scalar, 2, 1> z(scale * rule.nodes(i), scale * rule.nodes(j));
      total += rule.weights(i) * rule.weights(j) * f(z);
    }
  }
  return total / Scalar(std::numbers::pi);
}

}  // namespace cmeta
