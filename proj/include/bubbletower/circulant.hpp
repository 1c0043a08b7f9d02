#pragma once

#include <vector>

#include <Eigen/Dense>

#include "bubbletower/errors.hpp"

namespace bt {

// C_ij = first_row[(j - i) mod m].
struct CirculantMatrix {
  Eigen::VectorXd first_row;
  int size() const { return static_cast<int>(first_row.size()); }
  Eigen::MatrixXd dense() const;
};

// Eigenvalue of the Fourier vector (e^{2 pi i t j/m})_j, t = 0..m-1.
Eigen::VectorXcd circ_eigenvalues(const CirculantMatrix& c);
Eigen::VectorXd circ_matvec(const CirculantMatrix& c, const Eigen::VectorXd& x);

// Row-averaged circulant fit of a square matrix; deviation receives the
// largest entry distance from the fit.
CirculantMatrix circulant_fit(const Eigen::MatrixXd& a, double* deviation = nullptr);

// (cos theta_j)_j and (sin theta_j)_j with theta_j = 2 pi j/m.
std::vector<Eigen::VectorXd> cos_sin_vectors(int m);

struct ConsistencyError : NumericalError {
  ConsistencyError(const std::string& what, std::vector<double> products)
      : NumericalError(what), inner_products(std::move(products)) {}
  std::vector<double> inner_products;
};

// Fourier modes carried by the deflation vectors; throws ConfigError when the
// vectors do not span a union of real Fourier pairs.
std::vector<int> deflated_modes(int m, const std::vector<Eigen::VectorXd>& deflation);

// Solution of C w = rhs orthogonal to the deflation vectors, with the
// deflated Fourier modes removed. rhs must be orthogonal to them within
// tol * |rhs| |v|.
Eigen::VectorXd circ_solve_deflated(const CirculantMatrix& c, const Eigen::VectorXd& rhs,
                                    const std::vector<Eigen::VectorXd>& deflation, double tol = 1e-10);

// Operator 2-norm of the inverse on the non-deflated modes.
double circ_inverse_norm(const CirculantMatrix& c, const std::vector<int>& deflated);

// [Hbar, gamma 1_{k x h}; gamma 1_{h x k}, Hhat] [wbar; what] = [rbar; rhat]
struct BlockInteractionSystem {
  CirculantMatrix hbar, hhat;
  double gamma = 0.0;
  Eigen::VectorXd rbar, rhat;
  std::vector<Eigen::VectorXd> deflation_bar, deflation_hat;
  Eigen::MatrixXd dense() const;
};

struct ContractionResult {
  Eigen::VectorXd wbar, what;
  int iterations = 0;
  bool converged = false;
  double factor = 0.0;       // gamma^2 |Hbar^+| |Hhat^+| k h
  double sweep_rate = 0.0;   // gamma^2 k h / |lambda0(Hbar) lambda0(Hhat)|, the exact error reduction per sweep
  double bound_ratio = 0.0;  // |wbar| / |rbar|
};

// Alternating solves wbar <- Hbar^+(rbar - gamma (sum what) 1),
// what <- Hhat^+(rhat - gamma (sum wbar) 1).
ContractionResult solve_block_contraction(const BlockInteractionSystem& sys, double tol = 1e-12, int max_iter = 200);

// Least squares on an orthonormal basis of the complement of the deflation vectors.
Eigen::VectorXd dense_block_solve(const BlockInteractionSystem& sys);

}  // namespace bt
