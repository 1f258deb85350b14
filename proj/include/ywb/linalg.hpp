#pragma once

#include <functional>

#include "ywb/common.hpp"

namespace ywb {

struct SpectralNormResult {
  double value = 0.0;   // estimate of the largest singular value
  bool converged = false;
  int iterations = 0;
};

// Largest singular value by power iteration on M^T M from a fixed
// deterministic start vector.  Converges when successive estimates agree to
// `tol` (relative); callers that need a guaranteed upper bound should fall
// back to the Frobenius norm when `converged` is false.
SpectralNormResult spectral_norm(const Mat& M, double tol = 1e-8, int max_iter = 500);

// Certified upper bound on the spectral norm: the exact largest singular
// value nudged up by one part in 1e12, so certificate arithmetic built on it
// stays on the safe side of the decomposition's own rounding.
double spectral_norm_safe(const Mat& M);

// Solves the discrete-time algebraic Riccati equation
//   P = A' P A - A' P B (R + B' P B)^{-1} B' P A + Q
// by fixed-point iteration from P = Q.  Throws AuditError if the iteration
// fails to converge (e.g. unstabilizable pair).
Mat solve_dare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
               double tol = 1e-12, int max_iter = 100000);

// Residual ||P - dare_rhs(P)||_inf for verifying a candidate solution.
double dare_residual(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P);

// LQR gain K = (R + B' P B)^{-1} B' P A for the DARE solution P,
// so that u = -K x stabilizes x+ = A x + B u.
Mat dare_gain(const Mat& A, const Mat& B, const Mat& R, const Mat& P);

// Central-difference Jacobians of a map out = f(x, u) at (x0, u0); f must
// write `out_dim` entries into its presized output (out_dim < 0 means the
// state dimension, i.e. a square dynamics map).
void linearize(const std::function<void(const Vec&, const Vec&, Vec&)>& f,
               const Vec& x0, const Vec& u0, Mat& A, Mat& B, double h = 1e-6,
               Index out_dim = -1);

// Spectral radius (largest |eigenvalue|) of a square matrix.
double spectral_radius(const Mat& M);

}  // namespace ywb
