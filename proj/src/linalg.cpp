#include "ywb/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace ywb {

SpectralNormResult spectral_norm(const Mat& M, double tol, int max_iter) {
  SpectralNormResult res;
  if (M.size() == 0) {
    res.converged = true;
    return res;
  }
  const Index n = M.cols();
  // Fixed start vector with a mild ramp so it is not orthogonal to the
  // leading singular direction of typical structured matrices.
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = 1.0 + 1e-3 * static_cast<double>(i);
  v.normalize();

  double sigma = 0.0;
  Vec Mv(M.rows()), MtMv(n);
  for (int k = 1; k <= max_iter; ++k) {
    Mv.noalias() = M * v;
    const double sigma_new = Mv.norm();
    if (sigma_new == 0.0) {
      // v is in the null space; M could still be nonzero, but for the
      // matrices handled here (dense with generic entries) this means M = 0.
      res.value = 0.0;
      res.converged = true;
      res.iterations = k;
      return res;
    }
    MtMv.noalias() = M.transpose() * Mv;
    v = MtMv / MtMv.norm();
    res.iterations = k;
    if (std::abs(sigma_new - sigma) <= tol * std::max(1.0, sigma_new)) {
      res.value = sigma_new;
      res.converged = true;
      return res;
    }
    sigma = sigma_new;
  }
  res.value = sigma;
  res.converged = false;
  return res;
}

double spectral_norm_safe(const Mat& M) {
  if (M.size() == 0) return 0.0;
  // Power iteration converges from below, so it cannot back a certificate.
  const double s = Eigen::BDCSVD<Mat>(M).singularValues()(0);
  return s * (1.0 + 1e-12);
}

namespace {
Mat dare_rhs(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P) {
  // Joseph-stabilized closed-loop form: keeps the iterate symmetric positive
  // semidefinite where the textbook difference form cancels catastrophically.
  const Mat BtP = B.transpose() * P;
  const Mat S = R + BtP * B;
  const Mat K = S.ldlt().solve(BtP * A);
  const Mat Acl = A - B * K;
  const Mat Pn = Q + K.transpose() * R * K + Acl.transpose() * P * Acl;
  return 0.5 * (Pn + Pn.transpose());
}
}  // namespace

Mat solve_dare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
               double tol, int max_iter) {
  require(A.rows() == A.cols(), "solve_dare: A must be square");
  require(B.rows() == A.rows(), "solve_dare: B row count must match A");
  Mat P = Q;
  for (int k = 0; k < max_iter; ++k) {
    const Mat P_next = dare_rhs(A, B, Q, R, P);
    const double delta = (P_next - P).cwiseAbs().maxCoeff();
    P = P_next;
    if (delta < tol * std::max(1.0, P.cwiseAbs().maxCoeff())) return P;
  }
  throw AuditError("solve_dare: fixed-point iteration did not converge");
}

double dare_residual(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P) {
  return (P - dare_rhs(A, B, Q, R, P)).cwiseAbs().maxCoeff();
}

Mat dare_gain(const Mat& A, const Mat& B, const Mat& R, const Mat& P) {
  const Mat BtP = B.transpose() * P;
  const Mat S = R + BtP * B;
  return S.ldlt().solve(BtP * A);
}

void linearize(const std::function<void(const Vec&, const Vec&, Vec&)>& f,
               const Vec& x0, const Vec& u0, Mat& A, Mat& B, double h, Index out_dim) {
  const Index ny = out_dim < 0 ? x0.size() : out_dim;
  Vec fp(ny), fm(ny);
  Vec x = x0, u = u0;
  A.resize(ny, x0.size());
  for (Index j = 0; j < x0.size(); ++j) {
    x[j] = x0[j] + h;
    f(x, u0, fp);
    x[j] = x0[j] - h;
    f(x, u0, fm);
    x[j] = x0[j];
    A.col(j) = (fp - fm) / (2.0 * h);
  }
  B.resize(ny, u0.size());
  for (Index j = 0; j < u0.size(); ++j) {
    u[j] = u0[j] + h;
    f(x0, u, fp);
    u[j] = u0[j] - h;
    f(x0, u, fm);
    u[j] = u0[j];
    B.col(j) = (fp - fm) / (2.0 * h);
  }
}

double spectral_radius(const Mat& M) {
  Eigen::EigenSolver<Mat> es(M, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace ywb
