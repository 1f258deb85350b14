#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/SVD>

#include <cmath>

#include "doctest.h"
#include "ywb/linalg.hpp"
#include "ywb/rng.hpp"

using namespace ywb;

namespace {

Mat random_matrix(Index rows, Index cols, std::uint64_t key) {
  RngStream r(key);
  Mat M(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) M(i, j) = r.next_gaussian();
  return M;
}

}  // namespace

TEST_SUITE("linalg: spectral norm") {
  TEST_CASE("matches full SVD on random matrices") {
    for (std::uint64_t k = 1; k <= 20; ++k) {
      const Mat M = random_matrix(5 + k % 4, 3 + k % 5, k);
      const double svd = M.jacobiSvd().singularValues()(0);
      const SpectralNormResult est = spectral_norm(M);
      CHECK(est.converged);
      CHECK_EQ(est.value, doctest::Approx(svd).epsilon(1e-6));
    }
  }

  TEST_CASE("diagonal matrix: exactly the largest |entry|") {
    Mat D = Mat::Zero(3, 3);
    D(0, 0) = -7.0;
    D(1, 1) = 2.0;
    D(2, 2) = 0.5;
    CHECK_EQ(spectral_norm_safe(D), doctest::Approx(7.0).epsilon(1e-9));
  }

  TEST_CASE("zero and empty-direction cases") {
    CHECK_EQ(spectral_norm_safe(Mat::Zero(4, 2)), doctest::Approx(0.0));
  }

  TEST_CASE("safe variant never falls below the power-iteration estimate") {
    const Mat M = random_matrix(8, 8, 33);
    const double safe = spectral_norm_safe(M);
    const double svd = M.jacobiSvd().singularValues()(0);
    CHECK_GE(safe, svd - 1e-6);
    CHECK_LE(safe, M.norm() + 1e-12);  // Frobenius is the fallback ceiling
  }
}

TEST_SUITE("linalg: discrete Riccati") {
  TEST_CASE("scalar closed form") {
    // P = a^2 P - a^2 P^2 b^2 / (r + b^2 P) + q reduces to a quadratic in P:
    //   b^2 P^2 + (r - a^2 r - q b^2) P - q r = 0.
    const double a = 1.2, b = 1.0, q = 2.0, r = 0.5;
    const double A2 = b * b;
    const double B2 = r - a * a * r - q * b * b;
    const double C2 = -q * r;
    const double proot = (-B2 + std::sqrt(B2 * B2 - 4 * A2 * C2)) / (2 * A2);
    Mat A(1, 1), B(1, 1), Q(1, 1), R(1, 1);
    A << a;
    B << b;
    Q << q;
    R << r;
    const Mat P = solve_dare(A, B, Q, R);
    CHECK_EQ(P(0, 0), doctest::Approx(proot).epsilon(1e-10));
    CHECK_LT(dare_residual(A, B, Q, R, P), 1e-9);
  }

  TEST_CASE("double integrator: residual small, gain stabilizes") {
    const double dt = 0.1;
    Mat A(2, 2), B(2, 1);
    A << 1, dt, 0, 1;
    B << 0.5 * dt * dt, dt;
    const Mat Q = Mat::Identity(2, 2);
    Mat R(1, 1);
    R << 0.1;
    const Mat P = solve_dare(A, B, Q, R);
    CHECK_LT(dare_residual(A, B, Q, R, P), 1e-9);
    // P must be symmetric positive definite.
    CHECK_LT((P - P.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    CHECK_GT(P(0, 0), 0.0);
    CHECK_GT(P.determinant(), 0.0);
    const Mat K = dare_gain(A, B, R, P);
    CHECK_LT(spectral_radius(A - B * K), 1.0);
  }

  TEST_CASE("identity dynamics with expensive control stays near open loop") {
    // With R -> infinity the gain goes to zero; check monotone trend.
    Mat A(1, 1), B(1, 1), Q(1, 1), Rs(1, 1), Rl(1, 1);
    A << 0.9;
    B << 1.0;
    Q << 1.0;
    Rs << 0.01;
    Rl << 100.0;
    const Mat Ks = dare_gain(A, B, Rs, solve_dare(A, B, Q, Rs));
    const Mat Kl = dare_gain(A, B, Rl, solve_dare(A, B, Q, Rl));
    CHECK_GT(std::abs(Ks(0, 0)), std::abs(Kl(0, 0)));
  }

  TEST_CASE("unstabilizable pair throws") {
    // B = 0 with |a| > 1 has no stabilizing solution.
    Mat A(1, 1), B(1, 1), Q(1, 1), R(1, 1);
    A << 2.0;
    B << 0.0;
    Q << 1.0;
    R << 1.0;
    CHECK_THROWS(solve_dare(A, B, Q, R));
  }
}

TEST_SUITE("linalg: jacobians and spectra") {
  TEST_CASE("linearize recovers the matrices of a linear map") {
    Mat A0(2, 2), B0(2, 1);
    A0 << 0.3, -1.1, 0.7, 0.2;
    B0 << 0.5, -2.0;
    auto f = [&](const Vec& x, const Vec& u, Vec& out) { out = A0 * x + B0 * u; };
    Mat A, B;
    Vec x0(2), u0(1);
    x0 << 0.4, -0.2;
    u0 << 0.1;
    linearize(f, x0, u0, A, B);
    CHECK_LT((A - A0).cwiseAbs().maxCoeff(), 1e-7);
    CHECK_LT((B - B0).cwiseAbs().maxCoeff(), 1e-7);
  }

  TEST_CASE("linearize of a scalar quadratic at a point") {
    // f(x, u) = x^2 has derivative 2 x0.
    auto f = [](const Vec& x, const Vec&, Vec& out) {
      out.resize(1);
      out[0] = x[0] * x[0];
    };
    Mat A, B;
    Vec x0(1), u0(1);
    x0 << 1.5;
    u0 << 0.0;
    linearize(f, x0, u0, A, B, 1e-5, 1);
    CHECK_EQ(A(0, 0), doctest::Approx(3.0).epsilon(1e-6));
  }

  TEST_CASE("spectral radius of a rotation-scale block") {
    // Eigenvalues of [[c, -s], [s, c]] * rho are rho * exp(+-i theta).
    const double rho = 0.8, th = 0.7;
    Mat M(2, 2);
    M << rho * std::cos(th), -rho * std::sin(th), rho * std::sin(th), rho * std::cos(th);
    CHECK_EQ(spectral_radius(M), doctest::Approx(rho).epsilon(1e-10));
  }
}
