#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdint>
#include <random>

#include "rse/clustering.hpp"
#include "rse/error.hpp"
#include "rse/lti.hpp"

namespace rse::testing {

/// Seeded generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }

  Matrix gaussian(Eigen::Index r, Eigen::Index c) {
    Matrix M(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) M(i, j) = normal();
    return M;
  }

  /// Well-conditioned similarity transform (cond < 50).
  Matrix basis(Eigen::Index n) {
    for (;;) {
      Matrix S = Matrix::Identity(n, n) + 0.35 * gaussian(n, n);
      Eigen::JacobiSVD<Matrix> svd(S);
      const auto& s = svd.singularValues();
      if (s(n - 1) > 0 && s(0) / s(n - 1) < 50.0) return S;
    }
  }

  /// Block-diagonal real spectrum with Re in [-3, -0.4], occasionally complex.
  Matrix stable_blocks(Eigen::Index n) {
    Matrix D = Matrix::Zero(n, n);
    Eigen::Index i = 0;
    while (i < n) {
      const double re = uniform(-3.0, -0.4);
      if (i + 1 < n && uniform(0.0, 1.0) < 0.4) {
        const double im = uniform(0.3, 2.0);
        D(i, i) = re;
        D(i + 1, i + 1) = re;
        D(i, i + 1) = im;
        D(i + 1, i) = -im;
        i += 2;
      } else {
        D(i, i) = re;
        ++i;
      }
    }
    return D;
  }

 private:
  std::mt19937_64 eng_;
};

/// Random semistable matrix with exactly one zero eigenvalue, together with
/// its zero-mode spectral projector (from the construction, not from a solver).
struct SemistableCase {
  Matrix A;
  Matrix P0;
};

inline SemistableCase random_semistable(Gen& g, Eigen::Index n) {
  Matrix D = Matrix::Zero(n, n);
  D.bottomRightCorner(n - 1, n - 1) = g.stable_blocks(n - 1);
  const Matrix S = g.basis(n);
  const Matrix Si = S.inverse();
  SemistableCase c;
  c.A = S * D * Si;
  c.P0 = S.col(0) * Si.row(0);
  return c;
}

inline Matrix random_stable(Gen& g, Eigen::Index n) {
  const Matrix S = g.basis(n);
  return S * g.stable_blocks(n) * S.inverse();
}

/// Composite Simpson over [0, T] of F(t) = e^{At} (.) with a fixed step;
/// `body(E_t)` returns the integrand for the propagator E_t = e^{At}.
template <class Body>
Matrix simpson(const Matrix& A, double T, double h, Body body) {
  const long N = 2 * static_cast<long>(std::ceil(T / (2.0 * h)));
  const double step = T / static_cast<double>(N);
  const Matrix E = (A * step).exp();
  Matrix Et = Matrix::Identity(A.rows(), A.cols());
  Matrix acc = body(Et);
  for (long k = 1; k <= N; ++k) {
    Et = E * Et;
    const double w = (k == N) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    acc += w * body(Et);
  }
  return acc * (step / 3.0);
}

/// int_0^T e^{At} Q e^{A^T t} dt.
inline Matrix gramian_quadrature(const Matrix& A, const Matrix& Q, double T = 50.0, double h = 1e-2) {
  return simpson(A, T, h, [&](const Matrix& Et) -> Matrix { return Et * Q * Et.transpose(); });
}

/// int_0^T (C (e^{At} - P0) B)(...)^T dt: output-side energy of the stable part.
inline Matrix output_energy(const Matrix& A, const Matrix& P0, const Matrix& B, const Matrix& C,
                            double T = 60.0, double h = 1e-2) {
  return simpson(A, T, h, [&](const Matrix& Et) -> Matrix {
    const Matrix H = C * (Et - P0) * B;
    return H * H.transpose();
  });
}

inline SimilarityFactor phi_from(const Matrix& Phi) {
  SimilarityFactor f;
  f.Phi = Phi;
  f.row_norms = Phi.rowwise().norm();
  return f;
}

}  // namespace rse::testing

#define EXPECT_RSE_ERROR(stmt, expected_code)                                   \
  do {                                                                          \
    bool rse_thrown_ = false;                                                   \
    try {                                                                       \
      stmt;                                                                     \
    } catch (const ::rse::Error& e) {                                           \
      rse_thrown_ = true;                                                       \
      EXPECT_EQ(e.code(), expected_code) << e.what();                           \
    }                                                                           \
    EXPECT_TRUE(rse_thrown_) << "expected " << ::rse::to_string(expected_code); \
  } while (0)
