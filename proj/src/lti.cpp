#include "rse/lti.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rse/error.hpp"

namespace rse {

namespace {

bool all_finite(const Matrix& M) { return M.allFinite(); }

double norm2(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(M);
  return svd.singularValues()(0);
}

// Flip each column so its largest-magnitude entry is positive.
void canonical_column_signs(Matrix& M) {
  for (Eigen::Index j = 0; j < M.cols(); ++j) {
    Eigen::Index imax = 0;
    M.col(j).cwiseAbs().maxCoeff(&imax);
    if (M(imax, j) < 0) M.col(j) *= -1.0;
  }
}

void require_stable(const Matrix& A, const char* what) {
  if (A.size() == 0) return;
  const double a = spectral_abscissa(A);
  if (!(a < 0.0)) {
    std::ostringstream os;
    os << what << ": spectral abscissa " << a << " is not negative";
    throw Error(ErrorCode::NotStable, os.str());
  }
}

bool lyapunov_ok(const Matrix& A, const Matrix& W, const Matrix& Q) {
  const double r = (A * W + W * A.transpose() + Q).norm();
  return W.allFinite() && r <= 1e-10 * (A.norm() * W.norm() + Q.norm());
}

Matrix solve_lyapunov_schur(const Matrix& A, const Matrix& Q) {
  const Eigen::Index n = A.rows();
  Eigen::RealSchur<Matrix> schur(A);
  if (schur.info() != Eigen::Success) {
    throw Error(ErrorCode::SolveFailed, "real Schur decomposition did not converge");
  }
  const Matrix& T = schur.matrixT();
  const Matrix& U = schur.matrixU();
  const Matrix F = U.transpose() * Q * U;
  Matrix X = Matrix::Zero(n, n);
  const Matrix I = Matrix::Identity(n, n);

  Eigen::Index j = n - 1;
  while (j >= 0) {
    // Block J = [j0, j]; a 2x2 block is flagged by a nonzero subdiagonal.
    const bool two = j > 0 && T(j, j - 1) != 0.0;
    const Eigen::Index j0 = two ? j - 1 : j;
    const Eigen::Index bs = j - j0 + 1;

    Matrix R = -F.middleCols(j0, bs);
    if (j + 1 < n) {
      R.noalias() -= X.rightCols(n - j - 1) *
                     T.block(j0, j + 1, bs, n - j - 1).transpose();
    }

    if (!two) {
      Eigen::PartialPivLU<Matrix> lu(T + T(j, j) * I);
      X.col(j) = lu.solve(R.col(0));
    } else {
      const Matrix S = T.block(j0, j0, 2, 2).transpose();
      Matrix M(2 * n, 2 * n);
      M << T + S(0, 0) * I, S(1, 0) * I, S(0, 1) * I, T + S(1, 1) * I;
      Vector rhs(2 * n);
      rhs << R.col(0), R.col(1);
      Eigen::PartialPivLU<Matrix> lu(M);
      const Vector x = lu.solve(rhs);
      X.col(j0) = x.head(n);
      X.col(j) = x.tail(n);
    }
    j = j0 - 1;
  }
  Matrix W = U * X * U.transpose();
  return 0.5 * (W + W.transpose());
}

}  // namespace

LtiSystem::LtiSystem(Matrix a, Matrix c) : A(std::move(a)), C(std::move(c)) {
  B = Matrix::Zero(A.rows(), 0);
  K = Matrix::Zero(0, C.rows());
}

LtiSystem::LtiSystem(Matrix a, Matrix b, Matrix k, Matrix c)
    : A(std::move(a)), B(std::move(b)), K(std::move(k)), C(std::move(c)) {}

Matrix LtiSystem::dynamics() const {
  if (B.cols() == 0 || K.size() == 0) return A;
  return A + B * K * C;
}

Matrix LtiSystem::attack_feedthrough() const {
  if (B.cols() == 0 || K.size() == 0) return Matrix::Zero(A.rows(), C.rows());
  return B * K;
}

void LtiSystem::validate() const {
  const Eigen::Index n = A.rows();
  if (A.cols() != n) throw Error(ErrorCode::ValidationError, "A must be square");
  if (C.cols() != n) throw Error(ErrorCode::ValidationError, "C must have n columns");
  if (B.rows() != n && B.size() != 0) {
    throw Error(ErrorCode::ValidationError, "B must have n rows");
  }
  if (K.size() != 0 && (K.rows() != B.cols() || K.cols() != C.rows())) {
    throw Error(ErrorCode::ValidationError, "K must be p x m");
  }
  if (!all_finite(A) || !all_finite(B) || !all_finite(K) || !all_finite(C)) {
    throw Error(ErrorCode::ValidationError, "non-finite system matrix entry");
  }
}

SubspaceDecomposition stable_subspace(const LtiSystem& sys,
                                      const StableSubspaceOptions& opts) {
  sys.validate();
  return stable_subspace(sys.dynamics(), opts);
}

SubspaceDecomposition stable_subspace(const Matrix& A,
                                      const StableSubspaceOptions& opts) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n) throw Error(ErrorCode::ValidationError, "A must be square");
  if (!A.allFinite()) throw Error(ErrorCode::ValidationError, "A has non-finite entries");

  SubspaceDecomposition dec;
  const double anorm = norm2(A);
  dec.tol_zero = opts.tol_zero < 0 ? 1e-7 * anorm : opts.tol_zero;
  if (n == 0) return dec;

  Eigen::EigenSolver<Matrix> es(A, false);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::SolveFailed, "eigenvalue iteration did not converge");
  }
  Eigen::Index z = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lam = es.eigenvalues()(i);
    if (std::abs(lam) <= dec.tol_zero) {
      ++z;
    } else if (lam.real() >= 0.0) {
      std::ostringstream os;
      os << "eigenvalue " << lam.real() << (lam.imag() < 0 ? "" : "+")
         << lam.imag() << "i is not strictly stable";
      throw Error(ErrorCode::NotSemistable, os.str());
    }
  }
  dec.zero_modes = z;

  if (z == 0) {
    dec.U_bar = Matrix::Identity(n, n);
    dec.V_bar = Matrix::Identity(n, n);
    dec.A_bar = A;
    dec.u_max = Matrix::Zero(n, 0);
    dec.v_max = Matrix::Zero(n, 0);
    return dec;
  }

  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(n - z) > dec.tol_zero) {
    throw Error(ErrorCode::NotSemistable,
                "zero eigenvalue has fewer eigenvectors than its multiplicity");
  }
  Matrix u = svd.matrixV().rightCols(z);
  Matrix v = svd.matrixU().rightCols(z);
  canonical_column_signs(u);
  canonical_column_signs(v);

  // A defective zero eigenvalue has left and right null vectors orthogonal.
  const Matrix vu = v.transpose() * u;
  Eigen::JacobiSVD<Matrix> vusvd(vu);
  if (vusvd.singularValues()(z - 1) < 1e-8) {
    throw Error(ErrorCode::NotSemistable, "zero eigenvalue is not semisimple");
  }
  dec.u_max = u;
  dec.v_max = v * vu.transpose().inverse();

  if (z == n) {
    dec.U_bar = Matrix::Zero(n, 0);
    dec.V_bar = Matrix::Zero(n, 0);
    dec.A_bar = Matrix::Zero(0, 0);
    return dec;
  }

  Eigen::HouseholderQR<Matrix> qr(dec.v_max);
  const Matrix Q = qr.householderQ() * Matrix::Identity(n, n);
  dec.U_bar = Q.rightCols(n - z);
  dec.V_bar = (Matrix::Identity(n, n) - dec.v_max * dec.u_max.transpose()) * dec.U_bar;
  dec.A_bar = dec.V_bar.transpose() * A * dec.U_bar;

  Matrix basis(n, n);
  basis << dec.U_bar, dec.u_max;
  Eigen::JacobiSVD<Matrix> bsvd(basis);
  const double cond = bsvd.singularValues()(0) / bsvd.singularValues()(n - 1);
  if (!(cond <= opts.max_condition)) {
    std::ostringstream os;
    os << "zero/stable basis condition number " << cond;
    throw Error(ErrorCode::IllConditioned, os.str());
  }
  return dec;
}

Matrix solve_lyapunov_kronecker(const Matrix& A, const Matrix& Q) {
  const Eigen::Index n = A.rows();
  if (n == 0) return Matrix::Zero(0, 0);
  require_stable(A, "solve_lyapunov_kronecker");
  const Eigen::Index N = n * n;
  Matrix M = Matrix::Zero(N, N);
  // Column-major vec: vec(A W) = (I kron A) vec W, vec(W A^T) = (A kron I) vec W.
  for (Eigen::Index b = 0; b < n; ++b) {
    M.block(b * n, b * n, n, n) += A;
    for (Eigen::Index c = 0; c < n; ++c) {
      M.block(b * n, c * n, n, n).diagonal().array() += A(b, c);
    }
  }
  const Vector q = Eigen::Map<const Vector>(Q.data(), N);
  Eigen::FullPivLU<Matrix> lu(M);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::SolveFailed, "Kronecker Lyapunov operator is singular");
  }
  const Vector w = lu.solve(-q);
  Matrix W = Eigen::Map<const Matrix>(w.data(), n, n);
  return 0.5 * (W + W.transpose());
}

Matrix solve_lyapunov(const Matrix& A, const Matrix& Q) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || Q.rows() != n || Q.cols() != n) {
    throw Error(ErrorCode::ValidationError, "solve_lyapunov: shape mismatch");
  }
  if (n == 0) return Matrix::Zero(0, 0);
  require_stable(A, "solve_lyapunov");
  Matrix W = solve_lyapunov_schur(A, Q);
  if (lyapunov_ok(A, W, Q)) return W;
  if (n <= 30) {
    W = solve_lyapunov_kronecker(A, Q);
    if (lyapunov_ok(A, W, Q)) return W;
  }
  std::ostringstream os;
  os << "Lyapunov residual " << lyapunov_residual(A, W, Q) << " above bound";
  throw Error(ErrorCode::SolveFailed, os.str());
}

double lyapunov_residual(const Matrix& A, const Matrix& W, const Matrix& Q) {
  const double denom = A.norm() * W.norm() + Q.norm();
  if (denom == 0.0) return 0.0;
  return (A * W + W * A.transpose() + Q).norm() / denom;
}

Gramian semistable_gramian(const LtiSystem& sys, GramianSide side,
                           const SubspaceDecomposition& dec) {
  Gramian g;
  g.side = side;
  const Matrix& Ub = dec.U_bar;
  if (side == GramianSide::Observability) {
    const Matrix CU = sys.C * Ub;
    g.W_bar = solve_lyapunov(dec.A_bar.transpose(), CU.transpose() * CU);
  } else {
    g.W_bar = solve_lyapunov(dec.A_bar, dec.V_bar.transpose() * dec.V_bar);
  }
  g.W = Ub * g.W_bar * Ub.transpose();
  g.W = 0.5 * (g.W + g.W.transpose());
  return g;
}

Matrix psd_factor(const Matrix& W, const PsdFactorOptions& opts) {
  const Eigen::Index n = W.rows();
  if (W.cols() != n) throw Error(ErrorCode::ValidationError, "psd_factor: W not square");
  if (n == 0) return Matrix::Zero(0, 0);
  const Matrix S = 0.5 * (W + W.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::SolveFailed, "symmetric eigensolver did not converge");
  }
  const Vector& lam = es.eigenvalues();  // ascending
  const double scale = lam.cwiseAbs().maxCoeff();
  if (lam(0) < -opts.negative_tol * scale) {
    std::ostringstream os;
    os << "eigenvalue " << lam(0) << " below -tol*||W|| (" << scale << ")";
    throw Error(ErrorCode::NotPSD, os.str());
  }
  const double cut = opts.rank_tol * lam(n - 1);
  Eigen::Index r = 0;
  while (r < n && lam(n - 1 - r) > cut && lam(n - 1 - r) > 0.0) ++r;
  Matrix L(n, r);
  for (Eigen::Index k = 0; k < r; ++k) {
    L.col(k) = es.eigenvectors().col(n - 1 - k) * std::sqrt(lam(n - 1 - k));
  }
  canonical_column_signs(L);
  return L;
}

double h2_norm(const StableRealization& sys) {
  if (sys.A.rows() == 0) return 0.0;
  const Matrix Wc = solve_lyapunov(sys.A, sys.B * sys.B.transpose());
  const double t = (sys.C * Wc * sys.C.transpose()).trace();
  return std::sqrt(std::max(t, 0.0));
}

StableRealization stable_part(const LtiSystem& sys, const SubspaceDecomposition& dec) {
  return {dec.A_bar, dec.V_bar.transpose(), sys.C * dec.U_bar};
}

namespace {

struct PbhPoint {
  std::complex<double> lambda;
  Eigen::Index rank;
  double ratio;
};

std::vector<PbhPoint> pbh_scan(const Matrix& A, const Matrix& C, double tol) {
  const Eigen::Index n = A.rows();
  std::vector<PbhPoint> out;
  if (n == 0) return out;
  Eigen::EigenSolver<Matrix> es(A, false);
  const Eigen::Index m = C.rows();
  Eigen::MatrixXcd M(n + m, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lam = es.eigenvalues()(i);
    if (lam.imag() < 0.0) continue;  // conjugate gives the same rank
    M.topRows(n) = A.cast<std::complex<double>>();
    M.topRows(n).diagonal().array() -= lam;
    if (m > 0) M.bottomRows(m) = C.cast<std::complex<double>>();
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(M);
    const Vector s = svd.singularValues();
    const double smax = s(0);
    Eigen::Index rank = 0;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      if (s(k) > tol * smax) ++rank;
    }
    const double ratio = smax > 0 ? s(s.size() - 1) / smax : 0.0;
    out.push_back({lam, rank, ratio});
  }
  return out;
}

}  // namespace

ObservabilityResult observability_rank(const Matrix& A, const Matrix& C, double tol) {
  ObservabilityResult res;
  const Eigen::Index n = A.rows();
  if (n == 0 || A.cols() != n || C.cols() != n) return res;
  const auto scan = pbh_scan(A, C, tol);
  res.rank = n;
  res.weakest_ratio = std::numeric_limits<double>::infinity();
  for (const auto& p : scan) {
    if (p.rank < res.rank || (p.rank == res.rank && p.ratio < res.weakest_ratio)) {
      res.rank = p.rank;
      res.weakest_eigenvalue = p.lambda;
      res.weakest_ratio = p.ratio;
    }
  }
  res.is_observable = res.rank == n;
  return res;
}

std::vector<std::complex<double>> unobservable_modes(const Matrix& A, const Matrix& C,
                                                     double tol) {
  std::vector<std::complex<double>> out;
  const Eigen::Index n = A.rows();
  if (n == 0 || C.cols() != n) return out;
  for (const auto& p : pbh_scan(A, C, tol)) {
    if (p.rank < n) {
      out.push_back(p.lambda);
      if (p.lambda.imag() > 0.0) out.push_back(std::conj(p.lambda));
    }
  }
  return out;
}

double spectral_abscissa(const Matrix& A) {
  if (A.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> es(A, false);
  return es.eigenvalues().real().maxCoeff();
}

Matrix solve_care(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
  const Eigen::Index n = A.rows();
  if (n == 0) return Matrix::Zero(0, 0);
  const Matrix G = B * R.ldlt().solve(B.transpose());

  Matrix H(2 * n, 2 * n);
  H << A, -G, -Q, -A.transpose();

  // Scaled Newton iteration for sign(H).
  Matrix Z = H;
  bool converged = false;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 100; ++it) {
    Eigen::PartialPivLU<Matrix> lu(Z);
    const double logdet = lu.matrixLU().diagonal().cwiseAbs().array().log().sum();
    if (!std::isfinite(logdet)) break;
    const double c = std::exp(-logdet / static_cast<double>(2 * n));
    const Matrix Zn = 0.5 * (c * Z + lu.inverse() / c);
    const double delta = (Zn - Z).norm();
    Z = Zn;
    if (!Z.allFinite()) break;
    const double rel = delta / Z.norm();
    // Stop at 1e-12, or once the update stagnates at roundoff level.
    if (rel <= 1e-12 || (rel <= 1e-8 && delta >= 0.5 * prev)) {
      converged = true;
      break;
    }
    prev = delta;
  }
  if (!converged) {
    throw Error(ErrorCode::SolveFailed,
                "Hamiltonian sign iteration failed (eigenvalues near the imaginary axis)");
  }
  const Matrix I = Matrix::Identity(n, n);
  Matrix lhs(2 * n, n), rhs(2 * n, n);
  lhs << Z.block(0, n, n, n), Z.block(n, n, n, n) + I;
  rhs << Z.block(0, 0, n, n) + I, Z.block(n, 0, n, n);
  Matrix X = lhs.colPivHouseholderQr().solve(-rhs);
  X = 0.5 * (X + X.transpose());

  // One Newton-Kleinman step polishes the sign-function solution.
  const Matrix Ac = A - G * X;
  if (spectral_abscissa(Ac) < 0.0) {
    Matrix Xn = solve_lyapunov(Ac.transpose(), Q + X * G * X);
    X = 0.5 * (Xn + Xn.transpose());
  }
  if (!X.allFinite() || !(spectral_abscissa(A - G * X) < 0.0)) {
    throw Error(ErrorCode::SolveFailed, "Riccati solution is not stabilizing");
  }
  return X;
}

}  // namespace rse
