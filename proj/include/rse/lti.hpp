#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <vector>

namespace rse {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;

/// Continuous-time LTI plant x' = A x + B u + d, y = C x, with static output
/// feedback u = K y_hat. All analysis runs on the closed-loop matrix
/// A + B K C; with K = 0 (the default) that is just A.
struct LtiSystem {
  Matrix A;
  Matrix B;
  Matrix K;
  Matrix C;

  LtiSystem() = default;
  /// Plant without actuation (B, K empty).
  LtiSystem(Matrix a, Matrix c);
  LtiSystem(Matrix a, Matrix b, Matrix k, Matrix c);

  Eigen::Index states() const { return A.rows(); }
  Eigen::Index outputs() const { return C.rows(); }
  Eigen::Index inputs() const { return B.cols(); }

  /// A + B K C.
  Matrix dynamics() const;
  /// B K, the channel through which injected output attacks reach the plant.
  Matrix attack_feedthrough() const;

  /// Throws ValidationError on inconsistent shapes or non-finite entries.
  void validate() const;
};

/// Split of a semistable matrix into its zero-mode part and the strictly
/// stable invariant subspace.
///
/// `u_max` / `v_max` span the right / left null spaces of A and are scaled so
/// that v_max^T u_max = I. `U_bar` is an orthonormal basis of the stable
/// invariant subspace (the null space of v_max^T) and `V_bar` its biorthogonal
/// left partner, so V_bar^T U_bar = I, V_bar^T u_max = 0 and
/// A = U_bar A_bar V_bar^T exactly on the stable part.
struct SubspaceDecomposition {
  Matrix U_bar;
  Matrix V_bar;
  Matrix A_bar;
  Matrix u_max;
  Matrix v_max;
  Eigen::Index zero_modes = 0;
  double tol_zero = 0.0;

  Eigen::Index stable_dim() const { return U_bar.cols(); }
};

struct StableSubspaceOptions {
  /// Absolute threshold on |lambda| for counting zero modes. Negative means
  /// the default 1e-7 * ||A||_2.
  double tol_zero = -1.0;
  /// Reject eigenvector bases whose condition number exceeds this.
  double max_condition = 1e12;
};

SubspaceDecomposition stable_subspace(const Matrix& A,
                                      const StableSubspaceOptions& opts = {});
SubspaceDecomposition stable_subspace(const LtiSystem& sys,
                                      const StableSubspaceOptions& opts = {});

/// Solves A W + W A^T + Q = 0 for strictly stable A (Bartels-Stewart on the
/// real Schur form). Falls back to the Kronecker solve for n <= 30 when the
/// Schur path does not meet the residual bound.
Matrix solve_lyapunov(const Matrix& A, const Matrix& Q);

/// Dense (I kron A + A kron I) vec(W) = -vec(Q) solve. O(n^6); meant for
/// cross-checks on small systems.
Matrix solve_lyapunov_kronecker(const Matrix& A, const Matrix& Q);

/// ||A W + W A^T + Q||_F / (||A||_F ||W||_F + ||Q||_F).
double lyapunov_residual(const Matrix& A, const Matrix& W, const Matrix& Q);

enum class GramianSide { Observability, Controllability };

struct Gramian {
  Matrix W;
  Matrix W_bar;
  GramianSide side = GramianSide::Observability;
};

/// Gramian of a semistable system computed on the stable subspace and lifted
/// back as U_bar W_bar U_bar^T. Observability side uses Q = (C U_bar)^T C U_bar
/// on A_bar^T; controllability side uses a unit disturbance input,
/// Q = V_bar^T V_bar.
Gramian semistable_gramian(const LtiSystem& sys, GramianSide side,
                           const SubspaceDecomposition& dec);

struct PsdFactorOptions {
  /// Eigenvalues below -negative_tol * ||W|| are an error.
  double negative_tol = 1e-10;
  /// Eigenvalues at or below rank_tol * lambda_max are dropped.
  double rank_tol = 1e-13;
};

/// Returns W_L with W = W_L W_L^T and rank(W) columns, from the symmetric
/// eigendecomposition (W is typically rank deficient, so no Cholesky).
Matrix psd_factor(const Matrix& W, const PsdFactorOptions& opts = {});

/// A strictly stable realization (A, B, C).
struct StableRealization {
  Matrix A;
  Matrix B;
  Matrix C;
};

/// sqrt(tr(C W_c C^T)) with A W_c + W_c A^T + B B^T = 0.
double h2_norm(const StableRealization& sys);

/// Stable part of a semistable system, input = unit disturbance on all states:
/// (A_bar, V_bar^T, C U_bar).
StableRealization stable_part(const LtiSystem& sys,
                              const SubspaceDecomposition& dec);

struct ObservabilityResult {
  Eigen::Index rank = 0;
  bool is_observable = false;
  /// Eigenvalue at which the PBH matrix has minimal rank (if any).
  std::optional<std::complex<double>> weakest_eigenvalue;
  /// sigma_min / sigma_max of the PBH matrix at that eigenvalue.
  double weakest_ratio = 0.0;
};

inline constexpr double kDefaultRankTol = 1e-9;

/// PBH test: rank of [A - lambda I; C] at every eigenvalue of A, with
/// numerical rank taken at tol * sigma_max.
ObservabilityResult observability_rank(const Matrix& A, const Matrix& C,
                                       double tol = kDefaultRankTol);

/// Eigenvalues of A whose PBH matrix is rank deficient.
std::vector<std::complex<double>> unobservable_modes(
    const Matrix& A, const Matrix& C, double tol = kDefaultRankTol);

/// Solves A^T X + X A - X B R^{-1} B^T X + Q = 0 for the stabilizing X.
/// Throws SolveFailed when the Hamiltonian has eigenvalues on the imaginary
/// axis (the pair is not stabilizable/detectable).
Matrix solve_care(const Matrix& A, const Matrix& B, const Matrix& Q,
                  const Matrix& R);

/// Largest real part over the eigenvalues of A.
double spectral_abscissa(const Matrix& A);

}  // namespace rse
