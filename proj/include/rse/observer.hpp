#pragma once

#include <vector>

#include "rse/lti.hpp"

namespace rse {

struct ObserverDesign {
  Matrix L;        // n x m_used
  Matrix C_used;   // m_used x n
  /// -max Re eig on the stable subspace of (A - L C_used).
  double stability_margin = 0.0;
  double requested_margin = 0.0;
  /// Margin actually targeted by the shifted design; below the request when
  /// an unobservable stable mode limits it.
  double design_margin = 0.0;
  bool margin_met = false;
};

struct DesignOptions {
  double rank_tol = kDefaultRankTol;
};

/// Riccati (unit weights) filter gain on the stable subspace of the shifted
/// matrix A_bar + margin I, lifted back through U_bar. The zero mode is left
/// unassigned. Throws NotDetectable if an unobservable mode has Re >= -tol_zero.
ObserverDesign design_gain(const LtiSystem& sys, const Matrix& C_used, double margin,
                           const DesignOptions& opts = {});
ObserverDesign design_gain(const LtiSystem& sys, const SubspaceDecomposition& dec,
                           const Matrix& C_used, double margin, const DesignOptions& opts = {});

struct ObserverRun {
  Matrix xhat;      // T x n
  Matrix residual;  // T x m_used, C_used xhat - y
};

/// Integrates xhat' = A xhat + L (y - C_used xhat) with fixed-step RK4 on the
/// uniform grid `t`; y is T x m_used and is interpolated linearly between
/// samples. Throws GridMismatch.
ObserverRun run_observer(const LtiSystem& sys, const ObserverDesign& design, const Vector& t,
                         const Matrix& y, const Vector& xhat0);

struct ErrorSystemPoles {
  std::vector<std::complex<double>> poles;
  double max_real_part = 0.0;
  /// ||(I - Pi^T Pi) C u_max v_max^T||
  double zero_mode_residue = 0.0;
  /// ||(I - Pi^T Pi) C u_max|| / ||C u_max||
  double premise_ratio = 0.0;
  bool zero_mode_cancelled = false;
};

/// Poles of g_e(s) = (I - Pi^T Pi) C (sI - A)^-1: the stable spectrum, plus
/// the zero pole unless (I - Pi^T Pi) C u_max vanishes.
ErrorSystemPoles error_system_poles(const LtiSystem& sys, const SubspaceDecomposition& dec,
                                    const Matrix& Pi);
ErrorSystemPoles error_system_poles(const LtiSystem& sys, const Matrix& Pi);

}  // namespace rse
