#include "rse/observer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rse/error.hpp"

namespace rse {

ObserverDesign design_gain(const LtiSystem& sys, const Matrix& C_used, double margin,
                           const DesignOptions& opts) {
  return design_gain(sys, stable_subspace(sys), C_used, margin, opts);
}

ObserverDesign design_gain(const LtiSystem& sys, const SubspaceDecomposition& dec,
                           const Matrix& C_used, double margin, const DesignOptions& opts) {
  const Matrix A = sys.dynamics();
  const Eigen::Index n = A.rows();
  if (C_used.cols() != n) throw Error(ErrorCode::ValidationError, "C_used must have n columns");
  if (!(margin >= 0.0) || !std::isfinite(margin)) {
    throw Error(ErrorCode::ConfigInvalid, "observer margin must be a finite value >= 0");
  }

  for (const auto& lam : unobservable_modes(A, C_used, opts.rank_tol)) {
    if (lam.real() >= -dec.tol_zero) {
      std::ostringstream os;
      os << "mode " << lam.real() << (lam.imag() < 0 ? "" : "+") << lam.imag()
         << "i is unobservable and not stable";
      throw Error(ErrorCode::NotDetectable, os.str());
    }
  }

  ObserverDesign d;
  d.C_used = C_used;
  d.requested_margin = margin;
  const Eigen::Index s = dec.stable_dim();
  if (s == 0) {
    d.L = Matrix::Zero(n, C_used.rows());
    d.design_margin = margin;
    d.stability_margin = std::numeric_limits<double>::infinity();
    d.margin_met = true;
    return d;
  }
  const Matrix CU = C_used * dec.U_bar;

  // Unobservable stable modes cannot be moved; keep the shifted pair detectable.
  double limit = std::numeric_limits<double>::infinity();
  for (const auto& lam : unobservable_modes(dec.A_bar, CU, opts.rank_tol)) {
    limit = std::min(limit, -lam.real());
  }
  d.design_margin = margin < limit ? margin : 0.9 * limit;

  const Matrix As = dec.A_bar + d.design_margin * Matrix::Identity(s, s);
  const Matrix P = solve_care(As.transpose(), CU.transpose(), Matrix::Identity(s, s),
                              Matrix::Identity(CU.rows(), CU.rows()));
  const Matrix Lbar = P * CU.transpose();
  d.L = dec.U_bar * Lbar;
  d.stability_margin = -spectral_abscissa(dec.A_bar - Lbar * CU);
  d.margin_met = d.stability_margin >= margin * (1.0 - 1e-9);
  return d;
}

ObserverRun run_observer(const LtiSystem& sys, const ObserverDesign& design, const Vector& t,
                         const Matrix& y, const Vector& xhat0) {
  const Matrix A = sys.dynamics();
  const Eigen::Index n = A.rows();
  const Eigen::Index T = t.size();
  const Matrix& L = design.L;
  const Matrix& C = design.C_used;
  if (y.rows() != T || y.cols() != C.rows()) {
    throw Error(ErrorCode::GridMismatch, "measurement stream does not match the time grid");
  }
  if (xhat0.size() != n) throw Error(ErrorCode::GridMismatch, "xhat0 has wrong length");
  ObserverRun out;
  out.xhat = Matrix::Zero(T, n);
  out.residual = Matrix::Zero(T, C.rows());
  if (T == 0) return out;
  const double dt = T > 1 ? t(1) - t(0) : 0.0;
  for (Eigen::Index k = 1; k < T; ++k) {
    const double h = t(k) - t(k - 1);
    if (!(h > 0) || std::abs(h - dt) > 1e-9 * std::max(1.0, std::abs(t(k)))) {
      throw Error(ErrorCode::GridMismatch, "time grid is not uniform");
    }
  }
  const Matrix F = A - L * C;
  Vector x = xhat0;
  out.xhat.row(0) = x.transpose();
  out.residual.row(0) = (C * x - y.row(0).transpose()).transpose();
  for (Eigen::Index k = 0; k + 1 < T; ++k) {
    const Vector y0 = y.row(k).transpose();
    const Vector y1 = y.row(k + 1).transpose();
    const Vector ym = 0.5 * (y0 + y1);
    const Vector k1 = F * x + L * y0;
    const Vector k2 = F * (x + 0.5 * dt * k1) + L * ym;
    const Vector k3 = F * (x + 0.5 * dt * k2) + L * ym;
    const Vector k4 = F * (x + dt * k3) + L * y1;
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out.xhat.row(k + 1) = x.transpose();
    out.residual.row(k + 1) = (C * x - y1).transpose();
  }
  return out;
}

ErrorSystemPoles error_system_poles(const LtiSystem& sys, const Matrix& Pi) {
  return error_system_poles(sys, stable_subspace(sys), Pi);
}

ErrorSystemPoles error_system_poles(const LtiSystem& sys, const SubspaceDecomposition& dec,
                                    const Matrix& Pi) {
  const Eigen::Index m = sys.C.rows();
  if (Pi.cols() != m) throw Error(ErrorCode::ValidationError, "Pi and C disagree on m");
  ErrorSystemPoles out;
  const Matrix Pbar = Matrix::Identity(m, m) - Pi.transpose() * Pi;
  const Matrix Cu = sys.C * dec.u_max;
  const Matrix g0 = Pbar * Cu;
  out.zero_mode_residue = (g0 * dec.v_max.transpose()).norm();
  const double cu = Cu.norm();
  out.premise_ratio = cu > 0 ? g0.norm() / cu : 0.0;
  const double tol = 1e-8 * std::max(1.0, sys.C.norm()) * std::max(1.0, dec.u_max.norm());
  out.zero_mode_cancelled = g0.norm() <= tol;

  if (dec.stable_dim() > 0) {
    Eigen::EigenSolver<Matrix> es(dec.A_bar, false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.poles.push_back(es.eigenvalues()(i));
  }
  if (!out.zero_mode_cancelled) {
    for (Eigen::Index i = 0; i < dec.zero_modes; ++i) out.poles.emplace_back(0.0, 0.0);
  }
  out.max_real_part = -std::numeric_limits<double>::infinity();
  for (const auto& p : out.poles) out.max_real_part = std::max(out.max_real_part, p.real());
  return out;
}

}  // namespace rse
