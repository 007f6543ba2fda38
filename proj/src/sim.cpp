#include "rse/sim.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "rse/config.hpp"
#include "rse/error.hpp"

namespace rse {

namespace {

double spectral_radius(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

long snap(double t, double dt) { return std::lround(t / dt); }

void check_options(const LtiSystem& sys, const SimOptions& o) {
  const Eigen::Index n = sys.states();
  auto bad = [](const std::string& m) { throw Error(ErrorCode::ConfigInvalid, m); };
  if (!(o.dt > 0) || !std::isfinite(o.dt)) bad("dt must be positive");
  if (!(o.duration >= 0) || !std::isfinite(o.duration)) bad("duration must be >= 0");
  if (!(o.record_dt > 0)) bad("record_dt must be positive");
  if (o.x0.size() != 0 && o.x0.size() != n) bad("x0 has wrong length");
  for (const auto& e : o.events) {
    if (e.channel < 0 || e.channel >= o.disturbance.cols()) bad("event channel out of range");
    if (!(e.t_on >= 0 && e.t_on <= o.duration && e.t_off >= e.t_on && e.t_off <= o.duration)) {
      bad("load event outside [0, duration]");
    }
    if (!std::isfinite(e.delta)) bad("load event delta is not finite");
  }
  if (!o.events.empty() && o.disturbance.rows() != n) bad("disturbance map has wrong row count");
  if (o.attack) o.attack->validate(sys.outputs());
  if (o.estimator) {
    const auto& e = *o.estimator;
    if (e.design.L.rows() != n || e.design.C_used.cols() != n ||
        e.design.L.cols() != e.design.C_used.rows() || e.input_map.rows() != e.design.C_used.rows() ||
        e.input_map.cols() != sys.outputs()) {
      bad("estimator dimensions do not match the plant");
    }
    if (e.xhat0.size() != 0 && e.xhat0.size() != n) bad("xhat0 has wrong length");
    if (e.resilient && (e.surrogate.rows() != static_cast<Eigen::Index>(e.attacked.size()) ||
                        e.surrogate.cols() != sys.outputs())) {
      bad("surrogate map dimensions do not match");
    }
  }
}

}  // namespace

SimResult simulate(const LtiSystem& sys, const SimOptions& o) {
  sys.validate();
  check_options(sys, o);
  const Matrix A = sys.dynamics();
  const Matrix& C = sys.C;
  const Eigen::Index n = A.rows();
  const Eigen::Index m = C.rows();
  const double dt = o.dt;
  const long steps = snap(o.duration, dt);
  const long every = std::max(1L, snap(o.record_dt, dt));
  const bool est = o.estimator.has_value();
  const Matrix BK = sys.attack_feedthrough();
  const bool feedthrough = BK.size() != 0 && BK.norm() != 0.0;

  // Augmented dynamics z = [x; xhat]; the attack enters through y_tilde.
  const Eigen::Index N = est ? 2 * n : n;
  Matrix F = Matrix::Zero(N, N);
  F.topLeftCorner(n, n) = A;
  Matrix LM;  // observer gain applied to y_tilde
  if (est) {
    const auto& e = *o.estimator;
    LM = e.design.L * e.input_map;  // n x m
    F.bottomLeftCorner(n, n) = LM * C;
    F.bottomRightCorner(n, n) = A - e.design.L * e.design.C_used;
  }
  const double rho = spectral_radius(F);
  if (dt * rho > kRk4RealAxisLimit) {
    std::ostringstream os;
    os << "dt * spectral radius = " << dt * rho << " exceeds the RK4 limit "
       << kRk4RealAxisLimit;
    throw Error(ErrorCode::UnstableStep, os.str());
  }

  // Piecewise-constant disturbance, changes only at snapped step indices.
  auto disturbance_at = [&](long k) {
    Vector d = Vector::Zero(n);
    for (const auto& e : o.events) {
      if (k >= snap(e.t_on, dt) && k < snap(e.t_off, dt)) d += e.delta * o.disturbance.col(e.channel);
    }
    return d;
  };
  auto attack_at = [&](double t) {
    Vector a = Vector::Zero(m);
    if (o.attack && o.attack->active(t)) {
      for (size_t k = 0; k < o.attack->attacked.size(); ++k) {
        a(o.attack->attacked[k]) += o.attack->signals[k].value(t - o.attack->t_start);
      }
    }
    return a;
  };
  auto rhs = [&](const Vector& z, double t, const Vector& d) {
    Vector dz = F * z;
    dz.head(n) += d;
    if (o.attack && (est || feedthrough)) {
      const Vector a = attack_at(t);
      if (feedthrough) dz.head(n) += BK * a;
      if (est) dz.tail(n) += LM * a;
    }
    return dz;
  };

  SimResult res;
  const long nrec = steps / every + 1 + (steps % every ? 1 : 0);
  res.t.resize(nrec);
  res.x.resize(nrec, n);
  res.y.resize(nrec, m);
  res.ytilde.resize(nrec, m);
  res.ybar.resize(nrec, m);
  res.has_estimator = est;
  if (est) {
    res.yhat.resize(nrec, m);
    res.xhat.resize(nrec, n);
    res.r.resize(nrec, m);
  }

  auto record = [&](long row, double t, const Vector& z) {
    const Vector x = z.head(n);
    const Vector y = C * x;
    const Vector yt = y + attack_at(t);
    res.t(row) = t;
    res.x.row(row) = x.transpose();
    res.y.row(row) = y.transpose();
    res.ytilde.row(row) = yt.transpose();
    Vector yb = yt;
    if (est) {
      const auto& e = *o.estimator;
      if (e.resilient) {
        const Vector s = e.surrogate * yt;
        for (size_t k = 0; k < e.attacked.size(); ++k) yb(e.attacked[k]) = s(static_cast<Eigen::Index>(k));
      }
      const Vector xh = z.tail(n);
      const Vector yh = C * xh;
      res.xhat.row(row) = xh.transpose();
      res.yhat.row(row) = yh.transpose();
      res.r.row(row) = (yh - yb).transpose();
    }
    res.ybar.row(row) = yb.transpose();
  };

  Vector z = Vector::Zero(N);
  if (o.x0.size()) z.head(n) = o.x0;
  if (est && o.estimator->xhat0.size()) z.tail(n) = o.estimator->xhat0;

  long row = 0;
  record(row++, 0.0, z);
  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Vector d = disturbance_at(k);
    const Vector k1 = rhs(z, t, d);
    const Vector k2 = rhs(z + 0.5 * dt * k1, t + 0.5 * dt, d);
    const Vector k3 = rhs(z + 0.5 * dt * k2, t + 0.5 * dt, d);
    const Vector k4 = rhs(z + dt * k3, t + dt, d);
    z += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double zn = z.head(n).norm();
    if (!(zn <= 1e6) || (est && !(z.tail(n).norm() <= 1e6))) {
      std::ostringstream os;
      os << "state norm left the bound 1e6 at t = " << t + dt;
      throw Error(ErrorCode::UnstableStep, os.str());
    }
    if ((k + 1) % every == 0 || k + 1 == steps) record(row++, static_cast<double>(k + 1) * dt, z);
  }

  // Metrics over the post-transient window.
  SimMetrics& mt = res.metrics;
  mt.max_abs_state = res.x.cwiseAbs().maxCoeff();
  if (est) {
    Eigen::Index first = 0;
    while (first < res.samples() && res.t(first) < o.metrics_start) ++first;
    const Eigen::Index cnt = res.samples() - first;
    if (cnt > 0) {
      const Matrix ex = res.xhat.bottomRows(cnt) - res.x.bottomRows(cnt);
      const double xn = res.x.bottomRows(cnt).norm();
      mt.state_rmse_abs = ex.norm() / std::sqrt(static_cast<double>(cnt));
      mt.state_rmse = xn > 0 ? ex.norm() / xn : (ex.norm() == 0 ? 0.0 : INFINITY);
      mt.residual_rms = (res.r.bottomRows(cnt).colwise().norm() / std::sqrt(static_cast<double>(cnt))).transpose();
    }
    mt.residual_final = res.r.row(res.samples() - 1).norm();
  }
  return res;
}

std::string csv_header(const SimResult& res) {
  std::ostringstream os;
  os << "t";
  for (const auto& s : res.state_names) os << ",x:" << s;
  for (const auto& s : res.output_names) os << ",y:" << s;
  if (res.has_estimator) {
    for (const auto& s : res.output_names) os << ",yhat:" << s;
  }
  for (const auto& s : res.output_names) os << ",ybar:" << s;
  if (res.has_estimator) {
    for (const auto& s : res.output_names) os << ",r:" << s;
  }
  for (const auto& s : res.output_names) os << ",ytilde:" << s;
  if (res.has_estimator) {
    for (const auto& s : res.state_names) os << ",xhat:" << s;
  }
  return os.str();
}

void write_csv(const SimResult& res, const std::filesystem::path& path) {
  if (static_cast<Eigen::Index>(res.state_names.size()) != res.x.cols() ||
      static_cast<Eigen::Index>(res.output_names.size()) != res.y.cols()) {
    throw Error(ErrorCode::ValidationError, "CSV column names do not match the trajectories");
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::ConfigInvalid, "cannot write " + path.string());
  std::string line;
  f << csv_header(res) << "\n";
  auto put = [&](const auto& rowexpr) {
    for (Eigen::Index j = 0; j < rowexpr.size(); ++j) {
      line += ',';
      line += format_double(rowexpr(j));
    }
  };
  for (Eigen::Index k = 0; k < res.samples(); ++k) {
    line = format_double(res.t(k));
    put(res.x.row(k));
    put(res.y.row(k));
    if (res.has_estimator) put(res.yhat.row(k));
    put(res.ybar.row(k));
    if (res.has_estimator) put(res.r.row(k));
    put(res.ytilde.row(k));
    if (res.has_estimator) put(res.xhat.row(k));
    f << line << "\n";
  }
  if (!f) throw Error(ErrorCode::ConfigInvalid, "write failed: " + path.string());
}

}  // namespace rse
