#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rse/attack.hpp"
#include "rse/observer.hpp"

namespace rse {

/// Step of size `delta` on disturbance channel `channel` (a column of the
/// disturbance map) active on [t_on, t_off).
struct DisturbanceEvent {
  Eigen::Index channel = 0;
  double delta = 0.0;
  double t_on = 0.0;
  double t_off = 0.0;
};

/// Observer wiring for a run. The estimator sees y_used = input_map * y_tilde
/// (standard: row selection; resilient: trusted rows stacked over the
/// surrogate map) and corrects with design.C_used.
struct Estimator {
  ObserverDesign design;
  Matrix input_map;  // m_used x m
  bool resilient = false;
  IndexSet attacked;   // resilient only
  Matrix surrogate;    // |attacked| x m, resilient only
  Vector xhat0;        // empty means zero
};

struct SimOptions {
  double duration = 0.0;
  double dt = 1e-3;
  /// Spacing of recorded samples; a multiple of dt after rounding.
  double record_dt = 0.1;
  /// Start of the window for the post-transient metrics.
  double metrics_start = 0.0;
  Vector x0;        // empty means zero
  Matrix disturbance;  // n x q
  std::vector<DisturbanceEvent> events;
  std::optional<AttackScenario> attack;
  std::optional<Estimator> estimator;
};

struct SimMetrics {
  double state_rmse = 0.0;           // ||xhat - x|| / ||x|| over the metrics window
  double state_rmse_abs = 0.0;
  Vector residual_rms;               // per output, metrics window
  double residual_final = 0.0;       // ||r|| at the last sample
  double max_abs_state = 0.0;
  std::optional<double> approx_error;
};

struct SimResult {
  Vector t;
  Matrix x, y, ytilde, ybar, yhat, xhat, r;  // one row per recorded sample
  std::vector<std::string> state_names;
  std::vector<std::string> output_names;
  bool has_estimator = false;
  SimMetrics metrics;

  Eigen::Index samples() const { return t.size(); }
};

/// RK4 stability limit on dt * spectral radius along the negative real axis.
inline constexpr double kRk4RealAxisLimit = 2.785;

/// Fixed-step RK4 of the plant (and the estimator, if any) as one augmented
/// system. Events snap to the step grid. Throws ConfigInvalid, UnstableStep.
SimResult simulate(const LtiSystem& sys, const SimOptions& opts);

/// CSV: t, x..., y..., yhat..., ybar..., r..., ytilde..., xhat...
void write_csv(const SimResult& res, const std::filesystem::path& path);
std::string csv_header(const SimResult& res);

}  // namespace rse
