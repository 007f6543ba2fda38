#pragma once

#include <string_view>
#include <vector>

#include "rse/clustering.hpp"
#include "rse/lti.hpp"

namespace rse {

enum class SignalKind { Bias, Ramp, Sinusoid };

/// y_a(t) for one attacked measurement; tau = t - t_start.
///   bias:     amplitude
///   ramp:     slope * tau
///   sinusoid: amplitude * sin(2 pi frequency tau + phase)
struct AttackSignal {
  SignalKind kind = SignalKind::Bias;
  double amplitude = 0.0;
  double slope = 0.0;
  double frequency = 0.0;  // Hz
  double phase = 0.0;      // rad

  double value(double tau) const;
};

struct AttackScenario {
  IndexSet attacked;
  std::vector<AttackSignal> signals;  // parallel to `attacked`
  double t_start = 0.0;
  double t_end = 0.0;

  bool active(double t) const { return t >= t_start && t < t_end; }
  /// Throws ValidationError.
  void validate(Eigen::Index m) const;
};

/// y + (e_A)^T y_a(t): adds the attack inside the window, identity elsewhere.
Vector inject(const Vector& y, const AttackScenario& scenario, double t);

enum class AttackClass { Observable, RequiresAugmentation };

struct Classification {
  AttackClass kind = AttackClass::Observable;
  IndexSet trusted;
  IndexSet attacked;
  Matrix C1;
  Matrix CA;
  ObservabilityResult trusted_rank;
};

/// Splits C into trusted / attacked rows and tests (A, C1) with the PBH rank.
Classification classify(const LtiSystem& sys, const Matrix& C, const IndexSet& attacked,
                        double tol = kDefaultRankTol);

std::string_view to_string(AttackClass c);

Matrix select_rows(const Matrix& M, const IndexSet& rows);

}  // namespace rse
