#include "rse/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "rse/error.hpp"

namespace rse {

double AttackSignal::value(double tau) const {
  switch (kind) {
    case SignalKind::Bias: return amplitude;
    case SignalKind::Ramp: return slope * tau;
    case SignalKind::Sinusoid:
      return amplitude * std::sin(2.0 * std::numbers::pi * frequency * tau + phase);
  }
  return 0.0;
}

void AttackScenario::validate(Eigen::Index m) const {
  if (signals.size() != attacked.size()) {
    throw Error(ErrorCode::ValidationError, "one attack signal per attacked index required");
  }
  std::set<Eigen::Index> seen;
  for (auto i : attacked) {
    if (i < 0 || i >= m) throw Error(ErrorCode::ValidationError, "attacked index out of range");
    if (!seen.insert(i).second) throw Error(ErrorCode::ValidationError, "attacked index repeated");
  }
  if (!(std::isfinite(t_start) && std::isfinite(t_end) && t_start < t_end)) {
    throw Error(ErrorCode::ValidationError, "attack window needs t_start < t_end");
  }
  for (const auto& s : signals) {
    if (!std::isfinite(s.amplitude) || !std::isfinite(s.slope) || !std::isfinite(s.frequency) ||
        !std::isfinite(s.phase)) {
      throw Error(ErrorCode::ValidationError, "attack signal parameter is not finite");
    }
  }
}

Vector inject(const Vector& y, const AttackScenario& sc, double t) {
  Vector out = y;
  if (!sc.active(t)) return out;
  for (size_t k = 0; k < sc.attacked.size(); ++k) {
    out(sc.attacked[k]) += sc.signals[k].value(t - sc.t_start);
  }
  return out;
}

Matrix select_rows(const Matrix& M, const IndexSet& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), M.cols());
  for (size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = M.row(rows[k]);
  return out;
}

Classification classify(const LtiSystem& sys, const Matrix& C, const IndexSet& attacked,
                        double tol) {
  Classification c;
  c.attacked = attacked;
  std::sort(c.attacked.begin(), c.attacked.end());
  c.trusted = complement(c.attacked, C.rows());
  c.C1 = select_rows(C, c.trusted);
  c.CA = select_rows(C, c.attacked);
  c.trusted_rank = observability_rank(sys.dynamics(), c.C1, tol);
  c.kind = c.trusted_rank.is_observable ? AttackClass::Observable
                                        : AttackClass::RequiresAugmentation;
  return c;
}

std::string_view to_string(AttackClass c) {
  return c == AttackClass::Observable ? "Observable" : "RequiresAugmentation";
}

}  // namespace rse
