#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "rse/attack.hpp"
#include "rse/grid.hpp"
#include "support.hpp"

using namespace rse;
using rse::testing::Gen;

namespace {

GridModel rts24_model() {
  return assemble_state_space(parse_grid_file(std::filesystem::path(RSE_DATA_DIR) / "rts24.grid"));
}

AttackScenario bias_on(Eigen::Index i, double v, double t0, double t1) {
  AttackScenario s;
  s.attacked = {i};
  s.signals = {AttackSignal{SignalKind::Bias, v, 0.0, 0.0, 0.0}};
  s.t_start = t0;
  s.t_end = t1;
  return s;
}

/// min over eigenvalues of sigma_min([A - lambda I; C]) / ||A||.
double weakest_pbh(const Matrix& A, const Matrix& C) {
  const Eigen::Index n = A.rows();
  Eigen::EigenSolver<Matrix> es(A, false);
  double worst = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::MatrixXcd M(n + C.rows(), n);
    M.topRows(n) = A.cast<std::complex<double>>();
    M.topRows(n).diagonal().array() -= es.eigenvalues()(i);
    M.bottomRows(C.rows()) = C.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
    worst = std::min(worst, svd.singularValues()(n - 1));
  }
  return worst / A.norm();
}

}  // namespace

TEST(AttackSignal, Shapes) {
  const AttackSignal bias{SignalKind::Bias, 0.5, 0, 0, 0};
  EXPECT_EQ(bias.value(0.0), 0.5);
  EXPECT_EQ(bias.value(17.0), 0.5);
  const AttackSignal ramp{SignalKind::Ramp, 0, -0.25, 0, 0};
  EXPECT_EQ(ramp.value(4.0), -1.0);
  const AttackSignal sine{SignalKind::Sinusoid, 2.0, 0, 0.5, 0.3};
  EXPECT_NEAR(sine.value(0.7), 2.0 * std::sin(2.0 * std::numbers::pi * 0.5 * 0.7 + 0.3), 1e-15);
}

TEST(Inject, WindowAndIndex) {
  const auto s = bias_on(3, 0.5, 1.0, 2.0);
  Vector y(5);
  y << 1, 2, 3, 4, 5;
  EXPECT_EQ(inject(y, s, 0.5), y);
  EXPECT_EQ(inject(y, s, 2.0), y);
  Vector expect = y;
  expect(3) += 0.5;
  EXPECT_EQ(inject(y, s, 1.0), expect);
  EXPECT_EQ(inject(y, s, 1.5), expect);
}

TEST(Inject, CoordinatedAttackSupportedOnAttackedSet) {
  Gen g(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index m = 48;
    IndexSet all(48);
    for (Eigen::Index i = 0; i < m; ++i) all[static_cast<size_t>(i)] = i;
    std::shuffle(all.begin(), all.end(), std::mt19937_64(trial));
    AttackScenario s;
    s.attacked.assign(all.begin(), all.begin() + 10);
    for (int k = 0; k < 10; ++k) {
      s.signals.push_back({SignalKind::Sinusoid, g.uniform(0.01, 1.0), 0.0, g.uniform(0.05, 2.0),
                           g.uniform(0.0, 6.0)});
    }
    s.t_start = 1.0;
    s.t_end = 50.0;
    s.validate(m);
    const Vector y = g.gaussian(m, 1).col(0);
    const double t = g.uniform(1.0, 50.0);
    const Vector d = inject(y, s, t) - y;
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto it = std::find(s.attacked.begin(), s.attacked.end(), i);
      if (it == s.attacked.end()) {
        EXPECT_EQ(d(i), 0.0);
      } else {
        const auto k = static_cast<size_t>(it - s.attacked.begin());
        EXPECT_NEAR(d(i), s.signals[k].value(t - s.t_start), 1e-14);
      }
    }
  }
}

TEST(AttackScenario, ValidateRejectsBadInput) {
  EXPECT_NO_THROW(bias_on(2, 1.0, 0.0, 1.0).validate(3));
  EXPECT_RSE_ERROR(bias_on(3, 1.0, 0.0, 1.0).validate(3), ErrorCode::ValidationError);
  EXPECT_RSE_ERROR(bias_on(0, 1.0, 2.0, 1.0).validate(3), ErrorCode::ValidationError);
  EXPECT_RSE_ERROR(bias_on(0, std::nan(""), 0.0, 1.0).validate(3), ErrorCode::ValidationError);
  auto dup = bias_on(0, 1.0, 0.0, 1.0);
  dup.attacked.push_back(0);
  dup.signals.push_back(dup.signals[0]);
  EXPECT_RSE_ERROR(dup.validate(3), ErrorCode::ValidationError);
  auto ragged = bias_on(0, 1.0, 0.0, 1.0);
  ragged.attacked.push_back(1);
  EXPECT_RSE_ERROR(ragged.validate(3), ErrorCode::ValidationError);
}

TEST(Classify, EmptyAndFullAttack) {
  const auto model = rts24_model();
  const auto none = classify(model.sys, model.sys.C, {});
  EXPECT_EQ(none.kind, AttackClass::Observable);
  EXPECT_EQ(none.trusted.size(), 48u);
  EXPECT_EQ(none.C1, model.sys.C);

  IndexSet all(48);
  for (Eigen::Index i = 0; i < 48; ++i) all[static_cast<size_t>(i)] = i;
  const auto every = classify(model.sys, model.sys.C, all);
  EXPECT_EQ(every.kind, AttackClass::RequiresAugmentation);
  EXPECT_TRUE(every.trusted.empty());
  EXPECT_EQ(every.CA.rows(), 48);
}

TEST(Classify, GeneratorPowerSensorsRequireAugmentation) {
  const auto model = rts24_model();
  IndexSet attacked;
  for (size_t i = 0; i < model.sensors.size(); ++i) {
    const auto& s = model.sensors[i];
    if (s.quantity == Quantity::Power && model.index.is_generator(s.bus))
      attacked.push_back(static_cast<Eigen::Index>(i));
  }
  ASSERT_EQ(attacked.size(), 10u);
  const auto c = classify(model.sys, model.sys.C, attacked);
  EXPECT_EQ(c.kind, AttackClass::RequiresAugmentation);
  EXPECT_EQ(c.C1.rows(), 38);
  // PBH oracle: some eigenvalue of A makes [A - lambda I; C1] rank deficient,
  // while the full sensor set keeps every one of them at full rank.
  EXPECT_LT(weakest_pbh(model.sys.A, c.C1), 1e-9);
  EXPECT_GT(weakest_pbh(model.sys.A, model.sys.C), 1e-9);
}

TEST(SelectRows, KeepsOrder) {
  Matrix M(3, 2);
  M << 1, 2, 3, 4, 5, 6;
  const Matrix S = select_rows(M, {2, 0});
  Matrix expect(2, 2);
  expect << 5, 6, 1, 2;
  EXPECT_EQ(S, expect);
}
