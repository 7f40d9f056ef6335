#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "plants.hpp"
#include "pidebs/design.hpp"
#include "pidebs/verify.hpp"

using namespace pidebs;
using testplants::pi;

namespace {

double top_real_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  return es.eigenvalues().real().maxCoeff();
}

PlantModel heat(bool neumann_left) {
  PlantModel p;
  p.n = 1;
  p.m = neumann_left ? 0 : 1;
  if (neumann_left) p.Q0 = {0.0};
  p.lambda = {Field1::constant(1.0)};
  p.B1_1 = Eigen::VectorXd::Zero(1);
  p.B1_0 = Eigen::MatrixXd::Identity(1, 1);
  return validate_plant(p);
}

const Design& coupled_design() {
  static const Design d = design_controller(testplants::coupled_raw(), testplants::coupled_target());
  return d;
}

SimSettings settings(double t_end, double dt) {
  SimSettings s;
  s.t_end = t_end;
  s.dt = dt;
  s.n_z = 102;
  s.x0 = {Field1([](double z) { return std::sin(pi * z) + z; }), Field1([](double z) { return z * (1 - z) + 0.5; })};
  return s;
}

}  // namespace

TEST(Discretize, HeatEquationSpectrum) {
  const auto sys = discretize(heat(false), 102);
  EXPECT_NEAR(top_real_eigenvalue(sys.reduced_operator()), -pi * pi, 0.01 * pi * pi);
}

TEST(Discretize, UncoupledPlantIsBlockDiagonal) {
  PlantModel p;
  p.n = 2;
  p.m = 2;
  p.lambda = {Field1::constant(1.0), Field1::constant(2.0)};
  p.A = Field1Matrix(2);
  p.A(0, 0) = Field1::constant(3.0);
  p.B1_1 = Eigen::VectorXd::Zero(2);
  p.B1_0 = Eigen::MatrixXd::Identity(2, 2);
  const auto sys = discretize(validate_plant(p), 21);
  EXPECT_EQ(sys.op.block(0, 21, 21, 21).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(sys.op.block(21, 0, 21, 21).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(sys.bc.block(0, 21, 21, 21).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Discretize, TooCoarse) { EXPECT_THROW(discretize(heat(false), 10), GridTooCoarse); }

TEST(Simulate, ZeroStateStaysZero) {
  const auto sys = discretize(testplants::coupled(), 41);
  const auto tr = simulate(sys, ControlLaw{}, Profile(2, std::vector<double>(41, 0.0)), 0.1, 1e-2);
  for (double v : tr.l2_norms) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(tr.times.size(), 11u);
}

TEST(Simulate, HeatModeDecaysAtItsRate) {
  const auto sys = discretize(heat(false), 102);
  Profile x0{std::vector<double>(102)};
  for (int k = 0; k < 102; ++k) x0[0][k] = std::sin(pi * sys.z[k]);
  const auto tr = simulate(sys, ControlLaw{}, x0, 0.5, 1e-3);
  EXPECT_NEAR(fit_decay_rate(tr.times, tr.l2_norms), pi * pi, 0.01 * pi * pi);
}

TEST(Simulate, SingularStepIsRejected) {
  auto sys = discretize(heat(false), 21);
  sys.bc.row(20).setZero();
  EXPECT_THROW(simulate(sys, ControlLaw{}, Profile{std::vector<double>(21, 0.0)}, 0.1, 1e-2), StepRejected);
}

TEST(Simulate, BadInputs) {
  const auto sys = discretize(heat(false), 21);
  EXPECT_THROW(simulate(sys, ControlLaw{}, Profile{std::vector<double>(20, 0.0)}, 0.1, 1e-2), GridMismatch);
  EXPECT_THROW(simulate(sys, ControlLaw{}, Profile{std::vector<double>(21, 0.0)}, 0.1, 0.0), OutOfRange);
}

TEST(Simulate, LaggedAndImplicitFeedbackAgree) {
  const auto& d = coupled_design();
  const auto sys = discretize(d.plant, 61);
  const auto gain = user_gain(d, 61);
  const auto x0 = sample_profile(settings(1, 1).x0, sys.z);
  const auto lagged = simulate(sys, gain_law(gain), x0, 0.5, 2.5e-4);
  const auto implicit = simulate(sys, gain, x0, 0.5, 2.5e-4);
  EXPECT_NEAR(lagged.l2_norms.back() / implicit.l2_norms.back(), 1.0, 1e-2);
}

TEST(ClosedLoop, OpenLoopGrowsAndFeedbackStabilises) {
  const auto& d = coupled_design();
  const auto s = settings(4.0, 1e-3);
  const auto open = open_loop(d.plant, s);
  EXPECT_GT(open.l2_norms.back() / open.l2_norms.front(), 1.0);
  const double rate = fit_decay_rate(closed_loop(d, s).times, closed_loop(d, s).l2_norms);
  EXPECT_GE(rate, 2.35);
  EXPECT_LE(rate, 4.37);
}

TEST(OpenLoop, LateGrowthMatchesUnstableEigenvalue) {
  const auto& d = coupled_design();
  const auto s = settings(4.0, 1e-3);
  const double top = top_real_eigenvalue(discretize(d.plant, s.n_z).reduced_operator());
  EXPECT_GT(top, 0.0);
  const auto tr = open_loop(d.plant, s);
  const std::size_t from = tr.times.size() / 2;
  const std::vector<double> t(tr.times.begin() + static_cast<long>(from), tr.times.end());
  const std::vector<double> y(tr.l2_norms.begin() + static_cast<long>(from), tr.l2_norms.end());
  EXPECT_NEAR(-fit_decay_rate(t, y), top, 0.02 * top);
}

TEST(ClosedLoop, LargerTargetDampingDecaysFaster) {
  const auto s = settings(2.0, 1e-3);
  const auto d8 = design_controller(testplants::coupled_raw(), testplants::coupled_target(8.0));
  const auto t2 = closed_loop(coupled_design(), s);
  const auto t8 = closed_loop(d8, s);
  EXPECT_GT(fit_decay_rate(t8.times, t8.l2_norms), fit_decay_rate(t2.times, t2.l2_norms));
}

TEST(ClosedLoop, HalvingTimeStepChangesLittle) {
  const auto& d = coupled_design();
  const auto a = closed_loop(d, settings(4.0, 1e-3));
  const auto b = closed_loop(d, settings(4.0, 5e-4));
  EXPECT_NEAR(b.l2_norms.back() / a.l2_norms.back(), 1.0, 1e-2);
  EXPECT_EQ(a.snapshot_times.back(), b.snapshot_times.back());
}

TEST(ClosedLoop, Deterministic) {
  const auto& d = coupled_design();
  const auto a = closed_loop(d, settings(0.5, 1e-3));
  const auto b = closed_loop(d, settings(0.5, 1e-3));
  EXPECT_EQ(a.l2_norms, b.l2_norms);
}

TEST(TargetSpectrum, DirichletDirichlet) {
  const double mu = estimate_mu_max(heat(false), testplants::scalar_target(0.0));
  EXPECT_NEAR(mu, -pi * pi, 0.005 * pi * pi);
}

TEST(TargetSpectrum, NeumannDirichlet) {
  const double mu = estimate_mu_max(heat(true), testplants::scalar_target(0.0));
  EXPECT_NEAR(mu, -pi * pi / 4, 0.005 * pi * pi / 4);
}

TEST(TargetSpectrum, CoupledExample) {
  const auto& d = coupled_design();
  const double mu = estimate_mu_max(d.working, d.working_target);
  EXPECT_NEAR(mu, -1.36, 0.05);
  EXPECT_LT(std::abs(estimate_mu_max(d.working, d.working_target, 1601) - mu), 1e-3);
  EXPECT_THROW(estimate_mu_max(d.working, d.working_target, 100), EigSolveFailed);
}

TEST(Transform, ForwardInverseRoundTrip) {
  const auto& d = coupled_design();
  const auto z = detail::uniform_nodes(51);
  EXPECT_LT(reciprocity_error(d.kernel, smooth_profiles(5, 2, z, 7u), z), 1e-2);
}
