#include <gtest/gtest.h>

#include <cmath>

#include "plants.hpp"
#include "pidebs/design.hpp"
#include "pidebs/verify.hpp"

using namespace pidebs;
using testplants::pi;

namespace {

PlantModel neumann_scalar(double a) {
  PlantModel p;
  p.n = 1;
  p.m = 1;
  p.lambda = {Field1::constant(1.0)};
  p.A = Field1Matrix(1);
  if (a != 0.0) p.A(0, 0) = Field1::constant(a);
  p.B1_1 = Eigen::VectorXd::Ones(1);
  p.B1_0 = Eigen::MatrixXd::Zero(1, 1);
  return validate_plant(p);
}

TargetSpec robin_target(double r, double mu_c = 0.0) {
  TargetSpec t;
  t.mu_c = mu_c;
  t.Bt1_1 = {1.0};
  t.Bt1_0 = {r};
  return t;
}

const Design& coupled_design() {
  static const Design d = design_controller(testplants::coupled_raw(), testplants::coupled_target());
  return d;
}

}  // namespace

TEST(BuildGain, ZeroKernelGivesZeroDirichletFeedback) {
  const auto p = testplants::scalar(1.0, 0.0);
  const auto t = testplants::scalar_target(0.0);
  const auto sol = solve_kernel(p, t);
  const auto g = build_gain(sol, p, t, 41);
  EXPECT_EQ(g.k_boundary(0, 0), 0.0);
  for (double v : g.row(0, 0)) EXPECT_NEAR(v, 0.0, 1e-12);
  Profile x{std::vector<double>(41, 1.0)};
  EXPECT_NEAR(eval_control(g, x)[0], 0.0, 1e-12);
}

TEST(BuildGain, ZeroKernelRobinTargetGivesBoundaryFeedback) {
  // with K = 0 the control has to enforce dx(1) + 2 x(1) = 0 directly
  const auto p = neumann_scalar(0.0);
  const auto t = robin_target(2.0);
  const auto g = build_gain(solve_kernel(p, t), p, t, 41);
  EXPECT_NEAR(g.k_boundary(0, 0), -2.0, 1e-12);
  for (double v : g.row(0, 0)) EXPECT_NEAR(v, 0.0, 1e-10);
}

TEST(BuildGain, DirichletTargetOnDerivativeChannelIsRejected) {
  const auto p = neumann_scalar(1.0);
  const auto t = robin_target(0.0);
  const auto sol = solve_kernel(p, t);
  EXPECT_THROW(build_gain(sol, p, testplants::scalar_target(), 41), MissingKernelTrace);
}

TEST(EvalControl, Linear) {
  const auto g = user_gain(coupled_design(), 61);
  const auto z = detail::uniform_nodes(61);
  const auto xs = smooth_profiles(2, 2, z, 21u);
  Profile mix = xs[0];
  for (int i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < z.size(); ++k) mix[i][k] = 2.0 * xs[0][i][k] - 0.5 * xs[1][i][k];
  const Eigen::VectorXd expect = 2.0 * eval_control(g, xs[0]) - 0.5 * eval_control(g, xs[1]);
  EXPECT_LT((eval_control(g, mix) - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EvalControl, GridMismatch) {
  const auto g = user_gain(coupled_design(), 61);
  EXPECT_THROW(eval_control(g, Profile(2, std::vector<double>(60, 0.0))), GridMismatch);
  EXPECT_THROW(eval_control(g, Profile(1, std::vector<double>(61, 0.0))), GridMismatch);
}

TEST(EvalControl, EnforcesTargetBoundaryCondition) {
  // choose a target state meeting the target conditions at z = 1, map it back
  // and check that the plant's boundary operator equals the feedback there
  const auto& d = coupled_design();
  const int nz = 401;
  const auto z = detail::uniform_nodes(nz);
  Profile xt(2, std::vector<double>(nz));
  for (int k = 0; k < nz; ++k) {
    xt[0][k] = std::cos(pi * z[k]) + 0.3;
    xt[1][k] = std::sin(pi * z[k]) * (1 + z[k]);
  }
  const auto x = transform_profile(xt, sample_kernel(d.kernel, z, true), Direction::inverse);
  const double h = z[1] - z[0];
  Eigen::Vector2d x1(x[0].back(), x[1].back());
  Eigen::Vector2d dx1;
  for (int i = 0; i < 2; ++i) dx1[i] = (3 * x[i][nz - 1] - 4 * x[i][nz - 2] + x[i][nz - 3]) / (2 * h);
  const Eigen::Vector2d theta = d.plant.B1_1.asDiagonal() * dx1 + d.plant.B1_0 * x1;
  const Eigen::VectorXd u = eval_control(user_gain(d, nz), x);
  EXPECT_NEAR(theta[0], u[0], 1e-2);
  EXPECT_NEAR(theta[1], u[1], 1e-2);
}
