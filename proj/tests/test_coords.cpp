#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "plants.hpp"
#include "pidebs/coords.hpp"

using namespace pidebs;

namespace {

const CoordinateAtlas& atlas() {
  static const CoordinateAtlas a = build_atlas(testplants::coupled());
  return a;
}

PlantModel constant_pair(double l0, double l1) {
  PlantModel p;
  p.n = 2;
  p.m = 2;
  p.lambda = {Field1::constant(l0), Field1::constant(l1)};
  p.B1_1 = Eigen::VectorXd::Zero(2);
  p.B1_0 = Eigen::MatrixXd::Identity(2, 2);
  return validate_plant(p);
}

}  // namespace

TEST(Atlas, RoundTripOriginalCanonicalOriginal) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double worst = 0.0;
      for (int k = 0; k < 1000; ++k) {
        double z = u(rng), zeta = u(rng);
        if (zeta > z) std::swap(z, zeta);
        auto [xi, eta] = atlas().to_canonical(i, j, z, zeta);
        auto [z2, zeta2] = atlas().from_canonical(i, j, xi, eta);
        worst = std::max({worst, std::abs(z2 - z), std::abs(zeta2 - zeta)});
      }
      EXPECT_LT(worst, 1e-9) << i << ',' << j;
    }
}

TEST(Atlas, RoundTripCanonicalOriginalCanonical) {
  std::mt19937 rng(5);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const auto& g = atlas().pair(i, j);
      std::uniform_real_distribution<double> ux(0.0, g.c), ue(g.b, g.a);
      double worst = 0.0;
      int tested = 0;
      while (tested < 1000) {
        const double xi = ux(rng), eta = ue(rng);
        if (!atlas().in_domain(i, j, xi, eta, 0.0)) continue;
        auto [z, zeta] = atlas().from_canonical(i, j, xi, eta);
        auto [xi2, eta2] = atlas().to_canonical(i, j, z, std::min(zeta, z));
        worst = std::max({worst, std::abs(xi2 - xi), std::abs(eta2 - eta)});
        ++tested;
      }
      EXPECT_LT(worst, 1e-9) << i << ',' << j;
    }
}

TEST(Atlas, LowerCurveSlopeStrictlyBetweenMinusOneAndZero) {
  for (auto [i, j] : {std::pair{0, 1}, std::pair{1, 0}}) {
    const double c = atlas().pair(i, j).c;
    for (int k = 0; k <= 200; ++k) {
      const double slope = atlas().eta_lower(i, j, c * k / 200.0).second;
      EXPECT_GT(slope, -1.0);
      EXPECT_LT(slope, 0.0);
    }
  }
}

TEST(Atlas, LowerCurveVanishesOnDiagonalElements) {
  for (int i = 0; i < 2; ++i)
    for (double xi : {0.0, 0.4, 1.0}) {
      auto [e, s] = atlas().eta_lower(i, i, xi);
      EXPECT_EQ(e, 0.0);
      EXPECT_EQ(s, 0.0);
    }
}

TEST(Atlas, ConstantDiffusionGivesStraightLowerCurve) {
  // lambda = (4, 1): phi_i = z/2, phi_j = z, the diagonal maps to eta = -xi/3
  const auto a = build_atlas(constant_pair(4.0, 1.0));
  const int i = 0, j = 1;
  const double c = a.pair(i, j).c;
  for (int k = 0; k <= 10; ++k) {
    const double xi = c * k / 10.0;
    auto [e, s] = a.eta_lower(i, j, xi);
    EXPECT_NEAR(e, -xi / 3.0, 1e-9);
    EXPECT_NEAR(s, -1.0 / 3.0, 1e-12);
  }
}

TEST(Atlas, DiagonalMapsToLowerCurve) {
  for (auto [i, j] : {std::pair{0, 1}, std::pair{1, 0}})
    for (double z : {0.0, 0.2, 0.5, 0.9, 1.0}) {
      auto [xi, eta] = atlas().to_canonical(i, j, z, z);
      EXPECT_NEAR(eta, atlas().eta_lower(i, j, xi).first, 1e-9);
      EXPECT_NEAR(atlas().z_lower(i, j, xi), z, 1e-9);
    }
}

TEST(Atlas, Errors) {
  EXPECT_THROW(atlas().to_canonical(0, 1, 0.3, 0.5), OutOfRange);
  EXPECT_THROW(atlas().to_canonical(0, 1, 1.2, 0.5), OutOfRange);
  const auto& g = atlas().pair(0, 1);
  EXPECT_THROW(atlas().from_canonical(0, 1, 0.5 * g.c, g.a + 1.0), OutsideDomain);
  EXPECT_THROW(atlas().eta_lower(0, 1, g.c + 0.1), OutOfRange);
  EXPECT_THROW(build_atlas(testplants::coupled(), 5), GridTooCoarse);
}
