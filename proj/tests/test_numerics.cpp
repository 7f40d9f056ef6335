#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "pidebs/numerics.hpp"

using namespace pidebs;

TEST(GridFn1D, ReproducesLinearData) {
  auto f = GridFn1D::sample([](double x) { return 2 * x - 1; }, 0.0, 1.0, 11);
  for (double x : {0.0, 0.037, 0.5, 0.91, 1.0}) EXPECT_NEAR(interp1(f, x), 2 * x - 1, 1e-14);
}

TEST(GridFn1D, ConvergesOnSmoothData) {
  auto err = [](int n) {
    auto f = GridFn1D::sample([](double x) { return std::sin(3 * x); }, 0.0, 1.0, n);
    double e = 0.0;
    for (int k = 0; k <= 997; ++k) e = std::max(e, std::abs(f(k / 997.0) - std::sin(3 * k / 997.0)));
    return e;
  };
  EXPECT_LT(err(41), err(21) / 4.0);
}

TEST(GridFn1D, MonotoneDataGivesMonotoneInterpolant) {
  GridFn1D f({0, 1, 2, 3, 4}, {0, 0, 1, 1, 5});
  double prev = f(0.0);
  for (int k = 1; k <= 400; ++k) {
    const double v = f(k / 100.0);
    EXPECT_GE(v, prev - 1e-15);
    prev = v;
  }
}

TEST(GridFn1D, RejectsBadNodes) {
  EXPECT_THROW(GridFn1D({0.0}, {1.0}), OutOfRange);
  EXPECT_THROW(GridFn1D({0.0, 0.0}, {1.0, 2.0}), OutOfRange);
  EXPECT_THROW(GridFn1D({0.0, 1.0}, {1.0}), OutOfRange);
}

TEST(GridFn1D, ThrowsOutsideRange) {
  auto f = GridFn1D::sample([](double x) { return x; }, 0.0, 1.0, 5);
  EXPECT_THROW(f(1.01), OutOfRange);
  EXPECT_THROW(f(-0.01), OutOfRange);
  EXPECT_NO_THROW(f(1.0 + 1e-14));
}

TEST(Trapz, ExactForLinearAndConvergent) {
  EXPECT_NEAR(trapz([](double x) { return 3 * x + 1; }, 0.0, 2.0, 3), 8.0, 1e-13);
  const double e1 = std::abs(trapz([](double x) { return std::exp(x); }, 0.0, 1.0, 20) - (std::exp(1.0) - 1));
  const double e2 = std::abs(trapz([](double x) { return std::exp(x); }, 0.0, 1.0, 40) - (std::exp(1.0) - 1));
  EXPECT_NEAR(e1 / e2, 4.0, 0.05);
}

TEST(Trapz, GridFunctionSubInterval) {
  auto f = GridFn1D::sample([](double x) { return x; }, 0.0, 1.0, 11);
  EXPECT_NEAR(trapz(f, 0.15, 0.85), 0.5 * (0.85 * 0.85 - 0.15 * 0.15), 1e-13);
  EXPECT_NEAR(trapz(f, 0.85, 0.15), -0.5 * (0.85 * 0.85 - 0.15 * 0.15), 1e-13);
  EXPECT_DOUBLE_EQ(trapz(f, 0.3, 0.3), 0.0);
}

TEST(Trapz, CumulativeEndsAtTotal) {
  std::vector<double> x{0, 0.5, 1.5, 2}, y{1, 2, 0, 4};
  const auto c = cumulative_trapz(x, y);
  EXPECT_DOUBLE_EQ(c.front(), 0.0);
  EXPECT_DOUBLE_EQ(c.back(), trapz(std::span<const double>(x), std::span<const double>(y)));
}

TEST(InvertMonotone, RoundTrip) {
  auto f = GridFn1D::sample([](double x) { return x + 0.3 * x * x * x; }, 0.0, 2.0, 201);
  MonotoneInverse inv(f);
  for (int k = 0; k <= 100; ++k) {
    const double y = inv.min() + (inv.max() - inv.min()) * k / 100.0;
    EXPECT_NEAR(f(inv(y)), y, 1e-10);
  }
  EXPECT_NEAR(invert_monotone(f, f(1.3)), 1.3, 1e-10);
}

TEST(InvertMonotone, RejectsNonMonotoneAndOutOfRange) {
  EXPECT_THROW(MonotoneInverse(GridFn1D({0, 1, 2}, {0, 1, 1})), NotMonotone);
  MonotoneInverse inv(GridFn1D({0, 1}, {0, 1}));
  EXPECT_THROW(inv(1.5), OutOfRange);
}

TEST(FitDecayRate, RecoversExponent) {
  std::vector<double> t, y;
  for (int k = 0; k <= 100; ++k) {
    t.push_back(0.04 * k);
    y.push_back(3.0 * std::exp(-2.5 * t.back()));
  }
  EXPECT_NEAR(fit_decay_rate(t, y), 2.5, 1e-10);
}

TEST(FitDecayRate, Errors) {
  std::vector<double> t(20), y(20, 1.0);
  for (int k = 0; k < 20; ++k) t[k] = k;
  y[3] = 0.0;
  EXPECT_THROW(fit_decay_rate(t, y), NonPositiveNorm);
  EXPECT_THROW(fit_decay_rate(std::vector<double>(5, 1.0), std::vector<double>(5, 1.0)), OutOfRange);
  EXPECT_THROW(fit_decay_rate(t, std::vector<double>(19, 1.0)), OutOfRange);
}

namespace {

PiecewiseGridFn2D plane(int n, double ca, double cb) {
  PiecewiseGridFn2D f(UniformAxis{0.0, 1.0 / (n - 1), n}, UniformAxis{0.0, 1.0 / (n - 1), n});
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) f.sheet_above[f.index(a, b)] = f.sheet_below[f.index(a, b)] = ca * f.axis1.at(a) + cb * f.axis2.at(b);
  return f;
}

}  // namespace

TEST(Interp2, BilinearExactOnPlanes) {
  const auto f = plane(11, 2.0, -3.0);
  for (double a : {0.0, 0.33, 0.71, 1.0})
    for (double b : {0.0, 0.05, 0.5, 1.0}) EXPECT_NEAR(interp2(f, a, b), 2 * a - 3 * b, 1e-13);
  EXPECT_THROW(interp2(f, 1.1, 0.5), OutsideDomain);
}

TEST(Interp2, SheetsSelectedBySide) {
  auto f = plane(11, 1.0, 0.0);
  for (auto& v : f.sheet_below) v = -1.0;
  f.in_above = [](double a, double b) { return b >= a; };
  EXPECT_NEAR(interp2(f, 0.2, 0.7), 0.2, 1e-13);
  EXPECT_DOUBLE_EQ(interp2(f, 0.7, 0.2), -1.0);
  EXPECT_NEAR(interp2(f, 0.7, 0.2, Side::above), 0.7, 1e-13);
}

TEST(Interp2, CubicExactOnCubics) {
  const int n = 9;
  PiecewiseGridFn2D f(UniformAxis{0.0, 0.125, n}, UniformAxis{0.0, 0.125, n});
  auto g = [](double a, double b) { return a * a * a - 2 * a * b * b + b; };
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) f.sheet_above[f.index(a, b)] = g(f.axis1.at(a), f.axis2.at(b));
  EXPECT_NEAR(f.cubic(f.sheet_above, 0.41, 0.77), g(0.41, 0.77), 1e-12);
  EXPECT_NEAR(f.cubic(f.sheet_above, 0.99, 0.02), g(0.99, 0.02), 1e-12);
}

TEST(ExtrapolateFill, ExtendsPolynomialsExactly) {
  const int n = 12;
  auto g = [](double a, double b) { return 1 + 0.5 * a - 0.2 * b + 0.01 * a * b - 0.02 * b * b; };
  std::vector<double> v(n * n, 0.0);
  std::vector<char> known(n * n, 0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (b <= a) {
        v[a * n + b] = g(a, b);
        known[a * n + b] = 1;
      }
  extrapolate_fill(v, known, n, n);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < std::min(n, a + 4); ++b) EXPECT_NEAR(v[a * n + b], g(a, b), 1e-9) << a << ' ' << b;
  for (double x : v) EXPECT_TRUE(std::isfinite(x));
}
