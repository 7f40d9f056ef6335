#ifndef PIDEBS_MODEL_HPP
#define PIDEBS_MODEL_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "pidebs/errors.hpp"
#include "pidebs/field.hpp"
#include "pidebs/numerics.hpp"

namespace pidebs {

/// Coupled parabolic PIDE plant with boundary operators.
///
/// The first `m` states carry Dirichlet conditions at z = 0, the remaining
/// `n - m` the Robin conditions dx/dz + q x = 0 with q taken from `Q0`. If
/// the left boundary is instead described by the full matrices `B0_1` and
/// `B0_0`, `reorder_dirichlet_first` derives `m` and `Q0` from them.
struct PlantModel {
  int n = 0;
  int m = 0;
  std::vector<Field1> lambda, lambda_d1, lambda_d2, phi_conv;
  Field1Matrix A, A0;
  Field2Matrix F;
  std::vector<double> Q0;
  Eigen::VectorXd B1_1;  // diagonal of the derivative part at z = 1
  Eigen::MatrixXd B1_0;
  Eigen::MatrixXd B0_1, B0_0;  // optional raw left boundary operator

  int p() const { return n - m; }
  /// Robin coefficient of state j (zero for Dirichlet states).
  double q(int j) const { return j >= m ? Q0[static_cast<std::size_t>(j - m)] : 0.0; }
  bool has_convection() const {
    return std::any_of(phi_conv.begin(), phi_conv.end(), [](const Field1& f) { return !f.is_zero(); });
  }
};

/// Target system data at z = 1 and the artificial boundary values.
struct TargetSpec {
  double mu_c = 0.0;
  std::vector<double> Bt1_1, Bt1_0;
  std::map<std::pair<int, int>, Field1> g_f;  // keyed by (i, j) with lambda_i < lambda_j

  bool dirichlet(int i) const { return Bt1_1[static_cast<std::size_t>(i)] == 0.0; }
  /// Ratio Bt1_0 / Bt1_1 of a Robin-type target row.
  double robin_ratio(int i) const { return Bt1_0[static_cast<std::size_t>(i)] / Bt1_1[static_cast<std::size_t>(i)]; }
  Field1 artificial(int i, int j) const {
    auto it = g_f.find({i, j});
    return it == g_f.end() ? Field1{} : it->second;
  }
};

namespace detail {

// Tabulated derivative of f on [0,1] by fourth-order differences.
inline GridFn1D derivative_table(const Field1& f, int order, int count = 1001) {
  const double h = 1.0 / (count - 1);
  std::vector<double> x(static_cast<std::size_t>(count)), v(x.size()), d(x.size());
  for (int k = 0; k < count; ++k) {
    x[k] = k == count - 1 ? 1.0 : k * h;
    v[k] = f(x[k]);
  }
  // one-sided stencils at the first two nodes; mirrored at the end
  static constexpr double first[2][5] = {{-25, 48, -36, 16, -3}, {-3, -10, 18, -6, 1}};
  static constexpr double second[2][6] = {{45, -154, 214, -156, 61, -10}, {10, -15, -4, 14, -6, 1}};
  for (int k = 0; k < count; ++k) {
    const bool inner = k >= 2 && k <= count - 3;
    if (order == 1) {
      if (inner) {
        d[k] = (v[k - 2] - 8 * v[k - 1] + 8 * v[k + 1] - v[k + 2]) / (12 * h);
        continue;
      }
      const bool left = k < 2;
      const int r = left ? k : count - 1 - k;
      double acc = 0.0;
      for (int p = 0; p < 5; ++p) acc += first[r][p] * v[left ? p : count - 1 - p];
      d[k] = (left ? acc : -acc) / (12 * h);
    } else {
      if (inner) {
        d[k] = (-v[k - 2] + 16 * v[k - 1] - 30 * v[k] + 16 * v[k + 1] - v[k + 2]) / (12 * h * h);
        continue;
      }
      const bool left = k < 2;
      const int r = left ? k : count - 1 - k;
      double acc = 0.0;
      for (int p = 0; p < 6; ++p) acc += second[r][p] * v[left ? p : count - 1 - p];
      d[k] = acc / (12 * h * h);
    }
  }
  return GridFn1D(std::move(x), std::move(d));
}

inline Field1 table_field(GridFn1D g) {
  auto shared = std::make_shared<const GridFn1D>(std::move(g));
  return Field1([shared](double z) { return (*shared)(z); });
}

}  // namespace detail

/// Finite-difference derivative of a coefficient as an evaluable field.
inline Field1 numeric_derivative(const Field1& f, int order) {
  if (f.is_constant()) return Field1{};
  return detail::table_field(detail::derivative_table(f, order));
}

/// Check the plant assumptions and fill in missing diffusion derivatives.
inline PlantModel validate_plant(PlantModel plant, double eps_sep = 1e-6) {
  const int n = plant.n;
  if (n < 1) throw MalformedBC("state dimension must be at least one");
  if (static_cast<int>(plant.lambda.size()) != n) throw MalformedBC("expected " + std::to_string(n) + " diffusion coefficients");
  if (plant.m < 0 || plant.m > n) throw MalformedBC("number of Dirichlet states out of range");
  if (static_cast<int>(plant.Q0.size()) != plant.p())
    throw MalformedBC("Robin coefficient list must have length n - m = " + std::to_string(plant.p()));
  if (plant.B1_1.size() != n || plant.B1_0.rows() != n || plant.B1_0.cols() != n)
    throw MalformedBC("actuation matrices must be " + std::to_string(n) + " x " + std::to_string(n));
  if (plant.A.size() == 0) plant.A = Field1Matrix(n);
  if (plant.A0.size() == 0) plant.A0 = Field1Matrix(n);
  if (plant.F.size() == 0) plant.F = Field2Matrix(n);
  if (plant.A.size() != n || plant.A0.size() != n || plant.F.size() != n)
    throw MalformedBC("coefficient matrices must be " + std::to_string(n) + " x " + std::to_string(n));
  if (plant.phi_conv.empty()) plant.phi_conv.assign(static_cast<std::size_t>(n), Field1{});
  if (static_cast<int>(plant.phi_conv.size()) != n) throw MalformedBC("expected " + std::to_string(n) + " convection coefficients");

  constexpr int probe = 1001;
  std::vector<std::vector<double>> samples(static_cast<std::size_t>(n), std::vector<double>(probe));
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < probe; ++k) {
      const double z = static_cast<double>(k) / (probe - 1);
      const double v = plant.lambda[i](z);
      if (!(v > 0.0))
        throw DiffusionNotPositive("lambda[" + std::to_string(i) + "](" + std::to_string(z) + ") = " + std::to_string(v));
      samples[i][k] = v;
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double gap = std::numeric_limits<double>::infinity();
      bool pos = false, neg = false;
      for (int k = 0; k < probe; ++k) {
        const double d = samples[i][k] - samples[j][k];
        gap = std::min(gap, std::abs(d));
        pos = pos || d > 0;
        neg = neg || d < 0;
      }
      if (gap < eps_sep || (pos && neg))
        throw DiffusionCoefficientsTouch("lambda[" + std::to_string(i) + "] and lambda[" + std::to_string(j) +
                                         "] come within " + std::to_string(gap) + " of each other");
    }
  }
  for (int i = 0; i < n; ++i) {
    if (std::abs(plant.B1_1[i]) + plant.B1_0.row(i).norm() == 0.0)
      throw ActuationRowZero("input channel " + std::to_string(i) + " acts on nothing");
  }
  plant.lambda_d1.resize(static_cast<std::size_t>(n));
  plant.lambda_d2.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (plant.lambda[i].is_constant()) {
      plant.lambda_d1[i] = Field1{};
      plant.lambda_d2[i] = Field1{};
      continue;
    }
    if (plant.lambda_d1[i].is_zero()) plant.lambda_d1[i] = numeric_derivative(plant.lambda[i], 1);
    if (plant.lambda_d2[i].is_zero()) plant.lambda_d2[i] = numeric_derivative(plant.lambda[i], 2);
  }
  return plant;
}

/// Validate target data against a validated plant.
inline void validate_target(const TargetSpec& target, const PlantModel& plant) {
  const auto n = static_cast<std::size_t>(plant.n);
  if (target.Bt1_1.size() != n || target.Bt1_0.size() != n) throw MalformedTarget("target boundary coefficients must have length n");
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(target.Bt1_1[i]) + std::abs(target.Bt1_0[i]) == 0.0)
      throw MalformedTarget("target boundary row " + std::to_string(i) + " is zero");
    const bool plant_dirichlet = plant.B1_1[static_cast<Eigen::Index>(i)] == 0.0;
    if (plant_dirichlet != (target.Bt1_1[i] == 0.0))
      throw MalformedTarget("channel " + std::to_string(i) +
                            " must be of Dirichlet type at z = 1 in both plant and target, or in neither");
  }
}

/// Permute states: new state k is old state perm[k].
inline PlantModel permute_plant(const PlantModel& plant, const std::vector<int>& perm) {
  PlantModel out = plant;
  const int n = plant.n;
  auto pick1 = [&](const std::vector<Field1>& v) {
    std::vector<Field1> r(v.size());
    if (v.empty()) return r;
    for (int k = 0; k < n; ++k) r[k] = v[perm[k]];
    return r;
  };
  out.lambda = pick1(plant.lambda);
  out.lambda_d1 = pick1(plant.lambda_d1);
  out.lambda_d2 = pick1(plant.lambda_d2);
  out.phi_conv = pick1(plant.phi_conv);
  out.A = Field1Matrix(n);
  out.A0 = Field1Matrix(n);
  out.F = Field2Matrix(n);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    P(k, perm[k]) = 1.0;
    for (int l = 0; l < n; ++l) {
      if (plant.A.size()) out.A(k, l) = plant.A(perm[k], perm[l]);
      if (plant.A0.size()) out.A0(k, l) = plant.A0(perm[k], perm[l]);
      if (plant.F.size()) out.F(k, l) = plant.F(perm[k], perm[l]);
    }
  }
  out.B1_1 = P * plant.B1_1;
  out.B1_0 = P * plant.B1_0 * P.transpose();
  if (plant.B0_1.size()) out.B0_1 = P * plant.B0_1 * P.transpose();
  if (plant.B0_0.size()) out.B0_0 = P * plant.B0_0 * P.transpose();
  return out;
}

inline std::vector<int> inverse_permutation(const std::vector<int>& perm) {
  std::vector<int> inv(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k) inv[static_cast<std::size_t>(perm[k])] = static_cast<int>(k);
  return inv;
}

/// Reorder the states so that Dirichlet conditions at z = 0 come first.
///
/// With raw `B0_1`/`B0_0` present, each row must touch only its own state;
/// `m` and `Q0` are then derived from them. Otherwise the plant is already
/// in normal form and the identity permutation is returned.
inline std::pair<PlantModel, std::vector<int>> reorder_dirichlet_first(const PlantModel& plant) {
  const int n = plant.n;
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) perm[k] = k;
  if (plant.B0_1.size() == 0 && plant.B0_0.size() == 0) return {plant, perm};
  if (plant.B0_1.rows() != n || plant.B0_1.cols() != n || plant.B0_0.rows() != n || plant.B0_0.cols() != n)
    throw MalformedBC("left boundary matrices must be " + std::to_string(n) + " x " + std::to_string(n));
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (r != c && (plant.B0_1(r, c) != 0.0 || plant.B0_0(r, c) != 0.0))
        throw CoupledLeftBC("row " + std::to_string(r) + " of the left boundary operator couples states " +
                            std::to_string(r) + " and " + std::to_string(c));
  std::vector<int> dirichlet, robin;
  for (int k = 0; k < n; ++k) {
    if (plant.B0_1(k, k) == 0.0) {
      if (plant.B0_0(k, k) == 0.0) throw MalformedBC("left boundary row " + std::to_string(k) + " is zero");
      dirichlet.push_back(k);
    } else {
      robin.push_back(k);
    }
  }
  std::copy(dirichlet.begin(), dirichlet.end(), perm.begin());
  std::copy(robin.begin(), robin.end(), perm.begin() + static_cast<long>(dirichlet.size()));
  PlantModel out = permute_plant(plant, perm);
  out.m = static_cast<int>(dirichlet.size());
  out.Q0.clear();
  for (int k : robin) out.Q0.push_back(plant.B0_0(k, k) / plant.B0_1(k, k));
  out.B0_1.resize(0, 0);
  out.B0_0.resize(0, 0);
  return {out, perm};
}

/// Same permutation applied to the target data.
inline TargetSpec permute_target(const TargetSpec& target, const std::vector<int>& perm) {
  TargetSpec out = target;
  const auto inv = inverse_permutation(perm);
  for (std::size_t k = 0; k < perm.size(); ++k) {
    out.Bt1_1[k] = target.Bt1_1[static_cast<std::size_t>(perm[k])];
    out.Bt1_0[k] = target.Bt1_0[static_cast<std::size_t>(perm[k])];
  }
  out.g_f.clear();
  for (const auto& [key, f] : target.g_f) out.g_f[{inv[key.first], inv[key.second]}] = f;
  return out;
}

/// Diagonal state weight of the convection-removing transformation.
///
/// The transformed state is W(z) x(z); `log_weight[i]` holds the exponent of
/// entry i and `rate[i]` its derivative.
struct ConvectionWeight {
  std::vector<Field1> log_weight, rate;

  bool identity() const {
    return std::all_of(log_weight.begin(), log_weight.end(), [](const Field1& f) { return f.is_zero(); });
  }
  double operator()(int i, double z) const { return log_weight.empty() ? 1.0 : std::exp(log_weight[i](z)); }
};

/// Remove the first-order terms by an exponential state scaling.
inline std::pair<PlantModel, ConvectionWeight> eliminate_convection(const PlantModel& plant) {
  const int n = plant.n;
  ConvectionWeight w;
  w.log_weight.assign(static_cast<std::size_t>(n), Field1{});
  w.rate.assign(static_cast<std::size_t>(n), Field1{});
  if (!plant.has_convection()) return {plant, w};

  constexpr int count = 4001;
  std::vector<Field1> omega(static_cast<std::size_t>(n)), domega(omega.size()), ddomega(omega.size());
  for (int i = 0; i < n; ++i) {
    if (plant.phi_conv[i].is_zero()) continue;
    const Field1 lam = plant.lambda[i], phi = plant.phi_conv[i];
    Field1 r([lam, phi](double z) { return phi(z) / (2.0 * lam(z)); });
    std::vector<double> x(count), y(count);
    for (int k = 0; k < count; ++k) {
      x[k] = static_cast<double>(k) / (count - 1);
      y[k] = r(x[k]);
    }
    omega[i] = detail::table_field(GridFn1D(x, cumulative_trapz(x, y)));
    domega[i] = r;
    ddomega[i] = numeric_derivative(r, 1);
  }
  PlantModel out = plant;
  for (int i = 0; i < n; ++i) {
    out.phi_conv[i] = Field1{};
    for (int j = 0; j < n; ++j) {
      const Field1 oi = omega[i], oj = omega[j];
      const Field1 a = plant.A(i, j), a0 = plant.A0(i, j);
      const Field2 f = plant.F(i, j);
      if (i == j && !plant.phi_conv[i].is_zero()) {
        const Field1 lam = plant.lambda[i], d1 = domega[i], d2 = ddomega[i];
        out.A(i, i) = Field1([a, lam, d1, d2](double z) { return a(z) - lam(z) * (d1(z) * d1(z) + d2(z)); });
      } else if (!a.is_zero() && !(oi.is_zero() && oj.is_zero())) {
        out.A(i, j) = Field1([a, oi, oj](double z) { return std::exp(oi(z) - oj(z)) * a(z); });
      }
      if (!a0.is_zero() && !oi.is_zero()) out.A0(i, j) = Field1([a0, oi](double z) { return std::exp(oi(z)) * a0(z); });
      if (!f.is_zero() && !(oi.is_zero() && oj.is_zero()))
        out.F(i, j) = Field2([f, oi, oj](double z, double s) { return std::exp(oi(z) - oj(s)) * f(z, s); });
    }
  }
  // boundary operators in the scaled state
  for (int j = plant.m; j < n; ++j) out.Q0[static_cast<std::size_t>(j - plant.m)] -= domega[j](0.0);
  Eigen::VectorXd e_inv(n), r1(n);
  for (int i = 0; i < n; ++i) {
    e_inv[i] = std::exp(-omega[i](1.0));
    r1[i] = domega[i](1.0);
  }
  out.B1_1 = plant.B1_1.cwiseProduct(e_inv);
  out.B1_0 = plant.B1_0 * e_inv.asDiagonal();
  for (int i = 0; i < n; ++i) out.B1_0(i, i) -= plant.B1_1[i] * e_inv[i] * r1[i];
  w.log_weight = omega;
  w.rate = domega;
  return {out, w};
}

}  // namespace pidebs

#endif  // PIDEBS_MODEL_HPP
