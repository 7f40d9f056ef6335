#ifndef PIDEBS_COORDS_HPP
#define PIDEBS_COORDS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "pidebs/errors.hpp"
#include "pidebs/model.hpp"
#include "pidebs/numerics.hpp"

namespace pidebs {

/// Geometry of the canonical domain of one kernel element (i, j).
///
/// The domain lies in the box [0, c] x [b, a] of the (xi, eta) plane. It is
/// bounded by the diagonal xi = eta (0 <= eta <= a), the edge
/// xi + eta = 2a and the image of the original diagonal z = zeta, the lower
/// curve eta_l(xi).
struct PairGeometry {
  int s = 1;
  double a = 0.0, b = 0.0, c = 0.0;
  MonotoneInverse beta_inv;   // inverse of phi_i + phi_j
  MonotoneInverse delta_inv;  // inverse of -s (phi_i - phi_j), increasing
};

class CoordinateAtlas {
 public:
  int n = 0;
  std::vector<Field1> lambda, lambda_d1;
  std::vector<GridFn1D> phi;
  std::vector<MonotoneInverse> phi_inv;
  std::vector<double> phi1;
  std::vector<int> s;
  std::vector<PairGeometry> pairs;
  double gamma = 0.5;
  std::vector<double> z_delta, z_sigma;

  const PairGeometry& pair(int i, int j) const { return pairs[static_cast<std::size_t>(i * n + j)]; }
  int sign(int i, int j) const { return s[static_cast<std::size_t>(i * n + j)]; }

  double rho(int i, double z) const { return phi[i](z); }
  double z_of(int i, double rho) const { return phi_inv[i](rho); }

  /// Normalisation factor (lambda_i(z)/lambda_i(0))^(1/4) at z = phi_i^-1(rho).
  double psi(int i, double rho) const { return psi_at_z(i, z_of(i, rho)); }
  double psi_at_z(int i, double z) const { return std::pow(lambda[i](z) / lambda[i](0.0), 0.25); }

  std::pair<double, double> to_canonical(int i, int j, double z, double zeta) const {
    constexpr double tol = 1e-9;
    if (zeta < -tol || z > 1.0 + tol || zeta > z + tol)
      throw OutOfRange("point (" + std::to_string(z) + ", " + std::to_string(zeta) + ") is not in 0 <= zeta <= z <= 1");
    z = std::clamp(z, 0.0, 1.0);
    zeta = std::clamp(zeta, 0.0, 1.0);
    return canonical_from_rho(i, j, phi[i](z), phi[j](zeta));
  }

  /// Canonical coordinates from the scaled coordinates rho = phi_i(z), sigma = phi_j(zeta).
  std::pair<double, double> canonical_from_rho(int i, int j, double r, double sg) const {
    const int sij = sign(i, j);
    const double half = 0.5 * (1 - sij);
    const double xi = half * (phi1[i] + phi1[j]) + sij * (r + sg);
    const double eta = -half * (phi1[i] - phi1[j]) + r - sg;
    return {xi, eta};
  }

  /// Scaled coordinates (rho, sigma) of a canonical point, no domain check.
  std::pair<double, double> rho_sigma(int i, int j, double xi, double eta) const {
    const int sij = sign(i, j);
    const double half = 0.5 * (1 - sij);
    const double r = 0.5 * (sij * xi + eta) + half * phi1[i];
    const double sg = 0.5 * (sij * xi - eta) + half * phi1[j];
    return {std::clamp(r, 0.0, phi1[i]), std::clamp(sg, 0.0, phi1[j])};
  }

  std::pair<double, double> from_canonical(int i, int j, double xi, double eta) const {
    if (!in_domain(i, j, xi, eta, 1e-9))
      throw OutsideDomain("(xi, eta) = (" + std::to_string(xi) + ", " + std::to_string(eta) + ") is outside the domain of element (" +
                          std::to_string(i) + ", " + std::to_string(j) + ")");
    auto [r, sg] = rho_sigma(i, j, xi, eta);
    return {phi_inv[i](r), phi_inv[j](sg)};
  }

  std::pair<double, double> cross_canonical(int i, int j, int k, int l, double xi, double eta) const {
    auto [z, zeta] = from_canonical(i, j, xi, eta);
    return to_canonical(k, l, z, std::min(zeta, z));
  }

  /// Lower boundary eta_l(xi) and its slope.
  std::pair<double, double> eta_lower(int i, int j, double xi) const {
    if (i == j) return {0.0, 0.0};
    const auto& g = pair(i, j);
    constexpr double tol = 1e-9;
    if (xi < -tol || xi > g.c + tol) throw OutOfRange("xi = " + std::to_string(xi) + " outside [0, " + std::to_string(g.c) + "]");
    xi = std::clamp(xi, 0.0, g.c);
    const int sij = g.s;
    const double zl = g.beta_inv(sij * xi + 0.5 * (1 - sij) * g.c);
    const double el = -0.5 * (1 - sij) * (phi1[i] - phi1[j]) + phi[i](zl) - phi[j](zl);
    const double ri = std::sqrt(lambda[i](zl)), rj = std::sqrt(lambda[j](zl));
    return {el, sij * (rj - ri) / (rj + ri)};
  }

  /// Original z on the diagonal z = zeta that maps to canonical abscissa xi.
  double z_lower(int i, int j, double xi) const {
    if (i == j) return z_of(i, std::clamp(0.5 * xi, 0.0, phi1[i]));
    const auto& g = pair(i, j);
    return g.beta_inv(std::clamp(g.s * xi + 0.5 * (1 - g.s) * g.c, 0.0, g.c));
  }

  /// Left boundary xi_l(eta) of the domain.
  double xi_left(int i, int j, double eta) const {
    const auto& g = pair(i, j);
    constexpr double tol = 1e-9;
    if (eta > g.a + tol || eta < g.b - tol)
      throw OutOfRange("eta = " + std::to_string(eta) + " outside [" + std::to_string(g.b) + ", " + std::to_string(g.a) + "]");
    if (eta >= 0.0 || i == j) return std::max(eta, 0.0);
    const int sij = g.s;
    const double shifted = eta + 0.5 * (1 - sij) * (phi1[i] - phi1[j]);
    const double lo = g.delta_inv.min(), hi = g.delta_inv.max();
    const double z = g.delta_inv(std::clamp(-sij * shifted, lo, hi));
    const double beta = phi[i](z) + phi[j](z);
    return 0.5 * (1 - sij) * g.c + sij * beta;
  }

  bool in_domain(int i, int j, double xi, double eta, double tol = 1e-9) const {
    const auto& g = pair(i, j);
    if (xi < -tol || xi > g.c + tol) return false;
    if (eta > xi + tol || xi + eta > 2 * g.a + tol) return false;
    if (i == j) return eta >= -tol;
    if (eta < g.b - tol) return false;
    return eta >= eta_lower(i, j, std::clamp(xi, 0.0, g.c)).first - tol;
  }
};

/// Tabulate the coordinate maps of every kernel element.
inline CoordinateAtlas build_atlas(const PlantModel& plant, int n_grid = 2001) {
  if (n_grid < 11) throw GridTooCoarse("atlas grid needs at least 11 nodes");
  CoordinateAtlas at;
  const int n = plant.n;
  at.n = n;
  at.lambda = plant.lambda;
  at.lambda_d1 = plant.lambda_d1;
  at.lambda_d1.resize(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(n_grid));
  for (int k = 0; k < n_grid; ++k) z[k] = k == n_grid - 1 ? 1.0 : static_cast<double>(k) / (n_grid - 1);
  for (int i = 0; i < n; ++i) {
    std::vector<double> f(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) f[k] = 1.0 / std::sqrt(plant.lambda[i](z[k]));
    GridFn1D ph(z, cumulative_trapz(z, f));
    at.phi1.push_back(ph.values().back());
    at.phi_inv.emplace_back(ph);
    at.phi.push_back(std::move(ph));
  }

  const int fine = 10 * (n_grid - 1) + 1;
  std::vector<double> zf(static_cast<std::size_t>(fine));
  for (int k = 0; k < fine; ++k) zf[k] = k == fine - 1 ? 1.0 : static_cast<double>(k) / (fine - 1);
  std::vector<std::vector<double>> lam_f(static_cast<std::size_t>(n)), phi_f(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    lam_f[i].resize(zf.size());
    phi_f[i].resize(zf.size());
    for (std::size_t k = 0; k < zf.size(); ++k) {
      lam_f[i][k] = plant.lambda[i](zf[k]);
      phi_f[i][k] = at.phi[i](zf[k]);
    }
  }

  at.s.assign(static_cast<std::size_t>(n * n), 1);
  at.pairs.resize(static_cast<std::size_t>(n * n));
  at.z_delta.assign(static_cast<std::size_t>(n * n), std::numeric_limits<double>::quiet_NaN());
  at.z_sigma = at.z_delta;
  double gamma_low = 0.0;
  bool any_ordered = false;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const auto idx = static_cast<std::size_t>(i * n + j);
      if (i != j) {
        // sign fixed by the ordering of the coefficients, checked during validation
        at.s[idx] = lam_f[i][0] >= lam_f[j][0] ? 1 : -1;
        std::size_t kd = 0, ks = 0;
        for (std::size_t k = 1; k < zf.size(); ++k) {
          if (std::abs(lam_f[i][k] - lam_f[j][k]) < std::abs(lam_f[i][kd] - lam_f[j][kd])) kd = k;
          if (lam_f[i][k] + lam_f[j][k] < lam_f[i][ks] + lam_f[j][ks]) ks = k;
        }
        at.z_delta[idx] = zf[kd];
        at.z_sigma[idx] = zf[ks];
        if (at.s[idx] < 0) {
          gamma_low = std::max(gamma_low, std::sqrt(lam_f[i][kd] / lam_f[j][kd]));
          any_ordered = true;
        }
      }
      auto& g = at.pairs[idx];
      g.s = at.s[idx];
      g.c = at.phi1[i] + at.phi1[j];
      g.a = g.s > 0 ? at.phi1[i] : at.phi1[j];
      g.b = g.s > 0 ? at.phi1[i] - at.phi1[j] : at.phi1[j] - at.phi1[i];
      std::vector<double> beta(zf.size());
      for (std::size_t k = 0; k < zf.size(); ++k) beta[k] = phi_f[i][k] + phi_f[j][k];
      g.beta_inv = MonotoneInverse(GridFn1D(zf, beta));
      if (i != j) {
        std::vector<double> delta(zf.size());
        for (std::size_t k = 0; k < zf.size(); ++k) delta[k] = -g.s * (phi_f[i][k] - phi_f[j][k]);
        g.delta_inv = MonotoneInverse(GridFn1D(zf, delta));
      }
    }
  }
  at.gamma = any_ordered ? 0.5 * (gamma_low + 1.0) : 0.5;
  return at;
}

}  // namespace pidebs

#endif  // PIDEBS_COORDS_HPP
