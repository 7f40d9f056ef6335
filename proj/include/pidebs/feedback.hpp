#ifndef PIDEBS_FEEDBACK_HPP
#define PIDEBS_FEEDBACK_HPP

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "pidebs/errors.hpp"
#include "pidebs/kernel/solution.hpp"
#include "pidebs/model.hpp"
#include "pidebs/numerics.hpp"

namespace pidebs {

/// State feedback u = k_boundary x(1) + int_0^1 k_kernel(zeta) x(zeta) dzeta.
///
/// `k_kernel[i * n + j]` holds the weight of state j in channel i, sampled on
/// the uniform grid `zeta` used by the simulator.
struct FeedbackGain {
  int n = 0;
  Eigen::MatrixXd k_boundary;
  std::vector<double> zeta;
  std::vector<std::vector<double>> k_kernel;
  std::vector<bool> dirichlet_target;

  const std::vector<double>& row(int i, int j) const { return k_kernel[static_cast<std::size_t>(i * n + j)]; }
  std::vector<double>& row(int i, int j) { return k_kernel[static_cast<std::size_t>(i * n + j)]; }
};

namespace detail {

inline std::vector<double> uniform_nodes(int count) {
  std::vector<double> z(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) z[k] = k == count - 1 ? 1.0 : static_cast<double>(k) / (count - 1);
  return z;
}

// dK_ij/dz at (1, zeta), one-sided in z on the sheet that holds (1, zeta).
// The stencil may leave the triangle near the diagonal; the sheet's smooth
// extension is used there.
inline double kernel_dz_at_one(const KernelSolution& sol, int i, int j, double zeta) {
  const auto& at = *sol.atlas;
  const auto& g = sol.G_of(i, j);
  const bool up = i == j || at.to_canonical(i, j, 1.0, zeta).second >= 0.0;
  const auto& sheet = up ? g.sheet_above : g.sheet_below;
  const double h = 1.0 / (sol.grid_n - 1);
  double v[3];
  for (int q = 0; q < 3; ++q) {
    const double z = 1.0 - q * h;
    auto [xi, eta] = at.canonical_from_rho(i, j, at.rho(i, z), at.rho(j, zeta));
    const double scale = at.psi_at_z(i, z) * at.psi_at_z(j, zeta) / sol.plant->lambda[j](zeta);
    v[q] = scale * g.cubic(sheet, xi, eta);
  }
  return (3 * v[0] - 4 * v[1] + v[2]) / (2 * h);
}

}  // namespace detail

/// Feedback gain of a kernel solution, sampled on `n_z` uniform nodes.
///
/// Boundary values x_k(1) of channels with a Dirichlet target are replaced
/// by the kernel integral; boundary derivatives by the differentiated
/// transformation, which needs a Robin-type target row.
inline FeedbackGain build_gain(const KernelSolution& sol, const PlantModel& plant, const TargetSpec& target, int n_z) {
  const int n = plant.n;
  if (sol.n != n || sol.K.size() != static_cast<std::size_t>(n * n)) throw MissingKernelTrace("kernel tables do not match the plant");
  if (sol.K.front().axis1.count < 3) throw MissingKernelTrace("kernel grid too coarse for a one-sided derivative");
  if (n_z < 2) throw GridMismatch("feedback grid needs at least two nodes");
  FeedbackGain g;
  g.n = n;
  g.k_boundary = Eigen::MatrixXd::Zero(n, n);
  g.zeta = detail::uniform_nodes(n_z);
  g.k_kernel.assign(static_cast<std::size_t>(n * n), std::vector<double>(g.zeta.size(), 0.0));
  for (int i = 0; i < n; ++i) g.dirichlet_target.push_back(target.dirichlet(i));

  std::vector<std::vector<double>> k_one(static_cast<std::size_t>(n * n)), dk_one(k_one.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      auto& row = k_one[static_cast<std::size_t>(i * n + j)];
      for (double zeta : g.zeta) row.push_back(sol.kernel(i, j, 1.0, zeta));
      auto& drow = dk_one[static_cast<std::size_t>(i * n + j)];
      for (double zeta : g.zeta) drow.push_back(detail::kernel_dz_at_one(sol, i, j, zeta));
    }

  // coefficient c on x_k(1) in channel i
  auto add_value = [&](int i, int k, double c) {
    if (c == 0.0) return;
    if (!target.dirichlet(k)) {
      g.k_boundary(i, k) += c;
      return;
    }
    for (int j = 0; j < n; ++j) {
      auto& row = g.row(i, j);
      const auto& src = k_one[static_cast<std::size_t>(k * n + j)];
      for (std::size_t b = 0; b < row.size(); ++b) row[b] += c * src[b];
    }
  };

  const int last = sol.K.front().axis1.count - 1;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) add_value(i, k, plant.B1_0(i, k));
    const double b1 = plant.B1_1[i];
    if (b1 == 0.0) continue;
    if (target.dirichlet(i))
      throw MissingKernelTrace("channel " + std::to_string(i) + " acts on the boundary derivative but its target row is of Dirichlet type");
    const double r = target.robin_ratio(i);
    for (int k = 0; k < n; ++k) {
      const double kik = k == i ? sol.K_of(i, i).node(last, last) : 0.0;
      add_value(i, k, b1 * (kik - (k == i ? r : 0.0)));
    }
    for (int j = 0; j < n; ++j) {
      auto& row = g.row(i, j);
      const auto& kv = k_one[static_cast<std::size_t>(i * n + j)];
      const auto& dv = dk_one[static_cast<std::size_t>(i * n + j)];
      for (std::size_t b = 0; b < row.size(); ++b) row[b] += b1 * (dv[b] + r * kv[b]);
    }
  }
  return g;
}

/// Control input for a state sampled on the gain's grid; `x[j]` is state j.
inline Eigen::VectorXd eval_control(const FeedbackGain& gain, const std::vector<std::vector<double>>& x) {
  if (static_cast<int>(x.size()) != gain.n) throw GridMismatch("state has " + std::to_string(x.size()) + " channels, gain expects " + std::to_string(gain.n));
  for (const auto& xi : x)
    if (xi.size() != gain.zeta.size())
      throw GridMismatch("state sampled on " + std::to_string(xi.size()) + " nodes, gain on " + std::to_string(gain.zeta.size()));
  Eigen::VectorXd u = Eigen::VectorXd::Zero(gain.n);
  Eigen::VectorXd x1(gain.n);
  for (int j = 0; j < gain.n; ++j) x1[j] = x[j].back();
  u = gain.k_boundary * x1;
  std::vector<double> prod(gain.zeta.size());
  for (int i = 0; i < gain.n; ++i)
    for (int j = 0; j < gain.n; ++j) {
      const auto& row = gain.row(i, j);
      for (std::size_t b = 0; b < prod.size(); ++b) prod[b] = row[b] * x[j][b];
      u[i] += trapz(gain.zeta, prod);
    }
  return u;
}

}  // namespace pidebs

#endif  // PIDEBS_FEEDBACK_HPP
