#ifndef PIDEBS_KERNEL_SOLUTION_HPP
#define PIDEBS_KERNEL_SOLUTION_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "pidebs/coords.hpp"
#include "pidebs/errors.hpp"
#include "pidebs/kernel/coefficients.hpp"
#include "pidebs/kernel/solver.hpp"
#include "pidebs/model.hpp"
#include "pidebs/numerics.hpp"

namespace pidebs {

/// Converged kernel in canonical and original coordinates.
///
/// `K` and `L` live on a uniform N x N (z, zeta) grid masked to zeta <= z,
/// with the separation curve carried as two sheets. The plant and atlas the
/// kernel was computed for are owned here so that `kernel()` can evaluate
/// the canonical solution at arbitrary points.
struct KernelSolution {
  int n = 0;
  int grid_n = 0;
  std::shared_ptr<const PlantModel> plant;
  std::shared_ptr<const CoordinateAtlas> atlas;
  TargetSpec target;
  std::vector<PiecewiseGridFn2D> G, H, K, L;  // element (i, j) at i * n + j
  std::map<std::pair<int, int>, GridFn1D> A0_tilde;
  int iterations = 0;
  double final_update_sup = 0.0;
  std::vector<double> update_sups;
  IncrementHistory history;
  double growth_M_hat = 0.0;
  double gamma = 0.5;

  const PiecewiseGridFn2D& K_of(int i, int j) const { return K[static_cast<std::size_t>(i * n + j)]; }
  const PiecewiseGridFn2D& L_of(int i, int j) const { return L[static_cast<std::size_t>(i * n + j)]; }
  const PiecewiseGridFn2D& G_of(int i, int j) const { return G[static_cast<std::size_t>(i * n + j)]; }

  /// True if (z, zeta) lies on the eta >= 0 side of the separation curve.
  bool above(int i, int j, double z, double zeta) const {
    if (i == j) return true;
    return atlas->to_canonical(i, j, z, std::min(zeta, z)).second >= 0.0;
  }

  /// K_ij(z, zeta) from the canonical solution, on the side of the point or
  /// on the requested side.
  double kernel(int i, int j, double z, double zeta, Side side = Side::automatic) const {
    zeta = std::min(zeta, z);
    if (i != j && z - zeta <= 0.0) return 0.0;
    auto [xi, eta] = atlas->to_canonical(i, j, z, zeta);
    const auto& g = G_of(i, j);
    if (side == Side::automatic) side = (i == j || eta >= 0.0) ? Side::above : Side::below;
    const double scale = atlas->psi_at_z(i, z) * atlas->psi_at_z(j, zeta) / plant->lambda[j](zeta);
    return scale * g.cubic(side == Side::above ? g.sheet_above : g.sheet_below, xi, eta);
  }

  /// Inverse kernel by interpolation of the node table.
  double inverse_kernel(int i, int j, double z, double zeta) const {
    const auto& l = L_of(i, j);
    return l.cubic(l.sheet_above, z, std::min(zeta, z));
  }
};

namespace detail {

inline UniformAxis unit_axis(int N) { return UniformAxis{0.0, 1.0 / (N - 1), N}; }

inline std::vector<char> triangle_mask(int N) {
  std::vector<char> mask(static_cast<std::size_t>(N) * N, 0);
  for (int a = 0; a < N; ++a)
    for (int b = 0; b <= a; ++b) mask[static_cast<std::size_t>(a) * N + b] = 1;
  return mask;
}

}  // namespace detail

/// Tabulate K on the (z, zeta) grid.
inline void to_original(KernelSolution& sol) {
  const int n = sol.n, N = sol.grid_n;
  const auto ax = detail::unit_axis(N);
  const auto mask = detail::triangle_mask(N);
  const CoordinateAtlas* atlas = sol.atlas.get();
  sol.K.clear();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      PiecewiseGridFn2D k(ax, ax);
      k.mask = mask;
      for (int a = 0; a < N; ++a) {
        const double z = ax.at(a);
        for (int b = 0; b <= a; ++b) {
          const double zeta = ax.at(b);
          const auto idx = k.index(a, b);
          if (i == j) {
            k.sheet_above[idx] = k.sheet_below[idx] = sol.kernel(i, j, z, zeta, Side::above);
            continue;
          }
          k.sheet_above[idx] = a == b ? 0.0 : sol.kernel(i, j, z, zeta, Side::above);
          k.sheet_below[idx] = a == b ? 0.0 : sol.kernel(i, j, z, zeta, Side::below);
        }
      }
      extrapolate_fill(k.sheet_above, mask, N, N);
      extrapolate_fill(k.sheet_below, mask, N, N);
      if (i != j) {
        const int s = atlas->sign(i, j);
        const double shift = s > 0 ? 0.0 : atlas->phi1[i] - atlas->phi1[j];
        for (int a = 0; a < N; ++a) {
          const double target = atlas->phi[i](ax.at(a)) - shift;
          if (target >= 0.0 && target <= atlas->phi1[j]) k.curve[a] = atlas->z_of(j, target);
        }
        k.in_above = [atlas, i, j](double z, double zeta) {
          return atlas->to_canonical(i, j, z, std::min(zeta, z)).second >= 0.0;
        };
      }
      k.in_domain = [](double z, double zeta) { return zeta >= -1e-12 && zeta <= z + 1e-12 && z <= 1.0 + 1e-12; };
      sol.K.push_back(std::move(k));
    }
  }
}

/// C_ij(z) = A0_ij(z) - int_0^z sum_k K_ik(z, zb) A0_kj(zb) dzb.
inline double boundary_coupling(const KernelSolution& sol, int i, int j, double z) {
  const auto& pl = *sol.plant;
  double c = pl.A0(i, j).is_zero() ? 0.0 : pl.A0(i, j)(z);
  if (z <= 0.0) return c;
  const int M = static_cast<int>(std::ceil(2 * sol.grid_n * z)) + 2;
  const double h = z / (M - 1);
  for (int k = 0; k < sol.n; ++k) {
    if (pl.A0(k, j).is_zero()) continue;
    double acc = 0.0;
    for (int q = 0; q < M; ++q) {
      const double zb = q == M - 1 ? z : q * h;
      const double w = (q == 0 || q == M - 1) ? 0.5 : 1.0;
      acc += w * sol.kernel(i, k, z, zb) * pl.A0(k, j)(zb);
    }
    c -= h * acc;
  }
  return c;
}

namespace detail {

// K(z_a, 0) and d/dzeta K(z_a, 0) on the sheet of the point (z_a, 0).
inline std::pair<double, double> left_trace(const KernelSolution& sol, int i, int j, int a) {
  const auto& k = sol.K_of(i, j);
  const double z = k.axis1.at(a), h = k.axis2.step;
  const auto& sh = k.sheet(Side::automatic, z, 0.0);
  const double v0 = sh[k.index(a, 0)], v1 = sh[k.index(a, 1)], v2 = sh[k.index(a, 2)];
  return {v0, (-3 * v0 + 4 * v1 - v2) / (2 * h)};
}

}  // namespace detail

/// Coupling matrix of the target system at z = 0, present only for pairs
/// with lambda_i < lambda_j.
inline void extract_A0_tilde(KernelSolution& sol) {
  const auto& pl = *sol.plant;
  const int N = sol.grid_n;
  sol.A0_tilde.clear();
  for (int i = 0; i < sol.n; ++i) {
    for (int j = 0; j < sol.n; ++j) {
      if (i == j || sol.atlas->sign(i, j) > 0) continue;
      std::vector<double> z(static_cast<std::size_t>(N)), v(z.size());
      const double l0 = pl.lambda[j](0.0);
      const double d0 = pl.lambda_d1[j].is_zero() ? 0.0 : pl.lambda_d1[j](0.0);
      for (int a = 0; a < N; ++a) {
        z[a] = sol.K_of(i, j).axis1.at(a);
        auto [k0, dk0] = detail::left_trace(sol, i, j, a);
        if (j < pl.m)
          v[a] = -l0 * k0;
        else
          v[a] = l0 * dk0 + (d0 + pl.q(j) * l0) * k0 - boundary_coupling(sol, i, j, z[a]);
      }
      sol.A0_tilde.emplace(std::pair{i, j}, GridFn1D(std::move(z), std::move(v)));
    }
  }
}

/// Inverse kernel from L(z, zeta) = K(z, zeta) + int_zeta^z L(z, s) K(s, zeta) ds,
/// by successive approximation row by row on the node grid.
inline void solve_inverse_kernel(KernelSolution& sol, double tol, int max_iter) {
  const int n = sol.n, N = sol.grid_n;
  const auto ax = detail::unit_axis(N);
  const double h = ax.step;
  auto at = [N](int a, int b) { return static_cast<std::size_t>(a) * N + b; };
  std::vector<std::vector<double>> Kn(static_cast<std::size_t>(n * n)), Ln(Kn.size());
  for (int p = 0; p < n * n; ++p) {
    const auto& k = sol.K[p];
    Kn[p].assign(static_cast<std::size_t>(N) * N, 0.0);
    for (int a = 0; a < N; ++a)
      for (int b = 0; b <= a; ++b) Kn[p][at(a, b)] = k.node(a, b);
    Ln[p] = Kn[p];
  }
  std::vector<double> next(static_cast<std::size_t>(n * n) * N);
  for (int a = 1; a < N; ++a) {
    for (int it = 0;; ++it) {
      if (it >= max_iter) throw NoConvergence("inverse kernel row " + std::to_string(a) + " did not converge");
      double change = 0.0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          for (int b = 0; b <= a; ++b) {
            double acc = 0.0;
            for (int c = b; c <= a && a > b; ++c) {
              const double w = (c == b || c == a) ? 0.5 * h : h;
              for (int k = 0; k < n; ++k) acc += w * Ln[i * n + k][at(a, c)] * Kn[k * n + j][at(c, b)];
            }
            next[static_cast<std::size_t>(i * n + j) * N + b] = Kn[i * n + j][at(a, b)] + acc;
          }
        }
      }
      for (int p = 0; p < n * n; ++p)
        for (int b = 0; b <= a; ++b) {
          const double v = next[static_cast<std::size_t>(p) * N + b];
          change = std::max(change, std::abs(v - Ln[p][at(a, b)]));
          Ln[p][at(a, b)] = v;
        }
      if (change < tol) break;
    }
  }
  const auto mask = detail::triangle_mask(N);
  sol.L.clear();
  for (int p = 0; p < n * n; ++p) {
    PiecewiseGridFn2D l(ax, ax);
    l.mask = mask;
    l.sheet_above = Ln[p];
    extrapolate_fill(l.sheet_above, mask, N, N);
    l.sheet_below = l.sheet_above;
    l.in_domain = [](double z, double zeta) { return zeta >= -1e-12 && zeta <= z + 1e-12 && z <= 1.0 + 1e-12; };
    sol.L.push_back(std::move(l));
  }
}

/// Compute the kernel of a validated, convection-free plant whose Dirichlet
/// states come first.
inline KernelSolution solve_kernel(const PlantModel& plant, const TargetSpec& target, const SolverOptions& opt = {}) {
  if (opt.grid_n < 5) throw GridTooCoarse("kernel grid needs at least 5 nodes per axis");
  KernelSolution sol;
  sol.n = plant.n;
  sol.grid_n = opt.grid_n;
  sol.target = target;
  auto pl = std::make_shared<PlantModel>(plant);
  auto at = std::make_shared<CoordinateAtlas>(build_atlas(*pl, opt.atlas_grid));
  sol.plant = pl;
  sol.atlas = at;
  sol.gamma = at->gamma;
  {
    CoefficientTables coeff(*pl, *at, sol.target);
    KernelIteration it(coeff, sol.target, opt.grid_n);
    auto canon = solve_canonical(it, opt.tol, opt.max_iter);
    sol.G = std::move(canon.G);
    sol.H = std::move(canon.H);
    sol.iterations = canon.iterations;
    sol.final_update_sup = canon.final_update_sup;
    sol.update_sups = std::move(canon.update_sups);
    sol.history = std::move(canon.history);
  }
  sol.growth_M_hat = growth_diagnostic(sol.history, sol.gamma);
  to_original(sol);
  extract_A0_tilde(sol);
  solve_inverse_kernel(sol, opt.inverse_tol, opt.inverse_max_iter);
  return sol;
}

/// Residuals of the kernel equations on the (z, zeta) grid.
struct ResidualReport {
  double pde_sup = 0.0, pde_l2 = 0.0;
  std::vector<double> pde_by_element;
  double pde_worst_z = 0.0, pde_worst_zeta = 0.0;
  double bc_sup = 0.0;
  double trace_diag_err = 0.0;
  double trace_offdiag_max = 0.0;
  double trace_offdiag_slope_err = 0.0;
  double origin_value = 0.0;
  int pde_nodes = 0;
};

/// Closed form of the diagonal trace K_ii(z, z).
inline double diagonal_trace(const PlantModel& plant, double mu_c, int i, double z, int count = 2001) {
  if (z <= 0.0) return 0.0;
  const double v = trapz([&](double t) { return (plant.A(i, i)(t) + mu_c) / (2.0 * std::sqrt(plant.lambda[i](t))); }, 0.0, z, count);
  return -v / std::sqrt(plant.lambda[i](z));
}

/// One-sided z-derivative of K_ij (i != j) on the diagonal z = zeta, at the
/// diagonal points met by the canonical grid columns.
///
/// Along each column G vanishes on the lower curve. The polynomial through
/// that zero and the first nodes above it, up to the separation row, gives
/// dG/deta there; the chain rule turns it into dK/dz.
inline std::vector<std::pair<double, double>> diagonal_slopes(const KernelSolution& sol, int i, int j) {
  const auto& g = sol.G_of(i, j);
  const auto& at = *sol.atlas;
  const int s = at.sign(i, j);
  std::vector<std::pair<double, double>> out;
  for (int k = 1; k + 1 < g.axis1.count; ++k) {
    const double xi = g.axis1.at(k);
    const auto [el, slope] = at.eta_lower(i, j, xi);
    double e[3], v[3];
    int found = 0;
    for (int m = 0; m < g.axis2.count && found < 3; ++m) {
      const double eta = g.axis2.at(m);
      if (eta > 1e-12 * g.axis2.step) break;
      if (!g.mask[g.index(k, m)] || eta < el + 0.05 * g.axis2.step) continue;
      e[found] = eta - el;
      v[found] = g.sheet_below[g.index(k, m)];
      ++found;
    }
    if (found == 0) continue;
    // derivative at 0 of the polynomial through (0, 0) and the found nodes
    double g_eta = 0.0;
    for (int q = 0; q < found; ++q) {
      double w = 1.0 / e[q];
      for (int r = 0; r < found; ++r)
        if (r != q) w *= -e[r] / (e[q] - e[r]);
      g_eta += w * v[q];
    }
    const double z = at.z_lower(i, j, xi);
    const double scale = at.psi_at_z(i, z) * at.psi_at_z(j, z) / sol.plant->lambda[j](z);
    out.emplace_back(z, scale * g_eta * (1.0 - s * slope) / std::sqrt(sol.plant->lambda[i](z)));
  }
  return out;
}

inline ResidualReport residual_report(const KernelSolution& sol) {
  const auto& pl = *sol.plant;
  const int n = sol.n, N = sol.grid_n;
  const double mu = sol.target.mu_c;
  const auto ax = detail::unit_axis(N);
  const double h = ax.step;
  ResidualReport rep;
  rep.pde_by_element.assign(static_cast<std::size_t>(n * n), 0.0);
  double l2 = 0.0;

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const auto& k = sol.K_of(i, j);
      auto side_of = [&](int a, int b) { return i == j || k.above(ax.at(a), ax.at(b)); };
      for (int a = 2; a <= N - 2; ++a) {
        const double z = ax.at(a);
        const double li = pl.lambda[i](z);
        for (int b = 1; b <= a - 2; ++b) {
          const double zeta = ax.at(b);
          const bool up = side_of(a, b);
          bool clean = true;
          if (i != j)
            for (int da = -2; da <= 2 && clean; ++da)
              for (int db = -2; db <= 2 && clean; ++db) {
                const int a2 = a + da, b2 = b + db;
                if (a2 < 0 || a2 >= N || b2 < 0 || b2 > a2) continue;
                if (side_of(a2, b2) != up) clean = false;
              }
          if (!clean) continue;
          const auto& sh = up ? k.sheet_above : k.sheet_below;
          auto v = [&](int a2, int b2) { return sh[k.index(a2, b2)]; };
          const double kzz = (v(a + 1, b) - 2 * v(a, b) + v(a - 1, b)) / (h * h);
          const double lz0 = pl.lambda[j](zeta), lzm = pl.lambda[j](zeta - h), lzp = pl.lambda[j](zeta + h);
          const double lkss = (lzp * v(a, b + 1) - 2 * lz0 * v(a, b) + lzm * v(a, b - 1)) / (h * h);
          double r = li * kzz - lkss;
          for (int q = 0; q < n; ++q) {
            const double kiq = q == j ? v(a, b) : sol.K_of(i, q).node(a, b);
            r -= kiq * ((pl.A(q, j).is_zero() ? 0.0 : pl.A(q, j)(zeta)) + (q == j ? mu : 0.0));
            if (pl.F(q, j).is_zero()) continue;
            double acc = 0.0;
            for (int c = b; c <= a; ++c) {
              const double w = (c == b || c == a) ? 0.5 * h : h;
              const double kv = q == j ? (c == b ? v(a, b) : sol.K_of(i, q).node(a, c)) : sol.K_of(i, q).node(a, c);
              acc += w * kv * pl.F(q, j)(ax.at(c), zeta);
            }
            r -= acc;
          }
          if (!pl.F(i, j).is_zero()) r += pl.F(i, j)(z, zeta);
          if (std::abs(r) > rep.pde_sup) {
            rep.pde_sup = std::abs(r);
            rep.pde_worst_z = z;
            rep.pde_worst_zeta = zeta;
          }
          rep.pde_by_element[static_cast<std::size_t>(i * n + j)] = std::max(rep.pde_by_element[static_cast<std::size_t>(i * n + j)], std::abs(r));
          l2 += r * r;
          ++rep.pde_nodes;
        }
      }

      // boundary conditions at zeta = 0 for elements integrated from that edge
      if (i != j && sol.atlas->sign(i, j) > 0) {
        const double l0 = pl.lambda[j](0.0);
        const double d0 = pl.lambda_d1[j].is_zero() ? 0.0 : pl.lambda_d1[j](0.0);
        for (int a = 3; a < N; ++a) {
          auto [k0, dk0] = detail::left_trace(sol, i, j, a);
          const double r = j < pl.m ? k0 : l0 * dk0 + (d0 + pl.q(j) * l0) * k0 - boundary_coupling(sol, i, j, ax.at(a));
          rep.bc_sup = std::max(rep.bc_sup, std::abs(r));
        }
      }
      if (i == j) {
        for (int a = 0; a < N; ++a)
          rep.trace_diag_err = std::max(rep.trace_diag_err, std::abs(k.node(a, a) - diagonal_trace(pl, mu, i, ax.at(a))));
      } else {
        for (int a = 0; a < N; ++a) rep.trace_offdiag_max = std::max(rep.trace_offdiag_max, std::abs(k.node(a, a)));
        for (const auto& [z, dz] : diagonal_slopes(sol, i, j)) {
          const double expect = pl.A(i, j).is_zero() ? 0.0 : pl.A(i, j)(z) / (pl.lambda[j](z) - pl.lambda[i](z));
          rep.trace_offdiag_slope_err = std::max(rep.trace_offdiag_slope_err, std::abs(dz - expect));
        }
      }
      rep.origin_value = std::max(rep.origin_value, std::abs(k.node(0, 0)));
    }
  }
  rep.pde_l2 = rep.pde_nodes > 0 ? std::sqrt(l2 / rep.pde_nodes) : 0.0;
  return rep;
}

}  // namespace pidebs

#endif  // PIDEBS_KERNEL_SOLUTION_HPP
