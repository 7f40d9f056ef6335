#ifndef PIDEBS_SIM_HPP
#define PIDEBS_SIM_HPP

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "pidebs/errors.hpp"
#include "pidebs/feedback.hpp"
#include "pidebs/kernel/solution.hpp"
#include "pidebs/model.hpp"
#include "pidebs/numerics.hpp"

namespace pidebs {

/// State of all channels on the simulator grid, `x[i][k]` = x_i(z_k).
using Profile = std::vector<std::vector<double>>;

/// Finite-difference semi-discretisation of the plant.
///
/// Unknowns are ordered channel by channel, `i * nz + k`. Interior rows of
/// `op` hold the right-hand side of the PIDE; the rows of the end nodes are
/// zero there and the algebraic boundary equations live in `bc`, with the
/// right-end rows driven by the input.
struct SemiDiscrete {
  int n = 0, nz = 0;
  double h = 0.0;
  std::vector<double> z;
  Eigen::MatrixXd op, bc;
  std::vector<char> boundary;

  int index(int i, int k) const { return i * nz + k; }
  int size() const { return n * nz; }

  /// Open-loop generator on the interior unknowns with u = 0.
  Eigen::MatrixXd reduced_operator() const {
    std::vector<int> in, bd;
    for (int r = 0; r < size(); ++r) (boundary[r] ? bd : in).push_back(r);
    const auto ni = static_cast<Eigen::Index>(in.size()), nb = static_cast<Eigen::Index>(bd.size());
    Eigen::MatrixXd Bbb(nb, nb), Bbi(nb, ni), Jii(ni, ni), Jib(ni, nb);
    for (Eigen::Index a = 0; a < nb; ++a) {
      for (Eigen::Index b = 0; b < nb; ++b) Bbb(a, b) = bc(bd[a], bd[b]);
      for (Eigen::Index b = 0; b < ni; ++b) Bbi(a, b) = bc(bd[a], in[b]);
    }
    for (Eigen::Index a = 0; a < ni; ++a) {
      for (Eigen::Index b = 0; b < ni; ++b) Jii(a, b) = op(in[a], in[b]);
      for (Eigen::Index b = 0; b < nb; ++b) Jib(a, b) = op(in[a], bd[b]);
    }
    return Jii - Jib * Bbb.fullPivLu().solve(Bbi);
  }
};

namespace detail {

inline void one_sided(Eigen::MatrixXd& m, int row, int k0, int dir, double h, double scale) {
  // second-order derivative stencil at k0 pointing into the domain
  m(row, k0) += scale * dir * -1.5 / h;
  m(row, k0 + dir) += scale * dir * 2.0 / h;
  m(row, k0 + 2 * dir) += scale * dir * -0.5 / h;
}

}  // namespace detail

inline SemiDiscrete discretize(const PlantModel& plant, int nz) {
  if (nz < 11) throw GridTooCoarse("simulator grid needs at least 11 nodes, got " + std::to_string(nz));
  const int n = plant.n;
  SemiDiscrete s;
  s.n = n;
  s.nz = nz;
  s.h = 1.0 / (nz - 1);
  s.z = detail::uniform_nodes(nz);
  const double h = s.h;
  s.op = Eigen::MatrixXd::Zero(n * nz, n * nz);
  s.bc = Eigen::MatrixXd::Zero(n * nz, n * nz);
  s.boundary.assign(static_cast<std::size_t>(n * nz), 0);
  for (int i = 0; i < n; ++i) {
    for (int k = 1; k < nz - 1; ++k) {
      const double z = s.z[k];
      const int r = s.index(i, k);
      const double lam = plant.lambda[i](z);
      s.op(r, r - 1) += lam / (h * h);
      s.op(r, r) += -2 * lam / (h * h);
      s.op(r, r + 1) += lam / (h * h);
      if (!plant.phi_conv[i].is_zero()) {
        const double c = plant.phi_conv[i](z);
        s.op(r, r + 1) += c / (2 * h);
        s.op(r, r - 1) -= c / (2 * h);
      }
      for (int j = 0; j < n; ++j) {
        if (!plant.A(i, j).is_zero()) s.op(r, s.index(j, k)) += plant.A(i, j)(z);
        if (!plant.A0(i, j).is_zero()) s.op(r, s.index(j, 0)) += plant.A0(i, j)(z);
        if (plant.F(i, j).is_zero()) continue;
        for (int l = 0; l <= k; ++l) {
          const double w = (l == 0 || l == k) ? 0.5 * h : h;
          s.op(r, s.index(j, l)) += w * plant.F(i, j)(z, s.z[l]);
        }
      }
    }
    const int r0 = s.index(i, 0);
    s.boundary[r0] = 1;
    if (i < plant.m) {
      s.bc(r0, r0) = 1.0;
    } else {
      detail::one_sided(s.bc, r0, r0, 1, h, 1.0);
      s.bc(r0, r0) += plant.q(i);
    }
    const int r1 = s.index(i, nz - 1);
    s.boundary[r1] = 1;
    if (plant.B1_1[i] != 0.0) detail::one_sided(s.bc, r1, r1, -1, h, plant.B1_1[i]);
    for (int j = 0; j < n; ++j) s.bc(r1, s.index(j, nz - 1)) += plant.B1_0(i, j);
  }
  return s;
}

/// Simulation record: every step's time, norm and input, every
/// `snapshot_stride`-th state.
struct Trajectory {
  std::vector<double> times;
  std::vector<double> l2_norms;
  std::vector<Eigen::VectorXd> controls;
  std::vector<double> snapshot_times;
  std::vector<Profile> snapshots;
  std::vector<double> z;
};

inline double l2_norm(const Profile& x, const std::vector<double>& z) {
  std::vector<double> sq(z.size(), 0.0);
  for (const auto& xi : x)
    for (std::size_t k = 0; k < z.size(); ++k) sq[k] += xi[k] * xi[k];
  return std::sqrt(std::max(trapz(z, sq), 0.0));
}

/// Input law evaluated on the state of the previous step; empty means u = 0.
using ControlLaw = std::function<Eigen::VectorXd(const Profile&)>;

inline ControlLaw gain_law(const FeedbackGain& gain) {
  return [&gain](const Profile& x) { return eval_control(gain, x); };
}

namespace detail {

// `law` drives the input from the previous step; `observe` only records it.
inline Trajectory integrate(const SemiDiscrete& sys, const ControlLaw& law, const ControlLaw& observe, const Profile& x0, double t_end,
                            double dt, int snapshot_stride) {
  const int n = sys.n, nz = sys.nz, size = sys.size();
  if (static_cast<int>(x0.size()) != n) throw GridMismatch("initial state has the wrong number of channels");
  for (const auto& xi : x0)
    if (static_cast<int>(xi.size()) != nz) throw GridMismatch("initial state is not sampled on the simulator grid");
  if (!(dt > 0.0) || !(t_end >= 0.0)) throw OutOfRange("time step and horizon must be positive");
  snapshot_stride = std::max(snapshot_stride, 1);

  Eigen::VectorXd mass(size);
  for (int r = 0; r < size; ++r) mass[r] = sys.boundary[r] ? 0.0 : 1.0;
  auto assemble = [&](double theta, double step) {
    Eigen::MatrixXd lhs = -theta * step * sys.op;
    lhs.diagonal() += mass;
    for (int r = 0; r < size; ++r)
      if (sys.boundary[r]) lhs.row(r) = sys.bc.row(r);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
    if (!lu.isInvertible()) throw StepRejected("step matrix is singular; boundary conditions are inconsistent");
    return lu;
  };
  const auto euler = assemble(1.0, 0.5 * dt);
  const auto cn = assemble(0.5, dt);

  Eigen::VectorXd x(size);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < nz; ++k) x[sys.index(i, k)] = x0[i][k];
  auto profile = [&](const Eigen::VectorXd& v) {
    Profile p(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(nz)));
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < nz; ++k) p[i][k] = v[sys.index(i, k)];
    return p;
  };

  Trajectory tr;
  tr.z = sys.z;
  const long steps = std::lround(std::ceil(t_end / dt - 1e-9));
  Profile px = profile(x);
  auto control = [&](const Profile& p) { return law ? law(p) : Eigen::VectorXd(Eigen::VectorXd::Zero(n)); };
  auto seen = [&](const Profile& p, const Eigen::VectorXd& u) { return observe ? observe(p) : u; };
  auto record = [&](double t, long step, const Profile& p, const Eigen::VectorXd& u) {
    tr.times.push_back(t);
    tr.l2_norms.push_back(l2_norm(p, sys.z));
    tr.controls.push_back(u);
    if (step % snapshot_stride == 0 || step == steps) {
      tr.snapshot_times.push_back(t);
      tr.snapshots.push_back(p);
    }
  };
  Eigen::VectorXd u = control(px);
  record(0.0, 0, px, seen(px, u));

  auto rhs_of = [&](const Eigen::VectorXd& v, double explicit_weight, const Eigen::VectorXd& input) {
    Eigen::VectorXd rhs = mass.cwiseProduct(v);
    if (explicit_weight != 0.0) rhs += explicit_weight * (sys.op * v);
    for (int i = 0; i < n; ++i) {
      rhs[sys.index(i, 0)] = 0.0;
      rhs[sys.index(i, nz - 1)] = input[i];
    }
    return rhs;
  };
  for (long step = 1; step <= steps; ++step) {
    if (step <= 2) {
      for (int half = 0; half < 2; ++half) x = euler.solve(rhs_of(x, 0.0, u));
    } else {
      x = cn.solve(rhs_of(x, 0.5 * dt, u));
    }
    if (!x.allFinite()) throw StepRejected("non-finite state at step " + std::to_string(step));
    px = profile(x);
    u = control(px);
    record(static_cast<double>(step) * dt, step, px, seen(px, u));
  }
  return tr;
}

}  // namespace detail

/// Crank-Nicolson in time, started by four implicit Euler half steps. The
/// input is evaluated on the state of the previous step.
inline Trajectory simulate(const SemiDiscrete& sys, const ControlLaw& law, const Profile& x0, double t_end, double dt,
                           int snapshot_stride = 1) {
  return detail::integrate(sys, law, law, x0, t_end, dt, snapshot_stride);
}

/// System with the linear feedback moved into the actuated boundary rows.
inline SemiDiscrete close_loop(const SemiDiscrete& sys, const FeedbackGain& gain) {
  if (gain.n != sys.n || static_cast<int>(gain.zeta.size()) != sys.nz) throw GridMismatch("gain and simulator grids differ");
  SemiDiscrete out = sys;
  const int nz = sys.nz;
  for (int i = 0; i < sys.n; ++i) {
    const int r = sys.index(i, nz - 1);
    for (int j = 0; j < sys.n; ++j) {
      out.bc(r, sys.index(j, nz - 1)) -= gain.k_boundary(i, j);
      const auto& row = gain.row(i, j);
      for (int b = 0; b < nz; ++b) {
        const double left = b > 0 ? sys.z[b] - sys.z[b - 1] : 0.0;
        const double right = b + 1 < nz ? sys.z[b + 1] - sys.z[b] : 0.0;
        out.bc(r, sys.index(j, b)) -= 0.5 * (left + right) * row[b];
      }
    }
  }
  return out;
}

/// Closed loop with the feedback solved together with each step.
inline Trajectory simulate(const SemiDiscrete& sys, const FeedbackGain& gain, const Profile& x0, double t_end, double dt,
                           int snapshot_stride = 1) {
  return detail::integrate(close_loop(sys, gain), {}, gain_law(gain), x0, t_end, dt, snapshot_stride);
}

/// Volterra operator sampled on the simulator grid, `k[i * n + j](a, b)`
/// for zeta_b <= z_a.
struct SampledKernel {
  int n = 0;
  std::vector<double> z;
  std::vector<Eigen::MatrixXd> k;
};

inline SampledKernel sample_kernel(const KernelSolution& sol, const std::vector<double>& z, bool inverse) {
  SampledKernel s;
  s.n = sol.n;
  s.z = z;
  const auto nz = static_cast<Eigen::Index>(z.size());
  for (int i = 0; i < sol.n; ++i)
    for (int j = 0; j < sol.n; ++j) {
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nz, nz);
      for (Eigen::Index a = 0; a < nz; ++a)
        for (Eigen::Index b = 0; b <= a; ++b) m(a, b) = inverse ? sol.inverse_kernel(i, j, z[a], z[b]) : sol.kernel(i, j, z[a], z[b]);
      s.k.push_back(std::move(m));
    }
  return s;
}

enum class Direction { forward, inverse };

/// x - int_0^z K x (forward) or x + int_0^z L x (inverse), trapezoid rule.
inline Profile transform_profile(const Profile& x, const SampledKernel& kern, Direction dir) {
  const int n = kern.n;
  const auto nz = kern.z.size();
  if (static_cast<int>(x.size()) != n) throw GridMismatch("profile has the wrong number of channels");
  const double sign = dir == Direction::forward ? -1.0 : 1.0;
  Profile out = x;
  for (int i = 0; i < n; ++i)
    for (std::size_t a = 1; a < nz; ++a) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) {
        const auto& m = kern.k[static_cast<std::size_t>(i * n + j)];
        for (std::size_t b = 0; b < a; ++b) {
          const double w = 0.5 * (kern.z[b + 1] - kern.z[b]);
          acc += w * (m(a, b) * x[j][b] + m(a, b + 1) * x[j][b + 1]);
        }
      }
      out[i][a] += sign * acc;
    }
  return out;
}

inline Trajectory transform_trajectory(const Trajectory& tr, const SampledKernel& kern, Direction dir) {
  Trajectory out = tr;
  for (auto& p : out.snapshots) p = transform_profile(p, kern, dir);
  if (out.snapshots.size() == tr.times.size())
    for (std::size_t k = 0; k < out.snapshots.size(); ++k) out.l2_norms[k] = l2_norm(out.snapshots[k], out.z);
  return out;
}

namespace detail {

// lambda(z) d^2/dz^2 with the boundary nodes eliminated through
// second-order one-sided conditions; returns the interior matrix.
inline Eigen::MatrixXd scalar_operator(const Field1& lambda, bool dirichlet_left, double q_left, bool dirichlet_right, double r_right,
                                       int nodes) {
  const int m = nodes - 2;
  const double h = 1.0 / (nodes - 1);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
  // x_0 = cl1 x_1 + cl2 x_2, x_N = cr1 x_{N-1} + cr2 x_{N-2}
  double cl1 = 0, cl2 = 0, cr1 = 0, cr2 = 0;
  if (!dirichlet_left) {
    const double d = 3.0 - 2.0 * h * q_left;
    cl1 = 4.0 / d;
    cl2 = -1.0 / d;
  }
  if (!dirichlet_right) {
    const double d = 3.0 + 2.0 * h * r_right;
    cr1 = 4.0 / d;
    cr2 = -1.0 / d;
  }
  for (int k = 0; k < m; ++k) {
    const double lam = lambda(static_cast<double>(k + 1) * h) / (h * h);
    A(k, k) += -2 * lam;
    if (k > 0) A(k, k - 1) += lam;
    else {
      A(k, 0) += lam * cl1;
      if (m > 1) A(k, 1) += lam * cl2;
    }
    if (k < m - 1) A(k, k + 1) += lam;
    else {
      A(k, m - 1) += lam * cr1;
      if (m > 1) A(k, m - 2) += lam * cr2;
    }
  }
  return A;
}

inline double top_eigenvalue(const Eigen::MatrixXd& A, double shift) {
  const Eigen::Index m = A.rows();
  Eigen::SparseMatrix<double> S = A.sparseView();
  for (Eigen::Index k = 0; k < m; ++k) S.coeffRef(k, k) -= shift;
  S.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(S);
  if (lu.info() != Eigen::Success) throw EigSolveFailed("shifted operator could not be factorised");
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m).normalized();
  double mu = shift, prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXd w = lu.solve(v);
    if (!w.allFinite()) throw EigSolveFailed("inverse iteration produced non-finite values");
    mu = shift + v.squaredNorm() / v.dot(w);
    v = w.normalized();
    if (std::abs(mu - prev) <= 1e-13 * std::max(1.0, std::abs(mu))) return mu;
    prev = mu;
  }
  throw EigSolveFailed("inverse iteration did not converge");
}

}  // namespace detail

/// Largest eigenvalue of each decoupled target operator lambda_i d^2/dz^2
/// with the plant's left and the target's right boundary conditions.
///
/// A coarse dense spectrum supplies the shift for inverse iteration on the
/// fine grid.
inline std::vector<double> channel_eigenvalues(const PlantModel& plant, const TargetSpec& target, int nodes = 801) {
  if (nodes < 401) throw EigSolveFailed("eigenvalue grid needs at least 401 nodes");
  std::vector<double> out;
  for (int i = 0; i < plant.n; ++i) {
    const bool dl = i < plant.m, dr = target.dirichlet(i);
    const double q = plant.q(i), r = dr ? 0.0 : target.robin_ratio(i);
    const Eigen::MatrixXd coarse = detail::scalar_operator(plant.lambda[i], dl, q, dr, r, 101);
    Eigen::EigenSolver<Eigen::MatrixXd> es(coarse, false);
    if (es.info() != Eigen::Success) throw EigSolveFailed("coarse spectrum failed for channel " + std::to_string(i));
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) top = std::max(top, es.eigenvalues()[k].real());
    const double shift = top + 0.05 * (std::abs(top) + 1.0);
    const double mu = detail::top_eigenvalue(detail::scalar_operator(plant.lambda[i], dl, q, dr, r, nodes), shift);
    // inverse iteration may lock onto a lower mode if the shift lies far off
    if (std::abs(mu - top) > 0.1 * (std::abs(top) + 1.0)) throw EigSolveFailed("inverse iteration left the top of the spectrum");
    out.push_back(mu);
  }
  return out;
}

inline double estimate_mu_max(const PlantModel& plant, const TargetSpec& target, int nodes = 801) {
  const auto mu = channel_eigenvalues(plant, target, nodes);
  return *std::max_element(mu.begin(), mu.end());
}

}  // namespace pidebs

#endif  // PIDEBS_SIM_HPP
