#ifndef PIDEBS_VERIFY_HPP
#define PIDEBS_VERIFY_HPP

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "pidebs/config.hpp"
#include "pidebs/design.hpp"
#include "pidebs/sim.hpp"

namespace pidebs {

/// Smooth test profiles: short random sine series per channel.
inline std::vector<Profile> smooth_profiles(int count, int n, const std::vector<double>& z, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::vector<Profile> out;
  for (int c = 0; c < count; ++c) {
    Profile p(static_cast<std::size_t>(n), std::vector<double>(z.size(), 0.0));
    for (auto& xi : p) {
      double a[4], ph[4];
      for (int m = 0; m < 4; ++m) {
        a[m] = coef(rng) / (m + 1);
        ph[m] = coef(rng) * std::numbers::pi;
      }
      for (std::size_t k = 0; k < z.size(); ++k)
        for (int m = 0; m < 4; ++m) xi[k] += a[m] * std::sin((m + 1) * std::numbers::pi * z[k] + ph[m]);
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// Sup error of the inverse transformation applied after the forward one.
inline double reciprocity_error(const KernelSolution& sol, const std::vector<Profile>& profiles, const std::vector<double>& z) {
  const auto fwd = sample_kernel(sol, z, false);
  const auto inv = sample_kernel(sol, z, true);
  double err = 0.0;
  for (const auto& x : profiles) {
    const auto back = transform_profile(transform_profile(x, fwd, Direction::forward), inv, Direction::inverse);
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t k = 0; k < z.size(); ++k) err = std::max(err, std::abs(back[i][k] - x[i][k]));
  }
  return err;
}

inline Profile sample_profile(const std::vector<Field1>& f, const std::vector<double>& z) {
  Profile p;
  for (const auto& fi : f) {
    std::vector<double> v;
    for (double zk : z) v.push_back(fi(zk));
    p.push_back(std::move(v));
  }
  return p;
}

/// Closed-loop simulation of the user plant with the designed feedback.
inline Trajectory closed_loop(const Design& d, const SimSettings& sim) {
  const auto sys = discretize(d.plant, sim.n_z);
  const auto gain = user_gain(d, sim.n_z);
  return simulate(sys, gain, sample_profile(sim.x0, sys.z), sim.t_end, sim.dt, sim.snapshot_stride);
}

inline Trajectory open_loop(const PlantModel& plant, const SimSettings& sim) {
  const auto sys = discretize(plant, sim.n_z);
  return simulate(sys, ControlLaw{}, sample_profile(sim.x0, sys.z), sim.t_end, sim.dt, sim.snapshot_stride);
}

struct VerifyReport {
  ResidualReport residuals;
  double reciprocity_err = 0.0;
  double mu_max = 0.0;
  double decay_rate_fit = 0.0;
  int iterations = 0;
  double growth_M_hat = 0.0;
};

inline VerifyReport verify_design(const Design& d, const SimSettings& sim) {
  VerifyReport r;
  r.residuals = residual_report(d.kernel);
  const auto z = detail::uniform_nodes(d.kernel.grid_n);
  r.reciprocity_err = reciprocity_error(d.kernel, smooth_profiles(5, d.kernel.n, z, 7u), z);
  r.mu_max = estimate_mu_max(d.working, d.working_target);
  const auto tr = closed_loop(d, sim);
  r.decay_rate_fit = fit_decay_rate(tr.times, tr.l2_norms);
  r.iterations = d.kernel.iterations;
  r.growth_M_hat = d.kernel.growth_M_hat;
  return r;
}

}  // namespace pidebs

#endif  // PIDEBS_VERIFY_HPP
