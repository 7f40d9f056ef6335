#ifndef PIDEBS_DESIGN_HPP
#define PIDEBS_DESIGN_HPP

#include <cmath>
#include <vector>

#include "pidebs/feedback.hpp"
#include "pidebs/kernel/solution.hpp"
#include "pidebs/model.hpp"
#include "pidebs/sim.hpp"

namespace pidebs {

/// Controller design for a plant as given by the user.
///
/// The kernel is computed for the working plant: states reordered so that
/// Dirichlet conditions at z = 0 come first, and convection removed. Working
/// state k is user state perm[k] scaled by the convection weight.
struct Design {
  PlantModel plant;    // user ordering, validated
  TargetSpec target;   // user ordering
  std::vector<int> perm;
  ConvectionWeight weight;
  PlantModel working;
  TargetSpec working_target;
  KernelSolution kernel;

  Profile to_working(const Profile& x, const std::vector<double>& z) const {
    Profile w(x.size());
    for (std::size_t k = 0; k < perm.size(); ++k) {
      w[k] = x[static_cast<std::size_t>(perm[k])];
      for (std::size_t a = 0; a < z.size(); ++a) w[k][a] *= weight(static_cast<int>(k), z[a]);
    }
    return w;
  }

  Profile from_working(const Profile& w, const std::vector<double>& z) const {
    Profile x(w.size());
    for (std::size_t k = 0; k < perm.size(); ++k) {
      auto& xi = x[static_cast<std::size_t>(perm[k])];
      xi = w[k];
      for (std::size_t a = 0; a < z.size(); ++a) xi[a] /= weight(static_cast<int>(k), z[a]);
    }
    return x;
  }
};

/// Normalise the plant and the target and solve the kernel equations.
inline Design design_controller(const PlantModel& raw, const TargetSpec& target, const SolverOptions& opt = {}) {
  Design d;
  auto [ordered, perm] = reorder_dirichlet_first(raw);
  d.perm = perm;
  ordered = validate_plant(std::move(ordered));
  const auto inv = inverse_permutation(perm);
  d.plant = permute_plant(ordered, inv);
  d.target = target;
  validate_target(target, d.plant);
  d.working_target = permute_target(target, perm);
  auto [working, weight] = eliminate_convection(ordered);
  d.working = std::move(working);
  d.weight = std::move(weight);
  d.kernel = solve_kernel(d.working, d.working_target, opt);
  return d;
}

/// Feedback gain acting on the user's state, sampled on `n_z` nodes.
inline FeedbackGain user_gain(const Design& d, int n_z) {
  const FeedbackGain w = build_gain(d.kernel, d.working, d.working_target, n_z);
  const int n = w.n;
  FeedbackGain g = w;
  for (int a = 0; a < n; ++a) {
    const int ua = d.perm[a];
    g.dirichlet_target[ua] = w.dirichlet_target[a];
    for (int b = 0; b < n; ++b) {
      const int ub = d.perm[b];
      g.k_boundary(ua, ub) = w.k_boundary(a, b) * d.weight(b, 1.0);
      auto& row = g.row(ua, ub);
      row = w.row(a, b);
      for (std::size_t k = 0; k < row.size(); ++k) row[k] *= d.weight(b, w.zeta[k]);
    }
  }
  return g;
}

}  // namespace pidebs

#endif  // PIDEBS_DESIGN_HPP
