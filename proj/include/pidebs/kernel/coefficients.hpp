#ifndef PIDEBS_KERNEL_COEFFICIENTS_HPP
#define PIDEBS_KERNEL_COEFFICIENTS_HPP

#include <cmath>
#include <vector>

#include "pidebs/coords.hpp"
#include "pidebs/model.hpp"
#include "pidebs/numerics.hpp"

namespace pidebs {

/// Coefficients of the kernel equations in canonical form.
///
/// All functions take original coordinates (z, zeta) rather than the scaled
/// ones; the solver already has them at hand and this avoids repeated
/// inversions of phi. `zb` denotes an integration variable in z.
class CoefficientTables {
 public:
  CoefficientTables(const PlantModel& plant, const CoordinateAtlas& atlas, const TargetSpec& target)
      : plant_(plant), atlas_(atlas), mu_c_(target.mu_c) {
    const int n = plant.n;
    for (int i = 0; i < n; ++i) {
      lam0_.push_back(plant.lambda[i](0.0));
      sqrt_lam0_.push_back(std::sqrt(lam0_.back()));
      // c7 integrand tabulated over rho
      const int count = 2001;
      std::vector<double> r(count), f(count);
      for (int k = 0; k < count; ++k) {
        r[k] = k == count - 1 ? atlas.phi1[i] : atlas.phi1[i] * k / (count - 1);
        f[k] = plant.A(i, i)(atlas.z_of(i, r[k])) + mu_c_;
      }
      auto cum = cumulative_trapz(r, f);
      for (double& v : cum) v *= -0.5 * sqrt_lam0_.back();
      c7_.emplace_back(std::move(r), std::move(cum));
    }
  }

  double mu_c() const { return mu_c_; }
  const PlantModel& plant() const { return plant_; }
  const CoordinateAtlas& atlas() const { return atlas_; }

  double psi(int i, double z) const { return std::pow(plant_.lambda[i](z) / lam0_[i], 0.25); }

  double a(int i, int j, double z, double zeta) const {
    double v = 0.0;
    if (!plant_.lambda[i].is_constant()) {
      const double l = plant_.lambda[i](z), d1 = plant_.lambda_d1[i](z), d2 = plant_.lambda_d2[i](z);
      v += -0.25 * d2 + 3.0 * d1 * d1 / (16.0 * l);
    }
    if (!plant_.lambda[j].is_constant()) {
      const double l = plant_.lambda[j](zeta), d1 = plant_.lambda_d1[j](zeta), d2 = plant_.lambda_d2[j](zeta);
      v += 0.25 * d2 - 3.0 * d1 * d1 / (16.0 * l);
    }
    return v;
  }

  double c1(int i, int j, double z, double zeta) const {
    if (plant_.F(i, j).is_zero()) return 0.0;
    return plant_.lambda[j](zeta) / (psi(i, z) * psi(j, zeta)) * plant_.F(i, j)(z, zeta);
  }

  double c2(int k, int j, double zeta) const {
    if (plant_.A(k, j).is_zero()) return 0.0;
    return plant_.A(k, j)(zeta) * plant_.lambda[j](zeta) * psi(k, zeta) / (plant_.lambda[k](zeta) * psi(j, zeta));
  }

  double c3(int k, int j, double zeta, double zb) const {
    if (plant_.F(k, j).is_zero()) return 0.0;
    return plant_.F(k, j)(zb, zeta) * plant_.lambda[j](zeta) / psi(j, zeta) * psi(k, zb) / plant_.lambda[k](zb);
  }

  double c4(int j) const {
    const double d1 = plant_.lambda_d1[j].is_zero() ? 0.0 : plant_.lambda_d1[j](0.0);
    return d1 / (4.0 * sqrt_lam0_[j]) + plant_.q(j) * sqrt_lam0_[j];
  }

  double c5(int i, int j, double z) const {
    if (plant_.A0(i, j).is_zero()) return 0.0;
    return sqrt_lam0_[j] / psi(i, z) * plant_.A0(i, j)(z);
  }

  double c6(int k, int j, double zb) const {
    if (plant_.A0(k, j).is_zero()) return 0.0;
    return plant_.A0(k, j)(zb) * sqrt_lam0_[j] * psi(k, zb) / plant_.lambda[k](zb);
  }

  /// Diagonal trace in scaled form, as a function of rho.
  double c7(int i, double rho) const { return c7_[i](rho); }

  double c8(int i, int j, double z) const {
    const double li = plant_.lambda[i](z), lj = plant_.lambda[j](z);
    return std::pow(lam0_[i] * lam0_[j] * li * lj * lj * lj, 0.25) * plant_.A(i, j)(z) / (lj - li);
  }

  double c9(int i, int j, double xi) const {
    const auto [el, slope] = atlas_.eta_lower(i, j, xi);
    (void)el;
    const double zl = atlas_.z_lower(i, j, xi);
    const int s = atlas_.sign(i, j);
    return c8(i, j, zl) * slope / (s * slope - 1.0);
  }

  double c10(int i, double xi) const {
    const double z = atlas_.z_of(i, std::clamp(0.5 * xi, 0.0, atlas_.phi1[i]));
    return -0.25 * sqrt_lam0_[i] * (plant_.A(i, i)(z) + mu_c_);
  }

  /// Boundary value of H on the lower curve.
  double h_boundary(int i, int j, double xi) const { return i == j ? c10(i, xi) : c9(i, j, xi); }

 private:
  const PlantModel& plant_;
  const CoordinateAtlas& atlas_;
  double mu_c_;
  std::vector<double> lam0_, sqrt_lam0_;
  std::vector<GridFn1D> c7_;
};

inline CoefficientTables build_coefficients(const PlantModel& plant, const CoordinateAtlas& atlas, const TargetSpec& target) {
  return CoefficientTables(plant, atlas, target);
}

}  // namespace pidebs

#endif  // PIDEBS_KERNEL_COEFFICIENTS_HPP
