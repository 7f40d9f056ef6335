#ifndef PIDEBS_FIELD_HPP
#define PIDEBS_FIELD_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

namespace pidebs {

/// Scalar coefficient of one variable, evaluated on demand.
///
/// A default-constructed field is identically zero; the solver uses
/// `is_zero()` to skip terms whose coefficients vanish.
class Field1 {
 public:
  using Fn = std::function<double(double)>;

  Field1() = default;
  explicit Field1(Fn fn) : fn_(std::move(fn)) {}

  static Field1 constant(double c) {
    Field1 f;
    f.value_ = c;
    return f;
  }

  double operator()(double z) const { return fn_ ? fn_(z) : value_; }

  bool is_zero() const { return !fn_ && value_ == 0.0; }
  bool is_constant() const { return !fn_; }

 private:
  Fn fn_;
  double value_ = 0.0;
};

/// Scalar coefficient of two variables (z, zeta).
class Field2 {
 public:
  using Fn = std::function<double(double, double)>;

  Field2() = default;
  explicit Field2(Fn fn) : fn_(std::move(fn)) {}

  static Field2 constant(double c) {
    Field2 f;
    f.value_ = c;
    return f;
  }

  double operator()(double z, double zeta) const { return fn_ ? fn_(z, zeta) : value_; }

  bool is_zero() const { return !fn_ && value_ == 0.0; }

 private:
  Fn fn_;
  double value_ = 0.0;
};

/// Square matrix of coefficient fields, row-major.
template <typename F>
class FieldMatrix {
 public:
  FieldMatrix() = default;
  explicit FieldMatrix(int n) : n_(n), data_(static_cast<std::size_t>(n * n)) {}

  int size() const { return n_; }
  F& operator()(int i, int j) { return data_[static_cast<std::size_t>(i * n_ + j)]; }
  const F& operator()(int i, int j) const { return data_[static_cast<std::size_t>(i * n_ + j)]; }

  bool all_zero() const {
    for (const auto& f : data_)
      if (!f.is_zero()) return false;
    return true;
  }

 private:
  int n_ = 0;
  std::vector<F> data_;
};

using Field1Matrix = FieldMatrix<Field1>;
using Field2Matrix = FieldMatrix<Field2>;

}  // namespace pidebs

#endif  // PIDEBS_FIELD_HPP
