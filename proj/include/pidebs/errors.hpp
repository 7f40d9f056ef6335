#ifndef PIDEBS_ERRORS_HPP
#define PIDEBS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pidebs {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PIDEBS_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

// model
PIDEBS_DEFINE_ERROR(DiffusionNotPositive);
PIDEBS_DEFINE_ERROR(DiffusionCoefficientsTouch);
PIDEBS_DEFINE_ERROR(MalformedBC);
PIDEBS_DEFINE_ERROR(ActuationRowZero);
PIDEBS_DEFINE_ERROR(CoupledLeftBC);
PIDEBS_DEFINE_ERROR(MalformedTarget);

// numerics / coords
PIDEBS_DEFINE_ERROR(OutOfRange);
PIDEBS_DEFINE_ERROR(OutsideDomain);
PIDEBS_DEFINE_ERROR(NotMonotone);
PIDEBS_DEFINE_ERROR(NonPositiveNorm);

// kernel / feedback / sim
PIDEBS_DEFINE_ERROR(NoConvergence);
PIDEBS_DEFINE_ERROR(MissingKernelTrace);
PIDEBS_DEFINE_ERROR(GridMismatch);
PIDEBS_DEFINE_ERROR(GridTooCoarse);
PIDEBS_DEFINE_ERROR(StepRejected);
PIDEBS_DEFINE_ERROR(EigSolveFailed);

// configuration
PIDEBS_DEFINE_ERROR(ParseError);
PIDEBS_DEFINE_ERROR(DimensionMismatch);
PIDEBS_DEFINE_ERROR(ExpressionDomainError);

#undef PIDEBS_DEFINE_ERROR

}  // namespace pidebs

#endif  // PIDEBS_ERRORS_HPP
