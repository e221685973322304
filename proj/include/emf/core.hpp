#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

#include <Eigen/Dense>

namespace emf {

using cplx = std::complex<double>;

enum class Symmetry { symmetric, hermitian };

/// Error categories raised by the library. The names follow the failure
/// modes listed for each operation.
enum class Errc {
  AsymmetricProfile,
  ColumnSumViolation,
  BoundViolation,
  TimeOutOfRange,
  ConvergenceFailure,
  LowerHalfPlane,
  ZeroDirection,
  IndexOutOfRange,
  BranchAmbiguity,
  StepTooLarge,
  GapCollapse,
  PathTooShort,
  EmptyIndexSet,
  OddDimension,
  DimensionTooLarge,
  MissingOverlap,
  DegenerateSpectrum,
  StateSpaceTooLarge,
  GeneratorBudgetExceeded,
  OddDegreeInput,
  IncompleteOrdering,
  SingularCovariance,
  TimeBelowValidity,
  InvalidArgument,
  ConfigParse,
  UnknownCommand,
  Io,
};

inline std::string_view errc_name(Errc e) {
  switch (e) {
    case Errc::AsymmetricProfile: return "AsymmetricProfile";
    case Errc::ColumnSumViolation: return "ColumnSumViolation";
    case Errc::BoundViolation: return "BoundViolation";
    case Errc::TimeOutOfRange: return "TimeOutOfRange";
    case Errc::ConvergenceFailure: return "ConvergenceFailure";
    case Errc::LowerHalfPlane: return "LowerHalfPlane";
    case Errc::ZeroDirection: return "ZeroDirection";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::BranchAmbiguity: return "BranchAmbiguity";
    case Errc::StepTooLarge: return "StepTooLarge";
    case Errc::GapCollapse: return "GapCollapse";
    case Errc::PathTooShort: return "PathTooShort";
    case Errc::EmptyIndexSet: return "EmptyIndexSet";
    case Errc::OddDimension: return "OddDimension";
    case Errc::DimensionTooLarge: return "DimensionTooLarge";
    case Errc::MissingOverlap: return "MissingOverlap";
    case Errc::DegenerateSpectrum: return "DegenerateSpectrum";
    case Errc::StateSpaceTooLarge: return "StateSpaceTooLarge";
    case Errc::GeneratorBudgetExceeded: return "GeneratorBudgetExceeded";
    case Errc::OddDegreeInput: return "OddDegreeInput";
    case Errc::IncompleteOrdering: return "IncompleteOrdering";
    case Errc::SingularCovariance: return "SingularCovariance";
    case Errc::TimeBelowValidity: return "TimeBelowValidity";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ConfigParse: return "ConfigParse";
    case Errc::UnknownCommand: return "UnknownCommand";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class T>
inline constexpr bool is_complex_v = false;
template <class T>
inline constexpr bool is_complex_v<std::complex<T>> = true;

inline double conj_of(double x) { return x; }
inline cplx conj_of(const cplx& x) { return std::conj(x); }
inline double abs2(double x) { return x * x; }
inline double abs2(const cplx& x) { return std::norm(x); }
inline double real_of(double x) { return x; }
inline double real_of(const cplx& x) { return x.real(); }

template <class Scalar>
constexpr Symmetry symmetry_of() {
  return is_complex_v<Scalar> ? Symmetry::hermitian : Symmetry::symmetric;
}

}  // namespace emf
