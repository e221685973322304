#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "emf/core.hpp"
#include "emf/rng.hpp"

namespace emf {

/// Variance profile s_ij of a generalized Wigner matrix together with the
/// bound constants c, C such that c/n <= s_ij <= C/n.
struct VarianceProfile {
  std::size_t n = 0;
  Eigen::MatrixXd s;
  double c = 0.0;
  double C = 0.0;
};

/// Validates a raw profile. Columns whose sums are within 1e-9 of one are
/// rescaled symmetrically (s_ij / sqrt(sum_i sum_j)) so the result stays
/// symmetric with column sums exact to ~1e-18; anything further off is rejected.
inline VarianceProfile build_variance_profile(const Eigen::MatrixXd& raw) {
  const auto n = static_cast<std::size_t>(raw.rows());
  if (raw.rows() != raw.cols() || n == 0)
    throw Error(Errc::InvalidArgument, "profile must be a non-empty square matrix");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double a = raw(i, j), b = raw(j, i);
      if (std::abs(a - b) > 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}))
        throw Error(Errc::AsymmetricProfile, "s[" + std::to_string(i) + "][" + std::to_string(j) + "] != s[" +
                                                 std::to_string(j) + "][" + std::to_string(i) + "]");
      if (!(a > 0.0) || !std::isfinite(a))
        throw Error(Errc::BoundViolation, "profile entries must be finite and strictly positive");
    }
  const Eigen::VectorXd sums = raw.colwise().sum().transpose();
  for (std::size_t j = 0; j < n; ++j)
    if (std::abs(sums[j] - 1.0) > 1e-9)
      throw Error(Errc::ColumnSumViolation,
                  "column " + std::to_string(j) + " sums to " + std::to_string(sums[j]));

  VarianceProfile p;
  p.n = n;
  p.s.resize(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) p.s(i, j) = raw(i, j) / std::sqrt(sums[i] * sums[j]);
  p.s = 0.5 * (p.s + p.s.transpose()).eval();
  p.c = static_cast<double>(n) * p.s.minCoeff();
  p.C = static_cast<double>(n) * p.s.maxCoeff();
  return p;
}

inline VarianceProfile flat_profile(std::size_t n) {
  return build_variance_profile(Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n)));
}

enum class EnsembleKind { goe, gue, bernoulli_wigner, custom };

/// Draws a standardized (mean 0, variance 1) real value from a keyed stream.
using StandardizedSampler = std::function<double(rng::Stream&)>;

struct EnsembleSpec {
  EnsembleKind kind = EnsembleKind::goe;
  std::size_t n = 0;
  std::optional<VarianceProfile> profile;
  Symmetry symmetry = Symmetry::symmetric;
  std::vector<double> moment_bounds;  // mu_p, informational
  StandardizedSampler custom;

  static EnsembleSpec goe(std::size_t n) { return {EnsembleKind::goe, n, std::nullopt, Symmetry::symmetric, {}, {}}; }
  static EnsembleSpec gue(std::size_t n) { return {EnsembleKind::gue, n, std::nullopt, Symmetry::hermitian, {}, {}}; }
  static EnsembleSpec bernoulli(std::size_t n, Symmetry sym = Symmetry::symmetric) {
    return {EnsembleKind::bernoulli_wigner, n, std::nullopt, sym, {}, {}};
  }

  void validate() const {
    if (n == 0) throw Error(Errc::InvalidArgument, "ensemble dimension must be positive");
    if ((kind == EnsembleKind::goe || kind == EnsembleKind::gue) && profile)
      throw Error(Errc::InvalidArgument, "GOE/GUE use the implicit flat profile");
    if (kind == EnsembleKind::goe && symmetry != Symmetry::symmetric)
      throw Error(Errc::InvalidArgument, "GOE is real symmetric");
    if (kind == EnsembleKind::gue && symmetry != Symmetry::hermitian)
      throw Error(Errc::InvalidArgument, "GUE is complex Hermitian");
    if (profile && profile->n != n) throw Error(Errc::InvalidArgument, "profile dimension mismatch");
    if (kind == EnsembleKind::custom && !custom)
      throw Error(Errc::InvalidArgument, "custom ensemble requires a standardized sampler");
  }

  /// Total variance of entry (i, j). Without a profile: 1/n off the diagonal,
  /// 2/n (symmetric) or 1/n (Hermitian) on it.
  double entry_variance(std::size_t i, std::size_t j) const {
    if (profile) return profile->s(i, j);
    const double inv_n = 1.0 / static_cast<double>(n);
    if (i != j) return inv_n;
    return symmetry == Symmetry::symmetric ? 2.0 * inv_n : inv_n;
  }
};

struct Provenance {
  EnsembleKind kind = EnsembleKind::goe;
  std::uint64_t seed = 0;
  std::string operation = "sample";
};

template <class Scalar>
struct RandomMatrix {
  Symmetry symmetry = symmetry_of<Scalar>();
  Matrix<Scalar> entries;
  Provenance provenance;

  std::size_t n() const { return static_cast<std::size_t>(entries.rows()); }
};

using RealMatrix = RandomMatrix<double>;
using HermitianMatrix = RandomMatrix<cplx>;

namespace detail {
inline double standardized(const EnsembleSpec& spec, rng::Stream& s) {
  switch (spec.kind) {
    case EnsembleKind::goe:
    case EnsembleKind::gue: return s.normal();
    case EnsembleKind::bernoulli_wigner: return s.sign();
    case EnsembleKind::custom: return spec.custom(s);
  }
  return 0.0;
}
}  // namespace detail

/// Entry (i, j), i >= j, of sample(spec, seed). Entries are keyed by
/// (seed, i, j), so any entry can be drawn without building the matrix.
template <class Scalar>
Scalar sample_entry(const EnsembleSpec& spec, std::uint64_t seed, std::size_t i, std::size_t j) {
  if (i < j) return conj_of(sample_entry<Scalar>(spec, seed, j, i));
  rng::Stream stream(rng::derive(rng::domain_key(seed, rng::Domain::matrix_entries), {i, j}));
  const double var = spec.entry_variance(i, j);
  if constexpr (is_complex_v<Scalar>) {
    if (i == j) return Scalar(std::sqrt(var) * detail::standardized(spec, stream), 0.0);
    const double sd = std::sqrt(0.5 * var);
    const double re = detail::standardized(spec, stream);
    const double im = detail::standardized(spec, stream);
    return Scalar(sd * re, sd * im);
  } else {
    return std::sqrt(var) * detail::standardized(spec, stream);
  }
}

template <class Scalar>
RandomMatrix<Scalar> sample(const EnsembleSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (spec.symmetry != symmetry_of<Scalar>())
    throw Error(Errc::InvalidArgument, "scalar type does not match the ensemble symmetry");
  RandomMatrix<Scalar> m;
  m.provenance = {spec.kind, seed, "sample"};
  m.entries.resize(spec.n, spec.n);
  for (std::size_t j = 0; j < spec.n; ++j)
    for (std::size_t i = j; i < spec.n; ++i) {
      const Scalar v = sample_entry<Scalar>(spec, seed, i, j);
      m.entries(i, j) = v;
      m.entries(j, i) = conj_of(v);
    }
  return m;
}

/// The invariant Gaussian ensemble matching the scalar type: GOE or GUE.
template <class Scalar>
RandomMatrix<Scalar> sample_invariant(std::size_t n, std::uint64_t seed) {
  return sample<Scalar>(is_complex_v<Scalar> ? EnsembleSpec::gue(n) : EnsembleSpec::goe(n), seed);
}

/// e^{-s/2} w + sqrt(1 - e^{-s}) X with X a fresh GOE/GUE matrix. Valid for
/// any s >= 0; this is also the exact Ornstein-Uhlenbeck transition.
template <class Scalar>
RandomMatrix<Scalar> ou_transition(const RandomMatrix<Scalar>& w, double s, std::uint64_t seed) {
  if (!(s >= 0.0)) throw Error(Errc::TimeOutOfRange, "time must be nonnegative");
  RandomMatrix<Scalar> out = w;
  out.provenance.operation = "ou_transition";
  if (s == 0.0) return out;
  const auto noise = sample_invariant<Scalar>(w.n(), rng::derive(seed, {static_cast<std::uint64_t>(rng::Domain::gaussian_divisible)}));
  out.entries = std::exp(-0.5 * s) * w.entries + std::sqrt(-std::expm1(-s)) * noise.entries;
  for (Eigen::Index i = 0; i < out.entries.rows(); ++i) out.entries(i, i) = real_of(out.entries(i, i));
  return out;
}

template <class Scalar>
RandomMatrix<Scalar> gaussian_divisible(const RandomMatrix<Scalar>& w, double s, std::uint64_t seed) {
  if (!(s >= 0.0 && s <= 1.0)) throw Error(Errc::TimeOutOfRange, "gaussian_divisible requires 0 <= s <= 1");
  auto out = ou_transition(w, s, seed);
  out.provenance.operation = "gaussian_divisible";
  return out;
}

}  // namespace emf
