#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <variant>
#include <vector>

#include <lapacke.h>

#include "emf/core.hpp"
#include "emf/ensembles.hpp"
#include "emf/rng.hpp"

namespace emf {

struct SignPolicy {
  enum class Kind { largest_coordinate_positive, random_sign };
  Kind kind = Kind::largest_coordinate_positive;
  std::uint64_t seed = 0;

  static SignPolicy largest_positive() { return {}; }
  static SignPolicy random(std::uint64_t seed) { return {Kind::random_sign, seed}; }
};

/// Ascending eigenvalues with an orthonormal eigenvector basis (columns).
template <class Scalar>
struct SpectralData {
  Eigen::VectorXd lambdas;
  Matrix<Scalar> vectors;
  SignPolicy sign_policy;

  std::size_t n() const { return static_cast<std::size_t>(lambdas.size()); }
};

/// Fixes the sign (phase, in the complex case) of every column according to
/// the policy. random_sign multiplies by an independent +-1 (uniform phase).
template <class Scalar>
void apply_sign_policy(Matrix<Scalar>& vectors, const SignPolicy& policy) {
  rng::Stream stream(rng::domain_key(policy.seed, rng::Domain::sign_policy));
  for (Eigen::Index k = 0; k < vectors.cols(); ++k) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index a = 0; a < vectors.rows(); ++a) {
      const double m = abs2(vectors(a, k));
      if (m > best * (1.0 + 1e-12)) {
        best = m;
        arg = a;
      }
    }
    const Scalar pivot = vectors(arg, k);
    Scalar phase;
    if constexpr (is_complex_v<Scalar>) {
      phase = std::abs(pivot) > 0 ? std::conj(pivot) / std::abs(pivot) : Scalar(1.0);
    } else {
      phase = pivot < 0 ? -1.0 : 1.0;
    }
    if (policy.kind == SignPolicy::Kind::random_sign) {
      if constexpr (is_complex_v<Scalar>) {
        phase *= std::polar(1.0, 2.0 * std::numbers::pi * stream.uniform());
      } else {
        phase *= stream.sign();
      }
    }
    vectors.col(k) *= phase;
  }
}

template <class Scalar>
SpectralData<Scalar> decompose(const Matrix<Scalar>& h, SignPolicy policy = {}) {
  if (h.rows() != h.cols()) throw Error(Errc::InvalidArgument, "matrix must be square");
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(h);
  if (solver.info() != Eigen::Success) throw Error(Errc::ConvergenceFailure, "self-adjoint eigensolver failed");
  const auto n = h.rows();
  const Eigen::VectorXd& evals = solver.eigenvalues();
  const Matrix<Scalar>& evecs = solver.eigenvectors();

  // Exact ties are ordered by the index of the dominant coordinate.
  std::vector<Eigen::Index> dominant(n);
  for (Eigen::Index k = 0; k < n; ++k) evecs.col(k).cwiseAbs2().maxCoeff(&dominant[k]);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (evals[a] != evals[b]) return evals[a] < evals[b];
    return dominant[a] < dominant[b];
  });

  SpectralData<Scalar> out;
  out.sign_policy = policy;
  out.lambdas.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.lambdas[k] = evals[order[k]];
    out.vectors.col(k) = evecs.col(order[k]);
  }
  apply_sign_policy(out.vectors, policy);
  return out;
}

template <class Scalar>
SpectralData<Scalar> decompose(const RandomMatrix<Scalar>& h, SignPolicy policy = {}) {
  return decompose<Scalar>(h.entries, policy);
}

template <class Scalar>
Matrix<Scalar> reconstruct(const SpectralData<Scalar>& spec) {
  return spec.vectors * spec.lambdas.asDiagonal() * spec.vectors.adjoint();
}

/// Eigenpairs with ascending indices [first, last] (0-based) of a real
/// symmetric matrix; only the requested eigenvectors are formed.
struct SelectedEigenpairs {
  Eigen::VectorXd lambdas;
  Eigen::MatrixXd vectors;
};

inline SelectedEigenpairs select_eigenpairs(Eigen::MatrixXd h, int first, int last) {
  const int n = static_cast<int>(h.rows());
  if (first < 0 || last >= n || first > last) throw Error(Errc::IndexOutOfRange, "eigenpair range");
  const int count = last - first + 1;
  SelectedEigenpairs out;
  out.lambdas.resize(n);
  out.vectors.resize(n, count);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(count));
  lapack_int found = 0;
  const lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'L', n, h.data(), n, 0.0, 0.0, first + 1,
                                         last + 1, 0.0, &found, out.lambdas.data(), out.vectors.data(), n,
                                         support.data());
  if (info != 0 || found != count) throw Error(Errc::ConvergenceFailure, "dsyevr failed");
  out.lambdas.conservativeResize(count);
  return out;
}

// --- Semicircle law -------------------------------------------------------

inline double semicircle_density(double x) {
  return std::abs(x) >= 2.0 ? 0.0 : std::sqrt(4.0 - x * x) / (2.0 * std::numbers::pi);
}

inline double semicircle_cdf(double x) {
  if (x <= -2.0) return 0.0;
  if (x >= 2.0) return 1.0;
  return 0.5 + x * std::sqrt(4.0 - x * x) / (4.0 * std::numbers::pi) + std::asin(0.5 * x) / std::numbers::pi;
}

/// sqrt(z^2 - 4) on the branch that behaves like z at infinity; analytic off [-2, 2].
inline cplx semicircle_root(cplx z) { return std::sqrt(z - 2.0) * std::sqrt(z + 2.0); }

/// Stieltjes transform of the semicircle law: the root of m^2 + z m + 1 = 0
/// with Im m > 0.
inline cplx semicircle_stieltjes(cplx z) {
  if (!(z.imag() > 0.0)) throw Error(Errc::LowerHalfPlane, "Im z must be positive");
  return -2.0 / (z + semicircle_root(z));
}

/// Bisection for F_sc(gamma_k) = k/n, 1 <= k <= n.
inline double classical_location(std::size_t k, std::size_t n) {
  if (n == 0 || k < 1 || k > n) throw Error(Errc::IndexOutOfRange, "classical location index");
  const double target = static_cast<double>(k) / static_cast<double>(n);
  if (k == n) return 2.0;
  double lo = -2.0, hi = 2.0;
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    const double f = semicircle_cdf(mid);
    if (f == target) return mid;
    (f < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline std::vector<double> classical_locations(std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t k = 1; k <= n; ++k) g[k - 1] = classical_location(k, n);
  return g;
}

/// Kolmogorov distance between the empirical spectral distribution and F_sc.
inline double ks_distance_to_semicircle(const Eigen::VectorXd& sorted_lambdas) {
  const double n = static_cast<double>(sorted_lambdas.size());
  double d = 0.0;
  for (Eigen::Index i = 0; i < sorted_lambdas.size(); ++i) {
    const double f = semicircle_cdf(sorted_lambdas[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
  }
  return d;
}

// --- Resolvent -------------------------------------------------------------

template <class Scalar>
cplx empirical_stieltjes(const SpectralData<Scalar>& spec, cplx z) {
  if (!(z.imag() > 0.0)) throw Error(Errc::LowerHalfPlane, "Im z must be positive");
  cplx s = 0.0;
  for (Eigen::Index k = 0; k < spec.lambdas.size(); ++k) s += 1.0 / (spec.lambdas[k] - z);
  return s / static_cast<double>(spec.lambdas.size());
}

/// A canonical basis index or a (real) direction; directions are normalized.
using Direction = std::variant<std::size_t, Eigen::VectorXd>;

namespace detail {
/// <u_k, d> for all k, i.e. V^* d.
template <class Scalar>
Eigen::VectorXcd project(const SpectralData<Scalar>& spec, const Direction& d) {
  if (const auto* idx = std::get_if<std::size_t>(&d)) {
    if (*idx >= spec.n()) throw Error(Errc::IndexOutOfRange, "resolvent index");
    return spec.vectors.row(static_cast<Eigen::Index>(*idx)).adjoint().template cast<cplx>();
  }
  const auto& v = std::get<Eigen::VectorXd>(d);
  if (static_cast<std::size_t>(v.size()) != spec.n()) throw Error(Errc::InvalidArgument, "direction length");
  const double norm = v.norm();
  if (!(norm > 0.0)) throw Error(Errc::ZeroDirection, "direction has zero norm");
  return (spec.vectors.adjoint() * (v / norm).template cast<Scalar>()).template cast<cplx>();
}
}  // namespace detail

/// <a, G(z) b> via the spectral sum G(z) = sum_k u_k u_k^* / (lambda_k - z).
template <class Scalar>
cplx resolvent_entry(const SpectralData<Scalar>& spec, const Direction& a, const Direction& b, cplx z) {
  if (!(z.imag() > 0.0)) throw Error(Errc::LowerHalfPlane, "Im z must be positive");
  const Eigen::VectorXcd pa = detail::project(spec, a);
  const Eigen::VectorXcd pb = detail::project(spec, b);
  cplx g = 0.0;
  for (Eigen::Index k = 0; k < spec.lambdas.size(); ++k) g += std::conj(pa[k]) * pb[k] / (spec.lambdas[k] - z);
  return g;
}

// --- Rigidity --------------------------------------------------------------

struct RigidityRow {
  std::size_t k = 0;  // 1-based
  double lambda = 0.0;
  double gamma = 0.0;
  double margin_ratio = 0.0;
};

struct RigidityReport {
  std::vector<RigidityRow> rows;
  double max_ratio = 0.0;
  std::size_t exceedances = 0;
};

/// Ratios |lambda_k - gamma_k| / (constant * khat^{-1/3} n^{-2/3+eps}) with
/// khat = min(k, n + 1 - k).
inline RigidityReport rigidity_report(const Eigen::VectorXd& lambdas, double epsilon_exponent, double constant = 1.0) {
  const std::size_t n = static_cast<std::size_t>(lambdas.size());
  RigidityReport rep;
  rep.rows.reserve(n);
  const double scale = constant * std::pow(static_cast<double>(n), -2.0 / 3.0 + epsilon_exponent);
  for (std::size_t k = 1; k <= n; ++k) {
    const double khat = static_cast<double>(std::min(k, n + 1 - k));
    const double gamma = classical_location(k, n);
    const double ratio = std::abs(lambdas[k - 1] - gamma) / (scale * std::pow(khat, -1.0 / 3.0));
    rep.rows.push_back({k, lambdas[k - 1], gamma, ratio});
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    if (ratio > 1.0) ++rep.exceedances;
  }
  return rep;
}

// --- Local laws ------------------------------------------------------------

struct LocalLawRow {
  double z_re = 0.0;
  double z_im = 0.0;
  double residual = 0.0;
  double bound = 0.0;
};

/// Points of the spectral domain {|E| <= 1/omega, n^{-1+omega} <= eta <= 1/omega}
/// on an energies x heights grid (heights log-spaced from the lower edge up to eta_max).
inline std::vector<cplx> spectral_domain_grid(std::size_t n, double omega, std::vector<double> energies,
                                              std::size_t heights, double eta_max = 1.0) {
  std::vector<cplx> zs;
  const double eta_min = std::pow(static_cast<double>(n), -1.0 + omega);
  eta_max = std::min(eta_max, 1.0 / omega);
  for (double e : energies) {
    if (std::abs(e) > 1.0 / omega) continue;
    for (std::size_t h = 0; h < heights; ++h) {
      const double t = heights == 1 ? 0.0 : static_cast<double>(h) / static_cast<double>(heights - 1);
      zs.emplace_back(e, eta_min * std::pow(eta_max / eta_min, t));
    }
  }
  return zs;
}

/// |s(z) - m(z)| against constant / (n eta).
template <class Scalar>
std::vector<LocalLawRow> averaged_local_law(const SpectralData<Scalar>& spec, const std::vector<cplx>& zs,
                                            double constant) {
  std::vector<LocalLawRow> rows;
  const double n = static_cast<double>(spec.n());
  for (cplx z : zs) {
    const double res = std::abs(empirical_stieltjes(spec, z) - semicircle_stieltjes(z));
    rows.push_back({z.real(), z.imag(), res, constant / (n * z.imag())});
  }
  return rows;
}

/// max over direction pairs of |<v, G w> - m <v, w>| against
/// constant (sqrt(Im m / (n eta)) + 1/(n eta)), directions unit-normalized.
template <class Scalar>
std::vector<LocalLawRow> isotropic_local_law(const SpectralData<Scalar>& spec,
                                             const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& pairs,
                                             const std::vector<cplx>& zs, double constant) {
  const double n = static_cast<double>(spec.n());
  std::vector<Eigen::VectorXcd> pv, pw;
  std::vector<double> overlap;
  for (const auto& [v, w] : pairs) {
    pv.push_back(detail::project(spec, Direction{v}));
    pw.push_back(detail::project(spec, Direction{w}));
    overlap.push_back(v.normalized().dot(w.normalized()));
  }
  std::vector<LocalLawRow> rows;
  for (cplx z : zs) {
    const cplx m = semicircle_stieltjes(z);
    Eigen::VectorXcd weights(spec.lambdas.size());
    for (Eigen::Index k = 0; k < weights.size(); ++k) weights[k] = 1.0 / (spec.lambdas[k] - z);
    double worst = 0.0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const cplx g = (pv[p].conjugate().cwiseProduct(weights).cwiseProduct(pw[p])).sum();
      worst = std::max(worst, std::abs(g - m * overlap[p]));
    }
    const double neta = n * z.imag();
    rows.push_back({z.real(), z.imag(), worst, constant * (std::sqrt(m.imag() / neta) + 1.0 / neta)});
  }
  return rows;
}

// --- Characteristics -------------------------------------------------------

/// z_s = (e^{s/2}(z + S) + e^{-s/2}(z - S)) / 2 with S the square root of
/// z^2 - 4 on the branch tied to m(z) (S = 2 m(z) + z), so that the map
/// transports solutions of d_s h = (m(z) + z/2) d_z h.
inline cplx characteristic(cplx z, double s) {
  if (z.imag() < 0.0) throw Error(Errc::LowerHalfPlane, "Im z must be nonnegative");
  if (z.imag() == 0.0 && std::abs(z.real()) <= 2.0)
    throw Error(Errc::BranchAmbiguity, "z lies on the spectral cut [-2, 2]");
  if (s == 0.0) return z;
  const cplx root = semicircle_root(z);
  return std::cosh(0.5 * s) * z + std::sinh(0.5 * s) * root;
}

}  // namespace emf
