#pragma once

// Eigenvector overlaps and the Fermionic (determinant) and Bosonic (hafnian /
// permanent) observables built from them.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "emf/core.hpp"
#include "emf/parallel.hpp"
#include "emf/rng.hpp"
#include "emf/spectral.hpp"

namespace emf {

using rational = boost::multiprecision::cpp_rational;

/// The vectors q_alpha that define the overlaps, with the diagonal centering C0.
struct ProjectionFamily {
  enum class Mode { canonical, directions };
  Mode mode = Mode::canonical;
  std::vector<std::size_t> indices;           // canonical mode, 0-based
  std::vector<Eigen::VectorXd> directions;    // directions mode
  double C0 = 0.0;

  /// Canonical basis vectors e_alpha for alpha in I. Default centering |I|/n,
  /// halved for Hermitian matrices.
  static ProjectionFamily canonical(std::vector<std::size_t> I, std::size_t n,
                                    Symmetry symmetry = Symmetry::symmetric) {
    if (I.empty()) throw Error(Errc::EmptyIndexSet, "index set I is empty");
    std::sort(I.begin(), I.end());
    I.erase(std::unique(I.begin(), I.end()), I.end());
    for (auto a : I)
      if (a >= n) throw Error(Errc::IndexOutOfRange, "index " + std::to_string(a) + " outside 0.." + std::to_string(n - 1));
    const double c = static_cast<double>(I.size()) / static_cast<double>(n);
    return {Mode::canonical, std::move(I), {}, symmetry == Symmetry::hermitian ? 0.5 * c : c};
  }

  static ProjectionFamily canonical_with(std::vector<std::size_t> I, std::size_t n, double C0) {
    auto f = canonical(std::move(I), n);
    f.C0 = C0;
    return f;
  }

  static ProjectionFamily from_directions(std::vector<Eigen::VectorXd> q, double C0) {
    if (q.empty()) throw Error(Errc::EmptyIndexSet, "no projection directions");
    return {Mode::directions, {}, std::move(q), C0};
  }

  std::size_t size() const { return mode == Mode::canonical ? indices.size() : directions.size(); }

  /// Columns are the vectors q_alpha.
  Eigen::MatrixXd matrix(std::size_t n) const {
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(size()));
    for (std::size_t a = 0; a < size(); ++a) {
      if (mode == Mode::canonical) {
        Q(static_cast<Eigen::Index>(indices[a]), static_cast<Eigen::Index>(a)) = 1.0;
      } else {
        if (static_cast<std::size_t>(directions[a].size()) != n)
          throw Error(Errc::InvalidArgument, "projection direction has the wrong length");
        Q.col(static_cast<Eigen::Index>(a)) = directions[a];
      }
    }
    return Q;
  }

  /// Delta_ij = sum_alpha q_alpha(i) q_alpha(j).
  Eigen::MatrixXd covariance(std::size_t n) const {
    const Eigen::MatrixXd Q = matrix(n);
    return Q * Q.transpose();
  }
};

/// Overlaps p_{k l} for the eigenvector indices ks (0-based). p(a, b) refers
/// to positions a, b in ks.
template <class Scalar>
struct OverlapSet {
  std::vector<std::size_t> ks;
  Matrix<Scalar> p;
  double C0 = 0.0;

  std::size_t position(std::size_t k) const {
    const auto it = std::find(ks.begin(), ks.end(), k);
    if (it == ks.end()) throw Error(Errc::MissingOverlap, "no overlap recorded for eigenvector " + std::to_string(k));
    return static_cast<std::size_t>(it - ks.begin());
  }

  Scalar at(std::size_t k, std::size_t l) const {
    return p(static_cast<Eigen::Index>(position(k)), static_cast<Eigen::Index>(position(l)));
  }
};

/// Projections <q_alpha, u_k> for alpha in the family and k in ks; row alpha, column k.
template <class Scalar>
Matrix<Scalar> projections(const Matrix<Scalar>& vectors, const ProjectionFamily& fam, const std::vector<std::size_t>& ks) {
  const auto n = static_cast<std::size_t>(vectors.rows());
  if (fam.size() == 0) throw Error(Errc::EmptyIndexSet, "projection family is empty");
  for (auto k : ks)
    if (k >= static_cast<std::size_t>(vectors.cols())) throw Error(Errc::IndexOutOfRange, "eigenvector index out of range");
  Matrix<Scalar> A(static_cast<Eigen::Index>(fam.size()), static_cast<Eigen::Index>(ks.size()));
  if (fam.mode == ProjectionFamily::Mode::canonical) {
    for (std::size_t a = 0; a < fam.indices.size(); ++a) {
      if (fam.indices[a] >= n) throw Error(Errc::IndexOutOfRange, "index set entry out of range");
      for (std::size_t c = 0; c < ks.size(); ++c)
        A(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)) =
            vectors(static_cast<Eigen::Index>(fam.indices[a]), static_cast<Eigen::Index>(ks[c]));
    }
  } else {
    const Eigen::MatrixXd Q = fam.matrix(n);
    for (std::size_t c = 0; c < ks.size(); ++c)
      A.col(static_cast<Eigen::Index>(c)) = Q.transpose().template cast<Scalar>() * vectors.col(static_cast<Eigen::Index>(ks[c]));
  }
  return A;
}

/// p_kk = sum_alpha |<q_alpha,u_k>|^2 - C0 and p_kl = sum_alpha <q_alpha,u_k> conj(<q_alpha,u_l>).
template <class Scalar>
OverlapSet<Scalar> overlaps(const Matrix<Scalar>& vectors, const ProjectionFamily& fam, const std::vector<std::size_t>& ks) {
  const Matrix<Scalar> A = projections(vectors, fam, ks);
  OverlapSet<Scalar> out{ks, A.transpose() * A.conjugate(), fam.C0};
  for (Eigen::Index i = 0; i < out.p.rows(); ++i) out.p(i, i) = Scalar(real_of(out.p(i, i)) - fam.C0);
  return out;
}

template <class Scalar>
OverlapSet<Scalar> overlaps(const SpectralData<Scalar>& spec, const ProjectionFamily& fam, const std::vector<std::size_t>& ks) {
  return overlaps(spec.vectors, fam, ks);
}

/// Fluctuation matrix P(k) for an index tuple, pulled from an overlap set.
template <class Scalar>
Matrix<Scalar> fluctuation_matrix(const OverlapSet<Scalar>& ov, const std::vector<std::size_t>& k) {
  const auto m = static_cast<Eigen::Index>(k.size());
  Matrix<Scalar> P(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) P(i, j) = ov.at(k[static_cast<std::size_t>(i)], k[static_cast<std::size_t>(j)]);
  return P;
}

/// Determinant: cofactor expansion up to 4x4, partial-pivot LU beyond.
template <class Scalar>
Scalar determinant(const Matrix<Scalar>& P) {
  const auto m = P.rows();
  if (P.cols() != m) throw Error(Errc::InvalidArgument, "determinant of a non-square matrix");
  if (m == 0) return Scalar(1.0);
  if (m == 1) return P(0, 0);
  if (m == 2) return P(0, 0) * P(1, 1) - P(0, 1) * P(1, 0);
  if (m <= 4) {
    Scalar sum(0.0);
    Matrix<Scalar> minor(m - 1, m - 1);
    for (Eigen::Index c = 0; c < m; ++c) {
      for (Eigen::Index i = 1; i < m; ++i)
        for (Eigen::Index j = 0, jj = 0; j < m; ++j)
          if (j != c) minor(i - 1, jj++) = P(i, j);
      const Scalar term = P(0, c) * determinant(minor);
      sum += (c % 2 == 0) ? term : -term;
    }
    return sum;
  }
  return P.partialPivLu().determinant();
}

template <class Scalar>
double fermionic_value(const Matrix<Scalar>& P) {
  return real_of(determinant(P));
}

// --- Hafnian / permanent ----------------------------------------------------

/// Sum over perfect matchings of prod a(i, j). Diagonal entries are never used.
/// Memoized recursion over vertex subsets; dimension at most 20.
template <class Derived>
typename Derived::Scalar hafnian(const Eigen::MatrixBase<Derived>& a) {
  using T = typename Derived::Scalar;
  const auto d = static_cast<unsigned>(a.rows());
  if (a.cols() != a.rows()) throw Error(Errc::InvalidArgument, "hafnian of a non-square matrix");
  if (d % 2 != 0) throw Error(Errc::OddDimension, "hafnian needs an even dimension");
  if (d > 20) throw Error(Errc::DimensionTooLarge, "hafnian dimension above 20");
  if (d == 0) return T(1);
  const std::uint32_t full = (d == 32) ? ~0u : ((1u << d) - 1u);
  std::vector<T> memo(std::size_t{1} << d);
  std::vector<char> known(std::size_t{1} << d, 0);
  memo[0] = T(1);
  known[0] = 1;
  auto rec = [&](auto&& self, std::uint32_t mask) -> T {
    if (known[mask]) return memo[mask];
    const unsigned i = static_cast<unsigned>(std::countr_zero(mask));
    const std::uint32_t rest = mask & ~(1u << i);
    T sum(0);
    for (std::uint32_t r = rest; r != 0; r &= r - 1) {
      const unsigned j = static_cast<unsigned>(std::countr_zero(r));
      sum += a(i, j) * self(self, rest & ~(1u << j));
    }
    known[mask] = 1;
    memo[mask] = sum;
    return sum;
  };
  return rec(rec, full);
}

/// Ryser's formula with Gray-code subset updates; dimension at most 12.
template <class Derived>
typename Derived::Scalar permanent(const Eigen::MatrixBase<Derived>& a) {
  using T = typename Derived::Scalar;
  const auto m = static_cast<unsigned>(a.rows());
  if (a.cols() != a.rows()) throw Error(Errc::InvalidArgument, "permanent of a non-square matrix");
  if (m > 12) throw Error(Errc::DimensionTooLarge, "permanent dimension above 12");
  if (m == 0) return T(1);
  std::vector<T> row_sums(m, T(0));
  T total(0);
  std::uint32_t gray = 0;
  for (std::uint32_t step = 1; step < (1u << m); ++step) {
    const std::uint32_t next = step ^ (step >> 1);
    const unsigned j = static_cast<unsigned>(std::countr_zero(next ^ gray));
    const bool added = (next >> j) & 1u;
    for (unsigned i = 0; i < m; ++i) row_sums[i] = added ? row_sums[i] + a(i, j) : row_sums[i] - a(i, j);
    gray = next;
    T prod(1);
    for (unsigned i = 0; i < m; ++i) prod = prod * row_sums[i];
    if ((std::popcount(gray) % 2) == static_cast<int>(m % 2)) total += prod;
    else total -= prod;
  }
  return total;
}

// --- Particle configurations -----------------------------------------------

/// Occupancy: site -> particle count (0-based sites, zero counts omitted).
struct ParticleConfig {
  std::map<std::size_t, unsigned> occupancy;

  static ParticleConfig from_sites(const std::vector<std::size_t>& sites) {
    ParticleConfig c;
    for (auto s : sites) ++c.occupancy[s];
    return c;
  }

  unsigned total() const {
    unsigned t = 0;
    for (const auto& [site, count] : occupancy) t += count;
    return t;
  }

  bool fermionic() const {
    return std::all_of(occupancy.begin(), occupancy.end(), [](const auto& e) { return e.second <= 1; });
  }

  /// Particle positions with multiplicity, ascending.
  std::vector<std::size_t> positions() const {
    std::vector<std::size_t> out;
    for (const auto& [site, count] : occupancy) out.insert(out.end(), count, site);
    return out;
  }
};

/// Product of the odd integers k <= n (1 for n < 1).
inline std::uint64_t odd_product(unsigned n) {
  std::uint64_t p = 1;
  for (unsigned k = 1; k <= n; k += 2) p *= k;
  return p;
}

/// M(xi) = prod_i odd_product(2 xi_i).
inline std::uint64_t bosonic_normalization(const ParticleConfig& cfg) {
  std::uint64_t m = 1;
  for (const auto& [site, count] : cfg.occupancy) m *= odd_product(2 * count);
  return m;
}

/// 2n x 2n matrix whose 2x2 block (i, j) is the constant p_{k_i k_j}.
template <class Scalar>
Matrix<Scalar> bosonic_matrix(const ParticleConfig& cfg, const OverlapSet<Scalar>& ov) {
  const auto pos = cfg.positions();
  if (pos.empty()) throw Error(Errc::InvalidArgument, "configuration has no particles");
  const auto n = static_cast<Eigen::Index>(pos.size());
  Matrix<Scalar> Q(2 * n, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const Scalar v = ov.at(pos[static_cast<std::size_t>(i)], pos[static_cast<std::size_t>(j)]);
      Q.template block<2, 2>(2 * i, 2 * j).setConstant(v);
    }
  return Q;
}

struct BosonicValues {
  double hafnian = 0.0;
  double by_m = 0.0;          // Haf / M(xi)
  double by_m_squared = 0.0;  // Haf / M(xi)^2, the alternative normalization
};

inline BosonicValues bosonic_values(const ParticleConfig& cfg, const OverlapSet<double>& ov) {
  if (cfg.total() > 10) throw Error(Errc::DimensionTooLarge, "at most 10 particles");
  const double haf = hafnian(bosonic_matrix(cfg, ov));
  const double m = static_cast<double>(bosonic_normalization(cfg));
  return {haf, haf / m, haf / (m * m)};
}

inline double bosonic_value(const ParticleConfig& cfg, const OverlapSet<double>& ov) {
  return bosonic_values(cfg, ov).by_m;
}

/// n x n matrix (p_{k_i k_j}) over particle positions with multiplicity.
template <class Scalar>
Matrix<Scalar> particle_overlap_matrix(const ParticleConfig& cfg, const OverlapSet<Scalar>& ov) {
  const auto pos = cfg.positions();
  const auto n = static_cast<Eigen::Index>(pos.size());
  Matrix<Scalar> P(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) P(i, j) = ov.at(pos[static_cast<std::size_t>(i)], pos[static_cast<std::size_t>(j)]);
  return P;
}

/// per(P(xi)) / prod_i xi_i!.
template <class Scalar>
double hermitian_bosonic_value(const ParticleConfig& cfg, const OverlapSet<Scalar>& ov) {
  if (cfg.total() > 10) throw Error(Errc::DimensionTooLarge, "at most 10 particles");
  double norm = 1.0;
  for (const auto& [site, count] : cfg.occupancy) norm *= std::tgamma(static_cast<double>(count) + 1.0);
  return real_of(permanent(particle_overlap_matrix(cfg, ov))) / norm;
}

// --- Gaussian reference moments --------------------------------------------

/// E[det G] for symmetric Gaussian G (off-diagonal variance 1, diagonal 2):
/// A_1 = 0, A_2 = -1, A_n = -(n-1) A_{n-2}.
inline rational gaussian_det_moment(unsigned n) {
  if (n == 0) throw Error(Errc::InvalidArgument, "gaussian_det_moment needs n >= 1");
  if (n % 2 == 1) return rational(0);
  rational a = -1;
  for (unsigned m = 4; m <= n; m += 2) a *= -static_cast<long long>(m - 1);
  return a;
}

struct IdentityCheck {
  double mc_mean = 0.0;
  double mc_stderr = 0.0;
  double mc_imag_mean = 0.0;
  double exact = 0.0;
  double z = 0.0;
  bool pass = false;
};

/// Monte Carlo over the complex Gaussian vector q = g + i sqrt(C0) g' (g the
/// family's Gaussian combination of q_alpha, g' a standard Gaussian vector) of
/// prod_k <q,u_k>^{2 xi_k} / M(xi), against the hafnian value. <q,u> is the
/// bilinear pairing, so E[<q,u_k><q,u_l>] = p_kl.
inline IdentityCheck gaussian_bosonic_identity_check(const ParticleConfig& cfg, const Eigen::MatrixXd& vectors,
                                                     const ProjectionFamily& fam, std::size_t replicas,
                                                     std::uint64_t seed) {
  std::vector<std::size_t> ks;
  for (const auto& [site, count] : cfg.occupancy) ks.push_back(site);
  const auto ov = overlaps<double>(vectors, fam, ks);
  IdentityCheck out;
  out.exact = bosonic_value(cfg, ov);
  const auto n = static_cast<Eigen::Index>(vectors.rows());
  const Eigen::MatrixXd Q = fam.matrix(static_cast<std::size_t>(n));
  const double m = static_cast<double>(bosonic_normalization(cfg));
  const double sc = std::sqrt(std::max(fam.C0, 0.0));
  const std::uint64_t key = rng::domain_key(seed, rng::Domain::auxiliary);

  struct Draw { double re, im; };
  const auto draws = replica_map<Draw>(replicas, [&](std::size_t r) {
    rng::Stream stream(rng::derive(key, {r}));
    Eigen::VectorXd g(Q.cols());
    for (Eigen::Index a = 0; a < g.size(); ++a) g[a] = stream.normal();
    Eigen::VectorXd gp(n);
    for (Eigen::Index a = 0; a < n; ++a) gp[a] = stream.normal();
    const Eigen::VectorXcd q = (Q * g).cast<cplx>() + cplx(0.0, sc) * gp.cast<cplx>();
    cplx prod(1.0, 0.0);
    for (const auto& [site, count] : cfg.occupancy) {
      const cplx proj = q.transpose() * vectors.col(static_cast<Eigen::Index>(site)).cast<cplx>();
      for (unsigned c = 0; c < 2 * count; ++c) prod *= proj;
    }
    return Draw{prod.real() / m, prod.imag() / m};
  });
  std::vector<double> re(replicas), im(replicas);
  for (std::size_t r = 0; r < replicas; ++r) {
    re[r] = draws[r].re;
    im[r] = draws[r].im;
  }
  const auto s = summarize(re);
  out.mc_mean = s.mean;
  out.mc_stderr = s.stderr_;
  out.mc_imag_mean = summarize(im).mean;
  const double diff = out.mc_mean - out.exact;
  if (out.mc_stderr > 0.0) {
    out.z = diff / out.mc_stderr;
    out.pass = std::abs(out.z) <= 3.0;
  } else {
    out.pass = std::abs(diff) <= 1e-12 * std::max(1.0, std::abs(out.exact));
  }
  return out;
}

}  // namespace emf
