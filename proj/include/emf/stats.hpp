#pragma once

// Monte Carlo estimators for overlap statistics, with Haar reference values.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "emf/core.hpp"
#include "emf/dbm.hpp"
#include "emf/ensembles.hpp"
#include "emf/observables.hpp"
#include "emf/parallel.hpp"
#include "emf/spectral.hpp"

namespace emf {

/// Named exponents used by the bound formulas.
struct Exponents {
  double theta = 0.1;    // |I| window N^theta <= |I| <= N^{1-theta}
  double omega = 0.1;    // spectral domain / time window
  double xi = 0.01;      // small exponent in the decorrelation bound
  double delta1 = 0.05;
  double delta2 = 0.05;
  double epsilon = 0.2;  // N^epsilon inflation of high-probability bounds
};

/// Eigenvector index selector: bulk = N/2 + offset, edge = offset (0-based).
struct IndexSelector {
  enum class Kind { bulk, edge };
  Kind kind = Kind::bulk;
  long offset = 0;

  std::size_t resolve(std::size_t n) const {
    const long base = kind == Kind::bulk ? static_cast<long>(n / 2) : 0;
    const long v = base + offset;
    if (v < 0 || v >= static_cast<long>(n)) throw Error(Errc::IndexOutOfRange, "eigenvector selector out of range");
    return static_cast<std::size_t>(v);
  }
};

struct ExperimentSpec {
  EnsembleSpec ensemble = EnsembleSpec::goe(100);
  std::size_t N = 100;
  double index_exponent = 0.5;   // |I| = round(N^index_exponent)
  std::size_t index_size = 0;    // overrides the exponent when nonzero
  IndexSelector k_rule{IndexSelector::Kind::bulk, 0};
  IndexSelector l_rule{IndexSelector::Kind::bulk, 1};
  double s = 0.0;                // flow time applied before measuring
  std::size_t replicas = 1000;
  std::uint64_t base_seed = 1;
  Exponents exponents;

  std::size_t I_size() const {
    const std::size_t m = index_size ? index_size
                                     : static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(N), index_exponent)));
    if (m == 0 || m > N) throw Error(Errc::EmptyIndexSet, "index set size out of range");
    return m;
  }
  /// I = {0, ..., |I|-1}.
  std::vector<std::size_t> I() const {
    std::vector<std::size_t> out(I_size());
    for (std::size_t a = 0; a < out.size(); ++a) out[a] = a;
    return out;
  }
  std::size_t k() const { return k_rule.resolve(N); }
  std::size_t l() const { return l_rule.resolve(N); }

  EnsembleSpec ensemble_for_n() const {
    EnsembleSpec e = ensemble;
    e.n = N;
    return e;
  }
};

struct EstimateResult {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t replicas = 0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;  // seconds; not written to reproducible outputs
};

inline EstimateResult to_estimate(std::span<const double> values, std::uint64_t seed, double wall) {
  const auto s = summarize(values);
  return {s.mean, s.stderr_, s.count, seed, wall};
}

// --- Haar reference --------------------------------------------------------

/// First m columns of a Haar-distributed orthogonal matrix: Householder QR of
/// an N x m Gaussian matrix with the signs of R's diagonal made positive.
inline Eigen::MatrixXd haar_oracle(std::size_t N, std::size_t m, std::uint64_t seed) {
  if (m > N) throw Error(Errc::InvalidArgument, "haar_oracle needs m <= N");
  rng::Stream stream(rng::domain_key(seed, rng::Domain::haar));
  Eigen::MatrixXd g(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(m));
  for (Eigen::Index j = 0; j < g.cols(); ++j)
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = stream.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
  const Eigen::MatrixXd r = qr.matrixQR().topRows(g.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  return q;
}

/// Exact Haar expectations for two distinct columns u, v and |I| = m:
/// E[(N^2/(2m)) p_uu p_vv] with centering m/N.
inline double haar_decorrelation_value(std::size_t N_, std::size_t m_) {
  const double N = static_cast<double>(N_), m = static_cast<double>(m_);
  const double same = m / (N * (N + 2.0));
  const double cross = m * (m - 1.0) * (N + 1.0) / (N * (N - 1.0) * (N + 2.0));
  return N * N / (2.0 * m) * (same + cross - m * m / (N * N));
}

/// E[(N/sqrt(m) sum_I u v)^2] = N (N - m) / ((N + 2)(N - 1)).
inline double haar_variance_value(std::size_t N_, std::size_t m_) {
  const double N = static_cast<double>(N_), m = static_cast<double>(m_);
  return N * (N - m) / ((N + 2.0) * (N - 1.0));
}

/// E[p_uu^2] for one column with centering m/N: the k = l contrast value.
inline double haar_self_value(std::size_t N_, std::size_t m_) {
  const double N = static_cast<double>(N_), m = static_cast<double>(m_);
  const double second = (3.0 * m + m * (m - 1.0)) / (N * (N + 2.0));
  return N * N / (2.0 * m) * (second - m * m / (N * N));
}

// --- Overlap draws ---------------------------------------------------------

/// Per-replica sums over I: a = sum u_k^2, b = sum u_l^2, c = sum u_k u_l.
struct OverlapDraw {
  double a = 0.0, b = 0.0, c = 0.0;
};

namespace detail {

inline std::string draw_cache_name(const ExperimentSpec& spec) {
  std::ostringstream os;
  os << "overlaps_" << static_cast<int>(spec.ensemble.kind) << "_" << spec.N << "_" << spec.I_size() << "_" << spec.k()
     << "_" << spec.l() << "_" << spec.s << "_" << spec.replicas << "_" << spec.base_seed << ".bin";
  return os.str();
}

}  // namespace detail

/// Samples matrices (optionally evolved by the exact flow for time s) and
/// records the overlap sums of eigenvectors k and l. When cache_dir is
/// nonempty, results are stored there and reused on identical specs.
inline std::vector<OverlapDraw> draw_overlaps(const ExperimentSpec& spec, const std::string& cache_dir = {}) {
  std::filesystem::path cache;
  if (!cache_dir.empty()) {
    cache = std::filesystem::path(cache_dir) / detail::draw_cache_name(spec);
    std::ifstream in(cache, std::ios::binary);
    if (in) {
      std::vector<OverlapDraw> out(spec.replicas);
      in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size() * sizeof(OverlapDraw)));
      if (in.gcount() == static_cast<std::streamsize>(out.size() * sizeof(OverlapDraw))) return out;
    }
  }
  const EnsembleSpec ens = spec.ensemble_for_n();
  const std::size_t m = spec.I_size();
  const std::size_t k = spec.k(), l = spec.l();
  const int lo = static_cast<int>(std::min(k, l)), hi = static_cast<int>(std::max(k, l));
  auto out = replica_map<OverlapDraw>(spec.replicas, [&](std::size_t r) {
    const std::uint64_t seed = replica_seed(spec.base_seed, r);
    RealMatrix h = sample<double>(ens, seed);
    if (spec.s > 0.0) h = ou_transition(h, spec.s, seed);
    const auto pairs = select_eigenpairs(std::move(h.entries), lo, hi);
    const auto uk = pairs.vectors.col(static_cast<Eigen::Index>(k) - lo);
    const auto ul = pairs.vectors.col(static_cast<Eigen::Index>(l) - lo);
    OverlapDraw d;
    for (std::size_t a = 0; a < m; ++a) {
      const auto i = static_cast<Eigen::Index>(a);
      d.a += uk[i] * uk[i];
      d.b += ul[i] * ul[i];
      d.c += uk[i] * ul[i];
    }
    return d;
  });
  if (!cache.empty()) {
    std::filesystem::create_directories(cache.parent_path());
    std::ofstream os(cache, std::ios::binary);
    os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size() * sizeof(OverlapDraw)));
  }
  return out;
}

/// Same sums for Haar columns (u = column 0, v = column 1).
inline std::vector<OverlapDraw> draw_haar_overlaps(std::size_t N, std::size_t m, std::size_t replicas, std::uint64_t seed) {
  return replica_map<OverlapDraw>(replicas, [&](std::size_t r) {
    const Eigen::MatrixXd q = haar_oracle(N, 2, replica_seed(seed, r));
    OverlapDraw d;
    for (std::size_t a = 0; a < m; ++a) {
      const auto i = static_cast<Eigen::Index>(a);
      d.a += q(i, 0) * q(i, 0);
      d.b += q(i, 1) * q(i, 1);
      d.c += q(i, 0) * q(i, 1);
    }
    return d;
  });
}

/// Mean of (N^2/(2|I|)) p_kk p_ll.
inline EstimateResult decorrelation_from(const std::vector<OverlapDraw>& draws, std::size_t N, std::size_t m,
                                         std::uint64_t seed = 0) {
  const double c0 = static_cast<double>(m) / static_cast<double>(N);
  const double scale = static_cast<double>(N) * static_cast<double>(N) / (2.0 * static_cast<double>(m));
  std::vector<double> v(draws.size());
  for (std::size_t r = 0; r < draws.size(); ++r) v[r] = scale * (draws[r].a - c0) * (draws[r].b - c0);
  return to_estimate(v, seed, 0.0);
}

/// Mean of (N/sqrt|I| sum_I u_k u_l)^2.
inline EstimateResult overlap_variance_from(const std::vector<OverlapDraw>& draws, std::size_t N, std::size_t m,
                                            std::uint64_t seed = 0) {
  const double scale = static_cast<double>(N) / std::sqrt(static_cast<double>(m));
  std::vector<double> v(draws.size());
  for (std::size_t r = 0; r < draws.size(); ++r) v[r] = (scale * draws[r].c) * (scale * draws[r].c);
  return to_estimate(v, seed, 0.0);
}

inline EstimateResult estimate_decorrelation(const ExperimentSpec& spec, const std::string& cache_dir = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  auto e = decorrelation_from(draw_overlaps(spec, cache_dir), spec.N, spec.I_size(), spec.base_seed);
  e.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return e;
}

inline EstimateResult estimate_overlap_variance(const ExperimentSpec& spec, const std::string& cache_dir = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  auto e = overlap_variance_from(draw_overlaps(spec, cache_dir), spec.N, spec.I_size(), spec.base_seed);
  e.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return e;
}

struct TailRow {
  double level = 0.0;
  double probability = 0.0;
  double stderr_ = 0.0;
  double envelope = 0.0;  // level^{-2}
};

/// Empirical P(|sum_I u_k u_l| >= level sqrt|I| / N) per level.
inline std::vector<TailRow> tail_from(const std::vector<OverlapDraw>& draws, std::size_t N, std::size_t m,
                                      const std::vector<double>& levels) {
  std::vector<TailRow> rows;
  const double unit = std::sqrt(static_cast<double>(m)) / static_cast<double>(N);
  for (double level : levels) {
    std::vector<double> hit(draws.size());
    for (std::size_t r = 0; r < draws.size(); ++r) hit[r] = std::abs(draws[r].c) >= level * unit ? 1.0 : 0.0;
    const auto s = summarize(hit);
    rows.push_back({level, s.mean, s.stderr_, 1.0 / (level * level)});
  }
  return rows;
}

inline std::vector<TailRow> tail_check(const ExperimentSpec& spec, const std::vector<double>& levels,
                                       const std::string& cache_dir = {}) {
  return tail_from(draw_overlaps(spec, cache_dir), spec.N, spec.I_size(), levels);
}

// --- Two-particle system ---------------------------------------------------

struct SystemSolution {
  double pkk_pll = 0.0;  // E[p_kk p_ll]
  double pkl2 = 0.0;     // E[p_kl^2]
};

/// Solves F = x - y, B = x + 2y for x = E[p_kk p_ll], y = E[p_kl^2].
inline SystemSolution system_solve(double F, double B) { return {(2.0 * F + B) / 3.0, (B - F) / 3.0}; }

struct SystemEstimate {
  EstimateResult F;         // E[p_kk p_ll - p_kl^2]
  EstimateResult B;         // E[p_kk p_ll + 2 p_kl^2]
  EstimateResult pkk_pll;   // direct
  EstimateResult pkl2;      // direct
  SystemSolution solved;
};

inline SystemEstimate system_from(const std::vector<OverlapDraw>& draws, std::size_t N, std::size_t m) {
  const double c0 = static_cast<double>(m) / static_cast<double>(N);
  const std::size_t R = draws.size();
  std::vector<double> f(R), b(R), x(R), y(R);
  for (std::size_t r = 0; r < R; ++r) {
    x[r] = (draws[r].a - c0) * (draws[r].b - c0);
    y[r] = draws[r].c * draws[r].c;
    f[r] = x[r] - y[r];
    b[r] = x[r] + 2.0 * y[r];
  }
  SystemEstimate e;
  e.F = to_estimate(f, 0, 0.0);
  e.B = to_estimate(b, 0, 0.0);
  e.pkk_pll = to_estimate(x, 0, 0.0);
  e.pkl2 = to_estimate(y, 0, 0.0);
  e.solved = system_solve(e.F.mean, e.B.mean);
  return e;
}

// --- Entry gaussianity -----------------------------------------------------

struct MomentRow {
  std::size_t alpha = 0;
  std::size_t beta = 0;  // equals alpha for pure moments
  unsigned order = 0;
  double estimate = 0.0;
  double stderr_ = 0.0;
  double gaussian = 0.0;
};

inline double gaussian_moment(unsigned p) { return p % 2 ? 0.0 : static_cast<double>(odd_product(p)); }

/// Moments of sqrt(N) u_k(alpha) for alpha in I_fixed (random sign policy),
/// orders 1..max_moment, plus the first mixed moment for each alpha < beta.
inline std::vector<MomentRow> entry_gaussianity(const ExperimentSpec& spec, const std::vector<std::size_t>& I_fixed,
                                                std::size_t k, unsigned max_moment) {
  const EnsembleSpec ens = spec.ensemble_for_n();
  const double sq = std::sqrt(static_cast<double>(spec.N));
  const int ki = static_cast<int>(k);
  const auto coords = replica_map<std::vector<double>>(spec.replicas, [&](std::size_t r) {
    const std::uint64_t seed = replica_seed(spec.base_seed, r);
    RealMatrix h = sample<double>(ens, seed);
    if (spec.s > 0.0) h = ou_transition(h, spec.s, seed);
    auto pair = select_eigenpairs(std::move(h.entries), ki, ki);
    apply_sign_policy(pair.vectors, SignPolicy::random(seed));
    std::vector<double> v;
    for (auto a : I_fixed) v.push_back(sq * pair.vectors(static_cast<Eigen::Index>(a), 0));
    return v;
  });
  std::vector<MomentRow> rows;
  std::vector<double> vals(spec.replicas);
  for (std::size_t ia = 0; ia < I_fixed.size(); ++ia) {
    for (unsigned p = 1; p <= max_moment; ++p) {
      for (std::size_t r = 0; r < spec.replicas; ++r) vals[r] = std::pow(coords[r][ia], static_cast<int>(p));
      const auto s = summarize(vals);
      rows.push_back({I_fixed[ia], I_fixed[ia], p, s.mean, s.stderr_, gaussian_moment(p)});
    }
    for (std::size_t ib = ia + 1; ib < I_fixed.size(); ++ib) {
      for (std::size_t r = 0; r < spec.replicas; ++r) vals[r] = coords[r][ia] * coords[r][ib];
      const auto s = summarize(vals);
      rows.push_back({I_fixed[ia], I_fixed[ib], 2, s.mean, s.stderr_, 0.0});
    }
  }
  return rows;
}

// --- Error parameters and bound checks --------------------------------------

/// |I| / (N^{3/2} s^2) + sqrt(|I| / (N^2 s^3)).
inline double psi1(double N, double I, double s) {
  return I / (std::pow(N, 1.5) * s * s) + std::sqrt(I / (N * N * s * s * s));
}

/// 1/(N^2 eta) + 1/(N^2 s^{3/4} eta^{1/2}) + sqrt(s)/(N^2 eta^2).
inline double psi2(double N, double s, double eta) {
  const double n2 = N * N;
  return 1.0 / (n2 * eta) + 1.0 / (n2 * std::pow(s, 0.75) * std::sqrt(eta)) + std::sqrt(s) / (n2 * eta * eta);
}

struct QueSeedRow {
  std::uint64_t seed = 0;
  double sup = 0.0;    // max over sampled pairs of |p_kk| + |p_kl|
  double ratio = 0.0;  // sup / (N^eps psi1)
};

struct QueReport {
  double psi1 = 0.0;
  double bound = 0.0;
  std::vector<QueSeedRow> rows;
  double fraction_within = 0.0;
};

/// For each seed: evolve a sample for time s with the exact flow, take all
/// eigenvectors, and compare sup over sampled pairs (k, l) of |p_kk| + |p_kl|
/// (C0 = |I|/N) with N^eps psi1(s).
inline QueReport que_bound_check(const ExperimentSpec& spec, std::size_t seeds, std::size_t pairs_per_seed = 20) {
  const double N = static_cast<double>(spec.N);
  if (spec.s < std::pow(N, -1.0 / 3.0 + spec.exponents.omega))
    throw Error(Errc::TimeBelowValidity, "s below N^{-1/3 + omega}");
  const std::size_t m = spec.I_size();
  QueReport rep;
  rep.psi1 = psi1(N, static_cast<double>(m), spec.s);
  rep.bound = std::pow(N, spec.exponents.epsilon) * rep.psi1;
  const auto fam = ProjectionFamily::canonical(spec.I(), spec.N);
  const EnsembleSpec ens = spec.ensemble_for_n();
  rep.rows = replica_map<QueSeedRow>(seeds, [&](std::size_t r) {
    const std::uint64_t seed = replica_seed(spec.base_seed, r);
    const auto h = ou_transition(sample<double>(ens, seed), spec.s, seed);
    const auto sd = decompose(h);
    rng::Stream pick(rng::domain_key(seed, rng::Domain::auxiliary));
    double sup = 0.0;
    for (std::size_t p = 0; p < pairs_per_seed; ++p) {
      const auto k = static_cast<std::size_t>(pick.next_u64() % spec.N);
      auto l = static_cast<std::size_t>(pick.next_u64() % (spec.N - 1));
      if (l >= k) ++l;
      const auto ov = overlaps(sd, fam, {k, l});
      sup = std::max(sup, std::abs(ov.p(0, 0)) + std::abs(ov.p(0, 1)));
    }
    return QueSeedRow{seed, sup, sup / rep.bound};
  });
  std::size_t within = 0;
  for (const auto& row : rep.rows) within += row.ratio <= 1.0;
  rep.fraction_within = static_cast<double>(within) / static_cast<double>(std::max<std::size_t>(seeds, 1));
  return rep;
}

struct ResolventReport {
  EstimateResult estimate;     // E[u_j(alpha) u_j(beta) Im G_{alpha beta}(z)]
  double psi2 = 0.0;
  double bound = 0.0;          // N^{5 xi + delta1} psi2
  double ratio = 0.0;          // |estimate| / bound
  double trivial_envelope = 0.0;  // N^{xi} / (N^{3/2} s^{1/2})
};

/// Conditional protocol: one eigenvalue path from a GOE-type start, vector
/// noise replicas from the start's eigenbasis, observable read at time s.
inline ResolventReport resolvent_decorrelation_check(const ExperimentSpec& spec, cplx z, std::size_t j, std::size_t alpha,
                                                     std::size_t beta, double dt = 1e-3) {
  const std::size_t n = spec.N;
  if (j >= n || alpha >= n || beta >= n) throw Error(Errc::IndexOutOfRange, "index out of range");
  const auto start = decompose(sample<double>(spec.ensemble_for_n(), spec.base_seed));
  FlowConfig cfg;
  cfg.dt = dt;
  cfg.reorthonormalize_every = 10;
  const auto flow = evolve_eigen(start, spec.s, cfg, rng::derive(spec.base_seed, {1}), rng::derive(spec.base_seed, {2}));
  const Eigen::VectorXd lambda = flow.path.at(spec.s);
  const auto a = static_cast<Eigen::Index>(alpha), b = static_cast<Eigen::Index>(beta);
  const auto values = replica_map<double>(spec.replicas, [&](std::size_t r) {
    const auto snaps = evolve_eigen_conditional<double>(flow.path, start.vectors, cfg,
                                                        replica_seed(rng::derive(spec.base_seed, {3}), r), {spec.s});
    const Eigen::MatrixXd& U = snaps.front();
    cplx g = 0.0;
    for (Eigen::Index k = 0; k < U.cols(); ++k) g += U(a, k) * U(b, k) / (lambda[k] - z);
    const auto ji = static_cast<Eigen::Index>(j);
    return U(a, ji) * U(b, ji) * g.imag();
  });
  ResolventReport rep;
  rep.estimate = to_estimate(values, spec.base_seed, 0.0);
  const double N = static_cast<double>(n);
  rep.psi2 = psi2(N, spec.s, z.imag());
  rep.bound = std::pow(N, 5.0 * spec.exponents.xi + spec.exponents.delta1) * rep.psi2;
  rep.ratio = std::abs(rep.estimate.mean) / rep.bound;
  rep.trivial_envelope = std::pow(N, spec.exponents.xi) / (std::pow(N, 1.5) * std::sqrt(spec.s));
  return rep;
}

// --- Gaussian determinant ---------------------------------------------------

/// Mean of det G over symmetric Gaussian G (off-diagonal variance 1, diagonal 2).
inline EstimateResult gaussian_det_mc(unsigned n, std::size_t replicas, std::uint64_t seed) {
  if (n == 0 || n > 8) throw Error(Errc::InvalidArgument, "gaussian_det_mc needs 1 <= n <= 8");
  const auto dets = replica_map<double>(replicas, [&](std::size_t r) {
    rng::Stream stream(rng::derive(rng::domain_key(seed, rng::Domain::covariance), {r}));
    Eigen::MatrixXd g(n, n);
    for (unsigned i = 0; i < n; ++i) {
      g(i, i) = std::sqrt(2.0) * stream.normal();
      for (unsigned j = i + 1; j < n; ++j) g(i, j) = g(j, i) = stream.normal();
    }
    return determinant<double>(g);
  });
  return to_estimate(dets, seed, 0.0);
}

}  // namespace emf
