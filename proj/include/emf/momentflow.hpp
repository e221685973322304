#pragma once

// The eigenvector moment flow: Fermionic and Bosonic rate equations, an RK4
// integrator over the full state space, the symbolic generator identities, and
// the Monte Carlo check of the Fermionic flow along a frozen eigenvalue path.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "emf/core.hpp"
#include "emf/dbm.hpp"
#include "emf/observables.hpp"
#include "emf/parallel.hpp"
#include "emf/polynomial.hpp"

namespace emf {

using Tuple = std::vector<std::size_t>;

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

namespace detail {

/// Colex rank of a strictly increasing tuple among all such tuples.
inline std::size_t rank_increasing(const Tuple& c) {
  std::size_t r = 0;
  for (std::size_t i = 0; i < c.size(); ++i) r += binomial(c[i], i + 1);
  return r;
}

inline Tuple unrank_increasing(std::size_t r, std::size_t n) {
  Tuple c(n);
  for (std::size_t i = n; i-- > 0;) {
    std::size_t v = i;
    while (binomial(v + 1, i + 1) <= r) ++v;
    c[i] = v;
    r -= binomial(v, i + 1);
  }
  return c;
}

inline void require_distinct(const Eigen::VectorXd& lambdas) {
  for (Eigen::Index i = 0; i < lambdas.size(); ++i)
    for (Eigen::Index j = i + 1; j < lambdas.size(); ++j)
      if (lambdas[i] == lambdas[j]) throw Error(Errc::DegenerateSpectrum, "repeated eigenvalue");
}

}  // namespace detail

/// f(k) for every strictly increasing n-tuple of sites in 0..N-1.
struct FermionicState {
  std::size_t N = 0;
  std::size_t n = 0;
  std::vector<double> values;

  FermionicState() = default;
  FermionicState(std::size_t sites, std::size_t particles, double fill = 0.0)
      : N(sites), n(particles), values(binomial(sites, particles), fill) {}

  std::size_t size() const { return values.size(); }
  static std::size_t index(const Tuple& k) { return detail::rank_increasing(k); }
  Tuple tuple(std::size_t idx) const { return detail::unrank_increasing(idx, n); }

  /// Value at a tuple in any order (f depends on the set only).
  double at(Tuple k) const {
    std::sort(k.begin(), k.end());
    return values[index(k)];
  }
  double& at_sorted(const Tuple& k) { return values[index(k)]; }
};

/// f(xi) for every configuration of n particles on N sites, stored by the
/// sorted position multiset.
struct BosonicState {
  std::size_t N = 0;
  std::size_t n = 0;
  std::vector<double> values;

  BosonicState() = default;
  BosonicState(std::size_t sites, std::size_t particles, double fill = 0.0)
      : N(sites), n(particles), values(binomial(sites + particles - 1, particles), fill) {}

  std::size_t size() const { return values.size(); }

  static std::size_t index(const Tuple& positions) {
    Tuple shifted = positions;
    std::sort(shifted.begin(), shifted.end());
    for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += i;
    return detail::rank_increasing(shifted);
  }
  Tuple positions(std::size_t idx) const {
    Tuple c = detail::unrank_increasing(idx, n);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] -= i;
    return c;
  }
  ParticleConfig config(std::size_t idx) const { return ParticleConfig::from_sites(positions(idx)); }

  double at(const ParticleConfig& cfg) const { return values[index(cfg.positions())]; }
  double at_positions(const Tuple& p) const { return values[index(p)]; }
};

/// sum_i sum_{l not in k} (f(k^i(l)) - f(k)) / (N (lambda_{k_i} - lambda_l)^2).
///
/// The rate is the one produced by Ito's formula for the vector SDE with
/// standard Brownian off-diagonal noise, i.e. the generator
/// sum_{k<l} X_kl^2 / (2 N gap^2) applied to the determinant.
inline double fermionic_rhs(const FermionicState& state, const Eigen::VectorXd& lambdas, const Tuple& k) {
  const auto N = static_cast<std::size_t>(lambdas.size());
  if (N != state.N) throw Error(Errc::InvalidArgument, "eigenvalue count does not match the state");
  const double fk = state.at(k);
  const double nd = static_cast<double>(N);
  double sum = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    Tuple moved = k;
    for (std::size_t l = 0; l < N; ++l) {
      if (std::find(k.begin(), k.end(), l) != k.end()) continue;
      const double gap = lambdas[static_cast<Eigen::Index>(k[i])] - lambdas[static_cast<Eigen::Index>(l)];
      if (gap == 0.0) throw Error(Errc::DegenerateSpectrum, "repeated eigenvalue");
      moved[i] = l;
      sum += (state.at(moved) - fk) / (nd * gap * gap);
    }
  }
  return sum;
}

/// sum_{k != l} xi_k (1 + 2 xi_l) (f(xi^{k,l}) - f(xi)) / (N (lambda_k - lambda_l)^2),
/// where xi^{k,l} moves one particle from k to l.
inline double bosonic_rhs(const BosonicState& state, const Eigen::VectorXd& lambdas, const ParticleConfig& xi) {
  const auto N = static_cast<std::size_t>(lambdas.size());
  if (N != state.N) throw Error(Errc::InvalidArgument, "eigenvalue count does not match the state");
  const Tuple pos = xi.positions();
  const double f = state.at_positions(pos);
  const double nd = static_cast<double>(N);
  double sum = 0.0;
  for (const auto& [k, count] : xi.occupancy) {
    if (count == 0) continue;
    Tuple moved = pos;
    const auto slot = static_cast<std::size_t>(std::find(moved.begin(), moved.end(), k) - moved.begin());
    for (std::size_t l = 0; l < N; ++l) {
      if (l == k) continue;
      const double gap = lambdas[static_cast<Eigen::Index>(k)] - lambdas[static_cast<Eigen::Index>(l)];
      if (gap == 0.0) throw Error(Errc::DegenerateSpectrum, "repeated eigenvalue");
      const auto it = xi.occupancy.find(l);
      const double xl = it == xi.occupancy.end() ? 0.0 : static_cast<double>(it->second);
      moved[slot] = l;
      sum += static_cast<double>(count) * (1.0 + 2.0 * xl) * (state.at_positions(moved) - f) / (nd * gap * gap);
    }
  }
  return sum;
}

namespace detail {

template <class State, class Rhs>
State full_rhs(const State& s, const Eigen::VectorXd& lambdas, Rhs&& rhs) {
  State d = s;
  for (std::size_t i = 0; i < s.size(); ++i) d.values[i] = rhs(s, lambdas, i);
  return d;
}

template <class State>
void axpy(State& y, double a, const State& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y.values[i] += a * x.values[i];
}

template <class State, class Rhs>
State rk4_steps(State y, const EigenPath& path, double t0, double t1, std::size_t steps, Rhs&& rhs) {
  const double h = (t1 - t0) / static_cast<double>(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = t0 + static_cast<double>(s) * h;
    const auto k1 = full_rhs(y, path.at(t), rhs);
    State y2 = y;
    axpy(y2, 0.5 * h, k1);
    const auto k2 = full_rhs(y2, path.at(t + 0.5 * h), rhs);
    State y3 = y;
    axpy(y3, 0.5 * h, k2);
    const auto k3 = full_rhs(y3, path.at(t + 0.5 * h), rhs);
    State y4 = y;
    axpy(y4, h, k3);
    const auto k4 = full_rhs(y4, path.at(std::min(t + h, t1)), rhs);
    for (std::size_t i = 0; i < y.size(); ++i)
      y.values[i] += h / 6.0 * (k1.values[i] + 2.0 * k2.values[i] + 2.0 * k3.values[i] + k4.values[i]);
  }
  return y;
}

template <class State, class Rhs>
std::vector<State> integrate(const State& state0, const EigenPath& path, const std::vector<double>& t_grid, double tol,
                             Rhs&& rhs) {
  if (state0.N > 40 || state0.n > 3) throw Error(Errc::StateSpaceTooLarge, "integrate_flow supports N <= 40, n <= 3");
  if (!t_grid.empty() && t_grid.back() > path.end_time() + 1e-12)
    throw Error(Errc::PathTooShort, "time grid beyond the recorded path");
  std::vector<State> out;
  if (t_grid.empty()) return out;
  for (const auto& l : path.lambdas_at) require_distinct(l);
  State y = state0;
  double t = t_grid.front();
  out.push_back(y);
  // The path is linear between its knots, so each knot interval is integrated
  // separately and refined until two successive refinements agree.
  auto advance = [&](double ta, double tb) {
    std::size_t steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((tb - ta) / 0.01)));
    State coarse = rk4_steps(y, path, ta, tb, steps, rhs);
    for (int level = 0;; ++level) {
      State fine = rk4_steps(y, path, ta, tb, 2 * steps, rhs);
      double diff = 0.0;
      for (std::size_t i = 0; i < fine.size(); ++i) diff = std::max(diff, std::abs(fine.values[i] - coarse.values[i]));
      coarse = std::move(fine);
      steps *= 2;
      if (diff <= tol) break;
      if (level >= 16) throw Error(Errc::ConvergenceFailure, "RK4 refinement did not reach the tolerance");
    }
    y = std::move(coarse);
  };
  for (std::size_t g = 1; g < t_grid.size(); ++g) {
    const double t1 = t_grid[g];
    auto knot = std::upper_bound(path.times.begin(), path.times.end(), t + 1e-12);
    for (; knot != path.times.end() && *knot < t1 - 1e-12; ++knot) {
      advance(t, *knot);
      t = *knot;
    }
    if (t1 > t) advance(t, t1);
    t = t1;
    out.push_back(y);
  }
  return out;
}

}  // namespace detail

/// Classic RK4 over the full tuple space with lambda(t) taken from the path.
/// Each grid interval is refined by halving until two successive refinements
/// agree to tol in every component.
inline std::vector<FermionicState> integrate_flow(const FermionicState& state0, const EigenPath& path,
                                                  const std::vector<double>& t_grid, double tol = 1e-8) {
  return detail::integrate(state0, path, t_grid, tol, [](const FermionicState& s, const Eigen::VectorXd& l, std::size_t i) {
    return fermionic_rhs(s, l, s.tuple(i));
  });
}

inline std::vector<BosonicState> integrate_flow(const BosonicState& state0, const EigenPath& path,
                                                const std::vector<double>& t_grid, double tol = 1e-8) {
  return detail::integrate(state0, path, t_grid, tol, [](const BosonicState& s, const Eigen::VectorXd& l, std::size_t i) {
    return bosonic_rhs(s, l, s.config(i));
  });
}

/// Fixed-step RK4 (no refinement), exposed for order checks.
inline FermionicState rk4_fixed(const FermionicState& state0, const EigenPath& path, double t0, double t1,
                                std::size_t steps) {
  return detail::rk4_steps(state0, path, t0, t1, steps, [](const FermionicState& s, const Eigen::VectorXd& l, std::size_t i) {
    return fermionic_rhs(s, l, s.tuple(i));
  });
}

// --- Symbolic generator identities -----------------------------------------

struct IdentityResidual {
  std::vector<std::uint32_t> tuple;
  std::string identity;  // "pair i,j" or "jump i->extra"
  std::size_t residual_term_count = 0;
  std::string residual;
  bool pass = false;
};

struct GeneratorReport {
  std::vector<IdentityResidual> rows;
  bool pass = true;
};

/// Exact check of X_{k_i k_j}^2 det(k) = 0 for i != j and
/// X_{k_i e}^2 det(k) = 2 (det(k^i(e)) - det(k)) for the extra site e.
inline GeneratorReport generator_identity_check(const std::vector<std::uint32_t>& k, std::uint32_t extra) {
  if (k.empty() || k.size() > 4) throw Error(Errc::InvalidArgument, "generator_identity_check needs 1 <= n <= 4");
  std::vector<std::uint32_t> all = k;
  all.push_back(extra);
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end())
    throw Error(Errc::InvalidArgument, "sites must be distinct");

  const ExactPolynomial det = det_expand(k);
  GeneratorReport report;
  auto record = [&](std::string name, const ExactPolynomial& residual) {
    IdentityResidual row{k, std::move(name), residual.term_count(), residual.str(), residual.is_zero()};
    report.pass = report.pass && row.pass;
    report.rows.push_back(std::move(row));
  };
  for (std::size_t i = 0; i < k.size(); ++i)
    for (std::size_t j = 0; j < k.size(); ++j) {
      if (i == j) continue;
      record("pair " + std::to_string(k[i] + 1) + "," + std::to_string(k[j] + 1),
             apply_X(k[i], k[j], apply_X(k[i], k[j], det)));
    }
  for (std::size_t i = 0; i < k.size(); ++i) {
    auto moved = k;
    moved[i] = extra;
    ExactPolynomial expected = (det_expand(moved) - det) * boost::multiprecision::cpp_rational(2);
    record("jump " + std::to_string(k[i] + 1) + "->" + std::to_string(extra + 1),
           apply_X(k[i], extra, apply_X(k[i], extra, det)) - expected);
  }
  return report;
}

/// sum_{k<l} X_{kl}^2(poly) / (2 N (lambda_k - lambda_l)^2) with floating coefficients.
inline OverlapPolynomial<double> generator_apply(const ExactPolynomial& poly, const Eigen::VectorXd& lambdas) {
  detail::require_distinct(lambdas);
  const auto N = static_cast<std::uint32_t>(lambdas.size());
  std::vector<char> touched(N, 0);
  for (const auto& [m, c] : poly.terms())
    for (const auto& s : m) {
      if (s.first < N) touched[s.first] = 1;
      if (s.second < N) touched[s.second] = 1;
    }
  OverlapPolynomial<double> out;
  const double nd = static_cast<double>(N);
  for (std::uint32_t a = 0; a < N; ++a)
    for (std::uint32_t b = a + 1; b < N; ++b) {
      if (!touched[a] && !touched[b]) continue;
      const auto x2 = apply_X(a, b, apply_X(a, b, poly));
      const double gap = lambdas[a] - lambdas[b];
      const double w = 1.0 / (2.0 * nd * gap * gap);
      out += x2.convert<double>([&](const auto& c) { return static_cast<double>(c) * w; });
    }
  return out;
}

// --- Monte Carlo flow check ------------------------------------------------

struct FlowResidualSpec {
  std::size_t N = 20;
  std::vector<std::size_t> I;  // canonical index set, 0-based
  Tuple k;                     // eigenvector tuple, 0-based
  double s0 = 0.5;
  double ds = 0.02;
  std::size_t replicas = 200000;
  double dt = 1e-3;
  std::size_t quadrature_points = 20;  // even; uniform nodes per ds before refinement
  double max_interval_rate = 0.05;     // cap on any jump's integrated rate between nodes
  std::uint64_t path_seed = 1;
  std::uint64_t vector_seed = 2;
  Eigen::VectorXd initial_lambdas;  // empty: eigenvalues of a GOE sample drawn from path_seed
};

struct FlowResidualRow {
  double ds = 0.0;
  double f_start = 0.0;
  double f_end = 0.0;
  double finite_difference = 0.0;
  double rhs = 0.0;  // time mean over the interval
  double difference = 0.0;
  double stderr_ = 0.0;
  double z = 0.0;
  bool pass = false;
};

struct FlowResidualReport {
  EigenPath path;
  std::vector<FlowResidualRow> rows;  // ds, then ds/2
  std::size_t quadrature_nodes = 0;
  bool pass = false;
};

/// Fixes one eigenvalue path, runs replicas of the conditional eigenvector flow
/// from the identity basis, and compares the finite-difference derivative of
/// the Monte Carlo Fermionic observable over [s0, s0 + ds] with the flow's
/// right-hand side averaged over the same interval, on the same replicas. The
/// rates follow a rough eigenvalue path, so the average is a product rule on
/// an adaptively refined grid rather than a single midpoint evaluation.
/// Repeated with ds/2 on the first half of the nodes.
inline FlowResidualReport flow_residual_check(const FlowResidualSpec& spec) {
  const std::size_t N = spec.N;
  const auto nI = static_cast<Eigen::Index>(spec.I.size());
  if (spec.k.empty()) throw Error(Errc::InvalidArgument, "empty tuple");
  if (spec.quadrature_points < 2 || spec.quadrature_points % 2)
    throw Error(Errc::InvalidArgument, "quadrature_points must be even and >= 2");
  if (!(spec.max_interval_rate > 0.0)) throw Error(Errc::InvalidArgument, "max_interval_rate must be positive");
  Tuple k = spec.k;
  std::sort(k.begin(), k.end());
  for (auto v : k)
    if (v >= N) throw Error(Errc::IndexOutOfRange, "tuple index out of range");
  const auto fam = ProjectionFamily::canonical(spec.I, N);

  FlowConfig cfg;
  cfg.dt = spec.dt;
  cfg.reorthonormalize_every = 10;
  SpectralData<double> start;
  if (spec.initial_lambdas.size() > 0) {
    start.lambdas = spec.initial_lambdas;
  } else {
    start.lambdas = decompose(sample<double>(EnsembleSpec::goe(N), spec.path_seed)).lambdas;
  }
  start.vectors = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  const double t_end = spec.s0 + spec.ds;
  auto flow = evolve_eigen(start, t_end, cfg, rng::derive(spec.path_seed, {1}), rng::derive(spec.path_seed, {2}));

  FlowResidualReport report;
  report.path = std::move(flow.path);
  const std::size_t M = spec.quadrature_points;
  const double t_half = spec.s0 + 0.5 * spec.ds;

  // Neighbor tuples k^i(l) and the sites whose gap sets each jump rate.
  std::vector<Tuple> jumps;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> jump_sites;
  for (std::size_t i = 0; i < k.size(); ++i)
    for (std::size_t l = 0; l < N; ++l) {
      if (std::find(k.begin(), k.end(), l) != k.end()) continue;
      Tuple moved = k;
      moved[i] = l;
      jumps.push_back(moved);
      jump_sites.emplace_back(static_cast<Eigen::Index>(k[i]), static_cast<Eigen::Index>(l));
    }
  const double nd = static_cast<double>(N);
  // Exact integral of 1 / (N gap^2) over [a, b] when the gap is linear there.
  auto rate_integrals = [&](double a, double b) {
    const Eigen::VectorXd la = report.path.at(a), lb = report.path.at(b);
    std::vector<double> w;
    for (const auto& [x, y] : jump_sites) w.push_back((b - a) / (nd * (la[x] - la[y]) * (lb[x] - lb[y])));
    return w;
  };

  // Nodes: the uniform grid plus every path knot inside the interval, so each
  // gap is linear between neighbors. Intervals are then split until no jump
  // integrates more than max_interval_rate, since near-collisions make the
  // rates spike by orders of magnitude within one path step.
  std::vector<double> base;
  for (std::size_t j = 0; j <= M; ++j) base.push_back(spec.s0 + spec.ds * static_cast<double>(j) / static_cast<double>(M));
  base[M] = t_end;
  for (double t : report.path.times)
    if (t > spec.s0 && t < t_end) base.push_back(t);
  std::sort(base.begin(), base.end());
  base.erase(std::unique(base.begin(), base.end(), [](double a, double b) { return std::abs(a - b) <= 1e-12; }),
             base.end());
  std::vector<double> times{base.front()};
  for (std::size_t j = 0; j + 1 < base.size(); ++j) {
    const auto w = rate_integrals(base[j], base[j + 1]);
    const double worst = w.empty() ? 0.0 : *std::max_element(w.begin(), w.end());
    const auto pieces = static_cast<std::size_t>(std::max(1.0, std::ceil(worst / spec.max_interval_rate)));
    for (std::size_t p = 1; p <= pieces; ++p)
      times.push_back(p == pieces ? base[j + 1]
                                  : base[j] + (base[j + 1] - base[j]) * static_cast<double>(p) / static_cast<double>(pieces));
  }
  const auto half_it =
      std::find_if(times.begin(), times.end(), [&](double t) { return std::abs(t - t_half) <= 1e-12; });
  if (half_it == times.end()) throw Error(Errc::InvalidArgument, "midpoint of the interval is not a node");
  const auto half = static_cast<std::size_t>(half_it - times.begin());
  const std::size_t last = times.size() - 1;
  std::vector<std::vector<double>> weights(last);
  for (std::size_t j = 0; j < last; ++j) weights[j] = rate_integrals(times[j], times[j + 1]);
  report.quadrature_nodes = times.size();

  auto det_of = [&](const Eigen::MatrixXd& P, const Tuple& t) {
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(t.size()), static_cast<Eigen::Index>(t.size()));
    for (std::size_t a = 0; a < t.size(); ++a)
      for (std::size_t b = 0; b < t.size(); ++b)
        sub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
            P(static_cast<Eigen::Index>(t[a]), static_cast<Eigen::Index>(t[b]));
    return fermionic_value(sub);
  };
  auto overlap_matrix = [&](const Eigen::MatrixXd& U) {
    Eigen::MatrixXd A(nI, static_cast<Eigen::Index>(N));
    for (Eigen::Index a = 0; a < nI; ++a) A.row(a) = U.row(static_cast<Eigen::Index>(spec.I[static_cast<std::size_t>(a)]));
    Eigen::MatrixXd P = A.transpose() * A;
    P.diagonal().array() -= fam.C0;
    return P;
  };

  // Per replica: f at s0, s0 + ds/2, s0 + ds and the time means of the
  // right-hand side over both intervals. Each interval contributes its exact
  // rate integrals times the endpoint average of the jump differences.
  struct Sample {
    double f0, f_half, f_full, rhs_half_interval, rhs_full_interval;
  };
  const auto samples = replica_map<Sample>(spec.replicas, [&](std::size_t r) {
    const auto snaps = evolve_eigen_conditional<double>(report.path, start.vectors, cfg,
                                                        replica_seed(spec.vector_seed, r), times);
    std::vector<double> f(last + 1);
    std::vector<std::vector<double>> diffs(last + 1, std::vector<double>(jumps.size()));
    for (std::size_t j = 0; j <= last; ++j) {
      const Eigen::MatrixXd P = overlap_matrix(snaps[j]);
      f[j] = det_of(P, k);
      for (std::size_t q = 0; q < jumps.size(); ++q) diffs[j][q] = det_of(P, jumps[q]) - f[j];
    }
    double integral = 0.0, integral_half = 0.0;
    for (std::size_t j = 0; j < last; ++j) {
      for (std::size_t q = 0; q < jumps.size(); ++q) integral += weights[j][q] * 0.5 * (diffs[j][q] + diffs[j + 1][q]);
      if (j + 1 == half) integral_half = integral;
    }
    return Sample{f[0], f[half], f[last], integral_half / (t_half - spec.s0), integral / (t_end - spec.s0)};
  });

  auto row_for = [&](double ds, auto end_of, auto rhs_of) {
    std::vector<double> f0(samples.size()), f1(samples.size()), rhs(samples.size()), diff(samples.size());
    for (std::size_t r = 0; r < samples.size(); ++r) {
      f0[r] = samples[r].f0;
      f1[r] = end_of(samples[r]);
      rhs[r] = rhs_of(samples[r]);
      diff[r] = (f1[r] - f0[r]) / ds - rhs[r];
    }
    FlowResidualRow row;
    row.ds = ds;
    row.f_start = summarize(f0).mean;
    row.f_end = summarize(f1).mean;
    row.finite_difference = (row.f_end - row.f_start) / ds;
    row.rhs = summarize(rhs).mean;
    const auto d = summarize(diff);
    row.difference = d.mean;
    row.stderr_ = d.stderr_;
    row.z = d.stderr_ > 0.0 ? d.mean / d.stderr_ : 0.0;
    row.pass = std::abs(row.z) <= 3.0;
    return row;
  };
  report.rows.push_back(
      row_for(spec.ds, [](const Sample& s) { return s.f_full; }, [](const Sample& s) { return s.rhs_full_interval; }));
  report.rows.push_back(row_for(0.5 * spec.ds, [](const Sample& s) { return s.f_half; },
                                [](const Sample& s) { return s.rhs_half_interval; }));
  report.pass = std::all_of(report.rows.begin(), report.rows.end(), [](const auto& r) { return r.pass; });
  return report;
}

}  // namespace emf
