#pragma once

// Dyson Brownian motion: the Ornstein-Uhlenbeck matrix flow and the coupled
// eigenvalue/eigenvector SDEs it induces.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "emf/core.hpp"
#include "emf/ensembles.hpp"
#include "emf/rng.hpp"
#include "emf/spectral.hpp"

namespace emf {

struct FlowConfig {
  double dt = 1e-3;
  double t_end = 1.0;
  double gap_floor = 0.0;  // <= 0 selects 1e-8 * spectral width
  std::size_t reorthonormalize_every = 1;
  Symmetry symmetry = Symmetry::symmetric;
  bool zero_imaginary_noise = false;  // testing hook for the Hermitian flow

  void validate() const {
    if (!(dt > 0.0)) throw Error(Errc::InvalidArgument, "dt must be positive");
    if (gap_floor < 0.0) throw Error(Errc::InvalidArgument, "gap_floor must be positive");
    if (reorthonormalize_every == 0) throw Error(Errc::InvalidArgument, "reorthonormalize_every must be >= 1");
  }
};

/// Eigenvalue trajectory; snapshots are ascending, times strictly increasing.
struct EigenPath {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> lambdas_at;
  std::uint64_t noise_seed = 0;

  std::size_t n() const { return lambdas_at.empty() ? 0 : static_cast<std::size_t>(lambdas_at.front().size()); }
  double end_time() const { return times.empty() ? 0.0 : times.back(); }

  /// Piecewise-linear interpolation in time.
  Eigen::VectorXd at(double t) const {
    if (times.empty()) throw Error(Errc::PathTooShort, "empty eigenvalue path");
    if (t <= times.front()) return lambdas_at.front();
    if (t >= times.back()) {
      if (t > times.back() + 1e-12) throw Error(Errc::PathTooShort, "time beyond recorded path");
      return lambdas_at.back();
    }
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - times.begin()) - 1;
    const double w = (t - times[i]) / (times[i + 1] - times[i]);
    return (1.0 - w) * lambdas_at[i] + w * lambdas_at[i + 1];
  }

  static EigenPath frozen(const Eigen::VectorXd& lambdas, double t_end) {
    return {{0.0, t_end}, {lambdas, lambdas}, 0};
  }
};

template <class Scalar>
struct MatrixPath {
  std::vector<double> times;
  std::vector<Matrix<Scalar>> matrices;
};

struct FlowDiagnostics {
  std::size_t steps = 0;
  std::size_t halvings = 0;
  double max_gram_drift = 0.0;       // largest Gram deviation seen before a renormalization
  double max_drift_per_step = 0.0;   // max_gram_drift divided by the step size that produced it
};

template <class Scalar>
struct EigenFlowResult {
  EigenPath path;
  SpectralData<Scalar> final_state;
  FlowDiagnostics diagnostics;
};

// --- Matrix flow -----------------------------------------------------------

/// Exact transition of dH = dB / sqrt(N) - H/2 ds (dB / sqrt(2N) when Hermitian).
template <class Scalar>
RandomMatrix<Scalar> evolve_matrix_exact(const RandomMatrix<Scalar>& h0, double s, std::uint64_t seed) {
  auto out = ou_transition(h0, s, seed);
  out.provenance.operation = "evolve_matrix_exact";
  return out;
}

enum class NoiseMode { brownian, zero };

/// Euler-Maruyama discretization of the matrix flow on a uniform grid of
/// round(s / dt) steps.
template <class Scalar>
MatrixPath<Scalar> evolve_matrix_em(const RandomMatrix<Scalar>& h0, double s, const FlowConfig& config,
                                    std::uint64_t seed, NoiseMode noise = NoiseMode::brownian) {
  config.validate();
  if (config.dt > 0.1) throw Error(Errc::StepTooLarge, "dt must not exceed 0.1");
  if (config.dt > s * (1.0 + 1e-12)) throw Error(Errc::InvalidArgument, "dt must not exceed the flow time");
  const auto n = static_cast<Eigen::Index>(h0.n());
  const std::size_t steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(s / config.dt)));
  const double h = s / static_cast<double>(steps);
  const double nd = static_cast<double>(n);
  const double scale = is_complex_v<Scalar> ? 1.0 / std::sqrt(2.0 * nd) : 1.0 / std::sqrt(nd);
  const std::uint64_t key = rng::domain_key(seed, rng::Domain::em_increments);

  MatrixPath<Scalar> path;
  path.times.reserve(steps + 1);
  path.matrices.reserve(steps + 1);
  Matrix<Scalar> H = h0.entries;
  path.times.push_back(0.0);
  path.matrices.push_back(H);
  Matrix<Scalar> dB(n, n);
  for (std::size_t step = 0; step < steps; ++step) {
    dB.setZero();
    if (noise == NoiseMode::brownian) {
      rng::Stream stream(rng::derive(key, {step}));
      const double sh = std::sqrt(h);
      for (Eigen::Index j = 0; j < n; ++j) {
        dB(j, j) = std::sqrt(2.0 * h) * stream.normal();
        for (Eigen::Index i = j + 1; i < n; ++i) {
          Scalar v;
          if constexpr (is_complex_v<Scalar>) {
            const double re = stream.normal();
            v = Scalar(sh * re, sh * stream.normal());
          } else {
            v = sh * stream.normal();
          }
          dB(i, j) = v;
          dB(j, i) = conj_of(v);
        }
      }
    }
    H = H - (0.5 * h) * H + scale * dB;
    path.times.push_back(static_cast<double>(step + 1) * h);
    path.matrices.push_back(H);
  }
  return path;
}

// --- Eigenvalue / eigenvector flow -----------------------------------------

namespace detail {

/// Modified Gram-Schmidt on the columns, in index order.
template <class Scalar>
void gram_schmidt(Matrix<Scalar>& U) {
  for (Eigen::Index k = 0; k < U.cols(); ++k) {
    for (Eigen::Index j = 0; j < k; ++j) U.col(k) -= U.col(j).dot(U.col(k)) * U.col(j);
    U.col(k).normalize();
  }
}

/// gram_schmidt, returning the largest deviation of the Gram matrix from the
/// identity before the correction.
template <class Scalar>
double reorthonormalize(Matrix<Scalar>& U) {
  const double drift = (U.adjoint() * U - Matrix<Scalar>::Identity(U.cols(), U.cols())).cwiseAbs().maxCoeff();
  gram_schmidt(U);
  return drift;
}

inline bool gaps_ok(const Eigen::VectorXd& lambda, double floor) {
  for (Eigen::Index k = 1; k < lambda.size(); ++k)
    if (!(lambda[k] - lambda[k - 1] >= floor)) return false;
  return true;
}

/// One Euler-Maruyama step of the eigenvalue SDE.
template <class Scalar>
Eigen::VectorXd lambda_step(const Eigen::VectorXd& lambda, double h, rng::Stream& stream) {
  const auto n = lambda.size();
  const double nd = static_cast<double>(n);
  // dB_kk has variance 2h; divided by sqrt(N) (symmetric) or sqrt(2N) (Hermitian).
  const double noise_sd = is_complex_v<Scalar> ? std::sqrt(h / nd) : std::sqrt(2.0 * h / nd);
  Eigen::VectorXd next(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double repulsion = 0.0;
    for (Eigen::Index l = 0; l < n; ++l)
      if (l != k) repulsion += 1.0 / (lambda[k] - lambda[l]);
    next[k] = lambda[k] + (repulsion / nd - 0.5 * lambda[k]) * h + noise_sd * stream.normal();
  }
  return next;
}

/// Pairs whose one-step angular variance h / (N gap^2) exceeds this are
/// integrated as exact plane rotations instead of Euler-Maruyama increments.
inline constexpr double stiff_pair_variance = 1e-3;

/// One step of the eigenvector SDE. The pair variance is the exact integral of
/// 1 / (N gap^2) along the straight line from lambda0 to lambda1, which is
/// h / (N g0 g1); near a collision the left-point value misses most of it.
/// Ordinary pairs enter an Euler-Maruyama increment U <- U (I + dA); stiff
/// pairs are applied afterwards as the exact flow of their 2x2 block, a
/// rotation exp(dA_kl) whose Ito drift is minus half that variance.
template <class Scalar>
void vector_step(Matrix<Scalar>& U, const Eigen::VectorXd& lambda0, const Eigen::VectorXd& lambda1, double h,
                 rng::Stream& stream, bool zero_imaginary, Matrix<Scalar>& work, Matrix<Scalar>& product) {
  const auto n = lambda0.size();
  const double nd = static_cast<double>(n);
  const double sh = std::sqrt(h);
  const double scale = is_complex_v<Scalar> ? 1.0 / std::sqrt(2.0 * nd) : 1.0 / std::sqrt(nd);
  struct Rotation {
    Eigen::Index k, l;
    Scalar w;
  };
  thread_local std::vector<Rotation> stiff;
  stiff.clear();
  work.setIdentity(n, n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index l = k + 1; l < n; ++l) {
      Scalar dB;  // dB_kl; dB_lk = conj(dB_kl)
      if constexpr (is_complex_v<Scalar>) {
        const double re = stream.normal();
        const double im = stream.normal();
        dB = Scalar(sh * re, zero_imaginary ? 0.0 : sh * im);
      } else {
        dB = sh * stream.normal();
      }
      const double g0 = lambda0[k] - lambda0[l];
      const double g1 = lambda1[k] - lambda1[l];
      const double gap = std::copysign(std::sqrt(g0 * g1), g0);
      const double variance = h / (nd * gap * gap);
      const Scalar w = scale * dB / gap;  // coefficient of u_l in du_k
      if (variance > stiff_pair_variance) {
        stiff.push_back({k, l, w});
        continue;
      }
      work(l, k) = w;
      work(k, l) = -conj_of(w);  // coefficient of u_k in du_l
      work(k, k) -= 0.5 * variance;
      work(l, l) -= 0.5 * variance;
    }
  product.noalias() = U * work;
  U.swap(product);
  for (const auto& r : stiff) {
    // exp of [[0, -conj(w)], [w, 0]] is cos|w| I + sin|w|/|w| times the generator.
    const double a = std::abs(r.w);
    if (a == 0.0) continue;
    const double c = std::cos(a);
    const Scalar sw = (std::sin(a) / a) * r.w;
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> uk = U.col(r.k);
    U.col(r.k) = c * uk + sw * U.col(r.l);
    U.col(r.l) = c * U.col(r.l) - conj_of(sw) * uk;
  }
}

inline double default_gap_floor(const Eigen::VectorXd& lambda) {
  const double width = lambda.size() > 0 ? lambda.maxCoeff() - lambda.minCoeff() : 0.0;
  return 1e-8 * std::max(width, 1e-300);
}

}  // namespace detail

/// Integrates the coupled eigenvalue/eigenvector SDEs from spec0 up to time s.
/// Eigenvalue noise comes from seed_val and eigenvector noise from seed_vec;
/// a proposed step whose gaps fall below the floor is retried as two half
/// steps, at most 20 levels deep.
template <class Scalar>
EigenFlowResult<Scalar> evolve_eigen(const SpectralData<Scalar>& spec0, double s, const FlowConfig& config,
                                     std::uint64_t seed_val, std::uint64_t seed_vec) {
  config.validate();
  if (!(s >= 0.0)) throw Error(Errc::TimeOutOfRange, "flow time must be nonnegative");
  const double floor = config.gap_floor > 0.0 ? config.gap_floor : detail::default_gap_floor(spec0.lambdas);
  if (!detail::gaps_ok(spec0.lambdas, floor))
    throw Error(Errc::GapCollapse, "initial spectrum has gaps below the floor");

  rng::Stream val_stream(rng::domain_key(seed_val, rng::Domain::eigenvalue_noise));
  rng::Stream vec_stream(rng::domain_key(seed_vec, rng::Domain::eigenvector_noise));

  EigenFlowResult<Scalar> out;
  out.path.noise_seed = seed_val;
  out.path.times.push_back(0.0);
  out.path.lambdas_at.push_back(spec0.lambdas);
  Eigen::VectorXd lambda = spec0.lambdas;
  Matrix<Scalar> U = spec0.vectors;
  Matrix<Scalar> work, product;
  double t = 0.0;
  std::size_t since_reorth = 0;
  double step_sum = 0.0;

  auto advance = [&](auto&& self, double h, int depth) -> void {
    Eigen::VectorXd proposal = detail::lambda_step<Scalar>(lambda, h, val_stream);
    if (!detail::gaps_ok(proposal, floor)) {
      if (depth >= 20) throw Error(Errc::GapCollapse, "gap below floor after 20 step halvings");
      ++out.diagnostics.halvings;
      self(self, 0.5 * h, depth + 1);
      self(self, 0.5 * h, depth + 1);
      return;
    }
    detail::vector_step(U, lambda, proposal, h, vec_stream, config.zero_imaginary_noise, work, product);
    lambda = std::move(proposal);
    t += h;
    step_sum += h;
    ++out.diagnostics.steps;
    out.path.times.push_back(t);
    out.path.lambdas_at.push_back(lambda);
    if (++since_reorth >= config.reorthonormalize_every) {
      const double drift = detail::reorthonormalize(U);
      out.diagnostics.max_gram_drift = std::max(out.diagnostics.max_gram_drift, drift);
      out.diagnostics.max_drift_per_step =
          std::max(out.diagnostics.max_drift_per_step, drift / (step_sum / static_cast<double>(since_reorth)));
      since_reorth = 0;
      step_sum = 0.0;
    }
  };

  const std::size_t steps = s == 0.0 ? 0 : std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(s / config.dt - 1e-9)));
  const double h = steps ? s / static_cast<double>(steps) : 0.0;
  for (std::size_t i = 0; i < steps; ++i) advance(advance, h, 0);
  if (since_reorth > 0) {
    const double drift = detail::reorthonormalize(U);
    out.diagnostics.max_gram_drift = std::max(out.diagnostics.max_gram_drift, drift);
  }
  if (!out.path.times.empty()) out.path.times.back() = s;

  out.final_state.lambdas = lambda;
  out.final_state.vectors = std::move(U);
  out.final_state.sign_policy = spec0.sign_policy;
  return out;
}

template <class Scalar>
EigenFlowResult<Scalar> evolve_eigen_hermitian(const SpectralData<Scalar>& spec0, double s, const FlowConfig& config,
                                               std::uint64_t seed_val, std::uint64_t seed_vec) {
  static_assert(is_complex_v<Scalar>, "the Hermitian flow needs complex eigenvectors");
  return evolve_eigen(spec0, s, config, seed_val, seed_vec);
}

/// Runs the eigenvector SDE against a frozen eigenvalue path (linearly
/// interpolated inside path intervals) and returns the basis at each requested
/// snapshot time. Replicas that share the path and differ in seed_vec realize
/// the conditional expectation given the eigenvalue trajectory.
template <class Scalar>
std::vector<Matrix<Scalar>> evolve_eigen_conditional(const EigenPath& path, const Matrix<Scalar>& u0,
                                                     const FlowConfig& config, std::uint64_t seed_vec,
                                                     std::vector<double> snapshot_times) {
  config.validate();
  if (path.times.empty()) throw Error(Errc::PathTooShort, "empty eigenvalue path");
  std::sort(snapshot_times.begin(), snapshot_times.end());
  if (!snapshot_times.empty() && snapshot_times.back() > path.end_time() + 1e-12)
    throw Error(Errc::PathTooShort, "snapshot time beyond the recorded path");

  // Step boundaries: path times merged with snapshot times.
  std::vector<double> grid;
  const double t_stop = snapshot_times.empty() ? path.times.front() : snapshot_times.back();
  for (double t : path.times)
    if (t <= t_stop + 1e-12) grid.push_back(t);
  for (double t : snapshot_times) grid.push_back(t);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end(), [](double a, double b) { return std::abs(a - b) <= 1e-12; }),
             grid.end());

  rng::Stream vec_stream(rng::domain_key(seed_vec, rng::Domain::eigenvector_noise));
  Matrix<Scalar> U = u0;
  Matrix<Scalar> work, product;
  std::vector<Matrix<Scalar>> snapshots;
  std::size_t next_snapshot = 0;
  std::size_t since_reorth = 0;
  auto take_snapshots = [&](double t) {
    while (next_snapshot < snapshot_times.size() && std::abs(snapshot_times[next_snapshot] - t) <= 1e-12) {
      Matrix<Scalar> copy = U;
      if (since_reorth > 0) detail::gram_schmidt(copy);
      snapshots.push_back(std::move(copy));
      ++next_snapshot;
    }
  };
  take_snapshots(grid.front());
  for (std::size_t g = 0; g + 1 < grid.size(); ++g) {
    const double t0 = grid[g], t1 = grid[g + 1];
    const std::size_t sub = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((t1 - t0) / config.dt - 1e-9)));
    const double h = (t1 - t0) / static_cast<double>(sub);
    Eigen::VectorXd lambda = path.at(t0);
    for (std::size_t i = 0; i < sub; ++i) {
      Eigen::VectorXd next = path.at(i + 1 == sub ? t1 : t0 + static_cast<double>(i + 1) * h);
      for (Eigen::Index k = 1; k < next.size(); ++k)
        if (!(next[k] > next[k - 1]) || !(lambda[k] > lambda[k - 1]))
          throw Error(Errc::DegenerateSpectrum, "eigenvalue path is not strictly ascending");
      detail::vector_step(U, lambda, next, h, vec_stream, config.zero_imaginary_noise, work, product);
      lambda = std::move(next);
      if (++since_reorth >= config.reorthonormalize_every) {
        detail::gram_schmidt(U);
        since_reorth = 0;
      }
    }
    take_snapshots(t1);
  }
  return snapshots;
}

}  // namespace emf
