#include <gtest/gtest.h>

#include "emf/dbm.hpp"
#include "emf/ensembles.hpp"
#include "emf/spectral.hpp"
#include "../support/oracles.hpp"

using namespace emf;

namespace {

template <class F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no emf::Error thrown";
  return Errc::Io;
}

SpectralData<double> diagonal_start(int n) {
  return {Eigen::VectorXd::LinSpaced(n, -1.0, 1.0), Eigen::MatrixXd::Identity(n, n), SignPolicy{}};
}

// Mean of cos^2 of a Brownian angle with variance v.
double cos2_mean(double v) { return 0.5 * (1.0 + std::exp(-2.0 * v)); }

double frozen_pair_overlap(double gap, double t, double dt, int reps) {
  Eigen::VectorXd lambda(2);
  lambda << -gap / 2, gap / 2;
  const auto path = EigenPath::frozen(lambda, t);
  FlowConfig cfg;
  cfg.dt = dt;
  std::vector<double> x;
  for (int r = 0; r < reps; ++r) {
    const auto snaps = evolve_eigen_conditional<double>(path, Eigen::MatrixXd::Identity(2, 2), cfg, 1000 + r, {t});
    x.push_back(snaps[0](0, 0) * snaps[0](0, 0));
  }
  return oracle::mean_se(x).mean;
}

}  // namespace

TEST(Dbm, MatrixEmValidation) {
  const auto h = sample<double>(EnsembleSpec::goe(5), 1);
  FlowConfig cfg;
  cfg.dt = 0.2;
  EXPECT_EQ(code_of([&] { evolve_matrix_em(h, 1.0, cfg, 1); }), Errc::StepTooLarge);
  cfg.dt = 0.05;
  EXPECT_EQ(code_of([&] { evolve_matrix_em(h, 0.01, cfg, 1); }), Errc::InvalidArgument);
}

TEST(Dbm, MatrixEmWithoutNoiseIsGeometricDecay) {
  const auto h = sample<double>(EnsembleSpec::goe(6), 2);
  FlowConfig cfg;
  cfg.dt = 0.01;
  const auto path = evolve_matrix_em(h, 0.5, cfg, 3, NoiseMode::zero);
  ASSERT_EQ(path.matrices.size(), 51u);
  EXPECT_NEAR(path.times.back(), 0.5, 1e-14);
  EXPECT_LE((path.matrices.back() - std::pow(0.995, 50) * h.entries).norm(), 1e-13);
}

TEST(Dbm, MatrixEmVarianceFromZero) {
  // From H_0 = 0 the EM recursion has variance sum_j (1 - h/2)^{2j} h/N off the diagonal.
  const int n = 4, reps = 4000;
  const double dt = 0.01, s = 1.0;
  RandomMatrix<double> zero;
  zero.entries = Eigen::MatrixXd::Zero(n, n);
  FlowConfig cfg;
  cfg.dt = dt;
  std::vector<double> off, diag;
  for (int r = 0; r < reps; ++r) {
    const auto H = evolve_matrix_em(zero, s, cfg, r).matrices.back();
    off.push_back(H(0, 1) * H(0, 1));
    diag.push_back(H(2, 2) * H(2, 2));
  }
  double expected = 0.0;
  for (int j = 0; j < 100; ++j) expected += std::pow(1 - dt / 2, 2 * j) * dt / n;
  const auto o = oracle::mean_se(off), d = oracle::mean_se(diag);
  EXPECT_NEAR(o.mean, expected, 4 * o.se);
  EXPECT_NEAR(d.mean, 2 * expected, 4 * d.se);
}

TEST(Dbm, EigenFlowIsDeterministic) {
  const auto sd = decompose(sample<double>(EnsembleSpec::goe(30), 4));
  FlowConfig cfg;
  cfg.dt = 2e-3;
  const auto a = evolve_eigen(sd, 0.1, cfg, 7, 8);
  const auto b = evolve_eigen(sd, 0.1, cfg, 7, 8);
  EXPECT_TRUE((a.final_state.vectors.array() == b.final_state.vectors.array()).all());
  EXPECT_TRUE((a.final_state.lambdas.array() == b.final_state.lambdas.array()).all());
  const auto c = evolve_eigen(sd, 0.1, cfg, 7, 9);
  EXPECT_TRUE((a.final_state.lambdas.array() == c.final_state.lambdas.array()).all());
  EXPECT_FALSE((a.final_state.vectors.array() == c.final_state.vectors.array()).all());
}

TEST(Dbm, EigenFlowKeepsOrderAndOrthonormality) {
  const int n = 50;
  const auto sd = decompose(sample<double>(EnsembleSpec::goe(n), 5));
  FlowConfig cfg;
  cfg.dt = 1e-3;
  const auto res = evolve_eigen(sd, 0.2, cfg, 1, 2);
  EXPECT_NEAR(res.path.end_time(), 0.2, 1e-14);
  EXPECT_EQ(res.path.times.size(), res.path.lambdas_at.size());
  for (const auto& l : res.path.lambdas_at)
    for (int k = 1; k < n; ++k) ASSERT_LT(l[k - 1], l[k]);
  const auto& U = res.final_state.vectors;
  EXPECT_LE((U.transpose() * U - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-12);
  // One EM step leaves an O(h * sum 1/(N gap^2)) defect before re-orthonormalization.
  EXPECT_LT(res.diagnostics.max_gram_drift, 5e-2);
}

TEST(Dbm, EigenFlowRejectsCollidingStart) {
  SpectralData<double> sd{Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3), SignPolicy{}};
  FlowConfig cfg;
  cfg.gap_floor = 1e-6;
  EXPECT_EQ(code_of([&] { evolve_eigen(sd, 0.1, cfg, 1, 2); }), Errc::GapCollapse);
}

TEST(Dbm, EigenFlowMatchesMatrixFlowInLaw) {
  // Sign-invariant observables of the flowed basis against diagonalizing the exact OU transition.
  const int n = 12, reps = 2000;
  const double s = 0.3;
  const auto start = diagonal_start(n);
  RandomMatrix<double> h0;
  h0.entries = start.lambdas.asDiagonal();
  FlowConfig cfg;
  cfg.dt = 1e-3;
  std::vector<double> flow_u, flow_l, exact_u, exact_l;
  for (int r = 0; r < reps; ++r) {
    const auto res = evolve_eigen(start, s, cfg, 2 * r, 2 * r + 1);
    flow_u.push_back(res.final_state.vectors(0, 0) * res.final_state.vectors(0, 0));
    flow_l.push_back(res.final_state.lambdas[0]);
    const auto sd = decompose(evolve_matrix_exact(h0, s, 50000 + r));
    exact_u.push_back(sd.vectors(0, 0) * sd.vectors(0, 0));
    exact_l.push_back(sd.lambdas[0]);
  }
  const auto fu = oracle::mean_se(flow_u), eu = oracle::mean_se(exact_u);
  const auto fl = oracle::mean_se(flow_l), el = oracle::mean_se(exact_l);
  EXPECT_NEAR(fu.mean, eu.mean, 4 * std::hypot(fu.se, eu.se));
  EXPECT_NEAR(fl.mean, el.mean, 4 * std::hypot(fl.se, el.se) + 2e-3);
}

TEST(Dbm, FrozenPairRotatesByBrownianAngle) {
  // Two fixed levels: the basis rotates by an angle with variance t / (N gap^2).
  const double v = 0.5 / (2 * 1.0);
  EXPECT_NEAR(frozen_pair_overlap(1.0, 0.5, 1e-3, 8000), cos2_mean(v), 0.012);
}

TEST(Dbm, FrozenStiffPairRotatesExactly) {
  // Per-step angle variance 0.02 exceeds the stiffness threshold, so every step is an exact rotation.
  const double gap = 0.05, t = 1e-3;
  const double v = t / (2 * gap * gap);
  EXPECT_NEAR(frozen_pair_overlap(gap, t, 1e-4, 8000), cos2_mean(v), 0.012);
}

TEST(Dbm, ClosingGapUsesIntegratedVariance) {
  // The gap shrinks linearly from 0.1 to 0.02 within one step, so the angle
  // variance is t / (N g0 g1), five times the left-point value.
  const double g0 = 0.1, g1 = 0.02, t = 1e-3;
  EigenPath path;
  path.times = {0.0, t};
  Eigen::VectorXd a(2), b(2);
  a << -g0 / 2, g0 / 2;
  b << -g1 / 2, g1 / 2;
  path.lambdas_at = {a, b};
  FlowConfig cfg;
  cfg.dt = t;
  std::vector<double> x;
  for (int r = 0; r < 8000; ++r) {
    const auto snaps = evolve_eigen_conditional<double>(path, Eigen::MatrixXd::Identity(2, 2), cfg, 3000 + r, {t});
    x.push_back(snaps[0](0, 0) * snaps[0](0, 0));
  }
  EXPECT_NEAR(oracle::mean_se(x).mean, cos2_mean(t / (2 * g0 * g1)), 0.012);
}

TEST(Dbm, ConditionalFlowSnapshotsAndDeterminism) {
  const auto sd = decompose(sample<double>(EnsembleSpec::goe(10), 3));
  FlowConfig cfg;
  cfg.dt = 1e-3;
  const auto res = evolve_eigen(sd, 0.05, cfg, 11, 12);
  const auto a = evolve_eigen_conditional<double>(res.path, sd.vectors, cfg, 5, {0.05, 0.0, 0.025});
  const auto b = evolve_eigen_conditional<double>(res.path, sd.vectors, cfg, 5, {0.0, 0.025, 0.05});
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ((a[0] - sd.vectors).norm(), 0.0);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE((a[i].array() == b[i].array()).all());
  EXPECT_LE((a[2].transpose() * a[2] - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dbm, ConditionalFlowErrors) {
  FlowConfig cfg;
  const auto flat = EigenPath::frozen(Eigen::VectorXd::Zero(3), 1.0);
  EXPECT_EQ(code_of([&] { evolve_eigen_conditional<double>(flat, Eigen::MatrixXd::Identity(3, 3), cfg, 1, {0.5}); }),
            Errc::DegenerateSpectrum);
  const auto ok = EigenPath::frozen(Eigen::VectorXd::LinSpaced(3, -1, 1), 1.0);
  EXPECT_EQ(code_of([&] { evolve_eigen_conditional<double>(ok, Eigen::MatrixXd::Identity(3, 3), cfg, 1, {1.5}); }),
            Errc::PathTooShort);
  EXPECT_EQ(code_of([&] { evolve_eigen_conditional<double>(EigenPath{}, Eigen::MatrixXd::Identity(3, 3), cfg, 1, {}); }),
            Errc::PathTooShort);
  EXPECT_EQ(code_of([&] { ok.at(2.0); }), Errc::PathTooShort);
}

TEST(Dbm, HermitianFlowWithRealNoiseStaysReal) {
  // Real initial data with the imaginary noise channel removed never leaves the real subspace.
  const auto real = decompose(sample<double>(EnsembleSpec::goe(8), 6));
  SpectralData<cplx> sd{real.lambdas, real.vectors.cast<cplx>(), SignPolicy{}};
  FlowConfig cfg;
  cfg.dt = 1e-3;
  cfg.zero_imaginary_noise = true;
  const auto res = evolve_eigen_hermitian(sd, 0.1, cfg, 3, 4);
  EXPECT_LE(res.final_state.vectors.imag().cwiseAbs().maxCoeff(), 1e-14);
  const auto& U = res.final_state.vectors;
  EXPECT_LE((U.adjoint() * U - Eigen::MatrixXcd::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-12);
  cfg.zero_imaginary_noise = false;
  const auto full = evolve_eigen_hermitian(sd, 0.1, cfg, 3, 4);
  EXPECT_GT(full.final_state.vectors.imag().cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Dbm, PathInterpolation) {
  EigenPath p{{0.0, 1.0}, {Eigen::Vector2d(0, 1), Eigen::Vector2d(2, 3)}, 0};
  EXPECT_NEAR(p.at(0.25)[0], 0.5, 1e-15);
  EXPECT_NEAR(p.at(0.25)[1], 1.5, 1e-15);
  EXPECT_EQ(p.n(), 2u);
}
