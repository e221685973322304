#include <gtest/gtest.h>

#include <random>

#include "emf/momentflow.hpp"
#include "../support/oracles.hpp"

using namespace emf;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no emf::Error thrown";
  return Errc::Io;
}

Eigen::VectorXd spread(int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.3, 1.0);
  Eigen::VectorXd l(n);
  double x = -2.0;
  for (int i = 0; i < n; ++i) l[i] = (x += u(gen));
  return l;
}

// Overlap matrix P = A^T A - C0 I over the rows I of U.
Eigen::MatrixXd overlap_matrix(const Eigen::MatrixXd& U, const std::vector<int>& I, double C0) {
  Eigen::MatrixXd A(I.size(), U.cols());
  for (std::size_t a = 0; a < I.size(); ++a) A.row(static_cast<Eigen::Index>(a)) = U.row(I[a]);
  Eigen::MatrixXd P = A.transpose() * A;
  P.diagonal().array() -= C0;
  return P;
}

double det_at(const Eigen::MatrixXd& P, const Tuple& k) {
  Eigen::MatrixXd sub(k.size(), k.size());
  for (std::size_t a = 0; a < k.size(); ++a)
    for (std::size_t b = 0; b < k.size(); ++b) sub(a, b) = P(k[a], k[b]);
  return sub.determinant();
}

// exp(tL) v by scaling and squaring of a Taylor series.
Eigen::VectorXd expm_apply(const Eigen::MatrixXd& L, double t, const Eigen::VectorXd& v) {
  const int squarings = 10;
  const Eigen::MatrixXd A = L * (t / std::pow(2.0, squarings));
  Eigen::MatrixXd E = Eigen::MatrixXd::Identity(L.rows(), L.cols()), term = E;
  for (int j = 1; j < 20; ++j) {
    term = term * A / j;
    E += term;
  }
  for (int s = 0; s < squarings; ++s) E = E * E;
  return E * v;
}

}  // namespace

TEST(MomentFlow, TupleRankingIsBijective) {
  FermionicState f(7, 3);
  ASSERT_EQ(f.size(), 35u);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto t = f.tuple(i);
    EXPECT_TRUE(std::is_sorted(t.begin(), t.end()));
    EXPECT_EQ(FermionicState::index(t), i);
  }
  BosonicState b(5, 3);
  ASSERT_EQ(b.size(), 35u);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(BosonicState::index(b.positions(i)), i);
  EXPECT_EQ(binomial(40, 3), 9880u);
}

TEST(MomentFlow, GeneratorIdentitiesHoldExactly) {
  for (const auto& k : std::vector<std::vector<std::uint32_t>>{{0}, {0, 2}, {1, 3, 5}, {0, 1, 2, 3}}) {
    const auto report = generator_identity_check(k, 7);
    EXPECT_TRUE(report.pass);
    for (const auto& row : report.rows) EXPECT_EQ(row.residual, "0") << row.identity;
  }
  EXPECT_EQ(code_of([] { generator_identity_check({1, 2}, 2); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([] { generator_identity_check({0, 1, 2, 3, 4}, 6); }), Errc::InvalidArgument);
}

TEST(MomentFlow, DerivationIsInfinitesimalRotation) {
  // X_ab is d/de at e = 0 of u_a -> u_a - e u_b, u_b -> u_b + e u_a.
  std::mt19937_64 gen(2);
  const int n = 7;
  const Eigen::MatrixXd U = oracle::haar_orthogonal(n, gen);
  const std::vector<int> I{0, 3, 4};
  const double C0 = 3.0 / n;
  const std::vector<std::uint32_t> k{1, 2, 5};
  const auto det = det_expand(k);
  for (auto [a, b] : std::vector<std::pair<int, int>>{{1, 2}, {2, 6}, {0, 3}, {5, 1}}) {
    auto value_at = [&](double e) {
      Eigen::MatrixXd V = U;
      V.col(a) = U.col(a) - e * U.col(b);
      V.col(b) = U.col(b) + e * U.col(a);
      const Eigen::MatrixXd P = overlap_matrix(V, I, C0);
      return det.evaluate<double>([&](std::uint32_t i, std::uint32_t j) { return P(i, j); });
    };
    const double e = 1e-5;
    const double numeric = (value_at(e) - value_at(-e)) / (2 * e);
    const Eigen::MatrixXd P = overlap_matrix(U, I, C0);
    const double symbolic = apply_X(a, b, det).evaluate<double>([&](std::uint32_t i, std::uint32_t j) { return P(i, j); });
    EXPECT_NEAR(symbolic, numeric, 1e-8);
  }
}

TEST(MomentFlow, GeneratorApplyMatchesFermionicRhs) {
  // The generator on det(k) evaluated at P equals the rate equation on f(k') = det P(k').
  std::mt19937_64 gen(3);
  const int N = 6;
  const Eigen::MatrixXd U = oracle::haar_orthogonal(N, gen);
  const Eigen::MatrixXd P = overlap_matrix(U, {0, 2}, 2.0 / N);
  const Eigen::VectorXd lambdas = spread(N, 4);
  FermionicState f(N, 2);
  for (std::size_t i = 0; i < f.size(); ++i) f.values[i] = det_at(P, f.tuple(i));
  for (const Tuple& k : std::vector<Tuple>{{0, 1}, {2, 5}, {3, 4}}) {
    const auto poly = det_expand({static_cast<std::uint32_t>(k[0]), static_cast<std::uint32_t>(k[1])});
    const double lhs = generator_apply(poly, lambdas).evaluate<double>([&](std::uint32_t i, std::uint32_t j) { return P(i, j); });
    EXPECT_NEAR(lhs, fermionic_rhs(f, lambdas, k), 1e-10);
  }
}

TEST(MomentFlow, RatesConserveTotalMass) {
  const int N = 6;
  const Eigen::VectorXd lambdas = spread(N, 5);
  std::mt19937_64 gen(6);
  std::normal_distribution<double> g;
  FermionicState f(N, 2);
  for (auto& v : f.values) v = g(gen);
  double total = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) total += fermionic_rhs(f, lambdas, f.tuple(i));
  EXPECT_NEAR(total, 0.0, 1e-10);
  FermionicState c(N, 3, 2.5);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(fermionic_rhs(c, lambdas, c.tuple(i)), 0.0);
}

TEST(MomentFlow, BosonicGeneratorIsReversible) {
  // Reversible for pi(xi) = prod_k phi(xi_k), phi(m) = prod_{i<=m} (1 - 1/(2i)).
  const int N = 5, n = 3;
  const Eigen::VectorXd lambdas = spread(N, 7);
  BosonicState f(N, n), g(N, n);
  std::mt19937_64 gen(8);
  std::normal_distribution<double> normal;
  for (auto& v : f.values) v = normal(gen);
  for (auto& v : g.values) v = normal(gen);
  auto pi = [&](std::size_t idx) {
    double p = 1.0;
    for (const auto& [site, count] : f.config(idx).occupancy)
      for (unsigned i = 1; i <= count; ++i) p *= 1.0 - 0.5 / i;
    return p;
  };
  double fLg = 0.0, gLf = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto cfg = f.config(i);
    fLg += pi(i) * f.values[i] * bosonic_rhs(g, lambdas, cfg);
    gLf += pi(i) * g.values[i] * bosonic_rhs(f, lambdas, cfg);
    mass += pi(i) * bosonic_rhs(f, lambdas, cfg);
  }
  EXPECT_NEAR(fLg, gLf, 1e-10);
  EXPECT_NEAR(mass, 0.0, 1e-10);
}

TEST(MomentFlow, SingleParticleFlowsAgree) {
  // One particle: both equations are the same Markov chain; compare with exp(tL).
  const int N = 5;
  const Eigen::VectorXd lambdas = spread(N, 9);
  const auto path = EigenPath::frozen(lambdas, 0.6);
  FermionicState f0(N, 1);
  BosonicState b0(N, 1);
  Eigen::VectorXd v(N);
  for (int i = 0; i < N; ++i) v[i] = f0.values[i] = b0.values[i] = std::sin(1.0 + i);
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(N, N);
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b)
      if (a != b) {
        const double r = 1.0 / (N * (lambdas[a] - lambdas[b]) * (lambdas[a] - lambdas[b]));
        L(a, b) += r;
        L(a, a) -= r;
      }
  const Eigen::VectorXd expected = expm_apply(L, 0.6, v);
  const auto f = integrate_flow(f0, path, {0.0, 0.6}, 1e-11);
  const auto b = integrate_flow(b0, path, {0.0, 0.6}, 1e-11);
  for (int i = 0; i < N; ++i) {
    EXPECT_NEAR(f.back().values[i], expected[i], 1e-9);
    EXPECT_NEAR(b.back().values[BosonicState::index({static_cast<std::size_t>(i)})], expected[i], 1e-9);
  }
}

TEST(MomentFlow, Rk4IsFourthOrder) {
  const int N = 6;
  EigenPath path{{0.0, 1.0}, {spread(N, 10), spread(N, 10) * 1.3}, 0};
  FermionicState f0(N, 2);
  for (std::size_t i = 0; i < f0.size(); ++i) f0.values[i] = std::cos(static_cast<double>(i));
  const auto ref = rk4_fixed(f0, path, 0.0, 1.0, 4096);
  auto err = [&](std::size_t steps) {
    const auto y = rk4_fixed(f0, path, 0.0, 1.0, steps);
    double e = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) e = std::max(e, std::abs(y.values[i] - ref.values[i]));
    return e;
  };
  EXPECT_NEAR(err(32) / err(64), 16.0, 3.0);
}

TEST(MomentFlow, IntegratorErrors) {
  const auto path = EigenPath::frozen(spread(4, 11), 0.5);
  EXPECT_EQ(code_of([&] { integrate_flow(FermionicState(4, 1), path, {0.0, 1.0}); }), Errc::PathTooShort);
  EXPECT_EQ(code_of([&] { integrate_flow(FermionicState(41, 1), EigenPath::frozen(spread(41, 1), 1.0), {0.0, 0.1}); }),
            Errc::StateSpaceTooLarge);
  EXPECT_EQ(code_of([&] { integrate_flow(FermionicState(3, 1), EigenPath::frozen(Eigen::Vector3d(0, 1, 1), 1.0), {0.0, 0.1}); }),
            Errc::DegenerateSpectrum);
}

TEST(MomentFlow, FrozenPathMonteCarloMatchesOde) {
  // Conditional eigenvector flow along fixed eigenvalues against the integrated rate equation.
  const int N = 4;
  const double T = 0.2;
  Eigen::VectorXd lambdas(N);
  lambdas << -1.5, -0.4, 0.3, 1.4;
  const auto path = EigenPath::frozen(lambdas, T);
  const std::vector<int> I{0};
  const double C0 = 1.0 / N;
  FermionicState f0(N, 1);
  for (int i = 0; i < N; ++i) f0.values[i] = (i == 0 ? 1.0 : 0.0) - C0;
  const double ode = integrate_flow(f0, path, {0.0, T}).back().values[1];
  FlowConfig cfg;
  cfg.dt = 1e-3;
  std::vector<double> x;
  for (int r = 0; r < 6000; ++r) {
    const auto U = evolve_eigen_conditional<double>(path, Eigen::MatrixXd::Identity(N, N), cfg, 77 + r, {T})[0];
    x.push_back(U(0, 1) * U(0, 1) - C0);
  }
  const auto mc = oracle::mean_se(x);
  EXPECT_NEAR(mc.mean, ode, 4 * mc.se);
}

TEST(MomentFlow, FlowResidualCheckPassesSmall) {
  FlowResidualSpec spec;
  spec.N = 5;
  spec.I = {0, 1};
  spec.k = {2};
  spec.s0 = 0.1;
  spec.ds = 0.02;
  spec.replicas = 3000;
  const auto report = flow_residual_check(spec);
  ASSERT_EQ(report.rows.size(), 2u);
  for (const auto& row : report.rows) EXPECT_LE(std::abs(row.z), 4.0) << row.difference << " se " << row.stderr_;

  spec.quadrature_points = 3;
  EXPECT_THROW(flow_residual_check(spec), Error);
}
