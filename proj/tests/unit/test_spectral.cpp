#include <gtest/gtest.h>

#include "emf/ensembles.hpp"
#include "emf/spectral.hpp"
#include "../support/oracles.hpp"

using namespace emf;

TEST(Spectral, DecomposeReconstructs) {
  const auto h = sample<double>(EnsembleSpec::goe(60), 2);
  const auto sd = decompose(h);
  EXPECT_LE((reconstruct(sd) - h.entries).norm(), 1e-12);
  EXPECT_LE((sd.vectors.transpose() * sd.vectors - Eigen::MatrixXd::Identity(60, 60)).norm(), 1e-12);
  for (int k = 1; k < 60; ++k) EXPECT_LE(sd.lambdas[k - 1], sd.lambdas[k]);
}

TEST(Spectral, HermitianDecompose) {
  const auto h = sample<cplx>(EnsembleSpec::gue(30), 5);
  const auto sd = decompose(h);
  EXPECT_LE((reconstruct(sd) - h.entries).norm(), 1e-12);
}

TEST(Spectral, SignPolicyLargestPositive) {
  const auto sd = decompose(sample<double>(EnsembleSpec::goe(25), 1));
  for (int k = 0; k < 25; ++k) {
    Eigen::Index arg;
    sd.vectors.col(k).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(sd.vectors(arg, k), 0.0);
  }
}

TEST(Spectral, RandomSignPolicyIsDeterministic) {
  const auto h = sample<double>(EnsembleSpec::goe(25), 1);
  const auto a = decompose(h, SignPolicy::random(4));
  const auto b = decompose(h, SignPolicy::random(4));
  EXPECT_EQ((a.vectors - b.vectors).norm(), 0.0);
  const auto c = decompose(h);
  for (int k = 0; k < 25; ++k) EXPECT_NEAR(std::abs(a.vectors.col(k).dot(c.vectors.col(k))), 1.0, 1e-12);
}

TEST(Spectral, TiesOrderedByDominantIndex) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(3, 3);
  h(0, 0) = 1.0;
  h(1, 1) = 0.0;
  h(2, 2) = 0.0;
  const auto sd = decompose<double>(h);
  EXPECT_NEAR(std::abs(sd.vectors(1, 0)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(sd.vectors(2, 1)), 1.0, 1e-15);
}

TEST(Spectral, SelectedEigenpairsMatchFullDecomposition) {
  const auto h = sample<double>(EnsembleSpec::goe(80), 9);
  const auto full = decompose(h);
  const auto sel = select_eigenpairs(h.entries, 40, 42);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(sel.lambdas[i], full.lambdas[40 + i], 1e-12);
    EXPECT_NEAR(std::abs(sel.vectors.col(i).dot(full.vectors.col(40 + i))), 1.0, 1e-10);
  }
  EXPECT_THROW(select_eigenpairs(h.entries, 5, 80), Error);
}

TEST(Spectral, StieltjesSolvesSelfConsistentEquation) {
  for (double re = -3.0; re <= 3.0; re += 0.25)
    for (double im : {1e-6, 1e-3, 0.1, 1.0, 10.0}) {
      const cplx z(re, im);
      const cplx m = semicircle_stieltjes(z);
      EXPECT_LE(std::abs(m * m + z * m + 1.0), 1e-12);
      EXPECT_GT(m.imag(), 0.0);
    }
  EXPECT_LE(std::abs(semicircle_stieltjes(cplx(0, 1e6))), 1.1e-6);
}

TEST(Spectral, StieltjesMatchesQuadrature) {
  for (cplx z : {cplx(0.3, 0.5), cplx(-1.7, 0.2), cplx(2.5, 0.1), cplx(0.0, 2.0)})
    EXPECT_LE(std::abs(semicircle_stieltjes(z) - oracle::stieltjes_by_quadrature(z)), 1e-6);
}

TEST(Spectral, ClassicalLocationsMatchBisectionOracle) {
  const std::size_t n = 50;
  for (std::size_t k : {1ul, 7ul, 25ul, 26ul, 49ul})
    EXPECT_NEAR(classical_location(k, n), oracle::classical_location(k, n), 1e-8);
  EXPECT_NEAR(classical_location(n, n), 2.0, 1e-12);
  EXPECT_NEAR(classical_location(n / 2, n), 0.0, 1e-12);
  for (std::size_t k = 1; k < n; ++k) EXPECT_NEAR(classical_location(k, n), -classical_location(n - k, n), 1e-12);
}

TEST(Spectral, SemicircleCdfMatchesIntegral) {
  for (double x : {-1.9, -0.5, 0.0, 0.8, 1.99})
    EXPECT_NEAR(semicircle_cdf(x), oracle::semicircle_mass(x), 1e-10);
}

TEST(Spectral, KsDistanceShrinksWithN) {
  const double small = ks_distance_to_semicircle(decompose(sample<double>(EnsembleSpec::goe(100), 1)).lambdas);
  const double large = ks_distance_to_semicircle(decompose(sample<double>(EnsembleSpec::goe(800), 1)).lambdas);
  EXPECT_LT(large, small);
  EXPECT_LT(large, 0.02);
}

TEST(Spectral, ResolventEntryAgainstDirectInverse) {
  const auto h = sample<double>(EnsembleSpec::goe(40), 3);
  const auto sd = decompose(h);
  const cplx z(0.2, 0.05);
  const Eigen::MatrixXcd G = (h.entries.cast<cplx>() - z * Eigen::MatrixXcd::Identity(40, 40)).inverse();
  EXPECT_LE(std::abs(resolvent_entry(sd, Direction{std::size_t{3}}, Direction{std::size_t{7}}, z) - G(3, 7)), 1e-10);
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(40, -1, 1), w = Eigen::VectorXd::Ones(40);
  const cplx expected = (v.normalized().cast<cplx>().transpose() * G * w.normalized().cast<cplx>())(0, 0);
  EXPECT_LE(std::abs(resolvent_entry(sd, Direction{v}, Direction{w}, z) - expected), 1e-10);
  EXPECT_THROW(resolvent_entry(sd, Direction{std::size_t{0}}, Direction{std::size_t{0}}, cplx(0, -1)), Error);
  EXPECT_THROW(resolvent_entry(sd, Direction{Eigen::VectorXd::Zero(40).eval()}, Direction{std::size_t{0}}, z), Error);
  EXPECT_NEAR(std::abs(empirical_stieltjes(sd, z) - G.trace() / 40.0), 0.0, 1e-12);
}

TEST(Spectral, RigidityRatiosAreModest) {
  const auto sd = decompose(sample<double>(EnsembleSpec::goe(400), 6));
  const auto rep = rigidity_report(sd.lambdas, 0.1, 1.0);
  EXPECT_EQ(rep.rows.size(), 400u);
  // Constant 1 is uncalibrated; only gross violations are excluded here.
  EXPECT_LT(rep.max_ratio, 10.0);
}

TEST(Spectral, LocalLawGridRespectsDomain) {
  const auto zs = spectral_domain_grid(1000, 0.1, {-1.0, 0.0, 1.0}, 5);
  ASSERT_EQ(zs.size(), 15u);
  for (auto z : zs) {
    EXPECT_GE(z.imag(), std::pow(1000.0, -0.9) * (1 - 1e-12));
    EXPECT_LE(z.imag(), 1.0 + 1e-12);
  }
}

TEST(Spectral, AveragedLocalLawResidualsSmall) {
  const auto sd = decompose(sample<double>(EnsembleSpec::goe(500), 2));
  const auto zs = spectral_domain_grid(500, 0.1, {-1.5, 0.0, 1.5}, 4);
  for (const auto& row : averaged_local_law(sd, zs, 10.0)) EXPECT_LE(row.residual, row.bound);
}

TEST(Spectral, IsotropicLocalLawExactForEigenbasisCancels) {
  // Orthogonal directions against the full resolvent: residual equals |G_vw|.
  const auto sd = decompose(sample<double>(EnsembleSpec::goe(300), 4));
  Eigen::VectorXd v = Eigen::VectorXd::Zero(300), w = Eigen::VectorXd::Zero(300);
  v[0] = 1;
  w[1] = 1;
  const cplx z(0.1, 0.3);
  const auto rows = isotropic_local_law(sd, {{v, w}}, {z}, 1.0);
  EXPECT_NEAR(rows[0].residual, std::abs(resolvent_entry(sd, Direction{v}, Direction{w}, z)), 1e-12);
}

TEST(Spectral, CharacteristicBasics) {
  const cplx z(0.4, 0.2);
  EXPECT_EQ(characteristic(z, 0.0), z);
  double prev = z.imag();
  for (double s = 0.05; s <= 1.0; s += 0.05) {
    const double im = characteristic(z, s).imag();
    EXPECT_GE(im, prev - 1e-15);
    prev = im;
  }
  EXPECT_THROW(characteristic(cplx(0.5, 0.0), 0.1), Error);
  EXPECT_THROW(characteristic(cplx(0.5, -0.1), 0.1), Error);
}

TEST(Spectral, CharacteristicTransportsAdvectionPde) {
  // h_s(z) = h_0(z_s) with h_0(w) = 1/w solves d_s h = (m(z) + z/2) d_z h.
  const cplx z(0.3, 0.4);
  const double s = 0.3;
  auto h = [](cplx w, double t) { return 1.0 / characteristic(w, t); };
  double previous = 0.0;
  for (double step : {1e-2, 5e-3, 2.5e-3}) {
    const cplx ds = (h(z, s + step) - h(z, s - step)) / (2 * step);
    const cplx dz = (h(z + step, s) - h(z - step, s)) / (2 * step);
    const double residual = std::abs(ds - (semicircle_stieltjes(z) + z / 2.0) * dz);
    if (previous > 0) {
      EXPECT_NEAR(previous / residual, 4.0, 0.5);
    }
    previous = residual;
  }
}
