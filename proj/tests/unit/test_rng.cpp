#include <gtest/gtest.h>

#include <set>

#include "emf/parallel.hpp"
#include "emf/rng.hpp"
#include "../support/oracles.hpp"

using namespace emf;

TEST(Rng, CounterAccessMatchesSequentialStream) {
  rng::Stream s(42);
  for (std::uint64_t c = 0; c < 100; ++c) EXPECT_EQ(s.next_u64(), rng::at(42, c));
}

TEST(Rng, DerivedKeysAreDistinct) {
  std::set<std::uint64_t> keys;
  for (std::uint64_t d = 1; d <= 10; ++d) keys.insert(rng::domain_key(7, static_cast<rng::Domain>(d)));
  for (std::uint64_t i = 0; i < 50; ++i) keys.insert(rng::derive(7, {i, 3}));
  EXPECT_EQ(keys.size(), 60u);
  EXPECT_NE(rng::derive(7, {1, 2}), rng::derive(7, {2, 1}));
}

TEST(Rng, UniformInUnitInterval) {
  rng::Stream s(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = s.uniform();
    EXPECT_GT(u, 0.0);
    EXPECT_LE(u, 1.0);
  }
}

TEST(Rng, NormalMoments) {
  rng::Stream s(11);
  std::vector<double> x(200000), x2(x.size()), x4(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = s.normal();
    x2[i] = x[i] * x[i];
    x4[i] = x2[i] * x2[i];
  }
  const auto m1 = oracle::mean_se(x), m2 = oracle::mean_se(x2), m4 = oracle::mean_se(x4);
  EXPECT_NEAR(m1.mean, 0.0, 4 * m1.se);
  EXPECT_NEAR(m2.mean, 1.0, 4 * m2.se);
  EXPECT_NEAR(m4.mean, 3.0, 4 * m4.se);
}

TEST(Rng, SignIsBalanced) {
  rng::Stream s(5);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += s.sign();
  EXPECT_LE(std::abs(sum), 4.0 * std::sqrt(n));
}

TEST(Parallel, ReplicaMapIndependentOfWorkerCount) {
  auto f = [](std::size_t r) {
    rng::Stream s(replica_seed(9, r));
    double acc = 0.0;
    for (int i = 0; i < 10; ++i) acc += s.normal();
    return acc;
  };
  const auto one = replica_map<double>(1000, f, 1);
  const auto four = replica_map<double>(1000, f, 4);
  EXPECT_EQ(one, four);
}

TEST(Parallel, ExceptionsPropagate) {
  EXPECT_THROW(replica_map<int>(
                   200, [](std::size_t r) -> int { if (r == 150) throw std::runtime_error("x"); return 0; }, 3),
               std::runtime_error);
}

TEST(Parallel, PairwiseSumAccuracy) {
  std::vector<double> x(1 << 20, 0.1);
  EXPECT_NEAR(pairwise_sum(x), 0.1 * static_cast<double>(x.size()), 1e-7);
  const auto s = summarize(std::vector<double>{1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.stddev, std::sqrt(5.0 / 3.0), 1e-15);
}
