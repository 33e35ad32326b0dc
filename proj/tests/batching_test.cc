#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hetbatch/batching.h"
#include "hetbatch/error.h"
#include "oracles.h"

namespace hetbatch {
namespace {

TEST(EquivalentTimeoutPair, Examples) {
  EXPECT_DOUBLE_EQ(EquivalentTimeoutPair(3.0, 0.4, 7.0, 0.4), 0.4);
  EXPECT_NEAR(EquivalentTimeoutPair(10, 0.1, 1e-12, 0.3), 0.1, 1e-12);
  EXPECT_NEAR(EquivalentTimeoutPair(10, 0.1, 10, 0.3),
              0.1 + 0.5 * (1 - std::exp(-2.0)) / 10, 1e-15);
  EXPECT_NEAR(EquivalentTimeoutPair(10, 0.1, 10, 0.3), 0.143233, 1e-6);
}

TEST(EquivalentTimeoutPair, Errors) {
  try {
    EquivalentTimeoutPair(1, 0.5, 1, 0.2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMisorderedArguments);
  }
  EXPECT_THROW(EquivalentTimeoutPair(0, 0.1, 1, 0.2), Error);
}

TEST(EquivalentTimeoutPair, BoundsOnRandomInputs) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> r(0.1, 50), t(0.01, 2);
  for (int k = 0; k < 2000; ++k) {
    const double r1 = r(rng), r2 = r(rng);
    double t1 = t(rng), t2 = t(rng);
    if (t1 > t2) std::swap(t1, t2);
    const double v = EquivalentTimeoutPair(r1, t1, r2, t2);
    EXPECT_GE(v, t1);
    EXPECT_LE(v, t2 + 1e-15);
    EXPECT_LE(v, t1 + r2 / (r1 + r2) / r1 + 1e-15);
    EXPECT_NEAR(v, oracle::PairTimeout(r1, t1, r2, t2), 1e-12);
  }
}

TEST(EquivalentTimeoutGroup, Folds) {
  Group single = Group::Of({{"a", 1.0, 3.0}});
  single.timeouts = {0.4};
  EXPECT_DOUBLE_EQ(EquivalentTimeoutGroup(single), 0.4);

  Group same = Group::Of({{"a", 1.0, 3.0}, {"b", 1.0, 9.0}, {"c", 1.0, 0.5}});
  same.timeouts = {0.25, 0.25, 0.25};
  EXPECT_DOUBLE_EQ(EquivalentTimeoutGroup(same), 0.25);

  const std::vector<Stream> three = {{10, 0.1}, {10, 0.3}, {5, 0.5}};
  const double folded = EquivalentTimeout(three);
  EXPECT_NEAR(folded, oracle::FoldTimeout(three), 1e-15);
  // The fold is an approximation past two streams; compare with simulation.
  const oracle::WaitEstimate mc = oracle::MonteCarloFirstWait(three, 400000, 5);
  EXPECT_NEAR(folded, mc.mean, 0.02 * mc.mean);

  Group missing = Group::Of({{"a", 1.0, 3.0}, {"b", 2.0, 1.0}});
  missing.timeouts = {0.5};
  try {
    EquivalentTimeoutGroup(missing);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIncompleteGroup);
  }
}

TEST(EquivalentTimeoutGroup, FoldIsAscendingByTimeout) {
  // Input order must not matter: streams are sorted before folding.
  const double a = EquivalentTimeout({{5, 0.5}, {10, 0.1}, {10, 0.3}});
  const double b = EquivalentTimeout({{10, 0.1}, {10, 0.3}, {5, 0.5}});
  EXPECT_DOUBLE_EQ(a, b);
}

TEST(EquivalentTimeoutForLatency, AgreesWithExplicitTimeouts) {
  Group g = Group::Of({{"a", 0.5, 4.0}, {"b", 0.9, 6.0}, {"c", 1.3, 1.0}});
  const double lmax = 0.21;
  g.timeouts = {0.5 - lmax, 0.9 - lmax, 1.3 - lmax};
  EXPECT_DOUBLE_EQ(EquivalentTimeoutForLatency(g, lmax), EquivalentTimeoutGroup(g));
}

TEST(Group, SortsAndValidates) {
  const Group g = Group::Of({{"x", 1.0, 2.0}, {"y", 0.5, 3.0}, {"z", 1.0, 1.0}});
  EXPECT_EQ(g.apps[0].id, "y");
  EXPECT_EQ(g.apps[1].id, "x");
  EXPECT_EQ(g.apps[2].id, "z");
  EXPECT_DOUBLE_EQ(g.rate, 6.0);
  EXPECT_THROW(Group::Of({}), Error);
  EXPECT_THROW(Group::Of({{"x", 0.0, 2.0}}), Error);
  EXPECT_THROW(Group::Of({{"x", 1.0, -2.0}}), Error);
}

TEST(FeasibleBatch, Arithmetic) {
  EXPECT_TRUE(FeasibleBatch(0.001, 0.0, 1));
  EXPECT_TRUE(FeasibleBatch(20, 0.6, 13));
  EXPECT_FALSE(FeasibleBatch(20, 0.6, 14));
}

TEST(CostPerRequest, Examples) {
  ProfileSpec s = oracle::ReferenceProfile();
  s.gpu = {0.025, 0.025};
  const ModelProfile p(s);
  const PricingConfig k;
  const double lavg = p.cpu_avg(1).Eval(2.0);
  EXPECT_NEAR(CostPerRequest(p, k, FunctionConfig::Cpu(2.0), 1),
              lavg * 2.0 * k.k1 + k.k3, 1e-20);
  EXPECT_NEAR(CostPerRequest(p, k, FunctionConfig::Gpu(24), 16),
              (0.425 * 24 * 1.5e-5 + 1.3e-7) / 16, 1e-20);
  EXPECT_NEAR(CostPerRequest(p, k, FunctionConfig::Gpu(24), 16), 9.5706e-6, 1e-9);
}

TEST(CostFromLatency, Monotone) {
  const PricingConfig k;
  const FunctionConfig cpu = FunctionConfig::Cpu(1.0);
  EXPECT_LT(CostFromLatency(k, cpu, 0.3, 2), CostFromLatency(k, cpu, 0.3, 1));
  EXPECT_LT(CostFromLatency(k, cpu, 0.3, 1),
            CostFromLatency(k, FunctionConfig::Cpu(1.05), 0.3, 1));
  EXPECT_LT(CostFromLatency(k, FunctionConfig::Gpu(3), 0.3, 1),
            CostFromLatency(k, FunctionConfig::Gpu(4), 0.3, 1));
  PricingConfig more = k;
  more.k3 *= 2;
  EXPECT_LT(CostFromLatency(k, cpu, 0.3, 1), CostFromLatency(more, cpu, 0.3, 1));
  more = k;
  more.k1 *= 2;
  EXPECT_LT(CostFromLatency(k, cpu, 0.3, 1), CostFromLatency(more, cpu, 0.3, 1));
  more = k;
  more.k2 *= 2;
  EXPECT_LT(CostFromLatency(k, FunctionConfig::Gpu(4), 0.3, 1),
            CostFromLatency(more, FunctionConfig::Gpu(4), 0.3, 1));
}

}  // namespace
}  // namespace hetbatch
