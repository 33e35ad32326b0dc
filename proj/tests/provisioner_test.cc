#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "hetbatch/error.h"
#include "hetbatch/provisioner.h"
#include "oracles.h"

namespace hetbatch {
namespace {

const PricingConfig kPricing;

// Binding-SLO profile: the stationary point sits below the first feasible
// core count, so the cheapest plan runs right at the SLO.
ProfileSpec StrictProfile() {
  ProfileSpec p;
  for (int b = 1; b <= 4; ++b) {
    const double s = std::pow(b, 0.95);
    p.cpu_avg.push_back({4.0 * s, 0.4, 0.3 * s});
    p.cpu_max.push_back({6.0 * s, 0.4, 0.35 * s});
  }
  p.gpu = {0.05, 0.2};
  return p;
}

void ExpectMatchesCpuOracle(const ProfileSpec& spec, const std::vector<AppSpec>& apps) {
  const Provisioner prov(ModelProfile(spec), kPricing);
  const auto got = prov.ProvisionCpu(Group::Of(apps));
  const auto want = oracle::ExhaustiveCpu(spec, kPricing, apps);
  ASSERT_EQ(got.has_value(), want.has_value());
  if (!got) return;
  EXPECT_NEAR(got->predicted_cost, want->cost, 1e-9 * want->cost);
  EXPECT_NEAR(got->config.cores, want->size, 0.05 + 1e-9);
}

TEST(ProvisionCpu, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 30; ++trial) {
    const ProfileSpec spec = oracle::RandomCpuProfile(rng);
    const int n = std::uniform_int_distribution<int>(1, 4)(rng);
    ExpectMatchesCpuOracle(spec, oracle::RandomApps(rng, n, 0.2, 2.0, 0.1, 50));
  }
}

TEST(ProvisionCpu, ZeroGammaHasNoInteriorMinimum) {
  // With gamma = 0 the only stationary point of c * L(c) is the maximum at
  // c = beta, so the optimum sits at a range end; still equal to the oracle.
  ProfileSpec spec = oracle::ReferenceProfile();
  for (int b = 0; b < 4; ++b) {
    spec.cpu_avg[b] = {2.0 * (b + 1), 1.5, 0.0};
    spec.cpu_max[b] = {3.0 * (b + 1), 1.5, 0.0};
  }
  const Provisioner prov(ModelProfile(spec), kPricing);
  EXPECT_TRUE(std::isnan(prov.StationaryCores(1)));
  ExpectMatchesCpuOracle(spec, {{"a", 0.8, 3.0}});
  ExpectMatchesCpuOracle(spec, {{"a", 2.0, 30.0}, {"b", 3.0, 5.0}});
}

TEST(ProvisionCpu, InteriorStationaryPoint) {
  const ProfileSpec spec = oracle::ReferenceProfile();
  const Provisioner prov(ModelProfile(spec), kPricing);
  const double c0 = prov.StationaryCores(1);
  ASSERT_TRUE(std::isfinite(c0));
  EXPECT_GT(c0, 2 * 0.6);
  EXPECT_LT(c0, 16.0);
  // A loose SLO leaves the minimum interior; the plan sits next to c0.
  const auto plan = prov.ProvisionCpu(Group::Of({{"a", 2.0, 0.5}}));
  ASSERT_TRUE(plan);
  EXPECT_EQ(plan->batch, 1);
  EXPECT_LE(std::abs(plan->config.cores - c0), 0.05 + 1e-9);
  ExpectMatchesCpuOracle(spec, {{"a", 2.0, 0.5}});
}

TEST(ProvisionCpu, UnattainableSlo) {
  const Provisioner prov(ModelProfile(oracle::ReferenceProfile()), kPricing);
  // Every batch's max latency at 16 cores is at least 0.17 s.
  EXPECT_FALSE(prov.ProvisionCpu(Group::Of({{"a", 0.16, 1.0}})));
}

TEST(ProvisionCpu, StrictSloRunsAtTheSlo) {
  const Provisioner prov(ModelProfile(StrictProfile()), kPricing);
  const auto plan = prov.FuncProvision(Group::Of({{"a", 0.47, 2.0}}));
  ASSERT_TRUE(plan);
  EXPECT_EQ(plan->config.kind, FunctionKind::kCpu);
  EXPECT_EQ(plan->batch, 1);
  EXPECT_NEAR(plan->config.cores, 1.6, 1e-9);
  EXPECT_LT(plan->group.timeouts[0], 0.05);
  EXPECT_GE(plan->group.timeouts[0], 0.0);
  EXPECT_EQ(PlanString(*plan), "(1.6, 1, [0.01])_c");
}

TEST(ProvisionGpu, MatchesExhaustiveScanAndIsTight) {
  std::mt19937_64 rng(202);
  int feasible = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const ProfileSpec spec = oracle::RandomGpuProfile(rng);
    const int n = std::uniform_int_distribution<int>(1, 3)(rng);
    const auto apps = oracle::RandomApps(rng, n, 0.05, 1.5, 0.5, 100);
    const Provisioner prov(ModelProfile(spec), kPricing);
    const auto got = prov.ProvisionGpu(Group::Of(apps));
    const auto want = oracle::ExhaustiveGpu(spec, kPricing, apps);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (!got) continue;
    ++feasible;
    EXPECT_NEAR(got->predicted_cost, want->cost, 1e-9 * want->cost);
    EXPECT_EQ(got->config.mem, static_cast<int>(want->size));
    EXPECT_EQ(got->batch, want->batch);
    EXPECT_FALSE(oracle::GpuFeasible(spec, apps, got->config.mem, got->batch + 1));
  }
  EXPECT_GT(feasible, 20);
}

TEST(ProvisionGpu, BatchSaturatesItsBound) {
  ProfileSpec spec = oracle::ReferenceProfile();
  const Provisioner prov(ModelProfile(spec), kPricing);
  const auto plan = prov.ProvisionGpu(Group::Of({{"a", 10.0, 1000.0}}));
  ASSERT_TRUE(plan);
  EXPECT_EQ(plan->batch, 32);
  // Cost does not depend on memory, so the smallest fitting memory wins.
  EXPECT_EQ(plan->config.mem, 5);

  spec.mem = {0.0, 1.0};
  const auto capped = Provisioner(ModelProfile(spec), kPricing)
                          .ProvisionGpu(Group::Of({{"a", 10.0, 1000.0}}));
  ASSERT_TRUE(capped);
  EXPECT_EQ(capped->batch, 24);
  EXPECT_EQ(capped->config.mem, 24);
}

TEST(FuncProvision, KindSelection) {
  const Provisioner prov(ModelProfile(oracle::ReferenceProfile()), kPricing);
  const auto strict = prov.FuncProvision(Group::Of({{"a", 0.12, 20.0}}));
  ASSERT_TRUE(strict);
  EXPECT_EQ(strict->config.kind, FunctionKind::kGpu);
  const auto moderate = prov.FuncProvision(Group::Of({{"a", 0.5, 1.0}}));
  ASSERT_TRUE(moderate);
  EXPECT_EQ(moderate->config.kind, FunctionKind::kCpu);
  EXPECT_FALSE(prov.FuncProvision(Group::Of({{"a", 0.01, 1.0}})));
}

TEST(KneeRate, InfiniteWhenGpuNeverWins) {
  ProfileSpec spec = oracle::ReferenceProfile();
  spec.gpu = {0.2, 1.0};
  EXPECT_TRUE(std::isinf(KneeRate(ModelProfile(spec), kPricing, 1.0)));
}

TEST(KneeRate, ConstructedKneeAt15) {
  const ModelProfile profile(oracle::KneeAt15Profile());
  const Provisioner prov(profile, kPricing);
  const double knee = prov.KneeRate(oracle::kKneeSlo);
  EXPECT_NEAR(knee, oracle::kKneeRate, 0.01 * oracle::kKneeRate);
  // Dense audit on both sides.
  for (double r = 1.0; r < 14.9; r += 0.1) {
    const auto p = prov.FuncProvision(Group::Of({{"k", oracle::kKneeSlo, r}}));
    ASSERT_TRUE(p);
    EXPECT_EQ(p->config.kind, FunctionKind::kCpu) << r;
  }
  for (double r = 15.1; r < 200.0; r *= 1.05) {
    const auto p = prov.FuncProvision(Group::Of({{"k", oracle::kKneeSlo, r}}));
    ASSERT_TRUE(p);
    EXPECT_EQ(p->config.kind, FunctionKind::kGpu) << r;
  }
}

TEST(KneeRate, PostKneeIsGpuOnScanGrid) {
  const Provisioner prov(ModelProfile(oracle::ReferenceProfile()), kPricing);
  for (double slo : {0.4, 0.6, 1.0}) {
    const double knee = prov.KneeRate(slo);
    ASSERT_TRUE(std::isfinite(knee));
    const ProvisionerOptions& o = prov.options();
    for (int k = 0; k < o.knee_points; ++k) {
      const double r = o.knee_rate_lo * std::pow(o.knee_rate_hi / o.knee_rate_lo,
                                                 double(k) / (o.knee_points - 1));
      if (r <= knee) continue;
      const auto p = prov.FuncProvision(Group::Of({{"k", slo, r}}));
      ASSERT_TRUE(p);
      EXPECT_EQ(p->config.kind, FunctionKind::kGpu) << slo << " " << r;
    }
  }
}

std::set<std::string> Ids(const GroupPlan& p) {
  std::set<std::string> out;
  for (const AppSpec& a : p.group.apps) out.insert(a.id);
  return out;
}

TEST(HarmonyBatch, SingleAppEqualsFuncProvision) {
  const ModelProfile profile(oracle::ReferenceProfile());
  const AppSpec app{"solo", 0.7, 4.0};
  const ProvisionResult r = HarmonyBatch(profile, kPricing, {app});
  const auto f = FuncProvision(profile, kPricing, Group::Of({app}));
  ASSERT_TRUE(r.feasible);
  ASSERT_EQ(r.plans.size(), 1u);
  EXPECT_EQ(PlanString(r.plans[0]), PlanString(*f));
  EXPECT_DOUBLE_EQ(r.total_cost, f->predicted_cost);
}

TEST(HarmonyBatch, ThreeAppScenarioShape) {
  const ModelProfile profile(oracle::ReferenceProfile());
  const std::vector<AppSpec> apps = {{"A1", 0.5, 5}, {"A2", 0.8, 10}, {"A3", 1.0, 20}};
  for (KneeMode mode : {KneeMode::kPerWindow, KneeMode::kGlobal}) {
    ProvisionerOptions opt;
    opt.knee_mode = mode;
    const ProvisionResult r = HarmonyBatch(profile, kPricing, apps, opt);
    ASSERT_TRUE(r.feasible);
    ASSERT_EQ(r.plans.size(), 2u);
    EXPECT_EQ(Ids(r.plans[0]), (std::set<std::string>{"A1"}));
    EXPECT_EQ(r.plans[0].config.kind, FunctionKind::kCpu);
    EXPECT_EQ(r.plans[0].batch, 1);
    EXPECT_EQ(Ids(r.plans[1]), (std::set<std::string>{"A2", "A3"}));
    EXPECT_EQ(r.plans[1].config.kind, FunctionKind::kGpu);
    EXPECT_GE(r.plans[1].batch, 10);
    EXPECT_TRUE(CheckResult(profile, kPricing, r).ok);
  }
}

TEST(HarmonyBatch, InfeasibleAppIsNamed) {
  const ModelProfile profile(oracle::ReferenceProfile());
  const ProvisionResult r =
      HarmonyBatch(profile, kPricing, {{"ok", 1.0, 2.0}, {"bad", 0.01, 2.0}});
  EXPECT_FALSE(r.feasible);
  EXPECT_EQ(r.infeasible_apps, std::vector<std::string>{"bad"});
}

TEST(HarmonyBatch, RandomWorkloadsMonotoneAndConsecutive) {
  std::mt19937_64 rng(303);
  const ModelProfile profile(oracle::ReferenceProfile());
  const Provisioner prov(profile, kPricing);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 12)(rng);
    std::vector<AppSpec> apps;
    for (int i = 0; i < n; ++i) {
      apps.push_back({"w" + std::to_string(i),
                      std::uniform_real_distribution<double>(0.2, 1.0)(rng),
                      std::uniform_real_distribution<double>(0.5, 30)(rng)});
    }
    const ProvisionResult r = prov.HarmonyBatch(apps);
    ASSERT_TRUE(r.feasible);
    std::vector<GroupPlan> singles;
    for (const AppSpec& a : apps) singles.push_back(*prov.FuncProvision(Group::Of({a})));
    EXPECT_LE(r.total_cost, WeightedCost(singles) * (1 + 1e-12));
    for (const MergeStep& m : r.merge_log) {
      if (m.accepted) {
        EXPECT_LT(m.total_after, m.total_before);
      } else {
        EXPECT_EQ(m.total_after, m.total_before);
      }
    }
    // Groups are runs of the SLO-sorted list.
    const Group sorted = Group::Of(apps);
    size_t pos = 0;
    for (const GroupPlan& p : r.plans) {
      for (const AppSpec& a : p.group.apps) {
        ASSERT_LT(pos, sorted.apps.size());
        EXPECT_EQ(a.id, sorted.apps[pos++].id);
      }
    }
    const PlanCheck check = CheckResult(profile, kPricing, r);
    EXPECT_TRUE(check.ok) << (check.violations.empty() ? "" : check.violations[0]);
  }
}

TEST(BaselineBatch, CpuOnlyAndRiskFlags) {
  const ModelProfile profile(oracle::ReferenceProfile());
  const ProvisionResult gpu_only = BaselineBatch(profile, kPricing, {{"s", 0.12, 20}});
  EXPECT_FALSE(gpu_only.feasible);
  EXPECT_EQ(gpu_only.infeasible_apps, std::vector<std::string>{"s"});

  const std::vector<AppSpec> apps = {{"A1", 0.5, 5}, {"A2", 0.8, 10}, {"A3", 1.0, 20}};
  const ProvisionResult r = BaselineBatch(profile, kPricing, apps);
  ASSERT_TRUE(r.feasible);
  for (const GroupPlan& p : r.plans) {
    EXPECT_EQ(p.config.kind, FunctionKind::kCpu);
    const double wait = p.batch == 1 ? 0.0 : p.group.timeouts[0];
    const bool risky = wait + p.latency.max > p.group.apps[0].slo;
    const bool flagged =
        std::count(r.risk_apps.begin(), r.risk_apps.end(), p.group.apps[0].id) > 0;
    EXPECT_EQ(risky, flagged) << p.group.apps[0].id;
  }
  EXPECT_FALSE(r.risk_apps.empty());
}

TEST(BaselineBatch, UndercutsHarmonyOnlyWithRiskFlags) {
  std::mt19937_64 rng(404);
  const ModelProfile profile(oracle::ReferenceProfile());
  const Provisioner prov(profile, kPricing);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 8)(rng);
    std::vector<AppSpec> apps;
    for (int i = 0; i < n; ++i) {
      apps.push_back({"w" + std::to_string(i),
                      std::uniform_real_distribution<double>(0.3, 1.0)(rng),
                      std::uniform_real_distribution<double>(0.5, 30)(rng)});
    }
    const ProvisionResult h = prov.HarmonyBatch(apps);
    const ProvisionResult b = prov.BaselineBatch(apps);
    if (!h.feasible || !b.feasible) continue;
    // BATCH checks SLOs on average latency, so it may undercut harmony only
    // through plans that the max-latency re-check flags as at risk.
    if (h.total_cost > b.total_cost * (1 + 1e-12)) {
      EXPECT_FALSE(b.risk_apps.empty()) << trial;
    }
    if (b.risk_apps.empty()) {
      EXPECT_LE(h.total_cost, b.total_cost * (1 + 1e-12)) << trial;
    }
  }
}

TEST(BaselineMbsPlus, ShardCounts) {
  const ModelProfile profile(oracle::ReferenceProfile());
  const Provisioner prov(profile, kPricing);
  const std::vector<AppSpec> apps = {{"A1", 0.5, 5}, {"A2", 0.8, 10}, {"A3", 1.0, 20}};

  const ProvisionResult one = prov.BaselineMbsPlus(apps, 1);
  ASSERT_TRUE(one.feasible);
  ASSERT_EQ(one.plans.size(), 1u);
  EXPECT_EQ(one.shards, 1);
  // One shard holds every app at the strictest SLO.
  const auto f = prov.FuncProvision(
      Group::Of({{"A1", 0.5, 5}, {"A2", 0.5, 10}, {"A3", 0.5, 20}}));
  EXPECT_NEAR(one.total_cost, f->predicted_cost, 1e-12 * f->predicted_cost);

  const ProvisionResult best = prov.BaselineMbsPlus(apps);
  EXPECT_GE(best.shards, 1);
  EXPECT_LE(best.shards, 3);
  for (int k = 1; k <= 3; ++k) {
    const ProvisionResult r = prov.BaselineMbsPlus(apps, k);
    if (r.feasible) EXPECT_LE(best.total_cost, r.total_cost * (1 + 1e-12));
    if (r.feasible) EXPECT_TRUE(CheckResult(profile, kPricing, r).ok);
    double rate = 0.0;
    for (const GroupPlan& p : r.plans) rate += p.group.rate;
    EXPECT_NEAR(rate, 35.0, 1e-9);
  }
  EXPECT_THROW(prov.BaselineMbsPlus(apps, -1), Error);
}

TEST(BaselineMbsPlus, PerAppShardsNearSingletons) {
  // Equal rates make each shard exactly one app.
  const ModelProfile profile(oracle::ReferenceProfile());
  const Provisioner prov(profile, kPricing);
  const std::vector<AppSpec> apps = {{"a", 0.4, 6}, {"b", 0.7, 6}, {"c", 1.0, 6}};
  const ProvisionResult r = prov.BaselineMbsPlus(apps, 3);
  ASSERT_TRUE(r.feasible);
  std::vector<GroupPlan> singles;
  for (const AppSpec& a : apps) singles.push_back(*prov.FuncProvision(Group::Of({a})));
  EXPECT_NEAR(r.total_cost, WeightedCost(singles), 1e-9 * r.total_cost);
}

TEST(BaselineOrdering, ThreeAppScenario) {
  const ModelProfile profile(oracle::ReferenceProfile());
  const std::vector<AppSpec> apps = {{"A1", 0.5, 5}, {"A2", 0.8, 10}, {"A3", 1.0, 20}};
  const double h = HarmonyBatch(profile, kPricing, apps).total_cost;
  const double m = BaselineMbsPlus(profile, kPricing, apps).total_cost;
  const double b = BaselineBatch(profile, kPricing, apps).total_cost;
  EXPECT_LE(h, m);
  EXPECT_LE(m, b);
}

TEST(CheckPlan, DetectsCorruption) {
  const ModelProfile profile(oracle::ReferenceProfile());
  const Provisioner prov(profile, kPricing);
  const GroupPlan good = *prov.FuncProvision(Group::Of({{"a", 0.8, 10}, {"b", 1.0, 20}}));
  ASSERT_TRUE(CheckPlan(profile, kPricing, good).ok);

  GroupPlan bad = good;
  bad.batch += 5;
  EXPECT_FALSE(CheckPlan(profile, kPricing, bad).ok);
  bad = good;
  bad.group.timeouts[0] += 0.01;
  EXPECT_FALSE(CheckPlan(profile, kPricing, bad).ok);
  bad = good;
  bad.predicted_cost *= 0.9;
  EXPECT_FALSE(CheckPlan(profile, kPricing, bad).ok);
  bad = good;
  bad.eq_timeout += 0.1;
  EXPECT_FALSE(CheckPlan(profile, kPricing, bad).ok);
  if (bad.config.kind == FunctionKind::kGpu) {
    bad = good;
    bad.config.mem = 1;
    EXPECT_FALSE(CheckPlan(profile, kPricing, bad).ok);
  }
}

}  // namespace
}  // namespace hetbatch
