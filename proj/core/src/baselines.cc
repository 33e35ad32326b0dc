#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "hetbatch/error.h"
#include "hetbatch/provisioner.h"

namespace hetbatch {
namespace {

// Exhaustive CPU search that treats latency as deterministic at its average,
// for both the SLO check and the cost.
std::optional<GroupPlan> DeterministicCpuPlan(const ModelProfile& profile,
                                              const PricingConfig& pricing,
                                              const AppSpec& app) {
  const CoreRange& cores = profile.cores();
  bool found = false;
  double best_cost = 0.0, best_c = 0.0;
  int best_b = 0;
  for (int b = 1; b <= profile.cpu_batch_max(); ++b) {
    const CpuLatencyCoeffs& avg = profile.cpu_avg(b);
    for (int i = 0; i < cores.size(); ++i) {
      const double c = cores.at(i);
      const double lavg = avg.Eval(c);
      if (lavg > app.slo) continue;
      if (!FeasibleBatch(app.rate, app.slo - lavg, b)) continue;
      const double cost =
          CostFromLatency(pricing, FunctionConfig::Cpu(c), lavg, b);
      bool better = !found || cost < best_cost * (1.0 - kCostTieTolerance);
      if (found && !better && cost <= best_cost * (1.0 + kCostTieTolerance)) {
        better = c < best_c || (c == best_c && b < best_b);
      }
      if (better) {
        found = true;
        best_cost = cost;
        best_c = c;
        best_b = b;
      }
    }
  }
  if (!found) return std::nullopt;
  GroupPlan plan;
  plan.group = Group::Of({app});
  plan.config = FunctionConfig::Cpu(best_c);
  plan.batch = best_b;
  plan.latency = PredictCpu(profile, best_c, best_b);
  plan.group.timeouts = {app.slo - plan.latency.avg};
  plan.eq_timeout = plan.group.timeouts.front();
  plan.predicted_cost = best_cost;
  return plan;
}

}  // namespace

ProvisionResult Provisioner::BaselineBatch(
    const std::vector<AppSpec>& apps) const {
  ProvisionResult res;
  res.strategy = "batch";
  if (apps.empty()) throw Error(ErrorCode::kInvalidInput, "no applications");
  for (const AppSpec& a : Group::Of(apps).apps) {
    std::optional<GroupPlan> plan = DeterministicCpuPlan(profile_, pricing_, a);
    if (!plan) {
      res.infeasible_apps.push_back(a.id);
      continue;
    }
    // Worst case: the request waits its full timeout, then runs at L_max.
    const double wait = plan->batch == 1 ? 0.0 : plan->eq_timeout;
    if (wait + plan->latency.max > a.slo * (1.0 + 1e-12)) {
      res.risk_apps.push_back(a.id);
    }
    res.plans.push_back(std::move(*plan));
  }
  res.feasible = res.infeasible_apps.empty();
  res.total_cost = res.plans.empty() ? 0.0 : WeightedCost(res.plans);
  return res;
}

ProvisionResult Provisioner::BaselineMbsPlus(const std::vector<AppSpec>& apps,
                                             int shards) const {
  if (apps.empty()) throw Error(ErrorCode::kInvalidInput, "no applications");
  if (shards < 0) throw Error(ErrorCode::kInvalidInput, "shards must be >= 0");
  const std::vector<AppSpec> sorted = Group::Of(apps).apps;
  const int n = static_cast<int>(sorted.size());
  double total = 0.0;
  for (const AppSpec& a : sorted) total += a.rate;
  const double eps = 1e-12 * total;

  // Fill k equal-rate shards in SLO order; a shard runs at the tightest SLO
  // among the apps that feed it.
  auto split = [&](int k, std::vector<GroupPlan>* plans) {
    std::vector<double> left;
    for (const AppSpec& a : sorted) left.push_back(a.rate);
    int idx = 0;
    for (int s = 0; s < k; ++s) {
      const bool last = s == k - 1;
      double room = total / k;
      std::vector<AppSpec> members;
      while (idx < n && (last || room > eps)) {
        const double take = last ? left[idx] : std::min(room, left[idx]);
        if (take > eps) members.push_back({sorted[idx].id, sorted[idx].slo, take});
        left[idx] -= take;
        room -= take;
        if (left[idx] <= eps) ++idx;
      }
      if (members.empty()) continue;
      const double slo = members.front().slo;
      for (AppSpec& m : members) m.slo = slo;
      std::optional<GroupPlan> plan = FuncProvision(Group::Of(members));
      if (!plan) return false;
      plans->push_back(std::move(*plan));
    }
    return true;
  };

  ProvisionResult res;
  res.strategy = "mbs+";
  const int k_lo = shards == 0 ? 1 : shards;
  const int k_hi = shards == 0 ? n : shards;
  for (int k = k_lo; k <= k_hi; ++k) {
    std::vector<GroupPlan> plans;
    if (!split(k, &plans)) continue;
    const double cost = WeightedCost(plans);
    if (res.shards == 0 || cost < res.total_cost * (1.0 - kCostTieTolerance)) {
      res.plans = std::move(plans);
      res.total_cost = cost;
      res.shards = k;
    }
  }
  if (res.shards == 0) {
    res.feasible = false;
    for (const AppSpec& a : sorted) {
      if (!FuncProvision(Group::Of({a}))) res.infeasible_apps.push_back(a.id);
    }
    if (res.infeasible_apps.empty()) {
      for (const AppSpec& a : sorted) res.infeasible_apps.push_back(a.id);
    }
  }
  return res;
}

ProvisionResult BaselineBatch(const ModelProfile& profile,
                              const PricingConfig& pricing,
                              const std::vector<AppSpec>& apps) {
  return Provisioner(profile, pricing).BaselineBatch(apps);
}

ProvisionResult BaselineMbsPlus(const ModelProfile& profile,
                                const PricingConfig& pricing,
                                const std::vector<AppSpec>& apps,
                                int shards) {
  return Provisioner(profile, pricing).BaselineMbsPlus(apps, shards);
}

}  // namespace hetbatch
