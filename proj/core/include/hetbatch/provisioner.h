#ifndef HETBATCH_PROVISIONER_H_
#define HETBATCH_PROVISIONER_H_

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "hetbatch/batching.h"
#include "hetbatch/perfmodel.h"
#include "hetbatch/profile.h"

namespace hetbatch {

// Provisioning decision for one group. group.timeouts holds slo - L_max.
struct GroupPlan {
  Group group;
  FunctionConfig config;
  int batch = 1;
  double eq_timeout = 0.0;
  double predicted_cost = 0.0;  // per request
  LatencyEstimate latency;      // at (config, batch)
};

// "(cores, batch, [timeouts])_c" or "(mem, batch, [timeouts])_g".
std::string PlanString(const GroupPlan& plan);

struct MergeStep {
  int stage = 1;
  std::vector<std::string> app_ids;
  double total_before = 0.0;  // rate-weighted cost of the whole partition
  double total_after = 0.0;   // equal to total_before when rejected
  bool accepted = false;
};

struct ProvisionResult {
  std::string strategy;
  bool feasible = true;
  std::vector<std::string> infeasible_apps;
  std::vector<GroupPlan> plans;
  double total_cost = 0.0;  // sum of eta * C over plans
  std::vector<MergeStep> merge_log;
  std::vector<std::string> risk_apps;  // baselineBatch: fails under max latency
  int shards = 0;                      // baselineMbsPlus: chosen shard count
};

enum class KneeMode { kPerWindow, kGlobal };

struct ProvisionerOptions {
  KneeMode knee_mode = KneeMode::kPerWindow;
  double knee_rate_lo = 0.1;
  double knee_rate_hi = 200.0;
  int knee_points = 100;
  double knee_rel_tol = 0.01;
};

// Relative tolerance below which two costs are treated as equal.
inline constexpr double kCostTieTolerance = 1e-12;

// Per-profile solver. Caches the per-batch stationary core count and knee
// rates; KneeRate and HarmonyBatch are safe to call concurrently.
class Provisioner {
 public:
  Provisioner(ModelProfile profile, PricingConfig pricing,
              ProvisionerOptions options = {});

  const ModelProfile& profile() const { return profile_; }
  const PricingConfig& pricing() const { return pricing_; }
  const ProvisionerOptions& options() const { return options_; }

  std::optional<GroupPlan> ProvisionCpu(const Group& group) const;
  std::optional<GroupPlan> ProvisionGpu(const Group& group) const;
  // Cheaper of the two; CPU wins ties.
  std::optional<GroupPlan> FuncProvision(const Group& group) const;

  // Smallest rate at which a singleton app with this SLO is planned on GPU,
  // or +infinity.
  double KneeRate(double slo) const;

  ProvisionResult HarmonyBatch(const std::vector<AppSpec>& apps) const;
  ProvisionResult BaselineBatch(const std::vector<AppSpec>& apps) const;
  // shards == 0 scans 1..|apps| and keeps the cheapest.
  ProvisionResult BaselineMbsPlus(const std::vector<AppSpec>& apps,
                                  int shards = 0) const;

  // Interior cost minimum c0 of c * L_avg(c) for a CPU batch size, NaN if none.
  double StationaryCores(int batch) const { return stationary_[batch - 1]; }
  bool gpu_monotone() const { return gpu_monotone_; }

 private:
  GroupPlan MakePlan(const Group& group, const FunctionConfig& config,
                     int batch) const;
  std::optional<GroupPlan> ProvisionGpuScan(const Group& group,
                                            bool binary_search) const;
  bool GpuWins(double slo, double rate) const;

  ModelProfile profile_;
  PricingConfig pricing_;
  ProvisionerOptions options_;
  std::vector<double> stationary_;
  bool gpu_monotone_ = true;
  mutable std::mutex knee_mu_;
  mutable std::map<double, double> knee_cache_;
};

std::optional<GroupPlan> ProvisionCpu(const ModelProfile& profile,
                                      const PricingConfig& pricing,
                                      const Group& group);
std::optional<GroupPlan> ProvisionGpu(const ModelProfile& profile,
                                      const PricingConfig& pricing,
                                      const Group& group);
std::optional<GroupPlan> FuncProvision(const ModelProfile& profile,
                                       const PricingConfig& pricing,
                                       const Group& group);
double KneeRate(const ModelProfile& profile, const PricingConfig& pricing,
                double slo);
ProvisionResult HarmonyBatch(const ModelProfile& profile,
                             const PricingConfig& pricing,
                             const std::vector<AppSpec>& apps,
                             ProvisionerOptions options = {});
ProvisionResult BaselineBatch(const ModelProfile& profile,
                              const PricingConfig& pricing,
                              const std::vector<AppSpec>& apps);
ProvisionResult BaselineMbsPlus(const ModelProfile& profile,
                                const PricingConfig& pricing,
                                const std::vector<AppSpec>& apps,
                                int shards = 0);

// Sum of eta * C with eta = group rate / total rate.
double WeightedCost(const std::vector<GroupPlan>& plans);

struct PlanCheck {
  bool ok = true;
  std::vector<std::string> violations;
};

// Recomputes latency, timeouts, equivalent timeout, memory demand and cost
// from scratch and checks the memory, batch and SLO constraints.
PlanCheck CheckPlan(const ModelProfile& profile, const PricingConfig& pricing,
                    const GroupPlan& plan);
// CheckPlan on every plan plus eta and total-cost consistency.
PlanCheck CheckResult(const ModelProfile& profile,
                      const PricingConfig& pricing,
                      const ProvisionResult& result);

}  // namespace hetbatch

#endif  // HETBATCH_PROVISIONER_H_
