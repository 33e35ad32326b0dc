#include "hetbatch/provisioner.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "hetbatch/error.h"

namespace hetbatch {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Sign of d/dc [c * (alpha * exp(-c / beta) + gamma)].
double CostSlope(const CpuLatencyCoeffs& a, double c) {
  return a.alpha * (1.0 - c / a.beta) * std::exp(-c / a.beta) + a.gamma;
}

// The cost c * L(c) rises, falls after its local maximum, and rises again
// past its single local minimum c0 > 2 * beta. Returns NaN when there is no
// interior minimum (cost monotone, or still falling as c grows without
// bound).
double FindStationary(const CpuLatencyCoeffs& a) {
  if (a.alpha <= 0.0) return std::nan("");
  double lo = 2.0 * a.beta;
  if (CostSlope(a, lo) >= 0.0) return std::nan("");
  double hi = 4.0 * a.beta;
  while (CostSlope(a, hi) <= 0.0) {
    hi *= 2.0;
    if (hi > 1e9) return std::nan("");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (CostSlope(a, mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

struct Best {
  bool set = false;
  double cost = 0.0;
  double size = 0.0;  // cores or memory
  int batch = 0;
};

// Lower cost wins; ties go to the smaller resource, then the smaller batch.
bool Improves(const Best& cur, double cost, double size, int batch) {
  if (!cur.set) return true;
  if (cost < cur.cost * (1.0 - kCostTieTolerance)) return true;
  if (cost > cur.cost * (1.0 + kCostTieTolerance)) return false;
  if (size != cur.size) return size < cur.size;
  return batch < cur.batch;
}

bool GroupFeasible(const Group& group, double lmax, int batch) {
  if (lmax > group.min_slo()) return false;
  return FeasibleBatch(group.rate, EquivalentTimeoutForLatency(group, lmax),
                       batch);
}

}  // namespace

Provisioner::Provisioner(ModelProfile profile, PricingConfig pricing,
                         ProvisionerOptions options)
    : profile_(std::move(profile)), pricing_(pricing), options_(options) {
  if (!(pricing_.k1 >= 0.0) || !(pricing_.k2 >= 0.0) || !(pricing_.k3 >= 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "prices must be >= 0");
  }
  if (options_.knee_points < 2 || !(options_.knee_rate_lo > 0.0) ||
      !(options_.knee_rate_hi > options_.knee_rate_lo) ||
      !(options_.knee_rel_tol > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "bad knee scan options");
  }
  for (int b = 1; b <= profile_.cpu_batch_max(); ++b) {
    stationary_.push_back(FindStationary(profile_.cpu_avg(b)));
  }
  // Binary search over b needs L_max nondecreasing in b for every memory.
  const GpuPlatform& p = profile_.platform();
  for (int m = p.mem_step; m <= p.m_max && gpu_monotone_; m += p.mem_step) {
    double prev = -kInf;
    for (int b = 1; b <= profile_.gpu_batch_max(); ++b) {
      const double l0 = profile_.gpu().Eval(b);
      const double lmax = m == p.m_max ? l0 : GpuMaxLatency(l0, m, p.m_max, p.tau);
      if (lmax < prev) {
        gpu_monotone_ = false;
        break;
      }
      prev = lmax;
    }
  }
}

GroupPlan Provisioner::MakePlan(const Group& group,
                                const FunctionConfig& config,
                                int batch) const {
  GroupPlan plan;
  plan.group = group;
  plan.config = config;
  plan.batch = batch;
  plan.latency = Predict(profile_, config, batch);
  plan.group.timeouts.clear();
  for (const AppSpec& a : group.apps) {
    plan.group.timeouts.push_back(a.slo - plan.latency.max);
  }
  plan.eq_timeout = EquivalentTimeoutForLatency(group, plan.latency.max);
  plan.predicted_cost =
      CostFromLatency(pricing_, config, plan.latency.avg, batch);
  return plan;
}

std::optional<GroupPlan> Provisioner::ProvisionCpu(const Group& group) const {
  const CoreRange& cores = profile_.cores();
  const int n = cores.size();
  struct BatchMin {
    int batch;
    int first;  // first feasible core index
    int arg;    // core index of the minimum cost
    double cost;
  };
  std::vector<BatchMin> mins;
  auto cost_at = [&](int b, int i) {
    const double c = cores.at(i);
    return CostFromLatency(pricing_, FunctionConfig::Cpu(c),
                           profile_.cpu_avg(b).Eval(c), b);
  };
  for (int b = 1; b <= profile_.cpu_batch_max(); ++b) {
    const CpuLatencyCoeffs& mx = profile_.cpu_max(b);
    auto feasible = [&](int i) {
      return GroupFeasible(group, mx.Eval(cores.at(i)), b);
    };
    if (!feasible(n - 1)) continue;
    // Feasibility is monotone in cores: L_max falls, timeouts grow.
    int lo = 0, hi = n - 1;
    while (lo < hi) {
      const int mid = lo + (hi - lo) / 2;
      if (feasible(mid)) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    const int first = lo;
    std::vector<int> candidates = {first, n - 1};
    const double c0 = stationary_[b - 1];
    if (std::isfinite(c0)) {
      const int below = static_cast<int>(std::floor((c0 - cores.min) / cores.step));
      candidates.push_back(std::clamp(below, first, n - 1));
      candidates.push_back(std::clamp(below + 1, first, n - 1));
    }
    std::sort(candidates.begin(), candidates.end());
    BatchMin m{b, first, candidates.front(), cost_at(b, candidates.front())};
    for (int i : candidates) {
      const double cost = cost_at(b, i);
      if (cost < m.cost) m = {b, first, i, cost};
    }
    mins.push_back(m);
  }
  if (mins.empty()) return std::nullopt;
  double floor_cost = mins.front().cost;
  for (const BatchMin& m : mins) floor_cost = std::min(floor_cost, m.cost);
  const double limit = floor_cost * (1.0 + kCostTieTolerance);
  // Costs within tolerance of the minimum tie. Below the minimizer, cost
  // rises then falls, so indices within the limit form a suffix of
  // [first, arg] unless first itself qualifies.
  Best best;
  for (const BatchMin& m : mins) {
    if (m.cost > limit) continue;
    int lo = m.first, hi = m.arg;
    if (cost_at(m.batch, lo) > limit) {
      while (lo < hi) {
        const int mid = lo + (hi - lo) / 2;
        if (cost_at(m.batch, mid) <= limit) {
          hi = mid;
        } else {
          lo = mid + 1;
        }
      }
    }
    const double c = cores.at(lo);
    if (!best.set || c < best.size || (c == best.size && m.batch < best.batch)) {
      best = {true, cost_at(m.batch, lo), c, m.batch};
    }
  }
  return MakePlan(group, FunctionConfig::Cpu(best.size), best.batch);
}

std::optional<GroupPlan> Provisioner::ProvisionGpuScan(const Group& group,
                                                       bool binary) const {
  const GpuPlatform& p = profile_.platform();
  const MemoryDemandModel& mem = profile_.mem();
  Best best;
  for (int m = p.mem_step; m <= p.m_max; m += p.mem_step) {
    int cap = 0;
    for (int b = 1; b <= profile_.gpu_batch_max(); ++b) {
      if (mem.Demand(b) <= m + 1e-9) cap = b;
    }
    if (cap < 1) continue;
    auto lmax_of = [&](int b) {
      const double l0 = profile_.gpu().Eval(b);
      return m == p.m_max ? l0 : GpuMaxLatency(l0, m, p.m_max, p.tau);
    };
    auto feasible = [&](int b) { return GroupFeasible(group, lmax_of(b), b); };
    int found = 0;
    if (binary) {
      if (!feasible(1)) continue;
      int lo = 1, hi = cap;
      while (lo < hi) {
        const int mid = lo + (hi - lo + 1) / 2;
        if (feasible(mid)) {
          lo = mid;
        } else {
          hi = mid - 1;
        }
      }
      found = lo;
    } else {
      for (int b = cap; b >= 1 && found == 0; --b) {
        if (feasible(b)) found = b;
      }
      if (found == 0) continue;
    }
    const double l0 = profile_.gpu().Eval(found);
    const double avg = static_cast<double>(p.m_max) / m * l0;
    const double cost =
        CostFromLatency(pricing_, FunctionConfig::Gpu(m), avg, found);
    if (Improves(best, cost, m, found)) best = {true, cost, double(m), found};
  }
  if (!best.set) return std::nullopt;
  return MakePlan(group, FunctionConfig::Gpu(static_cast<int>(best.size)),
                  best.batch);
}

std::optional<GroupPlan> Provisioner::ProvisionGpu(const Group& group) const {
  return ProvisionGpuScan(group, gpu_monotone_);
}

std::optional<GroupPlan> Provisioner::FuncProvision(const Group& group) const {
  std::optional<GroupPlan> cpu = ProvisionCpu(group);
  std::optional<GroupPlan> gpu = ProvisionGpu(group);
  if (!cpu) return gpu;
  if (!gpu) return cpu;
  if (cpu->predicted_cost <=
      gpu->predicted_cost * (1.0 + kCostTieTolerance)) {
    return cpu;
  }
  return gpu;
}

bool Provisioner::GpuWins(double slo, double rate) const {
  std::optional<GroupPlan> plan =
      FuncProvision(Group::Of({AppSpec{"knee", slo, rate}}));
  return plan && plan->config.kind == FunctionKind::kGpu;
}

double Provisioner::KneeRate(double slo) const {
  {
    std::lock_guard<std::mutex> lock(knee_mu_);
    auto it = knee_cache_.find(slo);
    if (it != knee_cache_.end()) return it->second;
  }
  const double lo_rate = options_.knee_rate_lo;
  const double ratio = options_.knee_rate_hi / lo_rate;
  const int points = options_.knee_points;
  double knee = kInf;
  double prev = 0.0;
  for (int k = 0; k < points; ++k) {
    const double r = lo_rate * std::pow(ratio, double(k) / (points - 1));
    if (GpuWins(slo, r)) {
      if (k == 0) {
        knee = r;
        break;
      }
      double lo = prev, hi = r;
      while (hi - lo > options_.knee_rel_tol * hi) {
        const double mid = 0.5 * (lo + hi);
        if (GpuWins(slo, mid)) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      knee = hi;
      break;
    }
    prev = r;
  }
  std::lock_guard<std::mutex> lock(knee_mu_);
  knee_cache_.emplace(slo, knee);
  return knee;
}

ProvisionResult Provisioner::HarmonyBatch(
    const std::vector<AppSpec>& apps) const {
  ProvisionResult res;
  res.strategy = "harmony";
  if (apps.empty()) throw Error(ErrorCode::kInvalidInput, "no applications");

  // Initialize and sort by SLO.
  std::vector<AppSpec> sorted = Group::Of(apps).apps;
  std::vector<GroupPlan> list;
  for (const AppSpec& a : sorted) {
    std::optional<GroupPlan> plan = FuncProvision(Group::Of({a}));
    if (!plan) {
      res.infeasible_apps.push_back(a.id);
      continue;
    }
    list.push_back(std::move(*plan));
  }
  if (!res.infeasible_apps.empty()) {
    res.feasible = false;
    res.plans = std::move(list);
    res.total_cost = res.plans.empty() ? 0.0 : WeightedCost(res.plans);
    return res;
  }
  const double global_slo = sorted.front().slo;

  auto merge = [&](int low, int high, int stage) {
    std::vector<AppSpec> members;
    double before = 0.0;
    for (int k = low; k < high; ++k) {
      const GroupPlan& p = list[k];
      members.insert(members.end(), p.group.apps.begin(), p.group.apps.end());
      before += p.group.rate * p.predicted_cost;
    }
    MergeStep step;
    step.stage = stage;
    for (const AppSpec& a : members) step.app_ids.push_back(a.id);
    step.total_before = WeightedCost(list);
    step.total_after = step.total_before;
    const Group merged = Group::Of(std::move(members));
    std::optional<GroupPlan> plan = FuncProvision(merged);
    if (plan &&
        merged.rate * plan->predicted_cost < before * (1.0 - kCostTieTolerance)) {
      list.erase(list.begin() + low + 1, list.begin() + high);
      list[low] = std::move(*plan);
      step.accepted = true;
      step.total_after = WeightedCost(list);
    }
    res.merge_log.push_back(std::move(step));
    return res.merge_log.back().accepted;
  };

  // Stage 1: fold runs of CPU groups whose rate passes the knee.
  int i = 0, j = 0;
  double r = 0.0;
  while (i < static_cast<int>(list.size())) {
    if (list[i].config.kind == FunctionKind::kCpu) {
      r += list[i].group.rate;
      const double slo = options_.knee_mode == KneeMode::kGlobal
                             ? global_slo
                             : list[j].group.min_slo();
      if (r > KneeRate(slo)) {
        merge(j, i + 1, 1);
        i = j;
        j = j + 1;
        r = 0.0;
      }
    } else {
      j = i + 1;
      r = 0.0;
    }
    ++i;
  }

  // Stage 2: merge neighbours of GPU groups while it pays off.
  i = 0;
  while (i < static_cast<int>(list.size()) - 1) {
    if (list[i].config.kind == FunctionKind::kGpu ||
        list[i + 1].config.kind == FunctionKind::kGpu) {
      if (merge(i, i + 2, 2)) --i;
    }
    ++i;
  }

  res.plans = std::move(list);
  res.total_cost = WeightedCost(res.plans);
  return res;
}

double WeightedCost(const std::vector<GroupPlan>& plans) {
  double rate = 0.0, cost = 0.0;
  for (const GroupPlan& p : plans) {
    rate += p.group.rate;
    cost += p.group.rate * p.predicted_cost;
  }
  return rate > 0.0 ? cost / rate : 0.0;
}

std::optional<GroupPlan> ProvisionCpu(const ModelProfile& profile,
                                      const PricingConfig& pricing,
                                      const Group& group) {
  return Provisioner(profile, pricing).ProvisionCpu(group);
}

std::optional<GroupPlan> ProvisionGpu(const ModelProfile& profile,
                                      const PricingConfig& pricing,
                                      const Group& group) {
  return Provisioner(profile, pricing).ProvisionGpu(group);
}

std::optional<GroupPlan> FuncProvision(const ModelProfile& profile,
                                       const PricingConfig& pricing,
                                       const Group& group) {
  return Provisioner(profile, pricing).FuncProvision(group);
}

double KneeRate(const ModelProfile& profile, const PricingConfig& pricing,
                double slo) {
  return Provisioner(profile, pricing).KneeRate(slo);
}

ProvisionResult HarmonyBatch(const ModelProfile& profile,
                             const PricingConfig& pricing,
                             const std::vector<AppSpec>& apps,
                             ProvisionerOptions options) {
  return Provisioner(profile, pricing, options).HarmonyBatch(apps);
}

}  // namespace hetbatch
