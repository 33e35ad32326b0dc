#include "hetbatch/simulator.h"

#include <algorithm>
#include <limits>
#include <map>
#include <utility>

#include "hetbatch/error.h"
#include "hetbatch/perfmodel.h"

namespace hetbatch {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSloSlack = 1e-9;

struct AppAccum {
  std::string id;
  double slo = 0.0;
  std::vector<double> latencies;
  double wait_sum = 0.0;
  long wait_violations = 0;
  long exec_violations = 0;
};

struct GroupAccum {
  long requests = 0;
  long dispatches = 0;
  double cost = 0.0;
  double first_wait = 0.0;
  long fallback_draws = 0;
};

class GroupRunner {
 public:
  GroupRunner(const GroupPlan& plan, const ModelProfile& profile,
              const PricingConfig& pricing, LatencyMode mode, uint64_t seed,
              std::vector<AppAccum*> members, GroupAccum* acc,
              std::vector<RequestRecord>* log)
      : plan_(plan),
        profile_(profile),
        pricing_(pricing),
        mode_(mode),
        rng_(seed),
        members_(std::move(members)),
        acc_(acc),
        log_(log) {}

  // arrivals[k].app indexes plan.group.apps.
  void Run(const std::vector<Arrival>& arrivals) {
    const std::vector<double>& timeouts = plan_.group.timeouts;
    double deadline = kInf;
    for (const Arrival& a : arrivals) {
      if (!buffer_.empty() && deadline <= a.time) {
        Dispatch(deadline);
        deadline = kInf;
      }
      buffer_.push_back(a);
      deadline = std::min(deadline, a.time + timeouts[a.app]);
      if (static_cast<int>(buffer_.size()) == plan_.batch) {
        Dispatch(a.time);
        deadline = kInf;
      }
    }
    if (!buffer_.empty()) Dispatch(deadline);
  }

 private:
  double ExecutionLatency(int n, double t) {
    if (plan_.config.kind == FunctionKind::kCpu) {
      CpuDraw d = SampleCpuLatency(profile_, plan_.config.cores, n, rng_);
      if (d.fallback) ++acc_->fallback_draws;
      return d.latency;
    }
    const GpuPlatform& p = profile_.platform();
    const double l0 = profile_.gpu().Eval(n);
    const double cycle = p.m_max * p.tau;
    const double phase = mode_ == LatencyMode::kAnalyticSampled
                             ? rng_.Uniform() * cycle
                             : std::fmod(t, cycle);
    return GpuSliceCompletion(l0, plan_.config.mem, p, phase);
  }

  double ModelAvgLatency(int n) const {
    if (plan_.config.kind == FunctionKind::kCpu) {
      return profile_.cpu_avg(n).Eval(plan_.config.cores);
    }
    const GpuPlatform& p = profile_.platform();
    return static_cast<double>(p.m_max) / plan_.config.mem *
           profile_.gpu().Eval(n);
  }

  void Dispatch(double t) {
    const int n = static_cast<int>(buffer_.size());
    const double exec = ExecutionLatency(n, t);
    acc_->cost += CostFromLatency(pricing_, plan_.config, ModelAvgLatency(n), n) * n;
    acc_->requests += n;
    acc_->dispatches += 1;
    acc_->first_wait += t - buffer_.front().time;
    for (const Arrival& a : buffer_) {
      AppAccum* app = members_[a.app];
      const double wait = t - a.time;
      const double latency = wait + exec;
      app->latencies.push_back(latency);
      app->wait_sum += wait;
      const bool violated = latency > app->slo + kSloSlack;
      if (violated) {
        if (wait > plan_.group.timeouts[a.app] + kSloSlack) {
          ++app->wait_violations;
        } else {
          ++app->exec_violations;
        }
      }
      if (log_ != nullptr) {
        log_->push_back({app->id, a.time, t, t + exec, n, app->slo, violated});
      }
    }
    buffer_.clear();
  }

  const GroupPlan& plan_;
  const ModelProfile& profile_;
  const PricingConfig& pricing_;
  LatencyMode mode_;
  Rng rng_;
  std::vector<AppAccum*> members_;
  GroupAccum* acc_;
  std::vector<RequestRecord>* log_;
  std::vector<Arrival> buffer_;
};

}  // namespace

uint64_t MixSeed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<std::vector<double>> GenerateArrivals(
    const std::vector<AppSpec>& apps, double duration, uint64_t seed) {
  std::vector<std::vector<double>> out(apps.size());
  for (size_t i = 0; i < apps.size(); ++i) {
    if (!(apps[i].rate > 0.0)) {
      throw Error(ErrorCode::kInvalidInput, "arrival rate must be positive");
    }
    Rng rng(MixSeed(seed, i));
    double t = rng.Exponential(apps[i].rate);
    while (t < duration) {
      out[i].push_back(t);
      t += rng.Exponential(apps[i].rate);
    }
  }
  return out;
}

std::vector<Arrival> MergeArrivals(
    const std::vector<std::vector<double>>& per_app) {
  std::vector<Arrival> out;
  size_t total = 0;
  for (const auto& v : per_app) total += v.size();
  out.reserve(total);
  for (size_t i = 0; i < per_app.size(); ++i) {
    for (double t : per_app[i]) out.push_back({t, static_cast<int>(i)});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Arrival& x, const Arrival& y) {
                     return x.time < y.time;
                   });
  return out;
}

double GpuSliceCompletion(double l0, int mem, const GpuPlatform& platform,
                          double arrival_phase) {
  if (mem >= platform.m_max) return l0;
  const double owned = mem * platform.tau;
  const double cycle = platform.m_max * platform.tau;
  const double eps = 1e-12 * std::max(1.0, l0);
  double elapsed = 0.0;
  double pos = arrival_phase;
  double remaining = l0;
  while (true) {
    if (pos < owned) {
      const double avail = owned - pos;
      if (remaining <= avail + eps) return elapsed + remaining;
      elapsed += avail;
      remaining -= avail;
      pos = owned;
    } else {
      elapsed += cycle - pos;
      pos = 0.0;
    }
  }
}

CpuDraw SampleCpuLatency(const ModelProfile& profile, double cores, int batch,
                         Rng& rng) {
  const LatencyEstimate est = PredictCpu(profile, cores, batch);
  const double lo = 2.0 * est.avg - est.max;
  if (lo >= 0.0) {
    return {lo + (est.max - lo) * rng.Uniform(), false};
  }
  // Mixture of U[0, max] (weight w) and a point at avg / 2 with mean avg.
  const double w = est.avg / (est.max - est.avg);
  if (rng.Uniform() < w) return {est.max * rng.Uniform(), true};
  return {0.5 * est.avg, true};
}

SimReport RunPlanSim(const ProvisionResult& result,
                     const ModelProfile& profile,
                     const PricingConfig& pricing, const SimConfig& config,
                     const std::vector<TraceRecord>* trace) {
  if (!(config.duration > 0.0) && trace == nullptr) {
    throw Error(ErrorCode::kInvalidInput, "duration must be positive");
  }
  if (config.replications < 1) {
    throw Error(ErrorCode::kInvalidInput, "replications must be >= 1");
  }
  SimReport report;
  std::vector<AppAccum> apps;
  std::map<std::string, size_t> app_index;
  std::vector<std::vector<AppAccum*>> members(result.plans.size());
  for (const GroupPlan& plan : result.plans) {
    for (const AppSpec& a : plan.group.apps) {
      if (app_index.emplace(a.id, apps.size()).second) {
        apps.push_back({a.id, a.slo, {}, 0.0, 0, 0});
      }
    }
  }
  for (size_t g = 0; g < result.plans.size(); ++g) {
    for (const AppSpec& a : result.plans[g].group.apps) {
      members[g].push_back(&apps[app_index.at(a.id)]);
      // MBS+ shards may run an app at a tighter SLO; audit against it.
      members[g].back()->slo = std::min(members[g].back()->slo, a.slo);
    }
  }
  std::vector<GroupAccum> groups(result.plans.size());
  std::vector<RequestRecord>* log =
      config.keep_requests ? &report.requests : nullptr;

  for (int rep = 0; rep < config.replications; ++rep) {
    const uint64_t rep_seed = MixSeed(config.seed, rep);
    std::vector<std::vector<Arrival>> arrivals(result.plans.size());
    if (trace == nullptr) {
      for (size_t g = 0; g < result.plans.size(); ++g) {
        arrivals[g] = MergeArrivals(GenerateArrivals(
            result.plans[g].group.apps, config.duration,
            MixSeed(rep_seed, 2 * g)));
      }
    } else {
      // Route each record to a group holding the app, weighted by the rate
      // share when several groups hold it.
      std::map<std::string, std::vector<std::pair<size_t, int>>> routes;
      for (size_t g = 0; g < result.plans.size(); ++g) {
        const auto& ga = result.plans[g].group.apps;
        for (size_t k = 0; k < ga.size(); ++k) {
          routes[ga[k].id].emplace_back(g, static_cast<int>(k));
        }
      }
      Rng route_rng(MixSeed(rep_seed, 0x7261ULL));
      long ignored = 0;
      for (const TraceRecord& rec : *trace) {
        auto it = routes.find(rec.app_id);
        if (it == routes.end()) {
          ++ignored;
          continue;
        }
        const auto& options = it->second;
        size_t pick = 0;
        if (options.size() > 1) {
          double total = 0.0;
          for (const auto& [g, k] : options) {
            total += result.plans[g].group.apps[k].rate;
          }
          double u = route_rng.Uniform() * total;
          for (pick = 0; pick + 1 < options.size(); ++pick) {
            u -= result.plans[options[pick].first].group.apps[options[pick].second].rate;
            if (u < 0.0) break;
          }
        }
        arrivals[options[pick].first].push_back({rec.time, options[pick].second});
      }
      if (rep == 0) report.ignored_trace_records = ignored;
    }
    for (size_t g = 0; g < result.plans.size(); ++g) {
      GroupRunner runner(result.plans[g], profile, pricing, config.latency_mode,
                         MixSeed(rep_seed, 2 * g + 1), members[g], &groups[g],
                         log);
      runner.Run(arrivals[g]);
    }
  }

  double cost = 0.0;
  for (size_t g = 0; g < result.plans.size(); ++g) {
    const GroupPlan& plan = result.plans[g];
    const GroupAccum& acc = groups[g];
    GroupStats s;
    s.plan = PlanString(plan);
    s.requests = acc.requests;
    s.dispatches = acc.dispatches;
    s.mean_batch = acc.dispatches ? double(acc.requests) / acc.dispatches : 0.0;
    s.realized_cost = acc.requests ? acc.cost / acc.requests : 0.0;
    s.predicted_cost = plan.predicted_cost;
    s.mean_first_wait = acc.dispatches ? acc.first_wait / acc.dispatches : 0.0;
    s.eq_timeout = plan.eq_timeout;
    s.fallback_draws = acc.fallback_draws;
    if (acc.fallback_draws > 0) {
      report.annotations.push_back(s.plan +
                                   ": 2*avg < max, mixture latency draws used");
    }
    report.groups.push_back(s);
    report.total_requests += acc.requests;
    cost += acc.cost;
  }
  report.realized_cost = report.total_requests ? cost / report.total_requests : 0.0;
  report.predicted_cost = result.plans.empty() ? 0.0 : WeightedCost(result.plans);

  for (AppAccum& a : apps) {
    AppStats s;
    s.id = a.id;
    s.slo = a.slo;
    s.count = static_cast<long>(a.latencies.size());
    if (s.count > 0) {
      double sum = 0.0;
      for (double v : a.latencies) sum += v;
      s.mean_latency = sum / s.count;
      s.mean_wait = a.wait_sum / s.count;
      std::vector<double> sorted = a.latencies;
      std::sort(sorted.begin(), sorted.end());
      const long rank = static_cast<long>(std::ceil(0.99 * s.count)) - 1;
      s.p99_latency = sorted[std::max(0L, rank)];
      s.max_latency = sorted.back();
    }
    s.wait_violations = a.wait_violations;
    s.exec_violations = a.exec_violations;
    s.violation_rate =
        s.count ? double(a.wait_violations + a.exec_violations) / s.count : 0.0;
    report.apps.push_back(s);
  }
  return report;
}

SimReport RunGroupSim(const GroupPlan& plan, const ModelProfile& profile,
                      const PricingConfig& pricing, const SimConfig& config) {
  ProvisionResult single;
  single.strategy = "group";
  single.plans = {plan};
  single.total_cost = plan.predicted_cost;
  return RunPlanSim(single, profile, pricing, config);
}

}  // namespace hetbatch
