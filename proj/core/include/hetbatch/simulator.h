#ifndef HETBATCH_SIMULATOR_H_
#define HETBATCH_SIMULATOR_H_

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hetbatch/batching.h"
#include "hetbatch/profile.h"
#include "hetbatch/provisioner.h"

namespace hetbatch {

// mt19937_64 with explicit bit-level conversions so draws are identical
// across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t Next() { return engine_(); }
  // Uniform on [0, 1).
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double Exponential(double rate) { return -std::log1p(-Uniform()) / rate; }

 private:
  std::mt19937_64 engine_;
};

// splitmix64 of seed + stream; derives independent substream seeds.
uint64_t MixSeed(uint64_t seed, uint64_t stream);

enum class LatencyMode {
  kAnalyticSampled,  // GPU slice phase drawn uniformly per dispatch
  kSliceExact,       // GPU phase follows the absolute clock, cycle at t = 0
};

struct SimConfig {
  double duration = 1000.0;  // seconds of arrivals
  uint64_t seed = 1;
  LatencyMode latency_mode = LatencyMode::kAnalyticSampled;
  int replications = 1;
  bool keep_requests = false;  // fill SimReport::requests
};

struct Arrival {
  double time;
  int app;  // index into the app list the arrivals were generated for
};

struct TraceRecord {
  double time;
  std::string app_id;
};

struct RequestRecord {
  std::string app_id;
  double arrival = 0.0;
  double dispatch = 0.0;
  double completion = 0.0;
  int batch = 0;
  double slo = 0.0;
  bool violated = false;
};

struct AppStats {
  std::string id;
  double slo = 0.0;
  long count = 0;
  double mean_latency = 0.0;
  double p99_latency = 0.0;
  double max_latency = 0.0;
  double mean_wait = 0.0;
  long wait_violations = 0;  // waited past its own timeout
  long exec_violations = 0;  // waited within timeout, execution overran
  double violation_rate = 0.0;
};

struct GroupStats {
  std::string plan;
  long requests = 0;
  long dispatches = 0;
  double mean_batch = 0.0;
  double realized_cost = 0.0;   // per request, model avg latency per dispatch
  double predicted_cost = 0.0;  // plan.predicted_cost
  double mean_first_wait = 0.0;
  double eq_timeout = 0.0;
  long fallback_draws = 0;
};

struct SimReport {
  std::vector<AppStats> apps;
  std::vector<GroupStats> groups;
  long total_requests = 0;
  double realized_cost = 0.0;
  double predicted_cost = 0.0;
  long ignored_trace_records = 0;
  std::vector<std::string> annotations;
  std::vector<RequestRecord> requests;
};

// Independent Poisson arrivals per app on [0, duration).
std::vector<std::vector<double>> GenerateArrivals(
    const std::vector<AppSpec>& apps, double duration, uint64_t seed);
// Chronological merge; ties keep the lower app index first.
std::vector<Arrival> MergeArrivals(
    const std::vector<std::vector<double>>& per_app);

// Wall time to finish l0 seconds of GPU work when the function owns the
// first mem * tau of every m_max * tau cycle and arrives at arrival_phase.
double GpuSliceCompletion(double l0, int mem, const GpuPlatform& platform,
                          double arrival_phase);

struct CpuDraw {
  double latency;
  bool fallback;  // 2 * avg < max; drawn from a mixture on [0, max]
};

// Uniform on [2 * avg - max, max] so the mean is avg and the support ends
// at max.
CpuDraw SampleCpuLatency(const ModelProfile& profile, double cores, int batch,
                         Rng& rng);

// Simulates every group of result on Poisson arrivals, or on trace records
// when trace is non-null.
SimReport RunPlanSim(const ProvisionResult& result,
                     const ModelProfile& profile,
                     const PricingConfig& pricing, const SimConfig& config,
                     const std::vector<TraceRecord>* trace = nullptr);

SimReport RunGroupSim(const GroupPlan& plan, const ModelProfile& profile,
                      const PricingConfig& pricing, const SimConfig& config);

}  // namespace hetbatch

#endif  // HETBATCH_SIMULATOR_H_
