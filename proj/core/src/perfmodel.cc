#include "hetbatch/perfmodel.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "hetbatch/error.h"

namespace hetbatch {

const char* FunctionKindName(FunctionKind kind) {
  return kind == FunctionKind::kCpu ? "cpu" : "gpu";
}

int CeilSlices(double x) {
  return static_cast<int>(std::ceil(x - 1e-9 * std::max(1.0, std::abs(x))));
}

double GpuMaxLatency(double l0, double mem, int m_max, double tau) {
  const int rounds = CeilSlices(l0 / (mem * tau));
  return rounds * (m_max - mem) * tau + l0;
}

LatencyEstimate PredictCpu(const ModelProfile& profile, double cores,
                           int batch) {
  const CoreRange& r = profile.cores();
  const double slack = 1e-9 * std::max(1.0, r.max);
  if (!(cores >= r.min - slack && cores <= r.max + slack)) {
    throw Error(ErrorCode::kOutOfRange,
                "cores " + std::to_string(cores) + " outside the core range");
  }
  return {profile.cpu_avg(batch).Eval(cores), profile.cpu_max(batch).Eval(cores)};
}

double PredictGpuBase(const ModelProfile& profile, int batch) {
  if (batch < 1 || batch > profile.gpu_batch_max()) {
    throw Error(ErrorCode::kOutOfRange,
                "gpu batch " + std::to_string(batch) + " outside the range");
  }
  return profile.gpu().Eval(batch);
}

LatencyEstimate PredictGpu(const ModelProfile& profile, int mem, int batch) {
  const GpuPlatform& p = profile.platform();
  if (mem < 1 || mem > p.m_max) {
    throw Error(ErrorCode::kOutOfRange,
                "gpu memory " + std::to_string(mem) + " outside [1, m_max]");
  }
  const double l0 = PredictGpuBase(profile, batch);
  if (mem == p.m_max) return {l0, l0};
  return {static_cast<double>(p.m_max) / mem * l0,
          GpuMaxLatency(l0, mem, p.m_max, p.tau)};
}

LatencyEstimate Predict(const ModelProfile& profile,
                        const FunctionConfig& config, int batch) {
  if (config.kind == FunctionKind::kCpu) {
    return PredictCpu(profile, config.cores, batch);
  }
  return PredictGpu(profile, config.mem, batch);
}

void ValidateConfig(const ModelProfile& profile, const FunctionConfig& config,
                    int batch) {
  if (config.kind == FunctionKind::kCpu) {
    if (config.mem != 0 || profile.cores().IndexOf(config.cores) < 0) {
      throw Error(ErrorCode::kOutOfRange,
                  "cpu config must use a grid core count and no memory");
    }
    profile.cpu_avg(batch);
    return;
  }
  const GpuPlatform& p = profile.platform();
  if (config.cores != 0.0 || config.mem < 1 || config.mem > p.m_max ||
      config.mem % p.mem_step != 0) {
    throw Error(ErrorCode::kOutOfRange,
                "gpu config must use memory in [1, m_max] on the step grid");
  }
  PredictGpuBase(profile, batch);
}

}  // namespace hetbatch
