#ifndef HETBATCH_PERFMODEL_H_
#define HETBATCH_PERFMODEL_H_

#include "hetbatch/profile.h"

namespace hetbatch {

enum class FunctionKind { kCpu, kGpu };

const char* FunctionKindName(FunctionKind kind);

// A serverless function size: cores for CPU functions, memory for GPU ones.
struct FunctionConfig {
  FunctionKind kind = FunctionKind::kCpu;
  double cores = 0.0;
  int mem = 0;

  static FunctionConfig Cpu(double cores) {
    return {FunctionKind::kCpu, cores, 0};
  }
  static FunctionConfig Gpu(int mem) { return {FunctionKind::kGpu, 0.0, mem}; }
};

struct LatencyEstimate {
  double avg = 0.0;
  double max = 0.0;
};

// ceil(x) that treats values within 1e-9 relative of an integer as that
// integer, so l0 = k * mem * tau yields exactly k slice rounds.
int CeilSlices(double x);

// Worst-case completion of l0 seconds of work when the function owns mem of
// m_max slices per cycle: ceil(l0 / (mem * tau)) * (m_max - mem) * tau + l0.
double GpuMaxLatency(double l0, double mem, int m_max, double tau);

// Throws kUnknownBatch / kOutOfRange.
LatencyEstimate PredictCpu(const ModelProfile& profile, double cores,
                           int batch);
// Throws kOutOfRange unless 1 <= batch <= gpu batch max.
double PredictGpuBase(const ModelProfile& profile, int batch);
// Throws kOutOfRange unless 1 <= mem <= m_max and the batch is in range.
LatencyEstimate PredictGpu(const ModelProfile& profile, int mem, int batch);
LatencyEstimate Predict(const ModelProfile& profile,
                        const FunctionConfig& config, int batch);

// Throws kOutOfRange / kUnknownBatch when config or batch is not allowed.
void ValidateConfig(const ModelProfile& profile, const FunctionConfig& config,
                    int batch);

}  // namespace hetbatch

#endif  // HETBATCH_PERFMODEL_H_
