#include "hetbatch/profile.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "hetbatch/error.h"

namespace hetbatch {
namespace {

[[noreturn]] void Invalid(const std::string& message) {
  throw Error(ErrorCode::kInvalidProfile, message);
}

void CheckCpuCoeffs(const CpuLatencyCoeffs& c, const char* which, int batch) {
  std::ostringstream where;
  where << which << " batch " << batch;
  if (!std::isfinite(c.alpha) || !std::isfinite(c.beta) ||
      !std::isfinite(c.gamma)) {
    Invalid(where.str() + ": non-finite coefficient");
  }
  if (c.alpha < 0.0) Invalid(where.str() + ": alpha must be >= 0");
  if (c.beta <= 0.0) Invalid(where.str() + ": beta must be > 0");
  if (c.gamma < 0.0) Invalid(where.str() + ": gamma must be >= 0");
}

}  // namespace

int CoreRange::size() const {
  if (step <= 0.0 || max < min) return 0;
  return static_cast<int>(std::floor((max - min) / step + 1e-9)) + 1;
}

int CoreRange::IndexOf(double cores) const {
  const long k = std::lround((cores - min) / step);
  if (k < 0 || k >= size()) return -1;
  if (std::abs(at(static_cast<int>(k)) - cores) >
      1e-9 * std::max(1.0, std::abs(cores))) {
    return -1;
  }
  return static_cast<int>(k);
}

ModelProfile::ModelProfile(ProfileSpec spec) : spec_(std::move(spec)) {
  if (spec_.cpu_avg.empty()) Invalid("cpu_avg is empty");
  if (spec_.cpu_avg.size() != spec_.cpu_max.size()) {
    Invalid("cpu_avg and cpu_max cover different batch sizes");
  }
  for (size_t i = 0; i < spec_.cpu_avg.size(); ++i) {
    CheckCpuCoeffs(spec_.cpu_avg[i], "cpu_avg", static_cast<int>(i) + 1);
    CheckCpuCoeffs(spec_.cpu_max[i], "cpu_max", static_cast<int>(i) + 1);
  }
  const GpuLatencyCoeffs& g = spec_.gpu;
  if (!(g.xi1 > 0.0) || !std::isfinite(g.xi1)) Invalid("gpu.xi1 must be > 0");
  if (!(g.xi2 >= 0.0) || !std::isfinite(g.xi2)) {
    Invalid("gpu.xi2 must be >= 0");
  }
  if (!(spec_.mem.mu0 >= 0.0) || !(spec_.mem.mu1 >= 0.0)) {
    Invalid("mem.mu0 and mem.mu1 must be >= 0");
  }
  const GpuPlatform& p = spec_.platform;
  if (p.m_max < 1) Invalid("platform.m_max must be >= 1");
  if (!(p.tau > 0.0)) Invalid("platform.tau must be > 0");
  if (p.mem_step < 1 || p.m_max % p.mem_step != 0) {
    Invalid("platform.mem_step must be >= 1 and divide m_max");
  }
  const CoreRange& r = spec_.cores;
  if (!(r.min > 0.0) || !(r.step > 0.0) || !(r.max >= r.min)) {
    Invalid("ranges.cpu_cores must satisfy 0 < min <= max and step > 0");
  }
  if (spec_.gpu_batch_max < 1) Invalid("ranges.gpu_batch upper bound < 1");

  const int n = r.size();
  for (int b = 1; b <= cpu_batch_max(); ++b) {
    const CpuLatencyCoeffs& avg = spec_.cpu_avg[b - 1];
    const CpuLatencyCoeffs& mx = spec_.cpu_max[b - 1];
    for (int i = 0; i < n; ++i) {
      const double c = r.at(i);
      const double a = avg.Eval(c);
      const double m = mx.Eval(c);
      if (m < a * (1.0 - 1e-12)) {
        std::ostringstream os;
        os << "max latency below avg latency at batch " << b << ", cores "
           << c << " (" << m << " < " << a << ")";
        Invalid(os.str());
      }
    }
  }
}

const CpuLatencyCoeffs& ModelProfile::cpu_avg(int batch) const {
  if (batch < 1 || batch > cpu_batch_max()) {
    throw Error(ErrorCode::kUnknownBatch,
                "cpu batch " + std::to_string(batch) + " is not profiled");
  }
  return spec_.cpu_avg[batch - 1];
}

const CpuLatencyCoeffs& ModelProfile::cpu_max(int batch) const {
  if (batch < 1 || batch > cpu_batch_max()) {
    throw Error(ErrorCode::kUnknownBatch,
                "cpu batch " + std::to_string(batch) + " is not profiled");
  }
  return spec_.cpu_max[batch - 1];
}

}  // namespace hetbatch
