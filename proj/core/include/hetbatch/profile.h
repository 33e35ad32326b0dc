#ifndef HETBATCH_PROFILE_H_
#define HETBATCH_PROFILE_H_

#include <cmath>
#include <string>
#include <vector>

namespace hetbatch {

// L(c) = alpha * exp(-c / beta) + gamma for one batch size.
struct CpuLatencyCoeffs {
  double alpha = 0.0;  // seconds
  double beta = 1.0;   // vCPU cores
  double gamma = 0.0;  // seconds

  double Eval(double cores) const {
    return alpha * std::exp(-cores / beta) + gamma;
  }
};

// L0(b) = xi1 * b + xi2 with the whole GPU.
struct GpuLatencyCoeffs {
  double xi1 = 0.0;  // seconds per request
  double xi2 = 0.0;  // seconds

  double Eval(int batch) const { return xi1 * batch + xi2; }
};

struct GpuPlatform {
  int m_max = 24;      // memory units (and time-slice units) per GPU
  double tau = 0.005;  // seconds per slice unit
  int mem_step = 1;    // allocation granularity
};

// Memory demand of a GPU batch, mu0 + mu1 * b.
struct MemoryDemandModel {
  double mu0 = 0.0;
  double mu1 = 0.0;

  double Demand(int batch) const { return mu0 + mu1 * batch; }
};

// Discrete vCPU allocation grid min, min + step, ..., max.
struct CoreRange {
  double min = 0.05;
  double max = 16.0;
  double step = 0.05;

  int size() const;
  double at(int index) const { return min + step * index; }
  // Index of the grid point nearest to cores, or -1 when off the grid.
  int IndexOf(double cores) const;
};

struct PricingConfig {
  double k1 = 1.3e-5;  // per vCPU-second
  double k2 = 1.5e-5;  // per GPU-memory-unit-second
  double k3 = 1.3e-7;  // per invocation
};

// Raw profile contents; cpu_avg[b - 1] holds the coefficients for batch b.
struct ProfileSpec {
  std::vector<CpuLatencyCoeffs> cpu_avg;
  std::vector<CpuLatencyCoeffs> cpu_max;
  GpuLatencyCoeffs gpu;
  MemoryDemandModel mem;
  GpuPlatform platform;
  CoreRange cores;
  int gpu_batch_max = 32;
};

// Validated, immutable profile. The constructor throws Error(kInvalidProfile).
class ModelProfile {
 public:
  explicit ModelProfile(ProfileSpec spec);

  const ProfileSpec& spec() const { return spec_; }
  int cpu_batch_max() const { return static_cast<int>(spec_.cpu_avg.size()); }
  int gpu_batch_max() const { return spec_.gpu_batch_max; }
  // Throw Error(kUnknownBatch) for unprofiled batch sizes.
  const CpuLatencyCoeffs& cpu_avg(int batch) const;
  const CpuLatencyCoeffs& cpu_max(int batch) const;
  const GpuLatencyCoeffs& gpu() const { return spec_.gpu; }
  const MemoryDemandModel& mem() const { return spec_.mem; }
  const GpuPlatform& platform() const { return spec_.platform; }
  const CoreRange& cores() const { return spec_.cores; }

 private:
  ProfileSpec spec_;
};

struct CpuSample {
  double cores;
  double latency;
};

struct CpuFit {
  CpuLatencyCoeffs coeffs;
  double rms = 0.0;
  bool flat = false;  // no exponential component, alpha == 0
};

// Least-squares fit of the exponential CPU model. Throws kInsufficientData
// with fewer than 4 distinct core counts and kInvalidSample for latency <= 0.
CpuFit FitCpuCoeffs(const std::vector<CpuSample>& samples);

struct GpuSample {
  int batch;
  double latency;
};

struct GpuFit {
  GpuLatencyCoeffs coeffs;
  double rms = 0.0;
  std::vector<std::string> warnings;
};

// Least-squares line through (batch, latency). Throws kInsufficientData with
// fewer than 2 distinct batch sizes; a non-positive slope is a warning.
GpuFit FitGpuCoeffs(const std::vector<GpuSample>& samples);

struct TauEstimate {
  double tau = 0.0;
  double predicted = 0.0;
  bool ambiguous = false;          // several slice counts explain the data
  std::vector<double> candidates;  // all exact solutions found in range
};

// Inverts the preempted-slice max latency model for tau. Throws
// kInvalidInput on bad preconditions and kEstimationFailure when no tau in
// (tau_lo, tau_hi] predicts observed_lmax within 10%.
TauEstimate EstimateTau(double l0, double observed_lmax, int mem, int m_max,
                        double tau_lo = 1e-4, double tau_hi = 0.1);

}  // namespace hetbatch

#endif  // HETBATCH_PROFILE_H_
