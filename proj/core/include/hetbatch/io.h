#ifndef HETBATCH_IO_H_
#define HETBATCH_IO_H_

#include <string>
#include <utility>
#include <vector>

#include "hetbatch/batching.h"
#include "hetbatch/profile.h"
#include "hetbatch/provisioner.h"
#include "hetbatch/simulator.h"

namespace hetbatch {

inline constexpr int kFormatVersion = 1;

// All readers throw Error(kParse) on malformed input and Error(kInvalidInput)
// on unreadable files.
std::string ReadFile(const std::string& path);
void WriteFile(const std::string& path, const std::string& contents);

// Parsing does not validate; construct a ModelProfile for that.
ProfileSpec ParseProfileSpec(const std::string& text);
std::string ProfileSpecToJson(const ProfileSpec& spec);
ProfileSpec LoadProfileSpec(const std::string& path);
ModelProfile LoadProfile(const std::string& path);
// FNV-1a 64 of the compact canonical JSON, as 16 hex digits.
std::string ProfileHash(const ProfileSpec& spec);

struct Workload {
  std::vector<AppSpec> apps;
  PricingConfig pricing;
  bool has_pricing = false;
  std::string profile_path;  // resolved against the workload file directory
};

// Ids must be unique and numerics positive (Error(kInvalidInput) otherwise).
Workload ParseWorkload(const std::string& text, const std::string& base_dir);
Workload LoadWorkload(const std::string& path);
// Accepts {k1, k2, k3} or {"pricing": {k1, k2, k3}}.
PricingConfig ParsePricing(const std::string& text);
PricingConfig LoadPricing(const std::string& path);

struct BatchedCpuSample {
  int batch;
  CpuSample sample;
};

// CSV with header `batch,cores,latency`.
std::vector<BatchedCpuSample> ReadCpuSamplesCsv(const std::string& path);
// CSV with header `batch,latency`.
std::vector<GpuSample> ReadGpuSamplesCsv(const std::string& path);
// CSV `timestamp_seconds,app_id` with nondecreasing timestamps.
std::vector<TraceRecord> ReadTraceCsv(const std::string& path);
// CSV `app_id,arrival,dispatch,completion,slo,violated`.
std::string RequestLogCsv(const std::vector<RequestRecord>& records);

// Resolved configuration embedded in every report.
struct ReportMeta {
  std::string command;
  std::string profile_hash;
  PricingConfig pricing;
  std::vector<std::pair<std::string, std::string>> flags;
};

std::string ProvisionResultToJson(const ProvisionResult& result,
                                  const ReportMeta& meta);
ProvisionResult ParseProvisionResult(const std::string& text);
std::string SimReportToJson(const SimReport& report, const ReportMeta& meta);

}  // namespace hetbatch

#endif  // HETBATCH_IO_H_
