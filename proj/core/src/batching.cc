#include "hetbatch/batching.h"

#include <algorithm>
#include <cmath>
#include <utility>

#include "hetbatch/error.h"

namespace hetbatch {

Group Group::Of(std::vector<AppSpec> apps) {
  if (apps.empty()) throw Error(ErrorCode::kInvalidInput, "empty group");
  Group g;
  for (const AppSpec& a : apps) {
    if (!(a.slo > 0.0) || !(a.rate > 0.0) || !std::isfinite(a.slo) ||
        !std::isfinite(a.rate)) {
      throw Error(ErrorCode::kInvalidInput,
                  "app " + a.id + " needs positive slo and rate");
    }
  }
  std::stable_sort(apps.begin(), apps.end(),
                   [](const AppSpec& x, const AppSpec& y) {
                     return x.slo < y.slo;
                   });
  g.apps = std::move(apps);
  for (const AppSpec& a : g.apps) g.rate += a.rate;
  return g;
}

double EquivalentTimeoutPair(double r1, double t1, double r2, double t2) {
  if (t1 > t2) {
    throw Error(ErrorCode::kMisorderedArguments, "need t1 <= t2");
  }
  if (!(r1 > 0.0) || !(r2 > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "rates must be positive");
  }
  return t1 + (r2 / (r1 + r2)) * (-std::expm1(-r1 * (t2 - t1))) / r1;
}

double EquivalentTimeout(std::vector<Stream> streams) {
  if (streams.empty()) throw Error(ErrorCode::kIncompleteGroup, "no streams");
  std::stable_sort(streams.begin(), streams.end(),
                   [](const Stream& x, const Stream& y) {
                     return x.timeout < y.timeout;
                   });
  double rate = streams.front().rate;
  double t = streams.front().timeout;
  for (size_t i = 1; i < streams.size(); ++i) {
    t = EquivalentTimeoutPair(rate, t, streams[i].rate, streams[i].timeout);
    rate += streams[i].rate;
  }
  return t;
}

double EquivalentTimeoutGroup(const Group& group) {
  if (group.apps.empty() || group.timeouts.size() != group.apps.size()) {
    throw Error(ErrorCode::kIncompleteGroup,
                "every member needs a batching timeout");
  }
  std::vector<Stream> streams;
  streams.reserve(group.apps.size());
  for (size_t i = 0; i < group.apps.size(); ++i) {
    streams.push_back({group.apps[i].rate, group.timeouts[i]});
  }
  return EquivalentTimeout(std::move(streams));
}

double EquivalentTimeoutForLatency(const Group& group, double lmax) {
  double rate = group.apps.front().rate;
  double t = group.apps.front().slo - lmax;
  for (size_t i = 1; i < group.apps.size(); ++i) {
    const AppSpec& a = group.apps[i];
    const double ti = a.slo - lmax;
    t += (a.rate / (rate + a.rate)) * (-std::expm1(-rate * (ti - t))) / rate;
    rate += a.rate;
  }
  return t;
}

bool FeasibleBatch(double rate, double eq_timeout, int batch) {
  return std::floor(rate * eq_timeout) + 1.0 >= batch;
}

double CostFromLatency(const PricingConfig& pricing,
                       const FunctionConfig& config, double avg_latency,
                       int batch) {
  const double unit = config.kind == FunctionKind::kCpu
                          ? config.cores * pricing.k1
                          : config.mem * pricing.k2;
  return (avg_latency * unit + pricing.k3) / batch;
}

double CostPerRequest(const ModelProfile& profile,
                      const PricingConfig& pricing,
                      const FunctionConfig& config, int batch) {
  ValidateConfig(profile, config, batch);
  return CostFromLatency(pricing, config, Predict(profile, config, batch).avg,
                         batch);
}

}  // namespace hetbatch
