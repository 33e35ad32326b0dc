#ifndef HETBATCH_BATCHING_H_
#define HETBATCH_BATCHING_H_

#include <string>
#include <vector>

#include "hetbatch/perfmodel.h"
#include "hetbatch/profile.h"

namespace hetbatch {

struct AppSpec {
  std::string id;
  double slo = 0.0;   // seconds
  double rate = 0.0;  // requests per second
};

// Applications batched together, kept in ascending SLO order.
struct Group {
  std::vector<AppSpec> apps;
  double rate = 0.0;
  std::vector<double> timeouts;  // parallel to apps; empty until assigned

  // Stable-sorts by SLO and sums rates. Throws kInvalidInput on empty input
  // or non-positive SLO / rate.
  static Group Of(std::vector<AppSpec> apps);

  double min_slo() const { return apps.front().slo; }
};

// One Poisson stream with its batching timeout.
struct Stream {
  double rate;
  double timeout;
};

// Expected wait of the first buffered request for two streams with
// t1 <= t2. Throws kMisorderedArguments if t1 > t2.
double EquivalentTimeoutPair(double r1, double t1, double r2, double t2);

// Folds the pair formula over streams in ascending timeout order, treating
// the accumulated streams as one with the summed rate.
double EquivalentTimeout(std::vector<Stream> streams);

// Uses group.timeouts; throws kIncompleteGroup when they are not all set.
double EquivalentTimeoutGroup(const Group& group);

// Equivalent timeout with every member's timeout set to slo - lmax. Members
// are already in ascending timeout order, so this folds without sorting.
double EquivalentTimeoutForLatency(const Group& group, double lmax);

// floor(rate * eq_timeout) + 1 >= batch.
bool FeasibleBatch(double rate, double eq_timeout, int batch);

// (1 / b) * [avg_latency * (c * k1 + m * k2) + k3].
double CostFromLatency(const PricingConfig& pricing,
                       const FunctionConfig& config, double avg_latency,
                       int batch);

// Cost per request using the predicted average latency of config at batch.
double CostPerRequest(const ModelProfile& profile,
                      const PricingConfig& pricing,
                      const FunctionConfig& config, int batch);

}  // namespace hetbatch

#endif  // HETBATCH_BATCHING_H_
