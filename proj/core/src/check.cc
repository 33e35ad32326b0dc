#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include "hetbatch/error.h"
#include "hetbatch/provisioner.h"

namespace hetbatch {
namespace {

std::string Trimmed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  std::string s(buf);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

bool Close(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({1e-300, std::abs(a), std::abs(b)});
}

}  // namespace

std::string PlanString(const GroupPlan& plan) {
  std::ostringstream os;
  const bool cpu = plan.config.kind == FunctionKind::kCpu;
  os << '(' << (cpu ? Trimmed(plan.config.cores) : std::to_string(plan.config.mem))
     << ", " << plan.batch << ", [";
  for (size_t i = 0; i < plan.group.timeouts.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", plan.group.timeouts[i]);
    os << (i ? ", " : "") << buf;
  }
  os << "])_" << (cpu ? 'c' : 'g');
  return os.str();
}

PlanCheck CheckPlan(const ModelProfile& profile, const PricingConfig& pricing,
                    const GroupPlan& plan) {
  PlanCheck out;
  auto fail = [&](const std::string& what) {
    out.ok = false;
    out.violations.push_back(what);
  };
  const Group& g = plan.group;
  if (g.apps.empty()) {
    fail("empty group");
    return out;
  }
  double rate = 0.0;
  for (size_t i = 0; i < g.apps.size(); ++i) {
    rate += g.apps[i].rate;
    if (i > 0 && g.apps[i].slo < g.apps[i - 1].slo) fail("apps not sorted by slo");
  }
  if (!Close(rate, g.rate, 1e-12)) fail("group rate is not the member sum");
  try {
    ValidateConfig(profile, plan.config, plan.batch);
  } catch (const Error& e) {
    fail(std::string("config: ") + e.what());
    return out;
  }

  const LatencyEstimate lat = Predict(profile, plan.config, plan.batch);
  if (plan.config.kind == FunctionKind::kGpu) {
    const double demand = profile.mem().Demand(plan.batch);
    if (plan.config.mem < demand - 1e-9) fail("memory constraint");
  }
  if (g.timeouts.size() != g.apps.size()) {
    fail("timeouts missing");
    return out;
  }
  for (size_t i = 0; i < g.apps.size(); ++i) {
    const double expect = g.apps[i].slo - lat.max;
    if (expect < 0.0) fail("SLO constraint for " + g.apps[i].id);
    if (std::abs(g.timeouts[i] - expect) > 1e-9) {
      fail("timeout of " + g.apps[i].id + " is not slo - L_max");
    }
  }
  const double eq = EquivalentTimeoutGroup(g);
  if (std::abs(eq - plan.eq_timeout) > 1e-9) fail("equivalent timeout mismatch");
  if (!FeasibleBatch(g.rate, eq, plan.batch)) fail("batch constraint");
  const double cost = CostPerRequest(profile, pricing, plan.config, plan.batch);
  if (!Close(cost, plan.predicted_cost, 1e-9)) fail("predicted cost mismatch");
  return out;
}

PlanCheck CheckResult(const ModelProfile& profile,
                      const PricingConfig& pricing,
                      const ProvisionResult& result) {
  PlanCheck out;
  double total_rate = 0.0;
  for (const GroupPlan& p : result.plans) total_rate += p.group.rate;
  double eta = 0.0, cost = 0.0;
  for (const GroupPlan& p : result.plans) {
    PlanCheck c = CheckPlan(profile, pricing, p);
    if (!c.ok) {
      out.ok = false;
      for (const std::string& v : c.violations) {
        out.violations.push_back(PlanString(p) + ": " + v);
      }
    }
    eta += p.group.rate / total_rate;
    cost += p.group.rate / total_rate * p.predicted_cost;
  }
  if (!result.plans.empty()) {
    if (std::abs(eta - 1.0) > 1e-12) {
      out.ok = false;
      out.violations.push_back("eta weights do not sum to 1");
    }
    if (!Close(cost, result.total_cost, 1e-12)) {
      out.ok = false;
      out.violations.push_back("total cost is not the eta-weighted sum");
    }
  }
  return out;
}

}  // namespace hetbatch
