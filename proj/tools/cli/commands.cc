#include "commands.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "hetbatch/batching.h"
#include "hetbatch/error.h"
#include "hetbatch/io.h"
#include "hetbatch/perfmodel.h"
#include "hetbatch/profile.h"
#include "hetbatch/provisioner.h"
#include "hetbatch/simulator.h"

namespace hetbatch::cli {
namespace {

using Json = nlohmann::ordered_json;

struct Options {
  std::string profile;
  std::string pricing;
  std::string workload;
  std::string strategy = "harmony";
  std::string out;
  std::string trace;
  std::string plan;
  std::string requests_log;
  std::string knee_mode = "per-window";
  std::string latency_mode = "analytic";
  std::string samples;
  std::string which;
  std::string kind = "cpu";
  std::string curves;
  double duration = 1000.0;
  uint64_t seed = 1;
  int replications = 1;
  int shards = 0;
  double slo = 1.0;
  double rate = 20.0;
  double cores = 1.0;
  int mem = 24;
  int batch = 1;
  double l0 = 0.0;
  double observed_lmax = 0.0;
};

// Profile, pricing and apps after applying the workload and overrides.
struct Inputs {
  ProfileSpec spec;
  std::optional<ModelProfile> profile;
  PricingConfig pricing;
  std::vector<AppSpec> apps;
};

std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Resolved option values of a subcommand; output destinations excluded so
// reports do not depend on where they are written.
std::vector<std::pair<std::string, std::string>> ResolvedFlags(
    const CLI::App& sub) {
  std::vector<std::pair<std::string, std::string>> flags;
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_name();
    if (name == "--help" || name == "--out" || name == "--requests-log" ||
        name == "--curves") {
      continue;
    }
    std::string value;
    if (opt->count() > 0) {
      for (const std::string& r : opt->results()) {
        value += (value.empty() ? "" : ",") + r;
      }
    } else {
      value = opt->get_default_str();
    }
    flags.emplace_back(name, value);
  }
  return flags;
}

Inputs LoadInputs(const Options& o, bool need_apps) {
  Inputs in;
  std::string profile_path = o.profile;
  if (!o.workload.empty()) {
    Workload w = LoadWorkload(o.workload);
    in.apps = std::move(w.apps);
    if (w.has_pricing) in.pricing = w.pricing;
    if (profile_path.empty()) profile_path = w.profile_path;
  } else if (need_apps) {
    throw Error(ErrorCode::kInvalidInput, "--workload is required");
  }
  if (!o.pricing.empty()) in.pricing = LoadPricing(o.pricing);
  if (profile_path.empty()) {
    throw Error(ErrorCode::kInvalidInput,
                "no profile: pass --profile or set profile_path in the workload");
  }
  in.spec = LoadProfileSpec(profile_path);
  in.profile.emplace(in.spec);
  return in;
}

ReportMeta Meta(const std::string& command, const Inputs& in,
                const CLI::App& sub) {
  return {command, ProfileHash(in.spec), in.pricing, ResolvedFlags(sub)};
}

void Emit(const Options& o, const std::string& text, std::ostream& out) {
  if (o.out.empty()) {
    out << text;
  } else {
    WriteFile(o.out, text);
  }
}

KneeMode ParseKneeMode(const std::string& s) {
  return s == "global" ? KneeMode::kGlobal : KneeMode::kPerWindow;
}

ProvisionResult RunStrategy(const Provisioner& prov, const std::string& strategy,
                            const std::vector<AppSpec>& apps, int shards) {
  if (strategy == "harmony") return prov.HarmonyBatch(apps);
  if (strategy == "batch") return prov.BaselineBatch(apps);
  return prov.BaselineMbsPlus(apps, shards);
}

// Plans produced with slo - L_max timeouts must pass the independent
// checker; BATCH plans use average latency by design and are not checked.
void EnforceCheck(const Inputs& in, const ProvisionResult& result,
                  std::ostream& err) {
  if (result.strategy == "batch" || !result.feasible) return;
  PlanCheck check = CheckResult(*in.profile, in.pricing, result);
  if (check.ok) return;
  std::string all;
  for (const std::string& v : check.violations) {
    err << "invariant: " << v << "\n";
    all += v + "; ";
  }
  throw Error(ErrorCode::kInvariant, "plan failed re-verification: " + all);
}

int CmdFit(const Options& o, const CLI::App& sub, std::ostream& out,
           std::ostream& err) {
  if (o.out.empty()) throw Error(ErrorCode::kInvalidInput, "--out is required");
  ProfileSpec spec;
  const std::string base =
      !o.profile.empty() ? o.profile
                         : (std::filesystem::exists(o.out) ? o.out : std::string());
  if (!base.empty()) spec = LoadProfileSpec(base);

  Json summary;
  summary["format_version"] = kFormatVersion;
  summary["command"] = "fit";
  summary["which"] = o.which;
  if (o.which == "cpu-avg" || o.which == "cpu-max") {
    if (o.samples.empty()) throw Error(ErrorCode::kInvalidInput, "--samples is required");
    std::map<int, std::vector<CpuSample>> by_batch;
    for (const BatchedCpuSample& s : ReadCpuSamplesCsv(o.samples)) {
      by_batch[s.batch].push_back(s.sample);
    }
    if (by_batch.empty()) {
      throw Error(ErrorCode::kInsufficientData, "no samples in " + o.samples);
    }
    const int top = by_batch.rbegin()->first;
    if (static_cast<int>(by_batch.size()) != top) {
      throw Error(ErrorCode::kInsufficientData,
                  "samples must cover batches 1.." + std::to_string(top));
    }
    std::vector<CpuLatencyCoeffs> table;
    Json fits = Json::array();
    for (const auto& [b, samples] : by_batch) {
      const CpuFit fit = FitCpuCoeffs(samples);
      table.push_back(fit.coeffs);
      fits.push_back({{"batch", b},
                      {"alpha", fit.coeffs.alpha},
                      {"beta", fit.coeffs.beta},
                      {"gamma", fit.coeffs.gamma},
                      {"rms", fit.rms},
                      {"flat", fit.flat}});
    }
    (o.which == "cpu-avg" ? spec.cpu_avg : spec.cpu_max) = std::move(table);
    summary["fits"] = fits;
  } else if (o.which == "gpu") {
    if (o.samples.empty()) throw Error(ErrorCode::kInvalidInput, "--samples is required");
    const GpuFit fit = FitGpuCoeffs(ReadGpuSamplesCsv(o.samples));
    for (const std::string& w : fit.warnings) err << "warning: " << w << "\n";
    spec.gpu = fit.coeffs;
    summary["fits"] = {{"xi1", fit.coeffs.xi1}, {"xi2", fit.coeffs.xi2},
                       {"rms", fit.rms}, {"warnings", fit.warnings}};
  } else if (o.which == "tau") {
    const TauEstimate est =
        EstimateTau(o.l0, o.observed_lmax, o.mem, spec.platform.m_max);
    spec.platform.tau = est.tau;
    summary["fits"] = {{"tau", est.tau}, {"predicted", est.predicted},
                       {"ambiguous", est.ambiguous}, {"candidates", est.candidates}};
  } else {
    throw Error(ErrorCode::kInvalidInput, "unknown --which " + o.which);
  }
  WriteFile(o.out, ProfileSpecToJson(spec));
  Json flags = Json::object();
  for (const auto& [k, v] : ResolvedFlags(sub)) flags[k] = v;
  summary["flags"] = flags;
  summary["profile_hash"] = ProfileHash(spec);
  out << summary.dump(2) << "\n";
  return kExitOk;
}

int CmdProvision(const Options& o, const CLI::App& sub, std::ostream& out,
                 std::ostream& err) {
  Inputs in = LoadInputs(o, true);
  ProvisionerOptions popt;
  popt.knee_mode = ParseKneeMode(o.knee_mode);
  Provisioner prov(*in.profile, in.pricing, popt);
  const ProvisionResult result = RunStrategy(prov, o.strategy, in.apps, o.shards);
  Emit(o, ProvisionResultToJson(result, Meta("provision", in, sub)), out);
  if (!result.feasible) {
    err << "infeasible:";
    for (const std::string& id : result.infeasible_apps) err << " " << id;
    err << "\n";
    return kExitInfeasible;
  }
  EnforceCheck(in, result, err);
  return kExitOk;
}

SimConfig MakeSimConfig(const Options& o, bool keep_requests) {
  SimConfig cfg;
  cfg.duration = o.duration;
  cfg.seed = o.seed;
  cfg.replications = o.replications;
  cfg.latency_mode = o.latency_mode == "slice-exact" ? LatencyMode::kSliceExact
                                                     : LatencyMode::kAnalyticSampled;
  cfg.keep_requests = keep_requests;
  return cfg;
}

int CmdSimulate(const Options& o, const CLI::App& sub, std::ostream& out,
                std::ostream& err) {
  Inputs in = LoadInputs(o, false);
  const ProvisionResult plan = ParseProvisionResult(ReadFile(o.plan));
  if (!in.apps.empty()) {
    std::map<std::string, double> slo_by_id;
    for (const AppSpec& a : in.apps) slo_by_id[a.id] = a.slo;
    for (const GroupPlan& p : plan.plans) {
      for (const AppSpec& a : p.group.apps) {
        if (!slo_by_id.count(a.id)) {
          throw Error(ErrorCode::kInvalidInput,
                      "plan app " + a.id + " is not in the workload");
        }
      }
    }
  }
  if (plan.plans.empty()) {
    err << "plan has no groups\n";
    return kExitInfeasible;
  }
  std::vector<TraceRecord> trace;
  if (!o.trace.empty()) trace = ReadTraceCsv(o.trace);
  const SimReport report =
      RunPlanSim(plan, *in.profile, in.pricing,
                 MakeSimConfig(o, !o.requests_log.empty()),
                 o.trace.empty() ? nullptr : &trace);
  if (!o.requests_log.empty()) {
    WriteFile(o.requests_log, RequestLogCsv(report.requests));
  }
  Emit(o, SimReportToJson(report, Meta("simulate", in, sub)), out);
  return plan.feasible ? kExitOk : kExitInfeasible;
}

double CostOrInf(const std::optional<GroupPlan>& p) {
  return p ? p->predicted_cost : std::numeric_limits<double>::infinity();
}

std::string KindOf(const std::optional<GroupPlan>& p) {
  return p ? FunctionKindName(p->config.kind) : "none";
}

// One point of a cost curve: both kinds' optimal costs and the winner.
struct CurvePoint {
  double x;
  double cpu;
  double gpu;
  std::string kind;
};

CurvePoint EvalPoint(const Provisioner& prov, double x, double slo, double rate) {
  const Group g = Group::Of({AppSpec{"curve", slo, rate}});
  return {x, CostOrInf(prov.ProvisionCpu(g)), CostOrInf(prov.ProvisionGpu(g)),
          KindOf(prov.FuncProvision(g))};
}

// Values of x where the optimal kind changes between consecutive points.
Json Switches(const std::vector<CurvePoint>& curve) {
  Json out = Json::array();
  for (size_t i = 1; i < curve.size(); ++i) {
    if (curve[i].kind != curve[i - 1].kind) {
      out.push_back({{"from", curve[i - 1].kind},
                     {"to", curve[i].kind},
                     {"between", {curve[i - 1].x, curve[i].x}}});
    }
  }
  return out;
}

std::string CostCell(double v) { return std::isfinite(v) ? FormatDouble(v) : ""; }

int CmdKnee(const Options& o, const CLI::App& sub, std::ostream& out,
            std::ostream&) {
  Inputs in = LoadInputs(o, false);
  Provisioner prov(*in.profile, in.pricing);
  const ProvisionerOptions& po = prov.options();
  const double knee = prov.KneeRate(o.slo);

  std::vector<CurvePoint> by_rate, by_slo;
  const double ratio = po.knee_rate_hi / po.knee_rate_lo;
  for (int k = 0; k < po.knee_points; ++k) {
    const double r = po.knee_rate_lo * std::pow(ratio, double(k) / (po.knee_points - 1));
    by_rate.push_back(EvalPoint(prov, r, o.slo, r));
  }
  for (int k = 1; k <= 200; ++k) {
    const double s = 0.01 * k;
    by_slo.push_back(EvalPoint(prov, s, s, o.rate));
  }
  if (!o.curves.empty()) {
    std::ostringstream csv;
    csv << "sweep,x,cpu_cost,gpu_cost,optimal_kind\n";
    for (const CurvePoint& p : by_rate) {
      csv << "rate," << FormatDouble(p.x) << "," << CostCell(p.cpu) << ","
          << CostCell(p.gpu) << "," << p.kind << "\n";
    }
    for (const CurvePoint& p : by_slo) {
      csv << "slo," << FormatDouble(p.x) << "," << CostCell(p.cpu) << ","
          << CostCell(p.gpu) << "," << p.kind << "\n";
    }
    WriteFile(o.curves, csv.str());
  }
  Json j;
  j["format_version"] = kFormatVersion;
  const ReportMeta meta = Meta("knee", in, sub);
  Json flags = Json::object();
  for (const auto& [k, v] : meta.flags) flags[k] = v;
  j["config"] = {{"command", meta.command},
                 {"profile_hash", meta.profile_hash},
                 {"pricing", {{"k1", in.pricing.k1}, {"k2", in.pricing.k2}, {"k3", in.pricing.k3}}},
                 {"flags", flags}};
  j["slo"] = o.slo;
  if (std::isfinite(knee)) {
    j["knee_rate"] = knee;
  } else {
    j["knee_rate"] = nullptr;
  }
  j["rate_sweep_switches"] = Switches(by_rate);
  j["slo_sweep_rate"] = o.rate;
  j["slo_sweep_switches"] = Switches(by_slo);
  Emit(o, j.dump(2) + "\n", out);
  return kExitOk;
}

int CmdPredict(const Options& o, const CLI::App& sub, std::ostream& out,
               std::ostream&) {
  Inputs in = LoadInputs(o, false);
  const FunctionConfig config =
      o.kind == "gpu" ? FunctionConfig::Gpu(o.mem) : FunctionConfig::Cpu(o.cores);
  ValidateConfig(*in.profile, config, o.batch);
  const LatencyEstimate lat = Predict(*in.profile, config, o.batch);
  Json j;
  j["format_version"] = kFormatVersion;
  j["profile_hash"] = ProfileHash(in.spec);
  Json flags = Json::object();
  for (const auto& [k, v] : ResolvedFlags(sub)) flags[k] = v;
  j["flags"] = flags;
  j["kind"] = FunctionKindName(config.kind);
  j["cores"] = config.cores;
  j["mem"] = config.mem;
  j["batch"] = o.batch;
  if (config.kind == FunctionKind::kGpu) j["l0"] = PredictGpuBase(*in.profile, o.batch);
  j["avg"] = lat.avg;
  j["max"] = lat.max;
  // The GPU average can exceed the max for small memory; reported as is.
  j["avg_exceeds_max"] = lat.avg > lat.max;
  j["cost_per_request"] = CostFromLatency(in.pricing, config, lat.avg, o.batch);
  Emit(o, j.dump(2) + "\n", out);
  return kExitOk;
}

int CmdCompare(const Options& o, const CLI::App& sub, std::ostream& out,
               std::ostream& err) {
  Inputs in = LoadInputs(o, true);
  ProvisionerOptions popt;
  popt.knee_mode = ParseKneeMode(o.knee_mode);
  Provisioner prov(*in.profile, in.pricing, popt);
  const ReportMeta meta = Meta("compare", in, sub);
  Json rows = Json::array();
  double batch_cost = 0.0;
  bool harmony_feasible = false;
  std::ostringstream table;
  char line[200];
  std::snprintf(line, sizeof(line), "%-8s %-8s %14s %14s %10s %14s\n", "strategy",
                "feasible", "predicted", "realized", "vs_batch", "max_violation");
  table << line;
  std::vector<ProvisionResult> results;
  for (const std::string s : {"batch", "mbs+", "harmony"}) {
    results.push_back(RunStrategy(prov, s, in.apps, o.shards));
    if (s == "batch" && results.back().feasible) batch_cost = results.back().total_cost;
  }
  for (const ProvisionResult& r : results) {
    if (r.strategy == "harmony") harmony_feasible = r.feasible;
    EnforceCheck(in, r, err);
    Json row;
    row["strategy"] = r.strategy;
    row["feasible"] = r.feasible;
    row["infeasible_apps"] = r.infeasible_apps;
    std::vector<std::string> plans;
    for (const GroupPlan& p : r.plans) plans.push_back(PlanString(p));
    row["plans"] = plans;
    double max_violation = 0.0, realized = 0.0;
    if (r.feasible) {
      const SimReport rep = RunPlanSim(r, *in.profile, in.pricing, MakeSimConfig(o, false));
      realized = rep.realized_cost;
      Json apps = Json::array();
      for (const AppStats& a : rep.apps) {
        max_violation = std::max(max_violation, a.violation_rate);
        apps.push_back({{"id", a.id}, {"violation_rate", a.violation_rate},
                        {"p99_latency", a.p99_latency}});
      }
      row["predicted_cost"] = r.total_cost;
      row["realized_cost"] = realized;
      row["normalized_to_batch"] =
          batch_cost > 0.0 ? Json(r.total_cost / batch_cost) : Json(nullptr);
      row["max_violation_rate"] = max_violation;
      row["risk_apps"] = r.risk_apps;
      row["apps"] = apps;
    }
    rows.push_back(row);
    std::snprintf(line, sizeof(line), "%-8s %-8s %14.6e %14.6e %10.3f %14.4f\n",
                  r.strategy.c_str(), r.feasible ? "yes" : "no", r.total_cost,
                  realized, batch_cost > 0.0 ? r.total_cost / batch_cost : 0.0,
                  max_violation);
    table << line;
  }
  Json j;
  j["format_version"] = kFormatVersion;
  Json flags = Json::object();
  for (const auto& [k, v] : meta.flags) flags[k] = v;
  j["config"] = {{"command", meta.command},
                 {"profile_hash", meta.profile_hash},
                 {"pricing", {{"k1", in.pricing.k1}, {"k2", in.pricing.k2}, {"k3", in.pricing.k3}}},
                 {"flags", flags}};
  j["strategies"] = rows;
  Emit(o, j.dump(2) + "\n", out);
  if (!o.out.empty()) out << table.str();
  return harmony_feasible ? kExitOk : kExitInfeasible;
}

void AddProfileOptions(CLI::App* sub, Options& o) {
  sub->add_option("--profile", o.profile, "Profile JSON (overrides the workload's)");
  sub->add_option("--pricing", o.pricing, "Pricing JSON {k1, k2, k3}");
}

void AddSimOptions(CLI::App* sub, Options& o) {
  sub->add_option("--duration", o.duration, "Seconds of simulated arrivals")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  sub->add_option("--replications", o.replications, "Independent replications")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--latency-mode", o.latency_mode, "GPU latency sampling")
      ->capture_default_str()
      ->check(CLI::IsMember({"analytic", "slice-exact"}));
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Cost-minimal CPU/GPU serverless provisioning for batched inference",
               "hetbatch"};
  app.require_subcommand(1);
  Options o;

  CLI::App* fit = app.add_subcommand("fit", "Fit profile coefficients from samples");
  fit->add_option("--samples", o.samples, "CSV samples");
  fit->add_option("--which", o.which, "Coefficient set to fit")
      ->required()
      ->check(CLI::IsMember({"cpu-avg", "cpu-max", "gpu", "tau"}));
  fit->add_option("--profile", o.profile, "Base profile to update");
  fit->add_option("--l0", o.l0, "Base GPU latency (tau estimation)");
  fit->add_option("--observed-lmax", o.observed_lmax, "Observed GPU max latency");
  fit->add_option("--mem", o.mem, "GPU memory of the observation")->capture_default_str();
  fit->add_option("--out", o.out, "Profile to write")->required();

  CLI::App* prov = app.add_subcommand("provision", "Compute a provisioning plan");
  prov->add_option("--workload", o.workload, "Workload JSON")->required();
  AddProfileOptions(prov, o);
  prov->add_option("--strategy", o.strategy, "Planner")
      ->capture_default_str()
      ->check(CLI::IsMember({"harmony", "batch", "mbs+"}));
  prov->add_option("--shards", o.shards, "mbs+ shard count, 0 scans all")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  prov->add_option("--knee-mode", o.knee_mode, "Knee rate evaluation SLO")
      ->capture_default_str()
      ->check(CLI::IsMember({"per-window", "global"}));
  prov->add_option("--out", o.out, "Report path (stdout if omitted)");

  CLI::App* sim = app.add_subcommand("simulate", "Simulate a provisioning plan");
  sim->add_option("--plan", o.plan, "Report written by provision")->required();
  sim->add_option("--workload", o.workload, "Workload JSON");
  AddProfileOptions(sim, o);
  AddSimOptions(sim, o);
  sim->add_option("--trace", o.trace, "Replay `timestamp_seconds,app_id` CSV");
  sim->add_option("--requests-log", o.requests_log, "Per-request CSV log");
  sim->add_option("--out", o.out, "Report path (stdout if omitted)");

  CLI::App* knee = app.add_subcommand("knee", "Knee rate and cost curves");
  AddProfileOptions(knee, o);
  knee->add_option("--workload", o.workload, "Workload JSON for profile and pricing");
  knee->add_option("--slo", o.slo, "SLO of the rate sweep")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  knee->add_option("--rate", o.rate, "Arrival rate of the SLO sweep")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  knee->add_option("--curves", o.curves, "Cost curve CSV path");
  knee->add_option("--out", o.out, "Report path (stdout if omitted)");

  CLI::App* cmp = app.add_subcommand("compare", "Compare all strategies");
  cmp->add_option("--workload", o.workload, "Workload JSON")->required();
  AddProfileOptions(cmp, o);
  AddSimOptions(cmp, o);
  cmp->add_option("--shards", o.shards, "mbs+ shard count, 0 scans all")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  cmp->add_option("--knee-mode", o.knee_mode, "Knee rate evaluation SLO")
      ->capture_default_str()
      ->check(CLI::IsMember({"per-window", "global"}));
  cmp->add_option("--out", o.out, "Report path (stdout if omitted)");

  CLI::App* pred = app.add_subcommand("predict", "Evaluate the latency model");
  AddProfileOptions(pred, o);
  pred->add_option("--kind", o.kind, "Function kind")
      ->capture_default_str()
      ->check(CLI::IsMember({"cpu", "gpu"}));
  pred->add_option("--cores", o.cores, "vCPU cores")->capture_default_str();
  pred->add_option("--mem", o.mem, "GPU memory")->capture_default_str();
  pred->add_option("--batch", o.batch, "Batch size")->capture_default_str();
  pred->add_option("--out", o.out, "Report path (stdout if omitted)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (fit->parsed()) return CmdFit(o, *fit, out, err);
    if (prov->parsed()) return CmdProvision(o, *prov, out, err);
    if (sim->parsed()) return CmdSimulate(o, *sim, out, err);
    if (knee->parsed()) return CmdKnee(o, *knee, out, err);
    if (cmp->parsed()) return CmdCompare(o, *cmp, out, err);
    if (pred->parsed()) return CmdPredict(o, *pred, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kInvariant ? kExitInvariant : kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInvariant;
  }
  return kExitInput;
}

}  // namespace hetbatch::cli
