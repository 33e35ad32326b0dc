#include "hetbatch/io.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hetbatch/error.h"

namespace hetbatch {
namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void ParseFail(const std::string& message) {
  throw Error(ErrorCode::kParse, message);
}

Json ParseJson(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    ParseFail(e.what());
  }
}

template <typename T>
T Get(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    ParseFail(std::string("missing key '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    ParseFail(std::string("key '") + key + "': " + e.what());
  }
}

template <typename T>
T GetOr(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return Get<T>(j, key);
}

std::vector<CpuLatencyCoeffs> ParseCpuTable(const Json& arr, const char* key,
                                            int expect_max) {
  if (!arr.is_array()) ParseFail(std::string(key) + " must be an array");
  if (arr.empty()) return {};
  std::map<int, CpuLatencyCoeffs> by_batch;
  for (const Json& e : arr) {
    const int b = Get<int>(e, "batch");
    CpuLatencyCoeffs c{Get<double>(e, "alpha"), Get<double>(e, "beta"),
                       Get<double>(e, "gamma")};
    if (!by_batch.emplace(b, c).second) {
      ParseFail(std::string(key) + ": duplicate batch " + std::to_string(b));
    }
  }
  std::vector<CpuLatencyCoeffs> out;
  const int top = expect_max > 0 ? expect_max : static_cast<int>(by_batch.size());
  for (int b = 1; b <= top; ++b) {
    auto it = by_batch.find(b);
    if (it == by_batch.end()) {
      ParseFail(std::string(key) + " must cover batches 1.." + std::to_string(top));
    }
    out.push_back(it->second);
  }
  if (static_cast<int>(by_batch.size()) != top) {
    ParseFail(std::string(key) + " has batches outside 1.." + std::to_string(top));
  }
  return out;
}

Json CpuTableJson(const std::vector<CpuLatencyCoeffs>& table) {
  Json arr = Json::array();
  for (size_t i = 0; i < table.size(); ++i) {
    arr.push_back({{"batch", static_cast<int>(i) + 1},
                   {"alpha", table[i].alpha},
                   {"beta", table[i].beta},
                   {"gamma", table[i].gamma}});
  }
  return arr;
}

Json ProfileJson(const ProfileSpec& s) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["cpu_avg"] = CpuTableJson(s.cpu_avg);
  j["cpu_max"] = CpuTableJson(s.cpu_max);
  j["gpu"] = {{"xi1", s.gpu.xi1}, {"xi2", s.gpu.xi2}};
  j["mem"] = {{"mu0", s.mem.mu0}, {"mu1", s.mem.mu1}};
  j["platform"] = {{"m_max", s.platform.m_max},
                   {"tau", s.platform.tau},
                   {"mem_step", s.platform.mem_step}};
  const int cpu_b = static_cast<int>(std::max(s.cpu_avg.size(), s.cpu_max.size()));
  j["ranges"] = {{"cpu_cores", {s.cores.min, s.cores.max, s.cores.step}},
                 {"cpu_batch", {1, cpu_b}},
                 {"gpu_batch", {1, s.gpu_batch_max}},
                 {"gpu_mem_step", s.platform.mem_step}};
  return j;
}

Json PricingJson(const PricingConfig& p) {
  return {{"k1", p.k1}, {"k2", p.k2}, {"k3", p.k3}};
}

PricingConfig PricingFromJson(const Json& j) {
  PricingConfig p{Get<double>(j, "k1"), Get<double>(j, "k2"),
                  Get<double>(j, "k3")};
  if (!(p.k1 >= 0.0) || !(p.k2 >= 0.0) || !(p.k3 >= 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "prices must be >= 0");
  }
  return p;
}

Json MetaJson(const ReportMeta& meta) {
  Json flags = Json::object();
  for (const auto& [k, v] : meta.flags) flags[k] = v;
  return {{"command", meta.command},
          {"profile_hash", meta.profile_hash},
          {"pricing", PricingJson(meta.pricing)},
          {"flags", flags}};
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) {
    const size_t a = field.find_first_not_of(" \t\r");
    const size_t b = field.find_last_not_of(" \t\r");
    out.push_back(a == std::string::npos ? "" : field.substr(a, b - a + 1));
  }
  return out;
}

double ToDouble(const std::string& s, const std::string& where) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) ParseFail(where + ": bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    ParseFail(where + ": bad number '" + s + "'");
  }
}

// Rows of a CSV with the given header; the header line is required.
std::vector<std::vector<std::string>> ReadCsv(const std::string& path,
                                              const std::vector<std::string>& header) {
  std::istringstream in(ReadFile(path));
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool seen_header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> f = SplitCsv(line);
    if (!seen_header) {
      if (f != header) {
        std::string want;
        for (const std::string& h : header) want += (want.empty() ? "" : ",") + h;
        ParseFail(path + ": expected header '" + want + "'");
      }
      seen_header = true;
      continue;
    }
    if (f.size() != header.size()) {
      ParseFail(path + ":" + std::to_string(lineno) + ": expected " +
                std::to_string(header.size()) + " fields");
    }
    rows.push_back(std::move(f));
  }
  return rows;
}

}  // namespace

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kInvalidInput, "cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void WriteFile(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kInvalidInput, "cannot write " + path);
  out << contents;
  if (!out) throw Error(ErrorCode::kInvalidInput, "write failed for " + path);
}

ProfileSpec ParseProfileSpec(const std::string& text) {
  const Json j = ParseJson(text);
  if (!j.is_object()) ParseFail("profile must be an object");
  const int version = GetOr<int>(j, "format_version", kFormatVersion);
  if (version != kFormatVersion) ParseFail("unsupported format_version");
  ProfileSpec s;
  int cpu_b = 0;
  if (j.contains("ranges")) {
    const Json& r = j.at("ranges");
    if (r.contains("cpu_cores")) {
      const auto v = Get<std::vector<double>>(r, "cpu_cores");
      if (v.size() != 3) ParseFail("ranges.cpu_cores must be [min, max, step]");
      s.cores = {v[0], v[1], v[2]};
    }
    if (r.contains("cpu_batch")) {
      const auto v = Get<std::vector<int>>(r, "cpu_batch");
      if (v.size() != 2 || v[0] != 1) ParseFail("ranges.cpu_batch must be [1, B]");
      cpu_b = v[1];
    }
    if (r.contains("gpu_batch")) {
      const auto v = Get<std::vector<int>>(r, "gpu_batch");
      if (v.size() != 2 || v[0] != 1) ParseFail("ranges.gpu_batch must be [1, B]");
      s.gpu_batch_max = v[1];
    }
  }
  if (j.contains("cpu_avg")) s.cpu_avg = ParseCpuTable(j.at("cpu_avg"), "cpu_avg", cpu_b);
  if (j.contains("cpu_max")) s.cpu_max = ParseCpuTable(j.at("cpu_max"), "cpu_max", cpu_b);
  if (j.contains("gpu")) {
    s.gpu = {Get<double>(j.at("gpu"), "xi1"), Get<double>(j.at("gpu"), "xi2")};
  }
  if (j.contains("mem")) {
    s.mem = {Get<double>(j.at("mem"), "mu0"), Get<double>(j.at("mem"), "mu1")};
  }
  if (j.contains("platform")) {
    const Json& p = j.at("platform");
    s.platform.m_max = GetOr<int>(p, "m_max", s.platform.m_max);
    s.platform.tau = GetOr<double>(p, "tau", s.platform.tau);
    s.platform.mem_step = GetOr<int>(p, "mem_step", s.platform.mem_step);
  }
  if (j.contains("ranges") && j.at("ranges").contains("gpu_mem_step")) {
    if (Get<int>(j.at("ranges"), "gpu_mem_step") != s.platform.mem_step) {
      ParseFail("ranges.gpu_mem_step disagrees with platform.mem_step");
    }
  }
  return s;
}

std::string ProfileSpecToJson(const ProfileSpec& spec) {
  return ProfileJson(spec).dump(2) + "\n";
}

ProfileSpec LoadProfileSpec(const std::string& path) {
  return ParseProfileSpec(ReadFile(path));
}

ModelProfile LoadProfile(const std::string& path) {
  return ModelProfile(LoadProfileSpec(path));
}

std::string ProfileHash(const ProfileSpec& spec) {
  const std::string canonical = ProfileJson(spec).dump();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Workload ParseWorkload(const std::string& text, const std::string& base_dir) {
  const Json j = ParseJson(text);
  if (!j.is_object()) ParseFail("workload must be an object");
  const int version = GetOr<int>(j, "format_version", kFormatVersion);
  if (version != kFormatVersion) ParseFail("unsupported format_version");
  Workload w;
  if (!j.contains("apps") || !j.at("apps").is_array()) {
    ParseFail("workload needs an 'apps' array");
  }
  std::set<std::string> ids;
  for (const Json& a : j.at("apps")) {
    AppSpec app{Get<std::string>(a, "id"), Get<double>(a, "slo_seconds"),
                Get<double>(a, "rate_rps")};
    if (!ids.insert(app.id).second) {
      throw Error(ErrorCode::kInvalidInput, "duplicate app id " + app.id);
    }
    if (!(app.slo > 0.0) || !(app.rate > 0.0)) {
      throw Error(ErrorCode::kInvalidInput,
                  "app " + app.id + " needs positive slo and rate");
    }
    w.apps.push_back(app);
  }
  if (w.apps.empty()) throw Error(ErrorCode::kInvalidInput, "no applications");
  if (j.contains("pricing")) {
    w.pricing = PricingFromJson(j.at("pricing"));
    w.has_pricing = true;
  }
  if (j.contains("profile_path")) {
    std::filesystem::path p = Get<std::string>(j, "profile_path");
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    w.profile_path = p.lexically_normal().string();
  }
  return w;
}

Workload LoadWorkload(const std::string& path) {
  return ParseWorkload(ReadFile(path),
                       std::filesystem::path(path).parent_path().string());
}

PricingConfig ParsePricing(const std::string& text) {
  const Json j = ParseJson(text);
  return PricingFromJson(j.contains("pricing") ? j.at("pricing") : j);
}

PricingConfig LoadPricing(const std::string& path) {
  return ParsePricing(ReadFile(path));
}

std::vector<BatchedCpuSample> ReadCpuSamplesCsv(const std::string& path) {
  std::vector<BatchedCpuSample> out;
  for (const auto& f : ReadCsv(path, {"batch", "cores", "latency"})) {
    const double b = ToDouble(f[0], path);
    if (b != std::floor(b) || b < 1) ParseFail(path + ": batch must be a positive integer");
    out.push_back({static_cast<int>(b), {ToDouble(f[1], path), ToDouble(f[2], path)}});
  }
  return out;
}

std::vector<GpuSample> ReadGpuSamplesCsv(const std::string& path) {
  std::vector<GpuSample> out;
  for (const auto& f : ReadCsv(path, {"batch", "latency"})) {
    const double b = ToDouble(f[0], path);
    if (b != std::floor(b) || b < 1) ParseFail(path + ": batch must be a positive integer");
    out.push_back({static_cast<int>(b), ToDouble(f[1], path)});
  }
  return out;
}

std::vector<TraceRecord> ReadTraceCsv(const std::string& path) {
  std::vector<TraceRecord> out;
  for (const auto& f : ReadCsv(path, {"timestamp_seconds", "app_id"})) {
    const double t = ToDouble(f[0], path);
    if (!(t >= 0.0)) ParseFail(path + ": negative timestamp");
    if (!out.empty() && t < out.back().time) {
      ParseFail(path + ": timestamps must be nondecreasing");
    }
    out.push_back({t, f[1]});
  }
  return out;
}

std::string RequestLogCsv(const std::vector<RequestRecord>& records) {
  std::ostringstream os;
  os << "app_id,arrival,dispatch,completion,slo,violated\n";
  char buf[160];
  for (const RequestRecord& r : records) {
    std::snprintf(buf, sizeof(buf), ",%.9f,%.9f,%.9f,%.6g,%d\n", r.arrival,
                  r.dispatch, r.completion, r.slo, r.violated ? 1 : 0);
    os << r.app_id << buf;
  }
  return os.str();
}

std::string ProvisionResultToJson(const ProvisionResult& result,
                                  const ReportMeta& meta) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["config"] = MetaJson(meta);
  j["strategy"] = result.strategy;
  j["feasible"] = result.feasible;
  j["infeasible_apps"] = result.infeasible_apps;
  j["total_cost"] = result.total_cost;
  if (result.strategy == "mbs+") j["shards"] = result.shards;
  double total_rate = 0.0;
  for (const GroupPlan& p : result.plans) total_rate += p.group.rate;
  Json groups = Json::array();
  for (const GroupPlan& p : result.plans) {
    Json apps = Json::array();
    for (size_t i = 0; i < p.group.apps.size(); ++i) {
      const AppSpec& a = p.group.apps[i];
      apps.push_back({{"id", a.id},
                      {"slo", a.slo},
                      {"rate", a.rate},
                      {"timeout", i < p.group.timeouts.size() ? p.group.timeouts[i] : 0.0}});
    }
    groups.push_back({{"plan", PlanString(p)},
                      {"kind", FunctionKindName(p.config.kind)},
                      {"cores", p.config.cores},
                      {"mem", p.config.mem},
                      {"batch", p.batch},
                      {"rate", p.group.rate},
                      {"eta", total_rate > 0.0 ? p.group.rate / total_rate : 0.0},
                      {"eq_timeout", p.eq_timeout},
                      {"latency_avg", p.latency.avg},
                      {"latency_max", p.latency.max},
                      {"predicted_cost", p.predicted_cost},
                      {"apps", apps}});
  }
  j["groups"] = groups;
  if (!result.risk_apps.empty() || result.strategy == "batch") {
    j["risk_apps"] = result.risk_apps;
  }
  if (result.strategy == "harmony") {
    Json log = Json::array();
    for (const MergeStep& m : result.merge_log) {
      log.push_back({{"stage", m.stage},
                     {"apps", m.app_ids},
                     {"accepted", m.accepted},
                     {"total_before", m.total_before},
                     {"total_after", m.total_after}});
    }
    j["merge_log"] = log;
  }
  return j.dump(2) + "\n";
}

ProvisionResult ParseProvisionResult(const std::string& text) {
  const Json j = ParseJson(text);
  if (!j.is_object()) ParseFail("plan must be an object");
  ProvisionResult r;
  r.strategy = Get<std::string>(j, "strategy");
  r.feasible = Get<bool>(j, "feasible");
  r.total_cost = Get<double>(j, "total_cost");
  r.shards = GetOr<int>(j, "shards", 0);
  r.infeasible_apps = GetOr<std::vector<std::string>>(j, "infeasible_apps", {});
  r.risk_apps = GetOr<std::vector<std::string>>(j, "risk_apps", {});
  if (!j.contains("groups") || !j.at("groups").is_array()) {
    ParseFail("plan needs a 'groups' array");
  }
  for (const Json& g : j.at("groups")) {
    GroupPlan p;
    const std::string kind = Get<std::string>(g, "kind");
    if (kind == "cpu") {
      p.config = FunctionConfig::Cpu(Get<double>(g, "cores"));
    } else if (kind == "gpu") {
      p.config = FunctionConfig::Gpu(Get<int>(g, "mem"));
    } else {
      ParseFail("unknown function kind '" + kind + "'");
    }
    p.batch = Get<int>(g, "batch");
    p.eq_timeout = Get<double>(g, "eq_timeout");
    p.predicted_cost = Get<double>(g, "predicted_cost");
    p.latency = {Get<double>(g, "latency_avg"), Get<double>(g, "latency_max")};
    std::vector<AppSpec> apps;
    std::vector<double> timeouts;
    if (!g.contains("apps") || !g.at("apps").is_array()) ParseFail("group needs 'apps'");
    for (const Json& a : g.at("apps")) {
      apps.push_back({Get<std::string>(a, "id"), Get<double>(a, "slo"),
                      Get<double>(a, "rate")});
      timeouts.push_back(Get<double>(a, "timeout"));
    }
    p.group = Group::Of(apps);
    // Group::Of is a stable sort; reports are written in sorted order.
    for (size_t i = 0; i < apps.size(); ++i) {
      if (p.group.apps[i].id != apps[i].id) ParseFail("group apps not sorted by slo");
    }
    p.group.timeouts = timeouts;
    r.plans.push_back(std::move(p));
  }
  return r;
}

std::string SimReportToJson(const SimReport& report, const ReportMeta& meta) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["config"] = MetaJson(meta);
  Json apps = Json::array();
  for (const AppStats& a : report.apps) {
    apps.push_back({{"id", a.id},
                    {"slo", a.slo},
                    {"count", a.count},
                    {"mean_latency", a.mean_latency},
                    {"p99_latency", a.p99_latency},
                    {"max_latency", a.max_latency},
                    {"mean_wait", a.mean_wait},
                    {"wait_violations", a.wait_violations},
                    {"exec_violations", a.exec_violations},
                    {"violation_rate", a.violation_rate}});
  }
  Json groups = Json::array();
  for (const GroupStats& g : report.groups) {
    groups.push_back({{"plan", g.plan},
                      {"requests", g.requests},
                      {"dispatches", g.dispatches},
                      {"mean_batch", g.mean_batch},
                      {"realized_cost", g.realized_cost},
                      {"predicted_cost", g.predicted_cost},
                      {"mean_first_wait", g.mean_first_wait},
                      {"eq_timeout", g.eq_timeout},
                      {"fallback_draws", g.fallback_draws}});
  }
  j["apps"] = apps;
  j["groups"] = groups;
  j["totals"] = {{"requests", report.total_requests},
                 {"realized_cost", report.realized_cost},
                 {"predicted_cost", report.predicted_cost},
                 {"ignored_trace_records", report.ignored_trace_records}};
  j["annotations"] = report.annotations;
  return j.dump(2) + "\n";
}

}  // namespace hetbatch
