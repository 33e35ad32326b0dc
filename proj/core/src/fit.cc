#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "hetbatch/error.h"
#include "hetbatch/perfmodel.h"
#include "hetbatch/profile.h"

namespace hetbatch {
namespace {

constexpr int kGammaGridPoints = 200;
constexpr double kGoldenTolerance = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Candidate {
  CpuLatencyCoeffs coeffs;
  double ssr = kInf;
};

// Weighted regression of log(L - gamma) on cores, weights (L - gamma)^2 so
// residuals approximate linear-space ones; scored in linear space.
Candidate FitForGamma(const std::vector<CpuSample>& samples, double gamma) {
  double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const CpuSample& s : samples) {
    const double d = s.latency - gamma;
    if (!(d > 0.0)) return {};
    const double w = d * d;
    const double y = std::log(d);
    sw += w;
    sx += w * s.cores;
    sy += w * y;
    sxx += w * s.cores * s.cores;
    sxy += w * s.cores * y;
  }
  const double denom = sw * sxx - sx * sx;
  if (!(denom > 0.0)) return {};
  const double slope = (sw * sxy - sx * sy) / denom;
  if (!(slope < 0.0)) return {};
  const double intercept = (sy - slope * sx) / sw;
  Candidate c;
  c.coeffs = {std::exp(intercept), -1.0 / slope, gamma};
  c.ssr = 0.0;
  for (const CpuSample& s : samples) {
    const double r = c.coeffs.Eval(s.cores) - s.latency;
    c.ssr += r * r;
  }
  return c;
}

}  // namespace

CpuFit FitCpuCoeffs(const std::vector<CpuSample>& samples) {
  std::set<double> distinct;
  double min_latency = kInf;
  double mean = 0.0;
  for (const CpuSample& s : samples) {
    if (!(s.latency > 0.0) || !std::isfinite(s.latency)) {
      throw Error(ErrorCode::kInvalidSample, "latency must be positive");
    }
    if (!std::isfinite(s.cores)) {
      throw Error(ErrorCode::kInvalidSample, "cores must be finite");
    }
    distinct.insert(s.cores);
    min_latency = std::min(min_latency, s.latency);
    mean += s.latency;
  }
  if (distinct.size() < 4) {
    throw Error(ErrorCode::kInsufficientData,
                "need at least 4 distinct core counts");
  }
  mean /= static_cast<double>(samples.size());

  // Coarse scan over gamma in [0, min L); strict < keeps the smaller gamma.
  const double width = min_latency / kGammaGridPoints;
  Candidate best;
  int best_k = -1;
  for (int k = 0; k < kGammaGridPoints; ++k) {
    Candidate c = FitForGamma(samples, width * k);
    if (c.ssr < best.ssr) {
      best = c;
      best_k = k;
    }
  }

  if (best_k >= 0) {
    double lo = std::max(0.0, width * (best_k - 1));
    double hi = std::min(min_latency * (1.0 - 1e-12), width * (best_k + 1));
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - phi * (hi - lo);
    double x2 = lo + phi * (hi - lo);
    double f1 = FitForGamma(samples, x1).ssr;
    double f2 = FitForGamma(samples, x2).ssr;
    while (hi - lo > kGoldenTolerance) {
      if (f1 <= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - phi * (hi - lo);
        f1 = FitForGamma(samples, x1).ssr;
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + phi * (hi - lo);
        f2 = FitForGamma(samples, x2).ssr;
      }
    }
    Candidate refined = FitForGamma(samples, 0.5 * (lo + hi));
    if (refined.ssr < best.ssr) best = refined;
  }

  double flat_ssr = 0.0;
  for (const CpuSample& s : samples) {
    flat_ssr += (s.latency - mean) * (s.latency - mean);
  }

  CpuFit fit;
  if (flat_ssr <= best.ssr) {
    fit.coeffs = {0.0, 1.0, mean};
    fit.flat = true;
    fit.rms = std::sqrt(flat_ssr / samples.size());
  } else {
    fit.coeffs = best.coeffs;
    fit.rms = std::sqrt(best.ssr / samples.size());
  }
  return fit;
}

GpuFit FitGpuCoeffs(const std::vector<GpuSample>& samples) {
  std::set<int> distinct;
  for (const GpuSample& s : samples) {
    if (!(s.latency > 0.0) || !std::isfinite(s.latency)) {
      throw Error(ErrorCode::kInvalidSample, "latency must be positive");
    }
    if (s.batch < 1) {
      throw Error(ErrorCode::kInvalidSample, "batch must be >= 1");
    }
    distinct.insert(s.batch);
  }
  if (distinct.size() < 2) {
    throw Error(ErrorCode::kInsufficientData,
                "need at least 2 distinct batch sizes");
  }
  const double n = static_cast<double>(samples.size());
  double mx = 0.0, my = 0.0;
  for (const GpuSample& s : samples) {
    mx += s.batch;
    my += s.latency;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const GpuSample& s : samples) {
    sxx += (s.batch - mx) * (s.batch - mx);
    sxy += (s.batch - mx) * (s.latency - my);
  }
  GpuFit fit;
  fit.coeffs.xi1 = sxy / sxx;
  fit.coeffs.xi2 = my - fit.coeffs.xi1 * mx;
  double ssr = 0.0;
  for (const GpuSample& s : samples) {
    const double r = fit.coeffs.Eval(s.batch) - s.latency;
    ssr += r * r;
  }
  fit.rms = std::sqrt(ssr / n);
  if (!(fit.coeffs.xi1 > 0.0)) {
    fit.warnings.push_back("ill-conditioned profile: non-positive slope xi1");
  }
  if (fit.coeffs.xi2 < 0.0) {
    fit.warnings.push_back("ill-conditioned profile: negative intercept xi2");
  }
  return fit;
}

TauEstimate EstimateTau(double l0, double observed_lmax, int mem, int m_max,
                        double tau_lo, double tau_hi) {
  if (!(l0 > 0.0) || !(observed_lmax > l0)) {
    throw Error(ErrorCode::kInvalidInput, "need observed_lmax > l0 > 0");
  }
  if (mem < 1 || mem >= m_max) {
    throw Error(ErrorCode::kInvalidInput, "need 1 <= mem < m_max");
  }
  if (!(tau_lo > 0.0) || !(tau_hi > tau_lo)) {
    throw Error(ErrorCode::kInvalidInput, "need 0 < tau_lo < tau_hi");
  }
  const double preempted = static_cast<double>(m_max - mem);
  auto predict = [&](double tau) {
    return GpuMaxLatency(l0, mem, m_max, tau);
  };

  // On the branch with k slice rounds the model is linear in tau, so each k
  // has at most one exact solution; keep those whose ceiling really is k.
  TauEstimate est;
  std::vector<std::pair<double, bool>> exact;  // (tau, on a slice boundary)
  for (int k = 1;; ++k) {
    const double tau = (observed_lmax - l0) / (k * preempted);
    if (tau <= tau_lo) break;
    if (tau > tau_hi) continue;
    const double rounds = l0 / (mem * tau);
    if (CeilSlices(rounds) != k) continue;
    const bool boundary = std::abs(rounds - std::round(rounds)) <=
                          1e-9 * std::max(1.0, rounds);
    exact.emplace_back(tau, boundary);
    est.candidates.push_back(tau);
  }

  if (!exact.empty()) {
    // Largest interior solution first; if every solution sits on a slice
    // boundary (observed == l0 * m_max / mem) pick the two-round reading.
    for (const auto& [tau, boundary] : exact) {
      if (!boundary) {
        est.tau = tau;
        est.predicted = predict(tau);
        est.ambiguous = exact.size() > 1;
        return est;
      }
    }
    est.ambiguous = exact.size() > 1;
    est.tau = exact.front().first;
    for (const auto& [tau, boundary] : exact) {
      if (CeilSlices(l0 / (mem * tau)) == 2) est.tau = tau;
    }
    est.predicted = predict(est.tau);
    return est;
  }

  // No exact solution: dense log scan for the closest prediction.
  constexpr int kScanPoints = 20000;
  const double ratio = std::log(tau_hi / tau_lo);
  double best_tau = tau_hi;
  double best_err = std::abs(predict(tau_hi) - observed_lmax);
  for (int i = 1; i < kScanPoints; ++i) {
    const double tau = tau_lo * std::exp(ratio * i / kScanPoints);
    const double err = std::abs(predict(tau) - observed_lmax);
    if (err < best_err) {
      best_err = err;
      best_tau = tau;
    }
  }
  if (best_err > 0.1 * observed_lmax) {
    throw Error(ErrorCode::kEstimationFailure,
                "no tau in range predicts the observed max latency within 10%");
  }
  est.tau = best_tau;
  est.predicted = predict(best_tau);
  return est;
}

}  // namespace hetbatch
