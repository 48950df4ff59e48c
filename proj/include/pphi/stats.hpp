#pragma once

// Small statistics toolbox for chain output: autocorrelation-aware errors,
// Kolmogorov-Smirnov against a reference CDF, jackknife, least squares.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace pphi {

struct SeriesStats {
  double mean = 0;
  double var = 0;  // plain sample variance
  double tau = 1;  // integrated autocorrelation time
  double se = 0;   // autocorrelation-adjusted error of the mean
  int64_t n = 0;
};

// Sokal windowing: stop at the first W with W >= 5 * tau_W.
inline SeriesStats series_stats(const std::vector<double>& x) {
  SeriesStats out;
  out.n = int64_t(x.size());
  if (out.n < 2) throw std::invalid_argument("series_stats: need at least 2 samples");
  for (double v : x) out.mean += v;
  out.mean /= double(out.n);
  for (double v : x) out.var += (v - out.mean) * (v - out.mean);
  out.var /= double(out.n - 1);
  if (out.var <= 0) {
    out.tau = 1;
    out.se = 0;
    return out;
  }
  double tau = 1;
  int64_t wmax = std::min<int64_t>(out.n / 4, 10000);
  for (int64_t w = 1; w <= wmax; ++w) {
    double c = 0;
    for (int64_t t = 0; t + w < out.n; ++t)
      c += (x[t] - out.mean) * (x[t + w] - out.mean);
    c /= double(out.n - w) * out.var;
    tau += 2 * c;
    if (double(w) >= 5 * tau) break;
  }
  out.tau = std::max(1.0, tau);
  out.se = std::sqrt(out.var * out.tau / double(out.n));
  return out;
}

inline double normal_cdf(double x, double mean = 0, double sd = 1) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

// two-sided Kolmogorov distribution tail Q(t) = 2 sum (-1)^{k-1} e^{-2k^2t^2}
inline double kolmogorov_q(double t) {
  if (t < 1e-3) return 1.0;
  double q = 0;
  for (int k = 1; k <= 100; ++k) {
    double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * t * t);
    q += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0;
  double p_value = 1;
};

inline KsResult ks_test(std::vector<double> samples,
                        const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_test: empty sample");
  std::sort(samples.begin(), samples.end());
  double n = double(samples.size());
  double d = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    double f = cdf(samples[i]);
    d = std::max(d, std::abs(f - double(i) / n));
    d = std::max(d, std::abs(double(i + 1) / n - f));
  }
  KsResult out;
  out.statistic = d;
  double t = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  out.p_value = kolmogorov_q(t);
  return out;
}

// standard error from delete-one jackknife replicates
inline double jackknife_se(const std::vector<double>& replicates) {
  size_t b = replicates.size();
  if (b < 2) throw std::invalid_argument("jackknife_se: need >= 2 replicates");
  double m = 0;
  for (double r : replicates) m += r;
  m /= double(b);
  double s = 0;
  for (double r : replicates) s += (r - m) * (r - m);
  return std::sqrt(double(b - 1) / double(b) * s);
}

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double slope_se = 0;
};

inline LinearFit linear_fit(const std::vector<double>& x,
                            const std::vector<double>& y) {
  size_t n = x.size();
  if (n != y.size() || n < 2) throw std::invalid_argument("linear_fit: bad input");
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  if (n > 2) {
    double ss = 0;
    for (size_t i = 0; i < n; ++i) {
      double r = y[i] - out.intercept - out.slope * x[i];
      ss += r * r;
    }
    out.slope_se = std::sqrt(ss / double(n - 2) / sxx);
  }
  return out;
}

} // namespace pphi
