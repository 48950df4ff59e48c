#pragma once

// Exact samplers for the regularized free fields on S_R, the counterterms
// c_{R,N} and chat_{R,N} with certified truncation tails, and the
// convolution-type UV cutoff built from a compactly supported bump of the
// geodesic distance (the cutoff that preserves reflection positivity).

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <gsl/gsl_sf_legendre.h>

#include "pphi/rng.hpp"
#include "pphi/sphere.hpp"

namespace pphi {

struct CountertermResult {
  double value = 0;      // partial sum over l <= L_max
  double tail_bound = 0; // certified bound on the dropped tail
};

// Certified upper bound for sum_{l > L} (2l+1)/((1+lam_l)(1+lam_l/N^2)^2),
// lam_l = l(l+1)/R^2, by comparison with the integral in s = u(u+1)/R^2.
inline double counterterm_tail_bound(double R, double N, int L_max) {
  double s0 = laplacian_eigenvalue(L_max, R);
  double a = 1.0 / (N * N);
  double integral;
  if (std::abs(1.0 - a) < 1e-6) {
    // 1+as >= a(1+s), so the integrand is <= a^-2 (1+s)^-3
    integral = 1.0 / (a * a * 2.0 * (1.0 + s0) * (1.0 + s0));
  } else {
    // antiderivative F(s) = A ln((1+s)/(1+as)) + (1/(1-a)) / (1+as), A = (1-a)^-2
    double A = 1.0 / ((1.0 - a) * (1.0 - a));
    double F_inf = A * std::log(1.0 / a);
    double F_s0 = A * std::log((1.0 + s0) / (1.0 + a * s0)) + (1.0 / (1.0 - a)) / (1.0 + a * s0);
    integral = F_inf - F_s0;
  }
  // the comparison needs the summand decreasing from l = L_max on
  auto f = [&](double u) {
    double lam = u * (u + 1.0) / (R * R);
    double kn = 1.0 + lam / (N * N);
    return (2.0 * u + 1.0) / ((1.0 + lam) * kn * kn);
  };
  if (!(f(L_max + 1) <= f(L_max)) || s0 < 3.0)
    throw std::invalid_argument("counterterm: L_max too small to certify the tail");
  return R * R * integral;
}

/// c_{R,N} truncated at L_max, with a certified bound on the dropped tail.
inline CountertermResult counterterm(double R, double N, int L_max) {
  if (R <= 0 || N < 1) throw std::invalid_argument("counterterm: need R > 0, N >= 1");
  double s = 0;
  for (int l = L_max; l >= 0; --l) {
    double lam = laplacian_eigenvalue(l, R);
    double kn = 1.0 + lam / (N * N);
    s += (2.0 * l + 1.0) / ((1.0 + lam) * kn * kn);
  }
  CountertermResult out;
  out.value = s / (4.0 * pi * R * R);
  try {
    out.tail_bound = counterterm_tail_bound(R, N, L_max) / (4.0 * pi * R * R);
  } catch (const std::invalid_argument&) {
    out.tail_bound = HUGE_VAL; // not certifiable at this truncation
  }
  return out;
}

inline double counterterm_checked(double R, double N, int L_max, double tol = 1e-8) {
  CountertermResult c = counterterm(R, N, L_max);
  if (!(c.tail_bound < tol))
    throw std::runtime_error("counterterm: truncation tail not below tolerance");
  return c.value;
}

// Generalized trace sum sum_l (2l+1) / (2R^2 (1+lam_l)(1+lam_l/N^2)^kappa):
// explicit sum out to lam_l ~ 100 N^2, then the continuum tail by quadrature
// in s = u(u+1)/R^2 (log substitution) plus an analytic super-tail estimate.
inline double trace_sum_generalized(double R, double N, double kappa) {
  double s = 0;
  int l = 0;
  while (l < 32 || laplacian_eigenvalue(l, R) < 100.0 * N * N) {
    double lam = laplacian_eigenvalue(l, R);
    double kn = 1.0 + lam / (N * N);
    s += (2.0 * l + 1.0) / (2.0 * R * R * (1.0 + lam) * std::pow(kn, kappa));
    ++l;
  }
  double s_star = (l - 0.5) * (l + 0.5) / (R * R); // midpoint continuation
  double s_hi = std::max(1e10 * N * N, 1e10);
  std::vector<double> x, w;
  gauss_legendre(400, x, w);
  double ta = std::log1p(s_star), tb = std::log1p(s_hi);
  double tail = 0;
  for (size_t q = 0; q < x.size(); ++q) {
    double t = 0.5 * (ta + tb) + 0.5 * (tb - ta) * x[q];
    double ss = std::expm1(t);
    double f = 1.0 / ((1.0 + ss) * std::pow(1.0 + ss / (N * N), kappa));
    tail += w[q] * f * (1.0 + ss); // jacobian ds = (1+s) dt
  }
  tail *= 0.5 * (tb - ta);
  tail += std::pow(N, 2.0 * kappa) / (kappa * std::pow(s_hi, kappa));
  return s + 0.5 * tail;
}

// ---------------------------------------------------------------------------
// bump profile for the convolution cutoff

// h = 1 on [-1/2,1/2], C-infinity step decay on [1/2, 1/2+beta], 0 beyond.
// beta is the transition width; the auto constructor solves for the width
// that gives 2 pi int_0^inf h(t) t dt = 1.
struct BumpProfile {
  double beta = 0.25;

  double theta_end() const { return 0.5 + beta; }

  static double smooth_step(double t) {
    if (t <= 0) return 0.0;
    if (t >= 1) return 1.0;
    double a = std::exp(-1.0 / t);
    double b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
  }

  double operator()(double theta) const {
    double t = std::abs(theta);
    if (t <= 0.5) return 1.0;
    if (t >= theta_end()) return 0.0;
    return 1.0 - smooth_step((t - 0.5) / beta);
  }
};

/// 2 pi int_0^inf h(t) t dt by Gauss-Legendre on the plateau + transition.
inline double bump_mass(const BumpProfile& h) {
  double plateau = pi / 4.0; // 2 pi int_0^{1/2} t dt
  std::vector<double> x, w;
  gauss_legendre(96, x, w);
  double a = 0.5, b = h.theta_end();
  double trans = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    double t = 0.5 * (a + b) + 0.5 * (b - a) * x[i];
    trans += w[i] * h(t) * t;
  }
  trans *= 0.5 * (b - a) * 2.0 * pi;
  return plateau + trans;
}

/// Solve for the transition width giving unit mass (bisection + secant).
inline BumpProfile build_bump() {
  double lo = 1e-6, hi = 0.5;
  auto res = [](double beta) { return bump_mass(BumpProfile{beta}) - 1.0; };
  double flo = res(lo), fhi = res(hi);
  if (!(flo < 0 && fhi > 0))
    throw std::runtime_error("build_bump: root not bracketed in (0, 1/2]");
  double beta = 0.25;
  for (int it = 0; it < 200; ++it) {
    beta = 0.5 * (lo + hi);
    double f = res(beta);
    if (std::abs(f) < 1e-12 || hi - lo < 1e-15) break;
    if (f < 0)
      lo = beta;
    else
      hi = beta;
  }
  BumpProfile out{beta};
  if (std::abs(bump_mass(out) - 1.0) > 1e-10)
    throw std::runtime_error("build_bump: normalization residual too large");
  return out;
}

inline BumpProfile build_bump(double beta) {
  if (!(beta > 0 && beta <= 0.5)) throw std::invalid_argument("build_bump: beta out of (0, 1/2]");
  return BumpProfile{beta};
}

// ---------------------------------------------------------------------------
// convolution cutoff khat_l = 2 pi int_0^1 P_l(cos(t/RN)) RN sin(t/RN) h(t) dt

namespace detail {

inline std::vector<double> hat_multiplier_fixed(double R, double N,
                                                const BumpProfile& h, int L_max,
                                                int nodes_per_panel) {
  std::vector<double> k(L_max + 1, 0.0);
  std::vector<double> x, w, pl(L_max + 1);
  gauss_legendre(nodes_per_panel, x, w);
  const double panels[2][2] = {{0.0, 0.5}, {0.5, h.theta_end()}};
  for (auto& p : panels) {
    double a = p[0], b = p[1];
    for (size_t q = 0; q < x.size(); ++q) {
      double t = 0.5 * (a + b) + 0.5 * (b - a) * x[q];
      double u = t / (R * N);
      double fac = 0.5 * (b - a) * w[q] * 2.0 * pi * R * N * std::sin(u) * h(t);
      gsl_sf_legendre_Pl_array(L_max, std::cos(u), pl.data());
      for (int l = 0; l <= L_max; ++l) k[l] += fac * pl[l];
    }
  }
  return k;
}

} // namespace detail

/// Zonal eigenvalues of the convolution cutoff; quadrature refined until the
/// multiplier is stable to `tol` in the sup norm. The default tolerance sits
/// above the Legendre-recurrence round-off floor, which grows with degree.
inline ZonalMultiplier hat_multiplier(double R, double N, const BumpProfile& h,
                                      int L_max, double tol = 0) {
  if (R <= 0 || N < 1) throw std::invalid_argument("hat_multiplier: need R > 0, N >= 1");
  if (tol <= 0) tol = std::max(1e-12, 3e-14 * L_max);
  int nodes = 48 + int(4.0 * L_max / (R * N));
  std::vector<double> cur = detail::hat_multiplier_fixed(R, N, h, L_max, nodes);
  for (int it = 0; it < 8; ++it) {
    int finer = nodes + nodes / 2;
    std::vector<double> next = detail::hat_multiplier_fixed(R, N, h, L_max, finer);
    double diff = 0;
    for (int l = 0; l <= L_max; ++l) diff = std::max(diff, std::abs(next[l] - cur[l]));
    cur = std::move(next);
    nodes = finer;
    if (diff < tol) {
      ZonalMultiplier mu;
      mu.values = std::move(cur);
      return mu;
    }
  }
  throw std::runtime_error("hat_multiplier: quadrature did not converge");
}

/// chat_{R,N} truncated at L_max; tail bounded through the fitted constant in
/// |khat_l| <= C / (1 + lam_l/N^2).
inline CountertermResult hat_counterterm(double R, double N, const BumpProfile& h,
                                         int L_max) {
  ZonalMultiplier k = hat_multiplier(R, N, h, L_max);
  double s = 0, cfit = 0;
  for (int l = 0; l <= L_max; ++l) {
    double lam = laplacian_eigenvalue(l, R);
    s += (2.0 * l + 1.0) * k.values[l] * k.values[l] / (1.0 + lam);
    cfit = std::max(cfit, std::abs(k.values[l]) * (1.0 + lam / (N * N)));
  }
  CountertermResult out;
  out.value = s / (4.0 * pi * R * R);
  try {
    out.tail_bound = cfit * cfit * counterterm_tail_bound(R, N, L_max) / (4.0 * pi * R * R);
  } catch (const std::invalid_argument&) {
    out.tail_bound = HUGE_VAL;
  }
  return out;
}

// ---------------------------------------------------------------------------
// cutoff application and sampling

struct CutoffSpec {
  enum class Kind { spectral, convolution };
  double N = 1;
  Kind kind = Kind::spectral;

  CutoffSpec(double N_, Kind kind_) : N(N_), kind(kind_) {
    if (N_ < 1) throw std::invalid_argument("CutoffSpec: N must be >= 1");
  }
};

inline SpectralField apply_cutoff(const SpectralField& X, const CutoffSpec& cut,
                                  const BumpProfile* bump = nullptr) {
  if (cut.kind == CutoffSpec::Kind::spectral)
    return apply_multiplier(X, build_multiplier(MultiplierKind::K_RN, X.R, cut.N, X.L_max));
  if (bump == nullptr)
    throw std::invalid_argument("apply_cutoff: convolution cutoff needs a bump profile");
  return apply_multiplier(X, hat_multiplier(X.R, cut.N, *bump, X.L_max));
}

// Draws independent centered Gaussians per mode, Var = covariance[l].
// Value-like: clone with a new stream id to parallelize.
struct GaussianSampler {
  double R;
  int L_max;
  ZonalMultiplier covariance;
  RngStream stream;
  uint64_t next_draw = 0;

  GaussianSampler(double R_, int L_max_, ZonalMultiplier cov, RngStream s)
      : R(R_), L_max(L_max_), covariance(std::move(cov)), stream(s) {
    if (covariance.band_limit() != L_max)
      throw std::invalid_argument("GaussianSampler: covariance length mismatch");
    for (double v : covariance.values)
      if (!(v >= 0)) throw std::invalid_argument("GaussianSampler: covariance must be >= 0");
  }

  SpectralField sample_at(uint64_t draw) const {
    SpectralField X(R, L_max);
    int n = X.n_coeffs();
    int blocks = (n + 1) / 2;
    for (int b = 0; b < blocks; ++b) {
      double z0, z1;
      stream.normal_pair(draw * uint64_t(blocks) + b, z0, z1);
      X.coeffs[2 * b] = z0;
      if (2 * b + 1 < n) X.coeffs[2 * b + 1] = z1;
    }
    for (int l = 0; l <= L_max; ++l) {
      double sd = std::sqrt(covariance.values[l]);
      for (int m = -l; m <= l; ++m) X(l, m) *= sd;
    }
    return X;
  }

  SpectralField sample() { return sample_at(next_draw++); }
};

inline SpectralField sample_free(GaussianSampler& s) { return s.sample(); }

} // namespace pphi
