#pragma once

// Hermite/Wick calculus: Wick powers x^{:m:}, the Wick-ordered interaction
// polynomial P(tau, c) and its derivative, the remainder coefficients a_{m,l}
// of the Da Prato-Debussche expansion, interaction functionals Y over full or
// half spheres, and Monte Carlo checks of Wick orthogonality and the
// hypercontractive moment bound. Pure functions, safe to call concurrently.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pphi/rng.hpp"
#include "pphi/sphere.hpp"

namespace pphi {

// exact factorials up to 16; higher degrees are rejected (overflow policy)
inline double factorial(int k) {
  static const double table[] = {1., 1., 2., 6., 24., 120., 720., 5040., 40320.,
                                 362880., 3628800., 39916800., 479001600.,
                                 6227020800., 87178291200., 1307674368000.,
                                 20922789888000.};
  if (k < 0 || k > 16) throw std::invalid_argument("factorial: degree outside [0,16]");
  return table[k];
}

// interaction polynomial P(tau) = sum a_m tau^m, n even >= 4, a_n = 1/n
struct PolynomialSpec {
  int n = 4;
  std::vector<double> a; // a_0 .. a_n
  double lambda = 1.0;   // coupling, multiplies P only (not the g-term)

  PolynomialSpec(int n_, std::vector<double> a_, double lambda_ = 1.0)
      : n(n_), a(std::move(a_)), lambda(lambda_) {
    if (n < 4 || n % 2 != 0 || n > 16)
      throw std::invalid_argument("PolynomialSpec: degree must be even, in [4,16]");
    if (int(a.size()) != n + 1) throw std::invalid_argument("PolynomialSpec: need n+1 coefficients");
    if (a[n] != 1.0 / n) throw std::invalid_argument("PolynomialSpec: a_n must equal 1/n");
    if (!(lambda > 0)) throw std::invalid_argument("PolynomialSpec: coupling must be positive");
  }

  static PolynomialSpec pure(int n_, double lambda_ = 1.0) {
    std::vector<double> a_(n_ + 1, 0.0);
    a_[n_] = 1.0 / n_;
    return PolynomialSpec(n_, std::move(a_), lambda_);
  }
};

/// Wick power x^{:m:} = sum_k (-1)^k m! / ((m-2k)! k! 2^k) c^k x^{m-2k}.
inline double wick_power_scalar(double x, int m, double c) {
  double s = 0;
  for (int k = 0; k <= m / 2; ++k) {
    double coef = factorial(m) / (factorial(m - 2 * k) * factorial(k) * std::pow(2.0, k));
    s += ((k % 2) ? -1.0 : 1.0) * coef * std::pow(c, k) * std::pow(x, m - 2 * k);
  }
  return s;
}

inline std::vector<double> wick_power(const std::vector<double>& x, int m, double c) {
  if (m < 0) throw std::invalid_argument("wick_power: m < 0");
  if (c < 0) throw std::invalid_argument("wick_power: c < 0");
  std::vector<double> out(x.size());
  // Horner in x^2 over the k-sum, evaluated per point
  std::vector<double> coef(m / 2 + 1);
  for (int k = 0; k <= m / 2; ++k)
    coef[k] = ((k % 2) ? -1.0 : 1.0) * factorial(m) /
              (factorial(m - 2 * k) * factorial(k) * std::pow(2.0, k)) * std::pow(c, k);
  for (size_t i = 0; i < x.size(); ++i) {
    double xi = x[i];
    double x2 = xi * xi;
    double s = coef[0]; // k = 0 carries the highest power of x^2
    for (int k = 1; k <= m / 2; ++k) s = s * x2 + coef[k];
    if (m % 2 == 1) s *= xi;
    out[i] = s;
  }
  return out;
}

/// P(tau, c) = sum_m a_m tau^{:m:}; reduces to P(tau) at c = 0.
inline double wick_polynomial_scalar(double tau, const PolynomialSpec& spec, double c) {
  double s = 0;
  for (int m = 0; m <= spec.n; ++m)
    if (spec.a[m] != 0) s += spec.a[m] * wick_power_scalar(tau, m, c);
  return s;
}

inline std::vector<double> wick_polynomial(const std::vector<double>& tau,
                                           const PolynomialSpec& spec, double c) {
  std::vector<double> out(tau.size(), 0.0);
  for (int m = 0; m <= spec.n; ++m) {
    if (spec.a[m] == 0) continue;
    std::vector<double> p = wick_power(tau, m, c);
    for (size_t i = 0; i < out.size(); ++i) out[i] += spec.a[m] * p[i];
  }
  return out;
}

/// P'(tau, c) via the Hermite derivative relation d tau^{:m:} = m tau^{:m-1:}.
inline std::vector<double> wick_polynomial_prime(const std::vector<double>& tau,
                                                 const PolynomialSpec& spec, double c) {
  std::vector<double> out(tau.size(), 0.0);
  for (int m = 1; m <= spec.n; ++m) {
    if (spec.a[m] == 0) continue;
    std::vector<double> p = wick_power(tau, m - 1, c);
    for (size_t i = 0; i < out.size(); ++i) out[i] += spec.a[m] * m * p[i];
  }
  return out;
}

// probabilists' Hermite polynomials He_m, three-term recurrence
inline double hermite_he(int m, double x) {
  if (m == 0) return 1.0;
  double hm1 = 1.0, h = x;
  for (int k = 1; k < m; ++k) {
    double next = x * h - k * hm1;
    hm1 = h;
    h = next;
  }
  return h;
}

// smallest admissible A on the grid for P(tau,c) >= tau^n/2n - A c^{n/2}
struct LowerBoundFit {
  double A = 0;         // from the refined grid
  double A_coarse = 0;  // from the base grid
};

inline LowerBoundFit lower_bound_fit(const PolynomialSpec& spec, double tau_max,
                                     double c_min, double c_max,
                                     int n_tau = 400, int n_c = 60) {
  if (!(c_min > 1.0)) throw std::invalid_argument("lower_bound_fit: c range must lie in (1, inf)");
  auto sweep = [&](int nt, int nc) {
    double A = 0;
    for (int ic = 0; ic <= nc; ++ic) {
      double c = c_min + (c_max - c_min) * ic / nc;
      double cn2 = std::pow(c, spec.n / 2.0);
      for (int it = 0; it <= nt; ++it) {
        double tau = -tau_max + 2.0 * tau_max * it / nt;
        double defect = std::pow(tau, spec.n) / (2.0 * spec.n) -
                        wick_polynomial_scalar(tau, spec, c);
        A = std::max(A, defect / cn2);
      }
    }
    return A;
  };
  LowerBoundFit out;
  out.A_coarse = sweep(n_tau, n_c);
  out.A = sweep(2 * n_tau, 2 * n_c);
  return out;
}

// a_{m,l} = -a_{m+1} (m+1)! / ((m-l)! l!), l in [0, n-2], m in [l, n-1]
struct RemainderCoeffs {
  int n = 4;
  std::vector<double> v; // (m, l) -> m*(n-1) + l, zero where undefined

  double operator()(int m, int l) const { return v[size_t(m) * (n - 1) + l]; }
};

inline RemainderCoeffs remainder_coeffs(const PolynomialSpec& spec) {
  RemainderCoeffs out;
  out.n = spec.n;
  out.v.assign(size_t(spec.n) * (spec.n - 1), 0.0);
  for (int l = 0; l <= spec.n - 2; ++l)
    for (int m = l; m <= spec.n - 1; ++m)
      out.v[size_t(m) * (spec.n - 1) + l] =
          -spec.a[m + 1] * factorial(m + 1) / (factorial(m - l) * factorial(l));
  return out;
}

// ---------------------------------------------------------------------------
// interaction functionals

struct WickContext {
  double c = 0;                        // counterterm used inside Wick powers
  std::optional<SpectralField> g;      // source; absent means g = 0
};

// node masks for S^{+-}_{R,N} = { +-x1 > 1/N } and the equatorial strip
struct Region {
  enum class Kind { all, plus, minus, strip };
  Kind kind = Kind::all;
  double margin = 0; // 1/N for the half-sphere family

  static Region all() { return {Kind::all, 0}; }
  static Region plus(double N) { return {Kind::plus, 1.0 / N}; }
  static Region minus(double N) { return {Kind::minus, 1.0 / N}; }
  static Region strip(double N) { return {Kind::strip, 1.0 / N}; }

  bool contains_x1(double x1) const {
    switch (kind) {
      case Kind::all: return true;
      case Kind::plus: return x1 > margin;
      case Kind::minus: return x1 < -margin;
      case Kind::strip: return std::abs(x1) <= margin;
    }
    return false;
  }
};

// Eq-(2.6)-style smallness of the source; violation is reported, not fatal
struct SourceCheck {
  bool ok = true;
  double norm_g_n = 0;    // ||g||^n_{L_{n/(n-1)}}
  double norm_lapg_n = 0; // ||Lap_R g||^n_{L_{n/(n-1)}}
};

inline SourceCheck check_source_smallness(const SpectralField& g,
                                          const SphereGrid& grid, int n) {
  SourceCheck out;
  double q = double(n) / (n - 1);
  out.norm_g_n = std::pow(lp_norm_grid(grid.synthesize(g), q), n);
  ZonalMultiplier lap;
  lap.values.resize(g.L_max + 1);
  for (int l = 0; l <= g.L_max; ++l) lap.values[l] = laplacian_eigenvalue(l, g.R);
  out.norm_lapg_n = std::pow(lp_norm_grid(grid.synthesize(apply_multiplier(g, lap)), q), n);
  out.ok = out.norm_g_n <= 0.5 && out.norm_lapg_n <= 0.5;
  return out;
}

/// Y = lambda sum_m a_m int_region X^{:m:} rho  -  X(g)^n / n  (if g present).
inline double interaction_Y(const SpectralField& X, const SphereGrid& grid,
                            const PolynomialSpec& spec, double c,
                            const Region& region, const WickContext& ctx) {
  if (grid.product_degree() < spec.n)
    throw std::invalid_argument("interaction_Y: grid not dealiased for this degree");
  GridField vals = grid.synthesize(X);
  double y = 0;
  for (int m = 0; m <= spec.n; ++m) {
    if (spec.a[m] == 0) continue;
    std::vector<double> wp = wick_power(vals.values, m, c);
    double integral = 0;
    for (int i = 0; i < grid.n_lat(); ++i) {
      double row = 0;
      for (int j = 0; j < grid.n_lon(); ++j) {
        Vec3 p = grid.node_position(i, j);
        if (region.contains_x1(p.x)) row += wp[i * grid.n_lon() + j];
      }
      integral += row * grid.node_weight(i);
    }
    y += spec.a[m] * integral;
  }
  y *= spec.lambda;
  if (ctx.g.has_value()) {
    double xg = spectral_inner(X, *ctx.g);
    y -= std::pow(xg, spec.n) / spec.n;
  }
  return y;
}

// ---------------------------------------------------------------------------
// Monte Carlo checks

struct MomentCheck {
  double estimate = 0;
  double se = 0;
  double expected = 0;
  bool pass = false;
};

/// E[He_n(X) He_m(Y)] for correlated standard normals, against delta_nm n! rho^n.
inline MomentCheck wick_orthogonality_check(double rho, int n, int m,
                                            int64_t draws, RngStream rng) {
  if (std::abs(rho) > 1) throw std::invalid_argument("wick_orthogonality_check: |rho| > 1");
  double acc = 0, acc2 = 0;
  double rr = std::sqrt(1.0 - rho * rho);
  for (int64_t d = 0; d < draws; ++d) {
    double z0, z1;
    rng.normal_pair(d, z0, z1);
    double x = z0;
    double y = rho * z0 + rr * z1;
    double v = hermite_he(n, x) * hermite_he(m, y);
    acc += v;
    acc2 += v * v;
  }
  MomentCheck out;
  out.estimate = acc / draws;
  out.se = std::sqrt(std::max(0.0, acc2 / draws - out.estimate * out.estimate) / draws);
  out.expected = (n == m) ? factorial(n) * std::pow(rho, n) : 0.0;
  out.pass = std::abs(out.estimate - out.expected) <= 5.0 * out.se;
  return out;
}

struct NelsonCheck {
  double lhs = 0; // empirical p-th moment^(1/p)
  double rhs = 0; // sqrt(n) (p-1)^{n/2} * empirical L2
  double lhs_se = 0;
  bool pass = false;
};

/// Hypercontractive moment bound on the degree-n chaos variable He_n(xi).
/// `moment_scale` != 1 is the negative-control hook.
inline NelsonCheck nelson_moment_check(int n, double p, int64_t draws,
                                       RngStream rng, double moment_scale = 1.0) {
  if (p < 2 || p > 8) throw std::invalid_argument("nelson_moment_check: p outside [2,8]");
  double mp = 0, mp2 = 0, m2 = 0;
  for (int64_t d = 0; d < draws; ++d) {
    double x = hermite_he(n, rng.normal(d));
    double ap = std::pow(std::abs(x), p);
    mp += ap;
    mp2 += ap * ap;
    m2 += x * x;
  }
  mp /= draws;
  mp2 /= draws;
  m2 /= draws;
  NelsonCheck out;
  out.lhs = moment_scale * std::pow(mp, 1.0 / p);
  out.rhs = std::sqrt(double(n)) * std::pow(p - 1.0, n / 2.0) * std::sqrt(m2);
  double se_mp = std::sqrt(std::max(0.0, mp2 - mp * mp) / draws);
  out.lhs_se = moment_scale * out.lhs / p * se_mp / mp;
  out.pass = out.lhs <= out.rhs + 3.0 * out.lhs_se;
  return out;
}

} // namespace pphi
