#pragma once

// Stochastic-quantization integrators. Each spectral mode of the linear flow
// is an Ornstein-Uhlenbeck process with rate q_l = (1+lam)(1+lam/N^2)^2 and
// stationary variance 1/q_l; the linear part is integrated exactly and the
// drift enters through the mild-solution (exponential-Euler) weight
// (1 - e^{-q dt})/q. Nonlinearities are evaluated pseudospectrally on grids
// sized to integrate degree-n products exactly.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pphi/gaussian.hpp"
#include "pphi/rng.hpp"
#include "pphi/sphere.hpp"
#include "pphi/stats.hpp"
#include "pphi/wick.hpp"

namespace pphi {

struct BlowupError : std::runtime_error {
  double sup_norm;
  uint64_t step;
  BlowupError(double s, uint64_t st)
      : std::runtime_error("field blow-up detected: sup |phi| = " + std::to_string(s) +
                           " at step " + std::to_string(st)),
        sup_norm(s), step(st) {}
};

struct IntegratorConfig {
  double dt = 0; // 0 -> policy default 0.1 / sqrt(q_{L_max})
  enum class Scheme { exact_ou, exponential_euler };
  Scheme scheme = Scheme::exponential_euler;
  int64_t steps = 1000;
  int64_t burn_in = 100;
  int64_t thinning = 10;
  double blowup_threshold = 1e6;
  bool drift_enabled = true;
  bool noise_enabled = true;
};

inline double default_dt(const ZonalMultiplier& Q) {
  double qmax = 0;
  for (double q : Q.values) qmax = std::max(qmax, q);
  return 0.1 / std::sqrt(qmax);
}

// exact per-mode transition coefficients for time step dt
struct OuCoeffs {
  double dt = 0;
  std::vector<double> decay;    // e^{-q dt}
  std::vector<double> noise_sd; // sqrt((1 - e^{-2 q dt}) / q)
  std::vector<double> drift_w;  // (1 - e^{-q dt}) / q
};

inline OuCoeffs make_ou_coeffs(const ZonalMultiplier& Q, double dt) {
  if (!(dt > 0)) throw std::invalid_argument("make_ou_coeffs: dt must be positive");
  OuCoeffs co;
  co.dt = dt;
  size_t n = Q.values.size();
  co.decay.resize(n);
  co.noise_sd.resize(n);
  co.drift_w.resize(n);
  for (size_t l = 0; l < n; ++l) {
    double q = Q.values[l];
    co.decay[l] = std::exp(-q * dt);
    co.noise_sd[l] = std::sqrt(-std::expm1(-2.0 * q * dt) / q);
    co.drift_w[l] = -std::expm1(-q * dt) / q;
  }
  return co;
}

namespace detail {

// z <- decay z [+ drift_w * drift] [+ noise_sd * xi],  xi from (stream, step)
inline void ou_update(SpectralField& z, const OuCoeffs& co,
                      const SpectralField* drift, const RngStream* rng,
                      uint64_t step) {
  int n = z.n_coeffs();
  std::vector<double> xi;
  if (rng) {
    xi.resize(n);
    int blocks = (n + 1) / 2;
    for (int b = 0; b < blocks; ++b) {
      double z0, z1;
      rng->normal_pair(step * uint64_t(blocks) + b, z0, z1);
      xi[2 * b] = z0;
      if (2 * b + 1 < n) xi[2 * b + 1] = z1;
    }
  }
  for (int l = 0; l <= z.L_max; ++l)
    for (int m = -l; m <= l; ++m) {
      int k = SpectralField::index(l, m);
      double v = co.decay[l] * z.coeffs[k];
      if (drift) v += co.drift_w[l] * drift->coeffs[k];
      if (rng) v += co.noise_sd[l] * xi[k];
      z.coeffs[k] = v;
    }
}

} // namespace detail

/// Exact OU transition for d Z = sqrt(2) dW - Q Z dt over one step.
/// Pass rng = nullptr to propagate only the deterministic decay.
inline SpectralField ou_step(const SpectralField& Z, const OuCoeffs& co,
                             const RngStream* rng, uint64_t step) {
  SpectralField out = Z;
  detail::ou_update(out, co, nullptr, rng, step);
  return out;
}

inline SpectralField ou_step(const SpectralField& Z, double dt,
                             const ZonalMultiplier& Q, const RngStream* rng,
                             uint64_t step) {
  return ou_step(Z, make_ou_coeffs(Q, dt), rng, step);
}

// ---------------------------------------------------------------------------
// the interacting system

struct LangevinSystem {
  double R = 1, N = 1;
  int L_max = 0;
  std::shared_ptr<const SphereGrid> grid; // dealiased for degree n
  PolynomialSpec spec = PolynomialSpec::pure(4);
  WickContext ctx;      // ctx.c is the counterterm at this (R, N, L_max)
  ZonalMultiplier Q;    // Q_{R,N}
  ZonalMultiplier cov;  // G_{R,N}, the stationary covariance of Z
  RemainderCoeffs rc;

  static LangevinSystem make(double R, double N, int L_max, PolynomialSpec spec,
                             std::optional<SpectralField> g = std::nullopt) {
    LangevinSystem sys;
    sys.R = R;
    sys.N = N;
    sys.L_max = L_max;
    sys.grid = std::make_shared<SphereGrid>(R, L_max, spec.n);
    sys.spec = spec;
    sys.ctx.c = counterterm(R, N, L_max).value;
    sys.ctx.g = std::move(g);
    sys.Q = build_multiplier(MultiplierKind::Q_RN, R, N, L_max);
    sys.cov = build_multiplier(MultiplierKind::G_RN, R, N, L_max);
    sys.rc = remainder_coeffs(spec);
    return sys;
  }
};

namespace detail {

inline double sup_abs(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

// drift -lambda P'(phi, c) + (phi(g))^{n-1} g, Galerkin-projected to L_max
inline SpectralField interacting_drift(const SpectralField& phi,
                                       const LangevinSystem& sys, double* sup_out) {
  GridField v = sys.grid->synthesize(phi);
  if (sup_out) *sup_out = sup_abs(v.values);
  std::vector<double> pv = wick_polynomial_prime(v.values, sys.spec, sys.ctx.c);
  GridField d;
  d.grid = sys.grid.get();
  d.values.resize(pv.size());
  for (size_t i = 0; i < pv.size(); ++i) d.values[i] = -sys.spec.lambda * pv[i];
  SpectralField drift = sys.grid->analyze(d, phi.L_max);
  if (sys.ctx.g.has_value()) {
    double xg = spectral_inner(phi, *sys.ctx.g);
    double s = std::pow(xg, sys.spec.n - 1);
    for (int k = 0; k < drift.n_coeffs(); ++k)
      drift.coeffs[k] += s * sys.ctx.g->coeffs[k];
  }
  return drift;
}

} // namespace detail

/// One exponential-Euler step of the full interacting equation.
inline SpectralField interacting_step(const SpectralField& phi,
                                      const LangevinSystem& sys, const OuCoeffs& co,
                                      const RngStream* rng, uint64_t step,
                                      double blowup_threshold = 1e6,
                                      bool drift_enabled = true) {
  SpectralField out = phi;
  if (drift_enabled) {
    double sup = 0;
    SpectralField drift = detail::interacting_drift(phi, sys, &sup);
    if (!(sup < blowup_threshold)) throw BlowupError(sup, step);
    detail::ou_update(out, co, &drift, rng, step);
  } else {
    detail::ou_update(out, co, nullptr, rng, step);
  }
  return out;
}

/// One step of the Da Prato-Debussche pair: Z by the exact OU kernel, Psi by
/// a deterministic exponential-Euler step of the remainder equation.
inline std::pair<SpectralField, SpectralField> remainder_step(
    const SpectralField& Psi, const SpectralField& Z, const LangevinSystem& sys,
    const OuCoeffs& co, const RngStream* rng, uint64_t step,
    double blowup_threshold = 1e6) {
  const SphereGrid& grid = *sys.grid;
  int n = sys.spec.n;
  GridField pv = grid.synthesize(Psi);
  GridField zv = grid.synthesize(Z);
  double sup = detail::sup_abs(pv.values);
  if (!(sup < blowup_threshold)) throw BlowupError(sup, step);

  size_t nn = pv.values.size();
  // psi powers 0..n-1 and wick powers of Z 0..n-1
  std::vector<std::vector<double>> psipow(n);
  psipow[0].assign(nn, 1.0);
  for (int l = 1; l < n; ++l) {
    psipow[l].resize(nn);
    for (size_t i = 0; i < nn; ++i) psipow[l][i] = psipow[l - 1][i] * pv.values[i];
  }
  std::vector<std::vector<double>> zw(n);
  for (int k = 0; k < n; ++k) zw[k] = wick_power(zv.values, k, sys.ctx.c);

  GridField rhs;
  rhs.grid = &grid;
  rhs.values.assign(nn, 0.0);
  for (size_t i = 0; i < nn; ++i) rhs.values[i] = -psipow[n - 1][i];
  for (int l = 0; l <= n - 2; ++l)
    for (int m = l; m <= n - 1; ++m) {
      double a = sys.rc(m, l);
      if (a == 0) continue;
      const std::vector<double>& zk = zw[m - l];
      const std::vector<double>& pl = psipow[l];
      for (size_t i = 0; i < nn; ++i) rhs.values[i] += a * zk[i] * pl[i];
    }
  for (size_t i = 0; i < nn; ++i) rhs.values[i] *= sys.spec.lambda;

  SpectralField rhs_spec = grid.analyze(rhs, Psi.L_max);
  if (sys.ctx.g.has_value()) {
    double fg = spectral_inner(Psi, *sys.ctx.g) + spectral_inner(Z, *sys.ctx.g);
    double s = std::pow(fg, n - 1);
    for (int k = 0; k < rhs_spec.n_coeffs(); ++k)
      rhs_spec.coeffs[k] += s * sys.ctx.g->coeffs[k];
  }

  SpectralField psi_next = Psi;
  detail::ou_update(psi_next, co, &rhs_spec, nullptr, step);
  SpectralField z_next = ou_step(Z, co, rng, step);
  return {std::move(psi_next), std::move(z_next)};
}

/// lambda int P(phi,c) rho - (phi(g))^n/n + (1/2) <phi, Q phi>
inline double chain_energy(const SpectralField& phi, const LangevinSystem& sys) {
  double e = interaction_Y(phi, *sys.grid, sys.spec, sys.ctx.c, Region::all(), sys.ctx);
  for (int l = 0; l <= phi.L_max; ++l)
    for (int m = -l; m <= l; ++m) {
      double c = phi(l, m);
      e += 0.5 * sys.Q.values[l] * c * c;
    }
  return e;
}

// ---------------------------------------------------------------------------
// chain driver

enum class ChainMode { full, split };
enum class InitialKind { zero, gaussian, gibbs };

struct Observable {
  std::string name;
  std::function<double(const SpectralField&)> eval;
};

struct ChainResult {
  double dt = 0;
  int64_t kept = 0;
  std::vector<SpectralField> fields;     // thinned Phi (= Z + Psi in split mode)
  std::vector<SpectralField> fields_z;   // split mode only
  std::vector<SpectralField> fields_psi; // split mode only
  std::vector<std::vector<double>> series;
  std::vector<SeriesStats> stats;
};

struct GibbsResult {
  std::vector<SpectralField> samples;
  double acceptance = 0;
  std::vector<double> step_sizes;
};

inline GibbsResult gibbs_sampler(const LangevinSystem& sys, int64_t sweeps,
                                 int64_t burn_in, int64_t thinning, RngStream rng);

inline ChainResult run_chain(const LangevinSystem& sys, const IntegratorConfig& cfg,
                             ChainMode mode, InitialKind init, RngStream rng,
                             const std::vector<Observable>& obs = {},
                             bool store_fields = true) {
  if (cfg.burn_in >= cfg.steps)
    throw std::invalid_argument("run_chain: burn_in must be < steps");
  double dt = (cfg.dt > 0) ? cfg.dt : default_dt(sys.Q);
  OuCoeffs co = make_ou_coeffs(sys.Q, dt);
  RngStream noise = rng.substream(0);

  SpectralField phi0(sys.R, sys.L_max);
  if (init == InitialKind::gaussian) {
    GaussianSampler gs(sys.R, sys.L_max, sys.cov, rng.substream(1));
    phi0 = gs.sample();
  } else if (init == InitialKind::gibbs) {
    GibbsResult g = gibbs_sampler(sys, 4000, 2000, 2000, rng.substream(2));
    phi0 = g.samples.back();
  }

  SpectralField phi = phi0, Z(sys.R, sys.L_max), Psi(sys.R, sys.L_max);
  if (mode == ChainMode::split) {
    GaussianSampler gz(sys.R, sys.L_max, sys.cov, rng.substream(3));
    Z = gz.sample();
    Psi = phi0;
    for (int k = 0; k < Psi.n_coeffs(); ++k) Psi.coeffs[k] -= Z.coeffs[k];
  }

  ChainResult out;
  out.dt = dt;
  out.series.resize(obs.size());
  const RngStream* noise_ptr = cfg.noise_enabled ? &noise : nullptr;
  for (int64_t s = 0; s < cfg.steps; ++s) {
    if (mode == ChainMode::full) {
      phi = interacting_step(phi, sys, co, noise_ptr, uint64_t(s),
                             cfg.blowup_threshold, cfg.drift_enabled);
    } else {
      auto [p, z] = remainder_step(Psi, Z, sys, co, noise_ptr, uint64_t(s),
                                   cfg.blowup_threshold);
      Psi = std::move(p);
      Z = std::move(z);
      phi = Z;
      for (int k = 0; k < phi.n_coeffs(); ++k) phi.coeffs[k] += Psi.coeffs[k];
    }
    if (s >= cfg.burn_in && (s - cfg.burn_in) % cfg.thinning == 0) {
      ++out.kept;
      if (store_fields) {
        out.fields.push_back(phi);
        if (mode == ChainMode::split) {
          out.fields_z.push_back(Z);
          out.fields_psi.push_back(Psi);
        }
      }
      for (size_t k = 0; k < obs.size(); ++k) {
        double v = obs[k].eval(phi);
        if (!std::isfinite(v))
          throw std::runtime_error("run_chain: observable '" + obs[k].name + "' is not finite");
        out.series[k].push_back(v);
      }
    }
  }
  for (auto& s : out.series) out.stats.push_back(series_stats(s));
  return out;
}

// ---------------------------------------------------------------------------
// direct Metropolis sampling of the finite-dimensional density (the oracle
// used to validate the Langevin dynamics at small band limit)

inline GibbsResult gibbs_sampler(const LangevinSystem& sys, int64_t sweeps,
                                 int64_t burn_in, int64_t thinning, RngStream rng) {
  if (sys.L_max > 6)
    throw std::invalid_argument("gibbs_sampler: tractable only for L_max <= 6");
  if (burn_in >= sweeps) throw std::invalid_argument("gibbs_sampler: burn_in >= sweeps");
  const SphereGrid& grid = *sys.grid;
  int n_modes = (sys.L_max + 1) * (sys.L_max + 1);
  size_t nn = size_t(grid.n_nodes());

  // basis values at nodes for incremental field updates
  std::vector<std::vector<double>> basis(n_modes);
  for (int l = 0; l <= sys.L_max; ++l)
    for (int m = -l; m <= l; ++m) {
      SpectralField e(sys.R, sys.L_max);
      e(l, m) = 1.0;
      basis[SpectralField::index(l, m)] = grid.synthesize(e).values;
    }

  SpectralField phi(sys.R, sys.L_max);
  std::vector<double> vals(nn, 0.0);

  auto interaction = [&](const std::vector<double>& v, double xg) {
    std::vector<double> p = wick_polynomial(v, sys.spec, sys.ctx.c);
    double s = 0;
    for (int i = 0; i < grid.n_lat(); ++i) {
      double row = 0;
      for (int j = 0; j < grid.n_lon(); ++j) row += p[i * grid.n_lon() + j];
      s += row * grid.node_weight(i);
    }
    double y = sys.spec.lambda * s;
    if (sys.ctx.g.has_value()) y -= std::pow(xg, sys.spec.n) / sys.spec.n;
    return y;
  };

  double xg = 0;
  double S_int = interaction(vals, xg);
  double S_gauss = 0;

  std::vector<double> sigma(n_modes);
  for (int l = 0; l <= sys.L_max; ++l)
    for (int m = -l; m <= l; ++m)
      sigma[SpectralField::index(l, m)] = 0.7 * std::sqrt(sys.cov.values[l]);

  std::vector<int64_t> acc_cnt(n_modes, 0), try_cnt(n_modes, 0);
  int64_t accepted = 0, proposed = 0;
  GibbsResult out;
  std::vector<double> work(nn);

  for (int64_t sw = 0; sw < sweeps; ++sw) {
    for (int k = 0; k < n_modes; ++k) {
      uint64_t ctr = (uint64_t(sw) * n_modes + k) * 2;
      int l = int(std::floor(std::sqrt(double(k))));
      double dc = sigma[k] * rng.normal(ctr);
      double c_old = phi.coeffs[k];
      double c_new = c_old + dc;
      double dS_gauss = 0.5 * (c_new * c_new - c_old * c_old) / sys.cov.values[l];
      for (size_t i = 0; i < nn; ++i) work[i] = vals[i] + dc * basis[k][i];
      double xg_new = xg + (sys.ctx.g.has_value() ? dc * sys.ctx.g->coeffs[k] : 0.0);
      double S_int_new = interaction(work, xg_new);
      double dS = dS_gauss + (S_int_new - S_int);
      ++try_cnt[k];
      bool take = (dS <= 0) || (rng.uniform(ctr + 1) < std::exp(-dS));
      if (take) {
        phi.coeffs[k] = c_new;
        vals.swap(work);
        xg = xg_new;
        S_int = S_int_new;
        S_gauss += dS_gauss;
        ++acc_cnt[k];
        if (sw >= burn_in) ++accepted;
      }
      if (sw >= burn_in) ++proposed;
    }
    if (sw < burn_in && (sw + 1) % 50 == 0) {
      for (int k = 0; k < n_modes; ++k) {
        double rate = double(acc_cnt[k]) / double(try_cnt[k]);
        sigma[k] *= std::exp(0.8 * (rate - 0.44));
        acc_cnt[k] = try_cnt[k] = 0;
      }
    }
    if ((sw + 1) % 1000 == 0) { // refresh against incremental round-off
      GridField f = grid.synthesize(phi);
      vals = f.values;
      S_int = interaction(vals, xg);
    }
    if (sw >= burn_in && (sw - burn_in) % thinning == 0) out.samples.push_back(phi);
  }
  out.acceptance = proposed ? double(accepted) / double(proposed) : 0.0;
  out.step_sizes = sigma;
  if (out.acceptance < 0.01)
    throw std::runtime_error("gibbs_sampler: degenerate acceptance rate");
  return out;
}

} // namespace pphi
