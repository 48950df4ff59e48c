#pragma once

// Weighted Bessel-potential norms on the plane (box periodization + smooth
// taper + FFT multiplier) and on the sphere, the polynomial weights w_R and
// v_L = w_L^8 / (4 pi L^2), the integrated-by-parts weight inequalities, the
// generalized Hoelder pairing, and the energy-inequality monitor for split
// trajectories pushed to the plane.

#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

#include "pphi/gaussian.hpp" // BumpProfile::smooth_step
#include "pphi/sphere.hpp"
#include "pphi/stereo.hpp"

namespace pphi {

// ---------------------------------------------------------------------------
// weights

struct WeightSpec {
  double R = 0, R_exp = 0; // w_R^{R_exp} factor when R > 0
  double L = 0, L_exp = 0; // v_L^{L_exp} factor when L > 0

  static WeightSpec one() { return {}; }
  static WeightSpec w(double R, double e = 1) { return {R, e, 0, 0}; }
  static WeightSpec v(double L, double e = 1) { return {0, 0, L, e}; }
  static WeightSpec wv(double R, double re, double L, double le) { return {R, re, L, le}; }

  double operator()(const Vec2& x) const {
    double val = 1.0;
    if (R > 0 && R_exp != 0) val *= std::pow(weight_w(x, R), R_exp);
    if (L > 0 && L_exp != 0) {
      double vl = weight_w(x, L);
      vl = vl * vl;             // w^2
      vl = vl * vl;             // w^4
      vl = vl * vl / (4 * pi * L * L); // w^8 / (4 pi L^2)
      val *= std::pow(vl, L_exp);
    }
    return val;
  }

  // polynomial decay exponent at infinity (negative means growth)
  double decay_exponent() const { return 4 * R_exp + 32 * L_exp; }
};

inline double weight_v(const Vec2& x, double L) { return WeightSpec::v(L)(x); }

// total plane mass of the weight, radial quadrature + power-law tail
inline double weight_mass(const WeightSpec& w, double r_max_scale = 1e4) {
  double d = w.decay_exponent();
  if (d <= 2.0) return HUGE_VAL;
  double scale = std::max({1.0, w.R, w.L});
  std::vector<double> x, q;
  gauss_legendre(160, x, q);
  std::vector<double> edges = {0, 4 * scale, 32 * scale, 256 * scale, r_max_scale * scale};
  double acc = 0;
  for (size_t p = 0; p + 1 < edges.size(); ++p) {
    for (int i = 0; i < 160; ++i) {
      double r = 0.5 * (edges[p] + edges[p + 1]) + 0.5 * (edges[p + 1] - edges[p]) * x[i];
      acc += 0.5 * (edges[p + 1] - edges[p]) * q[i] * w(Vec2{r, 0}) * r;
    }
  }
  double rt = edges.back();
  acc += w(Vec2{rt, 0}) * rt * rt / (d - 2.0); // int_{rt}^inf ~ w(rt) (rt/r)^d r dr
  return acc * 2 * pi;
}

// mass outside the square box [-S,S]^2, bounded by the mass outside the
// inscribed disk
inline double weight_mass_outside(const WeightSpec& w, double S) {
  double d = w.decay_exponent();
  if (d <= 2.0) return HUGE_VAL;
  std::vector<double> x, q;
  gauss_legendre(160, x, q);
  double acc = 0;
  std::vector<double> edges = {S, 4 * S, 64 * S, 1024 * S};
  for (size_t p = 0; p + 1 < edges.size(); ++p)
    for (int i = 0; i < 160; ++i) {
      double r = 0.5 * (edges[p] + edges[p + 1]) + 0.5 * (edges[p + 1] - edges[p]) * x[i];
      acc += 0.5 * (edges[p + 1] - edges[p]) * q[i] * w(Vec2{r, 0}) * r;
    }
  double rt = edges.back();
  acc += w(Vec2{rt, 0}) * rt * rt / (d - 2.0);
  return acc * 2 * pi;
}

// numerical witness of Def-A.1 admissibility: max over probes of
// |grad w| / w and |second differences| / w
struct AdmissibilityWitness {
  double grad_ratio = 0;
  double hess_ratio = 0;
};

inline AdmissibilityWitness admissibility_witness(const WeightSpec& w, double extent,
                                                  int n_probe = 21, double h = 1e-4) {
  AdmissibilityWitness out;
  for (int i = 0; i < n_probe; ++i)
    for (int j = 0; j < n_probe; ++j) {
      Vec2 x{-extent + 2 * extent * i / (n_probe - 1.0),
             -extent + 2 * extent * j / (n_probe - 1.0)};
      double w0 = w(x);
      double gx = (w(Vec2{x.x + h, x.y}) - w(Vec2{x.x - h, x.y})) / (2 * h);
      double gy = (w(Vec2{x.x, x.y + h}) - w(Vec2{x.x, x.y - h})) / (2 * h);
      double hxx = (w(Vec2{x.x + h, x.y}) - 2 * w0 + w(Vec2{x.x - h, x.y})) / (h * h);
      double hyy = (w(Vec2{x.x, x.y + h}) - 2 * w0 + w(Vec2{x.x, x.y - h})) / (h * h);
      out.grad_ratio = std::max(out.grad_ratio, std::hypot(gx, gy) / w0);
      out.hess_ratio = std::max(out.hess_ratio, (std::abs(hxx) + std::abs(hyy)) / w0);
    }
  return out;
}

// ---------------------------------------------------------------------------
// box FFT helpers (periodized spectral calculus on the plane grid)

namespace detail {

class PlaneFft {
 public:
  explicit PlaneFft(int n) : n_(n) {
    in_ = fftw_alloc_real(size_t(n) * n);
    out_ = fftw_alloc_complex(size_t(n) * (n / 2 + 1));
    fwd_ = fftw_plan_dft_r2c_2d(n, n, in_, out_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_2d(n, n, out_, in_, FFTW_ESTIMATE);
  }
  ~PlaneFft() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(in_);
    fftw_free(out_);
  }
  PlaneFft(const PlaneFft&) = delete;

  // apply a radial Fourier multiplier g(|k|^2); frequencies of the box [-S,S]^2
  void apply_multiplier(std::vector<double>& values, double S,
                        const std::function<double(double)>& g) {
    std::lock_guard<std::mutex> lock(mu_);
    std::copy(values.begin(), values.end(), in_);
    fftw_execute(fwd_);
    double base = pi / S; // 2 pi / (2S)
    int nc = n_ / 2 + 1;
    for (int i = 0; i < n_; ++i) {
      double ki = base * ((i <= n_ / 2) ? i : i - n_);
      for (int j = 0; j < nc; ++j) {
        double kj = base * j;
        double m = g(ki * ki + kj * kj);
        out_[size_t(i) * nc + j][0] *= m;
        out_[size_t(i) * nc + j][1] *= m;
      }
    }
    fftw_execute(bwd_);
    double s = 1.0 / (double(n_) * n_);
    for (size_t k = 0; k < values.size(); ++k) values[k] = in_[k] * s;
  }

  // spectral gradient (two output arrays)
  void gradient(const std::vector<double>& values, double S,
                std::vector<double>& gx, std::vector<double>& gy) {
    std::lock_guard<std::mutex> lock(mu_);
    int nc = n_ / 2 + 1;
    double base = pi / S;
    std::vector<fftw_complex> hat(size_t(n_) * nc);
    std::copy(values.begin(), values.end(), in_);
    fftw_execute(fwd_);
    std::memcpy(hat.data(), out_, sizeof(fftw_complex) * size_t(n_) * nc);
    double s = 1.0 / (double(n_) * n_);

    auto run = [&](bool ydir, std::vector<double>& dst) {
      for (int i = 0; i < n_; ++i) {
        double ki = base * ((i <= n_ / 2) ? i : i - n_);
        if (2 * i == n_) ki = 0; // zero the Nyquist derivative (real output)
        for (int j = 0; j < nc; ++j) {
          double kj = (2 * j == n_) ? 0.0 : base * j;
          double k = ydir ? kj : ki;
          size_t idx = size_t(i) * nc + j;
          // multiply by i k
          out_[idx][0] = -k * hat[idx][1];
          out_[idx][1] = k * hat[idx][0];
        }
      }
      fftw_execute(bwd_);
      dst.resize(size_t(n_) * n_);
      for (size_t k = 0; k < dst.size(); ++k) dst[k] = in_[k] * s;
    };
    run(false, gx);
    run(true, gy);
  }

 private:
  int n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan fwd_, bwd_;
  std::mutex mu_;
};

inline PlaneFft& plane_fft(int n) {
  static std::mutex m;
  static std::map<int, std::unique_ptr<PlaneFft>> cache;
  std::lock_guard<std::mutex> lock(m);
  auto& p = cache[n];
  if (!p) p = std::make_unique<PlaneFft>(n);
  return *p;
}

} // namespace detail

/// (1 - Lap)^{alpha/2} on the periodized box.
inline PlaneField apply_bessel_multiplier(const PlaneField& f, double alpha) {
  PlaneField out = f;
  detail::plane_fft(f.grid->n_side())
      .apply_multiplier(out.values, f.grid->extent(),
                        [alpha](double k2) { return std::pow(1.0 + k2, alpha / 2); });
  return out;
}

inline PlaneField apply_plane_laplacian(const PlaneField& f) {
  PlaneField out = f;
  detail::plane_fft(f.grid->n_side())
      .apply_multiplier(out.values, f.grid->extent(), [](double k2) { return -k2; });
  return out;
}

inline void plane_gradient(const PlaneField& f, PlaneField& gx, PlaneField& gy) {
  gx.grid = gy.grid = f.grid;
  detail::plane_fft(f.grid->n_side())
      .gradient(f.values, f.grid->extent(), gx.values, gy.values);
}

/// Smooth radial taper: 1 inside r0, 0 beyond r1 (periodization guard).
inline void apply_taper(PlaneField& f, double r0, double r1) {
  const PlaneGrid& g = *f.grid;
  for (int i = 0; i < g.n_side(); ++i)
    for (int j = 0; j < g.n_side(); ++j) {
      double r = std::sqrt(norm2sq(g.node(i, j)));
      if (r <= r0) continue;
      double t = (r - r0) / (r1 - r0);
      f.values[g.index(i, j)] *= 1.0 - BumpProfile::smooth_step(t);
    }
}

// ---------------------------------------------------------------------------
// norms

struct NormSpec {
  double p = 2;
  double alpha = 0;
  WeightSpec weight; // the literal weight in || w (1-Lap)^{a/2} f ||_{L_p}

  NormSpec(double p_, double alpha_, WeightSpec w_) : p(p_), alpha(alpha_), weight(w_) {
    if (p_ < 1) throw std::invalid_argument("NormSpec: p must be >= 1");
  }
};

struct PlaneNormResult {
  double value = 0;
  double weight_mass_outside_rel = 0; // of the box, relative to total
  double periodization_estimate = 0;  // share of the Lp mass in the taper ring
  bool taper_violation = false;       // weight mass outside box >= 1e-8 of total
};

inline PlaneNormResult bessel_norm_plane(const PlaneField& f, const NormSpec& spec,
                                         bool taper = true,
                                         double taper_start_frac = 0.70,
                                         double taper_end_frac = 0.95) {
  const PlaneGrid& g = *f.grid;
  PlaneNormResult out;
  double total = weight_mass(spec.weight);
  double outside = weight_mass_outside(spec.weight, g.extent());
  out.weight_mass_outside_rel = (total > 0 && std::isfinite(total)) ? outside / total : HUGE_VAL;
  out.taper_violation = !(out.weight_mass_outside_rel < 1e-8);

  PlaneField work = f;
  if (taper && spec.alpha != 0)
    apply_taper(work, taper_start_frac * g.extent(), taper_end_frac * g.extent());
  if (spec.alpha != 0) work = apply_bessel_multiplier(work, spec.alpha);

  double acc = 0, acc_ring = 0;
  double r0 = taper_start_frac * g.extent();
  for (int i = 0; i < g.n_side(); ++i)
    for (int j = 0; j < g.n_side(); ++j) {
      Vec2 x = g.node(i, j);
      double v = std::pow(std::abs(spec.weight(x) * work.values[g.index(i, j)]), spec.p);
      acc += v;
      if (norm2sq(x) > r0 * r0) acc_ring += v;
    }
  out.value = std::pow(acc * g.cell_area(), 1.0 / spec.p);
  out.periodization_estimate = (acc > 0) ? acc_ring / acc : 0.0;
  return out;
}

/// Sphere Bessel norm; p = 2 is exact in coefficients, p != 2 needs a grid.
inline double bessel_norm_sphere(const SpectralField& phi, double alpha, double p,
                                 const SphereGrid* grid = nullptr) {
  if (p == 2.0) {
    double s = 0;
    for (int l = 0; l <= phi.L_max; ++l) {
      double fac = std::pow(1.0 + laplacian_eigenvalue(l, phi.R), alpha);
      for (int m = -l; m <= l; ++m) {
        double c = phi(l, m);
        s += fac * c * c;
      }
    }
    return std::sqrt(s);
  }
  if (!grid) throw std::invalid_argument("bessel_norm_sphere: p != 2 needs a grid");
  ZonalMultiplier mu;
  mu.values.resize(phi.L_max + 1);
  for (int l = 0; l <= phi.L_max; ++l)
    mu.values[l] = std::pow(1.0 + laplacian_eigenvalue(l, phi.R), alpha / 2);
  return lp_norm_grid(grid->synthesize(apply_multiplier(phi, mu)), p);
}

// plain weighted L_p on the box grid
inline double lp_norm_plane(const PlaneField& f, double p, const WeightSpec& w) {
  const PlaneGrid& g = *f.grid;
  double acc = 0;
  for (int i = 0; i < g.n_side(); ++i)
    for (int j = 0; j < g.n_side(); ++j)
      acc += std::pow(std::abs(w(g.node(i, j)) * f.values[g.index(i, j)]), p);
  return std::pow(acc * g.cell_area(), 1.0 / p);
}

// ---------------------------------------------------------------------------
// generalized Hoelder pairing |<f,g>_{L2(w^{1/2})}| <= C ||f||_{a,p} ||g||_{-a,q}

struct HolderPairing {
  double lhs = 0;
  double rhs = 0;
  double C_fit = 0; // lhs / rhs
};

inline HolderPairing holder_pairing(const PlaneField& f, const PlaneField& g,
                                    double alpha, double p, const WeightSpec& w) {
  if (f.grid != g.grid) throw std::invalid_argument("holder_pairing: grid mismatch");
  double q = p / (p - 1.0);
  const PlaneGrid& grid = *f.grid;
  double acc = 0;
  for (int i = 0; i < grid.n_side(); ++i)
    for (int j = 0; j < grid.n_side(); ++j) {
      int k = grid.index(i, j);
      acc += w(grid.node(i, j)) * f.values[k] * g.values[k];
    }
  HolderPairing out;
  out.lhs = std::abs(acc * grid.cell_area());
  WeightSpec wp = w, wq = w;
  wp.R_exp /= p;
  wp.L_exp /= p;
  wq.R_exp /= q;
  wq.L_exp /= q;
  out.rhs = bessel_norm_plane(f, NormSpec(p, alpha, wp)).value *
            bessel_norm_plane(g, NormSpec(q, -alpha, wq)).value;
  out.C_fit = (out.rhs > 0) ? out.lhs / out.rhs : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// weight inequalities (integration by parts with w_R^{-1} and v_L)

struct WeightInequalityReport {
  // margins lhs - rhs of the three displays; nonnegative means the
  // inequality holds for this probe
  double margin_A = 0, margin_B = 0, margin_C = 0;
  // remark chain: ||psi||_{L2(w^{-p/2} v^{1/2})} <= ||psi||_{L_n(v^{1/n})}
  double chain_margin = 0; // min over p in {1,2,3}
};

inline WeightInequalityReport weight_inequality_check(double R, double L,
                                                      const PlaneField& psi,
                                                      int n_poly = 4) {
  if (R < L) throw std::invalid_argument("weight_inequality_check: need R >= L");
  const PlaneGrid& g = *psi.grid;
  auto winv = [&](const PlaneField& f, double e) { // multiply by w_R^{-e}
    PlaneField out = f;
    for (int i = 0; i < g.n_side(); ++i)
      for (int j = 0; j < g.n_side(); ++j)
        out.values[g.index(i, j)] /= std::pow(weight_w(g.node(i, j), R), e);
    return out;
  };
  auto dot_v = [&](const PlaneField& a, const PlaneField& b) {
    double acc = 0;
    for (int i = 0; i < g.n_side(); ++i)
      for (int j = 0; j < g.n_side(); ++j) {
        int k = g.index(i, j);
        acc += weight_v(g.node(i, j), L) * a.values[k] * b.values[k];
      }
    return acc * g.cell_area();
  };

  PlaneField lap = apply_plane_laplacian(psi);
  PlaneField op1 = winv(lap, 1.0);            // w^{-1} Lap psi
  PlaneField lap2 = apply_plane_laplacian(op1);
  PlaneField op2 = winv(lap2, 1.0);           // (w^{-1} Lap)^2 psi
  PlaneField lap3 = apply_plane_laplacian(op2);
  PlaneField op3 = winv(lap3, 1.0);           // (w^{-1} Lap)^3 psi

  PlaneField gx, gy;
  plane_gradient(psi, gx, gy);
  PlaneField lap_gx, lap_gy;
  plane_gradient(lap, lap_gx, lap_gy);

  auto wv_sq = [&](const PlaneField& a, double we) { // || a ||^2_{L2(w^{-we/2} v^{1/2})}
    double acc = 0;
    for (int i = 0; i < g.n_side(); ++i)
      for (int j = 0; j < g.n_side(); ++j) {
        int k = g.index(i, j);
        Vec2 x = g.node(i, j);
        double wgt = weight_v(x, L) / std::pow(weight_w(x, R), we);
        acc += wgt * a.values[k] * a.values[k];
      }
    return acc * g.cell_area();
  };

  WeightInequalityReport out;
  {
    double lhs = -dot_v(psi, op1);
    double rhs = 0.5 * (wv_sq(gx, 1.0) + wv_sq(gy, 1.0)) - 0.125 * wv_sq(psi, 1.0);
    out.margin_A = lhs - rhs;
  }
  {
    double lhs = dot_v(psi, op2);
    double rhs = 0.5 * wv_sq(lap, 2.0) - 0.125 * wv_sq(psi, 2.0);
    out.margin_B = lhs - rhs;
  }
  {
    double lhs = -dot_v(psi, op3);
    double rhs = 0.5 * (wv_sq(lap_gx, 3.0) + wv_sq(lap_gy, 3.0)) - 0.125 * wv_sq(psi, 3.0);
    out.margin_C = lhs - rhs;
  }
  {
    double rhs = lp_norm_plane(psi, n_poly, WeightSpec::v(L, 1.0 / n_poly));
    double chain = HUGE_VAL;
    for (int p = 1; p <= 3; ++p) {
      double lhs = std::sqrt(wv_sq(psi, double(p)));
      chain = std::min(chain, rhs - lhs);
    }
    out.chain_margin = chain;
  }
  return out;
}

/// Smallest L in {1,2,4,8,...} whose weight inequalities pass on the probe
/// suite for R in {L, 2L} (the calibrated threshold L_0).
inline double calibrate_L0(const std::function<std::vector<PlaneField>(const PlaneGrid&)>& probes,
                           int n_side = 64) {
  for (double L : {1.0, 2.0, 4.0, 8.0}) {
    bool ok = true;
    for (double R : {L, 2 * L}) {
      PlaneGrid grid(8 * std::max(R, L), n_side);
      for (const PlaneField& psi : probes(grid)) {
        auto rep = weight_inequality_check(R, L, psi);
        double scale = lp_norm_plane(psi, 2, WeightSpec::one());
        double tol = -1e-9 * scale * scale;
        if (rep.margin_A < tol || rep.margin_B < tol || rep.margin_C < tol) ok = false;
      }
    }
    if (ok) return L;
  }
  throw std::runtime_error("calibrate_L0: no L in {1,2,4,8} passes the probe suite");
}

// ---------------------------------------------------------------------------
// energy monitor (the a priori inequality along split trajectories)

struct EnergyStep {
  PlaneField psi;                   // j* Psi at this time
  std::vector<PlaneField> z_wick;   // j* Z^{:k:}, k = 0..n-1
};

struct EnergyRow {
  double t = 0;
  double lhs_dt = 0;    // 8 d/dt ||psi||^2_{L2(v^{1/2})} (centred)
  double lhs_n = 0;     // ||psi||^n_{L_n(v^{1/n})}
  double rhs_sum = 0;   // sum_k ||z^{:k:}||^p_{L_p^{-kappa}(v^{1/p})}
  double C_required = 0;
};

struct PairingRow {
  int k = 0, power = 0;
  double lhs = 0;       // |<z^{:k:}, psi^power>_{L2(v^{1/2})}|
  double z_term = 0;    // ||z^{:k:}||^p_{L_p^{-kappa}(v^{1/p})}
  double grad_term = 0; // ||grad psi||^2_{L2(v^{1/2})}
  double n_term = 0;    // ||psi||^n_{L_n(v^{1/n})}
  double C_required = 0;
};

struct EnergyReport {
  std::vector<EnergyRow> rows;
  std::vector<PairingRow> pairings; // from the mid-trajectory step
  double C_fit = 0;                 // max over interior rows of lhs+/rhs
  double kappa = 0, p = 0;
};

inline EnergyReport energy_report(const std::vector<EnergyStep>& steps, double dt,
                                  int n, double L, double kappa = 0.05,
                                  double delta = 0.05) {
  if (steps.size() < 3) throw std::invalid_argument("energy_report: need >= 3 steps");
  double p = 2.0 * n / (2.0 - kappa * (n - 1) * (n - 2));
  if (!(p >= 1)) throw std::invalid_argument("energy_report: kappa too large for this degree");
  EnergyReport out;
  out.kappa = kappa;
  out.p = p;
  WeightSpec v_half = WeightSpec::v(L, 0.5);
  WeightSpec v_n = WeightSpec::v(L, 1.0 / n);
  WeightSpec v_p = WeightSpec::v(L, 1.0 / p);

  std::vector<double> l2sq(steps.size());
  for (size_t s = 0; s < steps.size(); ++s) {
    double nv = lp_norm_plane(steps[s].psi, 2, v_half);
    l2sq[s] = nv * nv;
  }
  for (size_t s = 1; s + 1 < steps.size(); ++s) {
    EnergyRow row;
    row.t = double(s) * dt;
    row.lhs_dt = 8.0 * (l2sq[s + 1] - l2sq[s - 1]) / (2.0 * dt);
    row.lhs_n = std::pow(lp_norm_plane(steps[s].psi, n, v_n), n);
    double rhs = 0;
    for (int k = 0; k < n && k < int(steps[s].z_wick.size()); ++k)
      rhs += std::pow(bessel_norm_plane(steps[s].z_wick[k], NormSpec(p, -kappa, v_p)).value, p);
    row.rhs_sum = rhs;
    double lhs = row.lhs_dt + row.lhs_n;
    row.C_required = (rhs > 0) ? std::max(0.0, lhs) / rhs : HUGE_VAL;
    out.C_fit = std::max(out.C_fit, row.C_required);
    out.rows.push_back(row);
  }

  // Lemma-A.4-shaped pairing ledger at the middle step
  const EnergyStep& mid = steps[steps.size() / 2];
  PlaneField gx, gy;
  plane_gradient(mid.psi, gx, gy);
  double grad_term = 0;
  {
    double a = lp_norm_plane(gx, 2, v_half), b = lp_norm_plane(gy, 2, v_half);
    grad_term = a * a + b * b;
  }
  double n_term = std::pow(lp_norm_plane(mid.psi, n, v_n), n);
  const PlaneGrid& g = *mid.psi.grid;
  for (int k = 1; k < n && k < int(mid.z_wick.size()); ++k)
    for (int power = 1; power <= n - 1; ++power) {
      PairingRow pr;
      pr.k = k;
      pr.power = power;
      double acc = 0;
      for (int i = 0; i < g.n_side(); ++i)
        for (int j = 0; j < g.n_side(); ++j) {
          int idx = g.index(i, j);
          acc += weight_v(g.node(i, j), L) * mid.z_wick[k].values[idx] *
                 std::pow(mid.psi.values[idx], power);
        }
      pr.lhs = std::abs(acc * g.cell_area());
      pr.z_term = std::pow(bessel_norm_plane(mid.z_wick[k], NormSpec(p, -kappa, v_p)).value, p);
      pr.grad_term = grad_term;
      pr.n_term = n_term;
      double slack = pr.lhs - delta * (grad_term + n_term + 1.0);
      pr.C_required = (pr.z_term > 0) ? std::max(0.0, slack) / pr.z_term : HUGE_VAL;
      out.pairings.push_back(pr);
    }
  return out;
}

/// Monitor verdict: every step satisfies lhs <= C_ref * rhs (+ tolerance).
inline bool energy_monitor_pass(const EnergyReport& rep, double C_ref,
                                double tol = 1e-9) {
  for (const EnergyRow& r : rep.rows)
    if (r.lhs_dt + r.lhs_n > C_ref * r.rhs_sum + tol) return false;
  return true;
}

} // namespace pphi
