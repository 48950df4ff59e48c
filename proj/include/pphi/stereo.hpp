#pragma once

// Stereographic chart j_R between the plane and S_R minus the north pole,
// the conformal factor w_R, pushforwards of band-limited fields, and the
// one-parameter symmetry maps: sphere rotations, plane rotations and
// translations, and the sphere-induced family S_{R,alpha} that approximates
// the plane translation T_alpha at rate 1/R.

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "pphi/sphere.hpp"

namespace pphi {

struct Vec2 {
  double x = 0, y = 0;
};

inline double norm2sq(const Vec2& a) { return a.x * a.x + a.y * a.y; }

/// Stereographic parametrization of S_R by the plane (south pole at origin).
inline Vec3 stereo_to_sphere(const Vec2& x, double R) {
  double r2 = norm2sq(x);
  double den = 4 * R * R + r2;
  return Vec3{R * 4 * R * x.x / den, R * 4 * R * x.y / den,
              R * (r2 - 4 * R * R) / den};
}

inline Vec2 stereo_to_plane(const Vec3& p, double R) {
  if (std::abs(p.z - R) < 1e-14 * R)
    throw std::domain_error("stereo_to_plane: north pole has no chart image");
  return Vec2{2 * R * p.x / (R - p.z), 2 * R * p.y / (R - p.z)};
}

/// Conformal factor w_R(x) = 16 R^4 / (4R^2 + |x|^2)^2.
inline double weight_w(const Vec2& x, double R) {
  double den = 4 * R * R + norm2sq(x);
  return 16.0 * R * R * R * R / (den * den);
}

// mass of w_R outside the disk of radius r0 (closed form)
inline double weight_w_tail(double r0, double R) {
  return 16.0 * pi * R * R * R * R / (4 * R * R + r0 * r0);
}

// ---------------------------------------------------------------------------
// plane grids

// Uniform cell-centered grid on [-S,S]^2; symmetric under both reflections.
class PlaneGrid {
 public:
  PlaneGrid(double S, int n_side) : S_(S), n_side_(n_side) {
    if (!(S > 0)) throw std::invalid_argument("PlaneGrid: extent must be positive");
    if (n_side < 2 || (n_side & (n_side - 1)) != 0)
      throw std::invalid_argument("PlaneGrid: n_side must be a power of two");
  }

  double extent() const { return S_; }
  int n_side() const { return n_side_; }
  double spacing() const { return 2 * S_ / n_side_; }
  double cell_area() const { return spacing() * spacing(); }
  int n_nodes() const { return n_side_ * n_side_; }

  double coord(int i) const { return -S_ + (i + 0.5) * spacing(); }
  Vec2 node(int i, int j) const { return Vec2{coord(i), coord(j)}; }
  int index(int i, int j) const { return i * n_side_ + j; }

 private:
  double S_;
  int n_side_;
};

struct PlaneField {
  const PlaneGrid* grid = nullptr;
  std::vector<double> values; // row-major: i (x index) * n_side + j (y index)
  enum class Provenance { synthetic, pushforward } provenance = Provenance::synthetic;
  double source_R = 0;            // set for pushforwards
  double resolution_defect = 0;   // midpoint-vs-average probe near the origin
};

/// Sample a band-limited sphere field at j_R(node) for every plane node
/// (function pushforward; spectrally exact, no grid interpolation).
inline PlaneField pushforward_field(const SpectralField& phi, const PlaneGrid& plane) {
  PlaneField out;
  out.grid = &plane;
  out.provenance = PlaneField::Provenance::pushforward;
  out.source_R = phi.R;
  out.values.resize(plane.n_nodes());
  for (int i = 0; i < plane.n_side(); ++i)
    for (int j = 0; j < plane.n_side(); ++j)
      out.values[plane.index(i, j)] =
          evaluate_field(phi, stereo_to_sphere(plane.node(i, j), phi.R));

  // coarseness probe along the central row: midpoint value vs node average
  double defect = 0;
  int ic = plane.n_side() / 2;
  for (int j = 0; j + 1 < plane.n_side(); ++j) {
    Vec2 a = plane.node(ic, j), b = plane.node(ic, j + 1);
    Vec2 mid{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
    double fm = evaluate_field(phi, stereo_to_sphere(mid, phi.R));
    double avg = 0.5 * (out.values[plane.index(ic, j)] + out.values[plane.index(ic, j + 1)]);
    defect = std::max(defect, std::abs(fm - avg));
  }
  out.resolution_defect = defect;
  return out;
}

// ---------------------------------------------------------------------------
// measure and Laplacian identities of the chart

// int_{S_R} f rho_R  vs  int_{R^2} (j* f) w_R dx, the plane side by polar
// quadrature out to radius S plus the closed-form tail at the north-pole value
struct MeasureIdentity {
  double sphere_side = 0;
  double plane_side = 0;
  double residual = 0; // |difference| / max(1, |sphere_side|)
};

inline MeasureIdentity measure_identity_check(const SpectralField& phi,
                                              double S_over_R = 1e5,
                                              int n_r = 96) {
  double R = phi.R;
  MeasureIdentity out;
  out.sphere_side = phi(0, 0) * std::sqrt(4 * pi * R * R);

  int n_ang = 2 * phi.L_max + 2;
  std::vector<double> xq, wq;
  gauss_legendre(n_r, xq, wq);
  double plane = 0;
  // log-spaced panels: the integrand decays like r^-3, and the constant
  // north-pole continuation is accurate only once (R/S)^2 is negligible
  std::vector<double> edges = {0.0, 4 * R, 16 * R, 100 * R};
  while (edges.back() < S_over_R * R * 0.999) edges.push_back(edges.back() * 10);
  for (size_t p = 0; p + 1 < edges.size(); ++p) {
    double a = edges[p], b = edges[p + 1];
    for (int q = 0; q < n_r; ++q) {
      double r = 0.5 * (a + b) + 0.5 * (b - a) * xq[q];
      double ang_sum = 0;
      for (int k = 0; k < n_ang; ++k) {
        double th = 2 * pi * k / n_ang;
        Vec2 x{r * std::cos(th), r * std::sin(th)};
        ang_sum += evaluate_field(phi, stereo_to_sphere(x, R)) * weight_w(x, R);
      }
      plane += 0.5 * (b - a) * wq[q] * r * ang_sum * (2 * pi / n_ang);
    }
  }
  double f_np = evaluate_field(phi, Vec3{0, 0, R});
  plane += f_np * weight_w_tail(edges.back(), R);
  out.plane_side = plane;
  out.residual = std::abs(out.plane_side - out.sphere_side) /
                 std::max(1.0, std::abs(out.sphere_side));
  return out;
}

/// sup over probes of |w_R^{-1} FD-Laplacian(j* f) - j*(Lap_R f)| relative to
/// the scale of Lap_R f.
inline double laplacian_identity_residual(const SpectralField& phi,
                                          const std::vector<Vec2>& probes,
                                          double h_rel = 1e-3) {
  double R = phi.R;
  ZonalMultiplier lap;
  lap.values.resize(phi.L_max + 1);
  for (int l = 0; l <= phi.L_max; ++l) lap.values[l] = -laplacian_eigenvalue(l, R);
  SpectralField lap_phi = apply_multiplier(phi, lap);

  double L = std::max(1, phi.L_max);
  double h = h_rel * R / L;
  double scale = 0, worst = 0;
  for (const Vec2& x : probes)
    scale = std::max(scale, std::abs(evaluate_field(lap_phi, stereo_to_sphere(x, R))));
  if (scale == 0) scale = 1;
  for (const Vec2& x : probes) {
    auto f = [&](double a, double b) {
      return evaluate_field(phi, stereo_to_sphere(Vec2{a, b}, R));
    };
    double lap_fd = (f(x.x + h, x.y) + f(x.x - h, x.y) + f(x.x, x.y + h) +
                     f(x.x, x.y - h) - 4 * f(x.x, x.y)) / (h * h);
    double lhs = lap_fd / weight_w(x, R);
    double rhs = evaluate_field(lap_phi, stereo_to_sphere(x, R));
    worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// symmetry maps

inline Vec2 map_T(const Vec2& x, double alpha) { return Vec2{x.x + alpha, x.y}; }

inline Vec2 map_Rot(const Vec2& x, double alpha) {
  double c = std::cos(alpha), s = std::sin(alpha);
  return Vec2{c * x.x - s * x.y, s * x.x + c * x.y};
}

// rotation of S_R about the x3 axis (image of the plane rotation under j_R)
inline Vec3 sphere_rot(const Vec3& p, double alpha) {
  double c = std::cos(alpha), s = std::sin(alpha);
  return Vec3{c * p.x - s * p.y, s * p.x + c * p.y, p.z};
}

// rotation of S_R about the x2 axis by angle alpha / R
inline Vec3 sphere_trans(const Vec3& p, double R, double alpha) {
  double c = std::cos(alpha / R), s = std::sin(alpha / R);
  return Vec3{c * p.x - s * p.z, p.y, s * p.x + c * p.z};
}

/// The plane transformation with T_{R,alpha} j_R = j_R S_{R,alpha} on B_R.
inline Vec2 map_S(const Vec2& x, double R, double alpha) {
  if (!(norm2sq(x) < R * R))
    throw std::domain_error("map_S: point outside the disk B_R");
  if (!(std::abs(alpha) < R)) throw std::domain_error("map_S: need |alpha| < R");
  double c = std::cos(alpha / R), s = std::sin(alpha / R);
  double q = norm2sq(x) / (4 * R * R);
  double den = 1 + c + (1 - c) * q - x.x * s / R;
  return Vec2{2 * (R * s * (1 - q) + x.x * c) / den, 2 * x.y / den};
}

// FD partial derivative of a plane map, multi-index (ax, ay), |a| <= 2
template <typename Map>
inline Vec2 fd_partial(const Map& F, const Vec2& x, int ax, int ay, double h) {
  auto ev = [&](double dx, double dy) { return F(Vec2{x.x + dx, x.y + dy}); };
  if (ax == 0 && ay == 0) return F(x);
  if (ax == 1 && ay == 0) {
    Vec2 a = ev(h, 0), b = ev(-h, 0);
    return Vec2{(a.x - b.x) / (2 * h), (a.y - b.y) / (2 * h)};
  }
  if (ax == 0 && ay == 1) {
    Vec2 a = ev(0, h), b = ev(0, -h);
    return Vec2{(a.x - b.x) / (2 * h), (a.y - b.y) / (2 * h)};
  }
  if (ax == 2 && ay == 0) {
    Vec2 a = ev(h, 0), b = ev(0, 0), c = ev(-h, 0);
    return Vec2{(a.x - 2 * b.x + c.x) / (h * h), (a.y - 2 * b.y + c.y) / (h * h)};
  }
  if (ax == 0 && ay == 2) {
    Vec2 a = ev(0, h), b = ev(0, 0), c = ev(0, -h);
    return Vec2{(a.x - 2 * b.x + c.x) / (h * h), (a.y - 2 * b.y + c.y) / (h * h)};
  }
  if (ax == 1 && ay == 1) {
    Vec2 pp = ev(h, h), pm = ev(h, -h), mp = ev(-h, h), mm = ev(-h, -h);
    return Vec2{(pp.x - pm.x - mp.x + mm.x) / (4 * h * h),
                (pp.y - pm.y - mp.y + mm.y) / (4 * h * h)};
  }
  throw std::invalid_argument("fd_partial: derivative order above 2");
}

/// sup over the probe set and all multi-indices |a| <= order of the
/// componentwise defect |d^a S_{R,alpha}(x) - d^a T_alpha(x)|.
inline double translation_defect(double R, double alpha,
                                 const std::vector<Vec2>& probes, int order,
                                 double h = 1e-4) {
  if (order < 0 || order > 2) throw std::invalid_argument("translation_defect: order must be <= 2");
  auto Smap = [&](const Vec2& x) { return map_S(x, R, alpha); };
  auto Tmap = [&](const Vec2& x) { return map_T(x, alpha); };
  double worst = 0;
  for (const Vec2& x : probes) {
    if (!(norm2sq(x) < R * R)) throw std::domain_error("translation_defect: probe outside B_R");
    for (int ax = 0; ax <= order; ++ax)
      for (int ay = 0; ax + ay <= order; ++ay) {
        Vec2 ds = fd_partial(Smap, x, ax, ay, h);
        Vec2 dt = fd_partial(Tmap, x, ax, ay, h);
        worst = std::max({worst, std::abs(ds.x - dt.x), std::abs(ds.y - dt.y)});
      }
  }
  return worst;
}

/// sup over probes of |det T S_{R,-alpha}(x) - 1|.
inline double jacobian_defect(double R, double alpha,
                              const std::vector<Vec2>& probes, double h = 1e-4) {
  auto Smap = [&](const Vec2& x) { return map_S(x, R, -alpha); };
  double worst = 0;
  for (const Vec2& x : probes) {
    Vec2 dx = fd_partial(Smap, x, 1, 0, h);
    Vec2 dy = fd_partial(Smap, x, 0, 1, h);
    double det = dx.x * dy.y - dx.y * dy.x;
    worst = std::max(worst, std::abs(det - 1.0));
  }
  return worst;
}

} // namespace pphi
