#pragma once

// Spherical-harmonic basis on the round sphere S_R of radius R, carrying the
// measure rho_R with rho_R(S_R) = 4 pi R^2. The basis is real and orthonormal
// in L2(S_R, rho_R). Grids are Gauss-Legendre in colatitude and equispaced in
// longitude, sized so that pointwise products of band-limited fields are
// integrated exactly up to a configured polynomial degree.
//
// All types are immutable after construction; transforms are reentrant.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <gsl/gsl_sf_legendre.h>

namespace pphi {

inline constexpr double pi = 3.14159265358979323846264338327950288;

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

inline double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// Gauss-Legendre nodes and weights on [-1,1], Newton-refined to full double
// precision (the GSL glfixed tables are only ~1e-11 accurate for general n).
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    double pp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) {
        p0 = 1.0;
        p1 = 0.0;
        for (int j = 0; j < n; ++j) {
          double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
        }
        pp = n * (z * p0 - p1) / (z * z - 1.0);
        break;
      }
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
}

/// Eigenvalue of -Laplace_R on degree-l harmonics: l(l+1)/R^2.
inline double laplacian_eigenvalue(int l, double R) {
  if (l < 0 || R <= 0) throw std::invalid_argument("laplacian_eigenvalue: need l >= 0, R > 0");
  return double(l) * (l + 1.0) / (R * R);
}

// Per-degree real sequence implementing operators diagonal in degree.
struct ZonalMultiplier {
  std::vector<double> values; // indexed by degree l

  int band_limit() const { return int(values.size()) - 1; }
};

enum class MultiplierKind {
  G_R,  // (1 - Lap)^-1
  K_RN, // (1 - Lap/N^2)^-1
  G_RN, // K G K
  Q_RN, // (1 - Lap)(1 - Lap/N^2)^2
};

inline ZonalMultiplier build_multiplier(MultiplierKind kind, double R, double N,
                                        int L_max) {
  if (R <= 0) throw std::invalid_argument("build_multiplier: R must be positive");
  if (N <= 0) throw std::invalid_argument("build_multiplier: N must be positive");
  if (L_max < 0) throw std::invalid_argument("build_multiplier: L_max < 0");
  ZonalMultiplier mu;
  mu.values.resize(L_max + 1);
  for (int l = 0; l <= L_max; ++l) {
    double lam = laplacian_eigenvalue(l, R);
    double kn = 1.0 + lam / (N * N);
    switch (kind) {
      case MultiplierKind::G_R: mu.values[l] = 1.0 / (1.0 + lam); break;
      case MultiplierKind::K_RN: mu.values[l] = 1.0 / kn; break;
      case MultiplierKind::G_RN: mu.values[l] = 1.0 / ((1.0 + lam) * kn * kn); break;
      case MultiplierKind::Q_RN: mu.values[l] = (1.0 + lam) * kn * kn; break;
    }
  }
  return mu;
}

inline ZonalMultiplier identity_multiplier(int L_max) {
  ZonalMultiplier mu;
  mu.values.assign(L_max + 1, 1.0);
  return mu;
}

class SphereGrid;

// Coefficients of a band-limited field on S_R in the real orthonormal basis.
// Index layout: (l, m) -> l*l + (m + l), l in [0, L_max], m in [-l, l].
struct SpectralField {
  double R = 1;
  int L_max = 0;
  std::vector<double> coeffs;

  SpectralField() = default;
  SpectralField(double R_, int L_max_)
      : R(R_), L_max(L_max_), coeffs((L_max_ + 1) * (L_max_ + 1), 0.0) {}

  static int index(int l, int m) { return l * l + m + l; }

  double& operator()(int l, int m) { return coeffs[index(l, m)]; }
  double operator()(int l, int m) const { return coeffs[index(l, m)]; }

  int n_coeffs() const { return int(coeffs.size()); }
};

struct GridField {
  const SphereGrid* grid = nullptr;
  std::vector<double> values; // row-major: i_lat * n_lon + j_lon
};

// Gauss-Legendre x equispaced grid with precomputed Legendre and trig tables.
class SphereGrid {
 public:
  // product_degree: highest degree of pointwise products of band-limited
  // fields that quadrature must integrate exactly (>= 2 for plain L2 pairing).
  SphereGrid(double R, int L_max, int product_degree = 2)
      : R_(R), L_max_(L_max), product_degree_(product_degree) {
    if (R <= 0 || L_max < 0 || product_degree < 1)
      throw std::invalid_argument("SphereGrid: bad parameters");
    n_lat_ = std::max(L_max + 1, (product_degree * L_max) / 2 + 1);
    n_lon_ = std::max(2 * L_max + 1, product_degree * L_max + 1);
    if (n_lon_ % 2 != 0) ++n_lon_; // even, so x1 -> -x1 permutes the nodes
    init_tables();
  }

  double radius() const { return R_; }
  int band_limit() const { return L_max_; }
  int product_degree() const { return product_degree_; }
  int n_lat() const { return n_lat_; }
  int n_lon() const { return n_lon_; }
  int n_nodes() const { return n_lat_ * n_lon_; }

  double colatitude(int i) const { return std::acos(x_[i]); }
  double cos_colatitude(int i) const { return x_[i]; }
  double longitude(int j) const { return 2.0 * pi * j / n_lon_; }

  // quadrature weight of node (i, j), already scaled by R^2
  double node_weight(int i) const { return R_ * R_ * w_[i] * (2.0 * pi / n_lon_); }

  Vec3 node_position(int i, int j) const {
    double st = std::sqrt(std::max(0.0, 1.0 - x_[i] * x_[i]));
    return Vec3{R_ * st * std::cos(longitude(j)), R_ * st * std::sin(longitude(j)),
                R_ * x_[i]};
  }

  double weight_sum() const {
    double s = 0;
    for (int i = 0; i < n_lat_; ++i) s += node_weight(i);
    return s * n_lon_;
  }

  GridField synthesize(const SpectralField& phi) const {
    check_band(phi);
    GridField out;
    out.grid = this;
    out.values.assign(n_nodes(), 0.0);
    int L = phi.L_max;
    std::vector<double> sc(L + 1), ss(L + 1);
    for (int i = 0; i < n_lat_; ++i) {
      const double* P = plm_row(i);
      for (int m = 0; m <= L; ++m) {
        double a = 0, b = 0;
        for (int l = m; l <= L; ++l) {
          double p = P[gsl_sf_legendre_array_index(l, m)];
          a += phi(l, m) * p;
          if (m > 0) b += phi(l, -m) * p;
        }
        sc[m] = (m == 0) ? a : std::numbers::sqrt2 * a;
        ss[m] = (m == 0) ? 0 : std::numbers::sqrt2 * b;
      }
      for (int j = 0; j < n_lon_; ++j) {
        double v = sc[0];
        for (int m = 1; m <= L; ++m)
          v += sc[m] * cos_tab_[m * n_lon_ + j] + ss[m] * sin_tab_[m * n_lon_ + j];
        out.values[i * n_lon_ + j] = v / R_;
      }
    }
    return out;
  }

  SpectralField analyze(const GridField& f, int L_out = -1) const {
    if (f.grid != this) throw std::invalid_argument("analyze: field lives on another grid");
    if (int(f.values.size()) != n_nodes()) throw std::invalid_argument("analyze: length mismatch");
    int L = (L_out < 0) ? L_max_ : L_out;
    if (L > L_max_) throw std::invalid_argument("analyze: band limit exceeds grid capacity");
    SpectralField out(R_, L);
    std::vector<double> am(L + 1), bm(L + 1);
    const double lon_w = 2.0 * pi / n_lon_;
    for (int i = 0; i < n_lat_; ++i) {
      const double* row = f.values.data() + i * n_lon_;
      for (int m = 0; m <= L; ++m) {
        double a = 0, b = 0;
        const double* ct = cos_tab_.data() + m * n_lon_;
        const double* st = sin_tab_.data() + m * n_lon_;
        for (int j = 0; j < n_lon_; ++j) {
          a += row[j] * ct[j];
          b += row[j] * st[j];
        }
        am[m] = a;
        bm[m] = b;
      }
      const double* P = plm_row(i);
      double wi = R_ * w_[i] * lon_w; // R^2 * w * lon_w * (1/R) from basis scale
      for (int m = 0; m <= L; ++m) {
        double s2 = (m == 0) ? 1.0 : std::numbers::sqrt2;
        for (int l = m; l <= L; ++l) {
          double p = P[gsl_sf_legendre_array_index(l, m)];
          out(l, m) += wi * s2 * p * am[m];
          if (m > 0) out(l, -m) += wi * s2 * p * bm[m];
        }
      }
    }
    return out;
  }

  // evaluate a band-limited field at an arbitrary point of S_R
  double evaluate_at(const SpectralField& phi, const Vec3& p) const;

 private:
  void check_band(const SpectralField& phi) const {
    if (phi.L_max > L_max_) throw std::invalid_argument("grid band limit too small for field");
    if (std::abs(phi.R - R_) > 1e-12 * R_) throw std::invalid_argument("field radius differs from grid radius");
  }

  void init_tables() {
    gauss_legendre(n_lat_, x_, w_);

    plm_stride_ = gsl_sf_legendre_array_n(L_max_);
    plm_.resize(size_t(n_lat_) * plm_stride_);
    std::vector<double> buf(plm_stride_);
    for (int i = 0; i < n_lat_; ++i) {
      gsl_sf_legendre_array(GSL_SF_LEGENDRE_SPHARM, L_max_, x_[i], buf.data());
      std::copy(buf.begin(), buf.end(), plm_.begin() + size_t(i) * plm_stride_);
    }

    cos_tab_.resize(size_t(L_max_ + 1) * n_lon_);
    sin_tab_.resize(size_t(L_max_ + 1) * n_lon_);
    for (int m = 0; m <= L_max_; ++m)
      for (int j = 0; j < n_lon_; ++j) {
        double a = 2.0 * pi * m * j / n_lon_;
        cos_tab_[size_t(m) * n_lon_ + j] = std::cos(a);
        sin_tab_[size_t(m) * n_lon_ + j] = std::sin(a);
      }
  }

  const double* plm_row(int i) const { return plm_.data() + size_t(i) * plm_stride_; }

  double R_;
  int L_max_;
  int product_degree_;
  int n_lat_, n_lon_;
  std::vector<double> x_, w_;      // GL nodes/weights on [-1,1]
  std::vector<double> plm_;        // SPHARM-normalized P_l^m per latitude
  size_t plm_stride_ = 0;
  std::vector<double> cos_tab_, sin_tab_;
};

inline SpectralField apply_multiplier(const SpectralField& phi,
                                      const ZonalMultiplier& mu) {
  if (mu.band_limit() != phi.L_max)
    throw std::invalid_argument("apply_multiplier: length mismatch");
  SpectralField out = phi;
  for (int l = 0; l <= phi.L_max; ++l)
    for (int m = -l; m <= l; ++m) out(l, m) *= mu.values[l];
  return out;
}

inline double inner_product(const GridField& f, const GridField& g) {
  if (f.grid == nullptr || f.grid != g.grid)
    throw std::invalid_argument("inner_product: grid mismatch");
  const SphereGrid& G = *f.grid;
  double s = 0;
  for (int i = 0; i < G.n_lat(); ++i) {
    double row = 0;
    for (int j = 0; j < G.n_lon(); ++j)
      row += f.values[i * G.n_lon() + j] * g.values[i * G.n_lon() + j];
    s += row * G.node_weight(i);
  }
  return s;
}

inline double lp_norm_grid(const GridField& f, double p) {
  const SphereGrid& G = *f.grid;
  double s = 0;
  for (int i = 0; i < G.n_lat(); ++i) {
    double row = 0;
    for (int j = 0; j < G.n_lon(); ++j)
      row += std::pow(std::abs(f.values[i * G.n_lon() + j]), p);
    s += row * G.node_weight(i);
  }
  return std::pow(s, 1.0 / p);
}

/// L2(S_R) pairing of two band-limited fields (Parseval).
inline double spectral_inner(const SpectralField& a, const SpectralField& b) {
  if (a.L_max != b.L_max) throw std::invalid_argument("spectral_inner: band limits differ");
  double s = 0;
  for (int k = 0; k < a.n_coeffs(); ++k) s += a.coeffs[k] * b.coeffs[k];
  return s;
}

/// Evaluate a band-limited field at (cos colatitude, longitude).
inline double evaluate_field_angles(const SpectralField& phi, double cos_theta,
                                    double lon) {
  int L = phi.L_max;
  std::vector<double> buf(gsl_sf_legendre_array_n(L));
  gsl_sf_legendre_array(GSL_SF_LEGENDRE_SPHARM, L, cos_theta, buf.data());
  double v = 0;
  for (int m = 0; m <= L; ++m) {
    double a = 0, b = 0;
    for (int l = m; l <= L; ++l) {
      double p = buf[gsl_sf_legendre_array_index(l, m)];
      a += phi(l, m) * p;
      if (m > 0) b += phi(l, -m) * p;
    }
    if (m == 0)
      v += a;
    else
      v += std::numbers::sqrt2 * (a * std::cos(m * lon) + b * std::sin(m * lon));
  }
  return v / phi.R;
}

/// Evaluate a band-limited field at an arbitrary point of S_R.
inline double evaluate_field(const SpectralField& phi, const Vec3& p) {
  double r = norm(p);
  double ct = std::clamp(p.z / r, -1.0, 1.0);
  double lon = std::atan2(p.y, p.x);
  return evaluate_field_angles(phi, ct, lon);
}

inline double SphereGrid::evaluate_at(const SpectralField& phi, const Vec3& p) const {
  check_band(phi);
  return evaluate_field(phi, p);
}

inline double geodesic_distance(const Vec3& x, const Vec3& y, double R,
                                double tol = 1e-9) {
  if (R <= 0) throw std::invalid_argument("geodesic_distance: R <= 0");
  if (std::abs(norm(x) - R) > tol * R || std::abs(norm(y) - R) > tol * R)
    throw std::domain_error("geodesic_distance: point off the sphere");
  double c = std::clamp(dot(x, y) / (R * R), -1.0, 1.0);
  return R * std::acos(c);
}

} // namespace pphi
