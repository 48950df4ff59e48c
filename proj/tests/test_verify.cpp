#include <catch2/catch_amalgamated.hpp>

#include "pphi/verify.hpp"

#include <cmath>

using namespace pphi;
using Catch::Approx;

namespace {

SpectralField random_field(double R, int L, uint64_t seed) {
  SpectralField f(R, L);
  RngStream s(seed, 0);
  for (int k = 0; k < f.n_coeffs(); ++k) f.coeffs[k] = s.normal(k);
  return f;
}

std::vector<GridField> halfsphere_bumps(const SphereGrid& grid, int count) {
  std::vector<Vec3> centers = {{1, 0.25, 0.1},  {1, -0.2, 0.25}, {1, 0.05, -0.3},
                               {1, 0.4, 0.0},   {0.9, -0.35, -0.15}, {1, 0.1, 0.35},
                               {1, -0.3, -0.2}, {1, 0.0, 0.0}};
  std::vector<GridField> out;
  double R = grid.radius();
  for (int i = 0; i < count; ++i) {
    Vec3 c = centers[i % centers.size()];
    double nn = norm(c);
    out.push_back(geodesic_bump(grid, Vec3{c.x * R / nn, c.y * R / nn, c.z * R / nn},
                                (0.3 + 0.01 * i) * R));
  }
  return out;
}

} // namespace

TEST_CASE("reflections") {
  double R = 1.4;
  int L = 6;
  SphereGrid grid(R, L, 2);
  auto phi = random_field(R, L, 5);
  GridField f = grid.synthesize(phi);

  SECTION("involution, bit exact on the grid") {
    GridField ff = reflect_sphere(reflect_sphere(f));
    CHECK(ff.values == f.values);
  }

  SECTION("isometry of grid norms") {
    GridField rf = reflect_sphere(f);
    CHECK(lp_norm_grid(rf, 2) == Approx(lp_norm_grid(f, 2)).epsilon(1e-14));
    CHECK(inner_product(rf, rf) == Approx(inner_product(f, f)).epsilon(1e-14));
  }

  SECTION("spectral parity rule matches the node permutation") {
    SpectralField spec_route = reflect_spectral(phi);
    SpectralField grid_route = grid.analyze(reflect_sphere(f));
    for (int k = 0; k < phi.n_coeffs(); ++k)
      CHECK(spec_route.coeffs[k] == Approx(grid_route.coeffs[k]).margin(1e-11));
    CHECK(reflect_spectral(reflect_spectral(phi)).coeffs == phi.coeffs);
  }

  SECTION("pullback commutes with reflection on the plane") {
    PlaneGrid plane(8 * R, 32);
    PlaneField a = pushforward_field(reflect_spectral(phi), plane);
    PlaneField b = reflect_plane(pushforward_field(phi, plane));
    for (int k = 0; k < plane.n_nodes(); ++k)
      CHECK(a.values[k] == Approx(b.values[k]).margin(1e-11));
  }
}

TEST_CASE("gaussian reflection positivity gram") {
  double R = 1, N = 2;
  int L = 48;
  SphereGrid grid(R, L, 2);
  auto fs = halfsphere_bumps(grid, 3);

  SECTION("support precondition") {
    GridField sym = geodesic_bump(grid, Vec3{0, 0, R}, 0.9 * R); // straddles x1 = 0
    auto cov = build_multiplier(MultiplierKind::G_R, R, 1, L);
    std::vector<GridField> bad = {sym};
    CHECK_THROWS(rp_gram_gaussian(bad, cov, N));
    CHECK_THROWS(make_halfsphere_function(grid, Vec3{0, 0, 1}, 0.9 * R, N));
  }

  SECTION("free covariance is PSD to 1e-10") {
    auto cov = build_multiplier(MultiplierKind::G_R, R, 1, L);
    auto res = rp_gram_gaussian(fs, cov, N);
    CHECK(res.min_eig >= -1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(res.gram);
    CHECK(res.min_eig == Approx(es.eigenvalues()(0)).margin(1e-14));
  }

  SECTION("hat covariance is PSD, spectral cutoff recorded observationally") {
    BumpProfile h = build_bump();
    auto khat = hat_multiplier(R, N, h, L);
    auto covG = build_multiplier(MultiplierKind::G_R, R, 1, L);
    ZonalMultiplier hat_cov;
    hat_cov.values.resize(L + 1);
    for (int l = 0; l <= L; ++l)
      hat_cov.values[l] = khat.values[l] * khat.values[l] * covG.values[l];
    auto res = rp_gram_gaussian(fs, hat_cov, N);
    CHECK(res.min_eig >= -1e-10);

    auto kgk = build_multiplier(MultiplierKind::G_RN, R, N, L);
    auto obs = rp_gram_gaussian(fs, kgk, N);
    CHECK(std::isfinite(obs.min_eig)); // sign not asserted (cutoff breaks RP)
  }
}

TEST_CASE("interacting reflection positivity MC") {
  double R = 1, N = 2;
  int L = 8;
  SphereGrid grid(R, L, 4);
  SpectralField f1 = make_halfsphere_function(grid, {1, 0.25, 0.1}, 0.35 * R, N);
  SpectralField f2 = make_halfsphere_function(grid, {1, -0.2, 0.25}, 0.3 * R, N);
  CylindricalFunctional F1{CylindricalFunctional::Outer::linear, {f1}};
  CylindricalFunctional F2{CylindricalFunctional::Outer::pair_product, {f1, f2}};

  SECTION("free case reduces to the deterministic gram") {
    auto tiny = PolynomialSpec::pure(4, 1e-10);
    CylindricalFunctional G2{CylindricalFunctional::Outer::linear, {f2}};
    auto mc = rp_mc_interacting(R, N, L, tiny, {F1, G2}, 40000, 50, RngStream(8, 0));
    BumpProfile h = build_bump();
    auto khat = hat_multiplier(R, N, h, L);
    auto covG = build_multiplier(MultiplierKind::G_R, R, 1, L);
    ZonalMultiplier hat_cov;
    hat_cov.values.resize(L + 1);
    for (int l = 0; l <= L; ++l)
      hat_cov.values[l] = khat.values[l] * khat.values[l] * covG.values[l];
    std::vector<GridField> bumps = {
        geodesic_bump(grid, Vec3{1 / norm(Vec3{1, 0.25, 0.1}), 0.25 / norm(Vec3{1, 0.25, 0.1}),
                                 0.1 / norm(Vec3{1, 0.25, 0.1})}, 0.35 * R),
        geodesic_bump(grid, Vec3{1 / norm(Vec3{1, -0.2, 0.25}), -0.2 / norm(Vec3{1, -0.2, 0.25}),
                                 0.25 / norm(Vec3{1, -0.2, 0.25})}, 0.3 * R)};
    auto det = rp_gram_gaussian(bumps, hat_cov, N);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        CHECK(std::abs(mc.gram(i, j).real() - det.gram(i, j)) <
              0.15 * std::abs(det.gram(i, j)) + 1e-6);
    CHECK(mc.pass);
  }

  SECTION("interacting PSD within jackknife tolerance") {
    auto spec = PolynomialSpec::pure(4, 0.5);
    auto res = rp_mc_interacting(R, N, L, spec, {F1, F2}, 20000, 50, RngStream(7, 0));
    CHECK(res.ess >= 100);
    CHECK(res.pass);
    CHECK(res.min_eig >= -3 * res.min_eig_se);
  }

  SECTION("theta-asymmetric weight breaks PSD detectably") {
    auto spec = PolynomialSpec::pure(4, 0.5);
    auto bad = rp_mc_interacting(R, N, L, spec, {F1, F2}, 20000, 50, RngStream(7, 0), true);
    CHECK_FALSE(bad.pass);
    CHECK(bad.min_eig < -3 * bad.min_eig_se);
  }
}

TEST_CASE("rotation invariance") {
  double R = 1.2, N = 2;
  int L = 5;
  SphereGrid grid(R, L, 4);
  auto cov = build_multiplier(MultiplierKind::G_RN, R, N, L);

  SECTION("gaussian two-point zonal identity, exact") {
    Vec3 x = grid.node_position(2, 3), y = grid.node_position(4, 11);
    double direct = covariance_mode_sum(cov, R, x, y);
    double zonal = covariance_zonal(cov, R, dot(x, y) / (R * R));
    CHECK(direct == Approx(zonal).margin(1e-10));
    for (double a : {0.7, 2.1}) {
      Vec3 xr = sphere_rot(x, a), yr = sphere_rot(y, a);
      CHECK(covariance_mode_sum(cov, R, xr, yr) == Approx(direct).margin(1e-10));
      Vec3 xt = sphere_trans(x, R, a), yt = sphere_trans(y, R, a);
      CHECK(covariance_mode_sum(cov, R, xt, yt) == Approx(direct).margin(1e-10));
    }
  }

  SECTION("rotated test functions keep their band limit") {
    auto f = random_field(R, L, 9);
    auto fr = rotate_test_function(f, grid, SphereMap::rot_x2, 0.9);
    CHECK(bessel_norm_sphere(fr, 0, 2) == Approx(bessel_norm_sphere(f, 0, 2)).epsilon(1e-10));
    auto f0 = rotate_test_function(f, grid, SphereMap::rot_x3, 0.0);
    for (int k = 0; k < f.n_coeffs(); ++k)
      CHECK(f0.coeffs[k] == Approx(f.coeffs[k]).margin(1e-12));
  }

  SECTION("paired z-scores on stationary interacting samples") {
    auto sys = LangevinSystem::make(1, 2, 3, PolynomialSpec::pure(4));
    auto gb = gibbs_sampler(sys, 30000, 3000, 5, RngStream(95, 0));
    SpectralField f(1, 3), g(1, 3);
    f(1, 1) = 1.0;
    f(2, 0) = 0.5;
    g(1, -1) = 0.8;
    g(3, 2) = 0.4;
    SphereGrid grid3(1, 3, 4);
    auto z1 = symmetry_check(gb.samples, f, g, grid3, SphereMap::rot_x3, 1.3);
    CHECK(std::abs(z1.z) <= 3.0);
    auto z2 = symmetry_check(gb.samples, f, g, grid3, SphereMap::rot_x2, 0.7);
    CHECK(std::abs(z2.z) <= 3.0);
    auto z0 = symmetry_check(gb.samples, f, g, grid3, SphereMap::rot_x3, 0.0);
    CHECK(z0.z == 0.0);
  }
}

TEST_CASE("uv rates") {
  double R = 1;
  auto spec = PolynomialSpec::pure(4);

  SECTION("N = M vanishes") {
    CHECK(y_variance_diff(R, spec, 4, 4, 32) == Approx(0.0).margin(1e-12));
  }

  SECTION("m = 1 chaos against the trace-formula oracle") {
    // the m=1 chaos contributes a1^2 (iint G_NN - 2 iint G_NM + iint G_MM);
    // iint G = 4 pi R^2 g_0 with g_0 = 1 for every cutoff, so it cancels
    PolynomialSpec with1(4, {0, 0.7, 0, 0, 0.25});
    PolynomialSpec base(4, {0, 0, 0, 0, 0.25});
    double N = 2, M = 8;
    int L = 32;
    double diff = y_variance_diff(R, with1, N, M, L) - y_variance_diff(R, base, N, M, L);
    CHECK(diff == Approx(0.0).margin(1e-12));

    double v1 = y_variance_diff(R, PolynomialSpec::pure(4, 2.0), N, M, L);
    double v2 = y_variance_diff(R, PolynomialSpec::pure(4, 1.0), N, M, L);
    CHECK(v1 == Approx(4.0 * v2).epsilon(1e-12)); // lambda^2 scaling
  }

  SECTION("deterministic and MC routes agree") {
    double N = 2, M = 4;
    int L = 8;
    double det = y_variance_diff(R, spec, N, M, L);
    double se = 0;
    double mc = y_variance_diff_mc(R, spec, N, M, L, 4000, RngStream(21, 0), &se);
    CHECK(std::abs(mc - det) <= 3 * se);
    CHECK(det > 0);
  }

  SECTION("decay shape in N") {
    // The sequence N -> E(Y_N - Y_2N)^2 rises once from N=2 to N=4 (a real
    // preasymptotic feature of the quartic chaos, stable under truncation
    // and confirmed by the MC route) and then decays strictly.
    int L = 128;
    std::vector<double> v;
    for (double N : {2.0, 4.0, 8.0, 16.0})
      v.push_back(y_variance_diff(R, spec, N, 2 * N, L));
    CHECK(v[1] > v[0]);
    CHECK(v[2] < v[1]);
    CHECK(v[3] < v[2]);
    // fitted log-log exponent over the sweep is negative
    std::vector<double> lx, ly;
    for (size_t i = 0; i < v.size(); ++i) {
      lx.push_back(std::log(2.0 * (1 << i)));
      ly.push_back(std::log(v[i]));
    }
    CHECK(linear_fit(lx, ly).slope < 0.0);
  }

  SECTION("field-norm differences decay at least as fast as N^{-2 delta}") {
    // the sharp rate of the trace formula is N^{-2(kappa+delta)}; the
    // N^{-2 delta} bound holds with room to spare
    double kappa = 0.5, delta = 0.5;
    std::vector<double> lx, ly;
    for (double N : {4.0, 8.0, 16.0, 32.0}) {
      lx.push_back(std::log(N));
      ly.push_back(std::log(x_norm_diff(R, N, kappa, delta, int(30 * N * R))));
    }
    auto fit = linear_fit(lx, ly);
    CHECK(fit.slope <= -2 * delta + 0.1);
    CHECK(fit.slope == Approx(-2 * (kappa + delta)).margin(0.4));
    CHECK(ly[3] < ly[0]);
  }

  SECTION("strip variance decays") {
    BumpProfile h = build_bump();
    double s4 = strip_variance(R, spec, 4, 32, h);
    double s8 = strip_variance(R, spec, 8, 48, h);
    CHECK(s4 > 0);
    CHECK(s8 < s4);
  }
}

TEST_CASE("tightness moments") {
  auto sys = LangevinSystem::make(1, 2, 3, PolynomialSpec::pure(4));
  auto gb = gibbs_sampler(sys, 4000, 1000, 10, RngStream(97, 0));
  PlaneGrid plane(8.0, 64);

  auto t1 = tightness_moment(gb.samples, plane, 4, 0.5, 1.0);
  CHECK(t1.mean > 0);
  CHECK(std::isfinite(t1.se));

  // kappa up, estimate down (stronger smoothing)
  auto t2 = tightness_moment(gb.samples, plane, 4, 1.0, 1.0);
  CHECK(t2.mean <= t1.mean);
}

TEST_CASE("integrability") {
  SECTION("f = 0 gives exactly 1") {
    auto sys = LangevinSystem::make(1, 2, 2, PolynomialSpec::pure(4));
    auto gb = gibbs_sampler(sys, 2000, 500, 10, RngStream(98, 0));
    SpectralField zero(1, 2);
    auto res = integrability_check(gb.samples, zero, 4);
    CHECK(res.estimate == Approx(1.0).margin(1e-14));
    CHECK(res.hairer_steele_ok);
    CHECK(res.pass);
  }

  SECTION("hairer-steele on a two-point toy measure, closed form") {
    // mu uniform on {a, b}, F(a) = 0.3, F(b) = -0.1
    double Fa = 0.3, Fb = -0.1;
    double lhs = 0.5 * (std::exp(Fa) + std::exp(Fb));
    double rhs = std::exp((Fa * std::exp(Fa) + Fb * std::exp(Fb)) /
                          (std::exp(Fa) + std::exp(Fb)));
    CHECK(lhs <= rhs);
    CHECK(lhs == Approx(0.5 * (std::exp(0.3) + std::exp(-0.1))).epsilon(1e-12));
  }

  SECTION("calibrated small source stays under 2") {
    auto sys = LangevinSystem::make(1, 2, 3, PolynomialSpec::pure(4));
    SphereGrid grid(1, 3, 4);
    double eps = 0.005;
    auto fplane = [eps](Vec2 x) { return eps * std::exp(-norm2sq(x) / 2.0); };
    SpectralField g = source_from_plane(fplane, grid);

    // gate: || v_L^{-1/n} f ||^n_{L^kappa_{n/(n-1)}}, the Bessel norm of the
    // pointwise product v^{-1/n} f in the unweighted space
    PlaneGrid plane(8.0, 64);
    PlaneField h;
    h.grid = &plane;
    h.values.resize(plane.n_nodes());
    for (int i = 0; i < plane.n_side(); ++i)
      for (int j = 0; j < plane.n_side(); ++j) {
        Vec2 x = plane.node(i, j);
        h.values[plane.index(i, j)] = fplane(x) / std::pow(weight_v(x, 1.0), 0.25);
      }
    double gate = std::pow(
        bessel_norm_plane(h, NormSpec(4.0 / 3, 0.5, WeightSpec::one())).value, 4);
    CHECK(gate < 0.05);

    auto gb = gibbs_sampler(sys, 30000, 3000, 5, RngStream(99, 0));
    auto res = integrability_check(gb.samples, g, 4, gate);
    CHECK(res.estimate <= 2.0 + 3 * res.se);
    CHECK(res.hairer_steele_ok);
    CHECK_FALSE(res.heavy_tail);
    CHECK(res.pass);
  }

  SECTION("heavy tail warning") {
    std::vector<SpectralField> fake;
    SpectralField g(1, 0);
    g(0, 0) = 1.0;
    for (int i = 0; i < 200; ++i) {
      SpectralField s(1, 0);
      s(0, 0) = (i == 0) ? 3.5 : 0.01; // one sample carries almost all weight
      fake.push_back(s);
    }
    auto res = integrability_check(fake, g, 4);
    CHECK(res.heavy_tail);
    CHECK_FALSE(res.pass);
  }
}

TEST_CASE("harness determinism") {
  double R = 1, N = 2;
  int L = 8;
  SphereGrid grid(R, L, 4);
  SpectralField f1 = make_halfsphere_function(grid, {1, 0.25, 0.1}, 0.35 * R, N);
  CylindricalFunctional F1{CylindricalFunctional::Outer::linear, {f1}};
  auto spec = PolynomialSpec::pure(4, 0.5);
  auto a = rp_mc_interacting(R, N, L, spec, {F1}, 5000, 25, RngStream(42, 3));
  auto b = rp_mc_interacting(R, N, L, spec, {F1}, 5000, 25, RngStream(42, 3));
  CHECK(a.min_eig == b.min_eig);
  CHECK(a.min_eig_se == b.min_eig_se);
  CHECK(a.ess == b.ess);
}
