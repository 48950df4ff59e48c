#include <catch2/catch_amalgamated.hpp>

#include "pphi/dynamics.hpp"

#include <cmath>

using namespace pphi;
using Catch::Approx;

TEST_CASE("exact OU transition algebra") {
  auto Q = build_multiplier(MultiplierKind::Q_RN, 1, 2, 8);
  double dt = 0.37;
  OuCoeffs full = make_ou_coeffs(Q, dt);
  OuCoeffs half = make_ou_coeffs(Q, dt / 2);
  for (int l = 0; l <= 8; ++l) {
    // composing two half steps equals one full step in distribution
    CHECK(half.decay[l] * half.decay[l] == Approx(full.decay[l]).margin(1e-12));
    double var2 = half.noise_sd[l] * half.noise_sd[l] *
                  (1.0 + half.decay[l] * half.decay[l]);
    CHECK(var2 == Approx(full.noise_sd[l] * full.noise_sd[l]).margin(1e-12));
  }
  CHECK_THROWS(make_ou_coeffs(Q, 0.0));
}

TEST_CASE("ou step basics") {
  double R = 1, N = 1;
  int L = 1;
  auto Q = build_multiplier(MultiplierKind::Q_RN, R, N, L);
  CHECK(Q.values[0] == 1.0);
  CHECK(Q.values[1] == 27.0);

  SECTION("zero-noise decay factor") {
    SpectralField z(R, L);
    z(0, 0) = 2.0;
    z(1, -1) = -1.5;
    double dt = 0.3;
    auto z1 = ou_step(z, dt, Q, nullptr, 0);
    CHECK(z1(0, 0) == Approx(2.0 * std::exp(-1.0 * dt)).epsilon(1e-14));
    CHECK(z1(1, -1) == Approx(-1.5 * std::exp(-27.0 * dt)).epsilon(1e-14));
  }

  SECTION("long-run stationary variance") {
    OuCoeffs co = make_ou_coeffs(Q, 0.5);
    RngStream noise(404, 0);
    SpectralField z(R, L);
    std::vector<double> s0, s1;
    int64_t steps = 40000;
    for (int64_t s = 0; s < steps; ++s) {
      z = ou_step(z, co, &noise, uint64_t(s));
      if (s >= 200) {
        s0.push_back(z(0, 0) * z(0, 0));
        s1.push_back(z(1, 0) * z(1, 0));
      }
    }
    auto st0 = series_stats(s0);
    auto st1 = series_stats(s1);
    CHECK(std::abs(st0.mean - 1.0) <= 4 * st0.se);
    CHECK(std::abs(st1.mean - 1.0 / 27.0) <= 4 * st1.se);
  }
}

TEST_CASE("interacting step consistency") {
  auto sys = LangevinSystem::make(1, 2, 3, PolynomialSpec::pure(4));
  OuCoeffs co = make_ou_coeffs(sys.Q, 0.01);
  RngStream noise(11, 0);
  GaussianSampler gs(sys.R, sys.L_max, sys.cov, RngStream(11, 5));
  SpectralField phi = gs.sample();

  SECTION("drift disabled reduces to ou_step") {
    auto a = interacting_step(phi, sys, co, &noise, 7, 1e6, false);
    auto b = ou_step(phi, co, &noise, 7);
    CHECK(a.coeffs == b.coeffs);
  }

  SECTION("g-term adds exactly (phi(g))^{n-1} g to the drift") {
    SpectralField g(sys.R, sys.L_max);
    g(1, 0) = 0.37;
    g(2, 1) = -0.11;
    auto sysg = LangevinSystem::make(1, 2, 3, PolynomialSpec::pure(4), g);
    auto with = interacting_step(phi, sysg, co, nullptr, 0);
    auto without = interacting_step(phi, sys, co, nullptr, 0);
    double xg = spectral_inner(phi, g);
    double s = std::pow(xg, 3);
    for (int l = 0; l <= sys.L_max; ++l)
      for (int m = -l; m <= l; ++m) {
        int k = SpectralField::index(l, m);
        double expect = co.drift_w[l] * s * g.coeffs[k];
        CHECK(with.coeffs[k] - without.coeffs[k] == Approx(expect).margin(1e-13));
      }
  }

  SECTION("blow-up detection") {
    SpectralField big(sys.R, sys.L_max);
    big(0, 0) = 1e8;
    CHECK_THROWS_AS(interacting_step(big, sys, co, &noise, 0), BlowupError);
  }
}

TEST_CASE("remainder flow against scalar ODE oracle") {
  // Z = 0: the Psi equation at L_max = 0 is du/dt = -u - lambda (u^3/A - 3 c u)
  auto sys = LangevinSystem::make(1, 2, 0, PolynomialSpec::pure(4));
  double A = 4 * pi;
  double c = sys.ctx.c;
  auto f = [&](double u) { return -u - (u * u * u / A - 3 * c * u); };

  double u0 = 2.0, T = 4.0;
  // RK4 oracle at tiny step
  double u = u0;
  {
    double h = 1e-4;
    for (int s = 0; s < int(T / h); ++s) {
      double k1 = f(u), k2 = f(u + h / 2 * k1), k3 = f(u + h / 2 * k2), k4 = f(u + h * k3);
      u += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
  }

  auto run = [&](double dt) {
    SpectralField Psi(sys.R, 0), Z(sys.R, 0);
    Psi(0, 0) = u0;
    OuCoeffs co = make_ou_coeffs(sys.Q, dt);
    for (int s = 0; s < int(T / dt); ++s) {
      auto [p, z] = remainder_step(Psi, Z, sys, co, nullptr, uint64_t(s));
      Psi = p;
      Z = z;
    }
    return Psi(0, 0);
  };

  double e1 = std::abs(run(0.02) - u);
  double e2 = std::abs(run(0.01) - u);
  CHECK(e1 < 0.05);
  CHECK(e1 / e2 == Approx(2.0).margin(0.7)); // first order in dt

  // long-time limit sits at a critical point of the flow
  SpectralField Psi(sys.R, 0), Z(sys.R, 0);
  Psi(0, 0) = u0;
  OuCoeffs co = make_ou_coeffs(sys.Q, 0.01);
  for (int s = 0; s < 4000; ++s) {
    auto [p, z] = remainder_step(Psi, Z, sys, co, nullptr, uint64_t(s));
    Psi = p;
    Z = z;
  }
  CHECK(std::abs(f(Psi(0, 0))) < 1e-6);
}

TEST_CASE("split mode tracks the full equation at shared noise") {
  // Both steps share the exponential-Euler skeleton and evaluate the
  // nonlinearity at time t, so the remainder-coefficient identity makes
  // Z + Psi reproduce the full trajectory to round-off (subsumes the O(dt)
  // requirement; there is no discretization gap to fit a rate to).
  auto sys = LangevinSystem::make(1, 2, 2, PolynomialSpec::pure(4));
  double T = 0.5;

  auto gap = [&](double dt) {
    OuCoeffs co = make_ou_coeffs(sys.Q, dt);
    RngStream noise(1234, 0);
    GaussianSampler gz(sys.R, sys.L_max, sys.cov, RngStream(1234, 1));
    SpectralField Z = gz.sample();
    SpectralField Psi(sys.R, sys.L_max);
    Psi(0, 0) = 0.8;
    Psi(1, 1) = -0.4;
    SpectralField phi = Z;
    for (int k = 0; k < phi.n_coeffs(); ++k) phi.coeffs[k] += Psi.coeffs[k];
    int steps = int(T / dt);
    for (int s = 0; s < steps; ++s) {
      phi = interacting_step(phi, sys, co, &noise, uint64_t(s));
      auto [p, z] = remainder_step(Psi, Z, sys, co, &noise, uint64_t(s));
      Psi = p;
      Z = z;
    }
    double d = 0;
    for (int k = 0; k < phi.n_coeffs(); ++k)
      d = std::max(d, std::abs(phi.coeffs[k] - Z.coeffs[k] - Psi.coeffs[k]));
    return d;
  };

  CHECK(gap(0.01) < 1e-11);
  CHECK(gap(0.0025) < 1e-11);
}

TEST_CASE("free chain is stationary at nu_RN") {
  auto sys = LangevinSystem::make(1, 2, 4, PolynomialSpec::pure(4));
  IntegratorConfig cfg;
  cfg.dt = 1.0; // exact linear kernel: any dt leaves nu invariant
  cfg.steps = 12000;
  cfg.burn_in = 500;
  cfg.thinning = 2;
  cfg.drift_enabled = false;
  std::vector<Observable> obs;
  for (int l = 0; l <= 4; ++l)
    obs.push_back({"m" + std::to_string(l), [l](const SpectralField& f) {
                     return f(l, std::min(l, 1)) * f(l, std::min(l, 1));
                   }});
  auto res = run_chain(sys, cfg, ChainMode::full, InitialKind::gaussian,
                       RngStream(2121, 0), obs, false);
  for (int l = 0; l <= 4; ++l) {
    INFO("mode degree " << l);
    CHECK(std::abs(res.stats[l].mean - sys.cov.values[l]) <= 4 * res.stats[l].se);
  }
}

TEST_CASE("run_chain determinism and split archive") {
  auto sys = LangevinSystem::make(1, 2, 2, PolynomialSpec::pure(4));
  IntegratorConfig cfg;
  cfg.steps = 400;
  cfg.burn_in = 100;
  cfg.thinning = 10;
  std::vector<Observable> obs = {{"c00", [](const SpectralField& f) { return f(0, 0); }}};
  auto a = run_chain(sys, cfg, ChainMode::split, InitialKind::gaussian, RngStream(5, 9), obs);
  auto b = run_chain(sys, cfg, ChainMode::split, InitialKind::gaussian, RngStream(5, 9), obs);
  CHECK(a.series[0] == b.series[0]);
  CHECK(a.fields_z.size() == a.fields.size());
  CHECK(a.fields_psi.size() == a.fields.size());
  // Phi = Z + Psi reconstructible
  for (size_t i = 0; i < a.fields.size(); ++i)
    for (int k = 0; k < a.fields[i].n_coeffs(); ++k)
      CHECK(a.fields[i].coeffs[k] ==
            Approx(a.fields_z[i].coeffs[k] + a.fields_psi[i].coeffs[k]).margin(1e-12));
}

TEST_CASE("energy decay without noise") {
  auto sys = LangevinSystem::make(1, 2, 3, PolynomialSpec::pure(4));
  double dt = 0.002;
  OuCoeffs co = make_ou_coeffs(sys.Q, dt);
  GaussianSampler gs(sys.R, sys.L_max, sys.cov, RngStream(31, 7));
  SpectralField phi = gs.sample();
  double e0 = chain_energy(phi, sys);
  double prev = e0;
  for (int s = 0; s < 400; ++s) {
    phi = interacting_step(phi, sys, co, nullptr, uint64_t(s));
    double e = chain_energy(phi, sys);
    CHECK(e <= prev + 50 * dt * dt);
    prev = e;
  }
  CHECK(prev < e0); // and it really went downhill
}

TEST_CASE("gibbs sampler") {
  SECTION("free limit recovers gaussian moments") {
    auto sys = LangevinSystem::make(1, 2, 2, PolynomialSpec::pure(4, 1e-8));
    auto res = gibbs_sampler(sys, 30000, 3000, 3, RngStream(88, 0));
    CHECK(res.acceptance > 0.2);
    std::vector<double> m0, m2;
    for (auto& f : res.samples) {
      m0.push_back(f(0, 0) * f(0, 0));
      m2.push_back(f(2, -1) * f(2, -1));
    }
    auto s0 = series_stats(m0), s2 = series_stats(m2);
    CHECK(std::abs(s0.mean - sys.cov.values[0]) <= 4 * s0.se);
    CHECK(std::abs(s2.mean - sys.cov.values[2]) <= 4 * s2.se);
  }

  SECTION("coupling dependence of the two-point function") {
    // Two-run comparison at lambda = 1 vs 3. With the plain quartic density
    // (c = 0) the interaction suppresses <phi(f)^2>; with the Wick-ordered
    // density at these parameters the counterterm's negative quadratic
    // dominates the weak quartic and the two-point function grows instead.
    // Cross-checked against direct importance reweighting from nu_{R,N}.
    auto run = [&](double lambda, double c_override, uint64_t stream) {
      auto sys = LangevinSystem::make(1, 2, 2, PolynomialSpec::pure(4, lambda));
      if (c_override >= 0) sys.ctx.c = c_override;
      auto r = gibbs_sampler(sys, 120000, 5000, 4, RngStream(89, stream));
      std::vector<double> a;
      for (auto& f : r.samples) a.push_back(f(0, 0) * f(0, 0));
      return series_stats(a);
    };
    auto p1 = run(1.0, 0.0, 0), p3 = run(3.0, 0.0, 1); // plain quartic
    CHECK(p1.mean - p3.mean > 3 * std::hypot(p1.se, p3.se));
    auto w1 = run(1.0, -1, 2), w3 = run(3.0, -1, 3); // Wick-ordered
    CHECK(w3.mean - w1.mean > 3 * std::hypot(w1.se, w3.se));
  }

  SECTION("deterministic replay") {
    auto sys = LangevinSystem::make(1, 2, 1, PolynomialSpec::pure(4));
    auto a = gibbs_sampler(sys, 2000, 500, 10, RngStream(90, 0));
    auto b = gibbs_sampler(sys, 2000, 500, 10, RngStream(90, 0));
    REQUIRE(a.samples.size() == b.samples.size());
    for (size_t i = 0; i < a.samples.size(); ++i)
      CHECK(a.samples[i].coeffs == b.samples[i].coeffs);
  }

  SECTION("normalization-free Jensen ratio") {
    // E_nu[exp(-Y^g)] >= 1 for a pure even interaction with a small source
    auto sys = LangevinSystem::make(1, 2, 2, PolynomialSpec::pure(4));
    SpectralField g(1, 2);
    g(1, 0) = 0.15;
    WickContext ctx;
    ctx.c = sys.ctx.c;
    ctx.g = g;
    GaussianSampler gs(1, 2, sys.cov, RngStream(91, 0));
    int draws = 20000;
    double acc = 0, acc2 = 0;
    for (int d = 0; d < draws; ++d) {
      auto X = gs.sample();
      double y = interaction_Y(X, *sys.grid, sys.spec, ctx.c, Region::all(), ctx);
      double w = std::exp(-y);
      acc += w;
      acc2 += w * w;
    }
    double mean = acc / draws;
    double se = std::sqrt((acc2 / draws - mean * mean) / draws);
    CHECK(mean >= 1.0 - 3 * se);
  }

  SECTION("L_max guard") {
    auto sys = LangevinSystem::make(1, 2, 7, PolynomialSpec::pure(4));
    CHECK_THROWS(gibbs_sampler(sys, 100, 10, 1, RngStream(0, 0)));
  }
}

TEST_CASE("stats toolbox") {
  SECTION("ks test separates right and wrong variances") {
    RngStream s(7, 7);
    std::vector<double> x;
    for (int i = 0; i < 4000; ++i) x.push_back(2.0 * s.normal(i));
    auto good = ks_test(x, [](double t) { return normal_cdf(t, 0, 2.0); });
    CHECK(good.p_value > 1e-3);
    auto bad = ks_test(x, [](double t) { return normal_cdf(t, 0, 1.0); });
    CHECK(bad.p_value < 1e-6);
  }

  SECTION("linear fit recovers a line") {
    std::vector<double> x = {1, 2, 3, 4, 5}, y;
    for (double xi : x) y.push_back(3.0 - 2.0 * xi);
    auto fit = linear_fit(x, y);
    CHECK(fit.slope == Approx(-2.0).margin(1e-12));
    CHECK(fit.intercept == Approx(3.0).margin(1e-12));
    CHECK(fit.slope_se == Approx(0.0).margin(1e-10));
  }

  SECTION("autocorrelation time of an AR(1) chain") {
    RngStream s(8, 8);
    double rho = 0.8, x = 0;
    std::vector<double> series;
    for (int i = 0; i < 200000; ++i) {
      x = rho * x + std::sqrt(1 - rho * rho) * s.normal(i);
      series.push_back(x);
    }
    auto st = series_stats(series);
    // tau = (1+rho)/(1-rho) = 9
    CHECK(st.tau == Approx(9.0).margin(1.5));
  }

  SECTION("jackknife of a mean matches the direct standard error") {
    RngStream s(9, 9);
    int B = 200, per = 200;
    std::vector<double> reps(B);
    std::vector<double> all;
    double total = 0;
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < per; ++i) {
        double v = s.normal(b * per + i);
        all.push_back(v);
        total += v;
      }
    for (int b = 0; b < B; ++b) {
      double part = 0;
      for (int i = 0; i < per; ++i) part += all[b * per + i];
      reps[b] = (total - part) / double((B - 1) * per);
    }
    double direct = std::sqrt(series_stats(all).var / double(B * per));
    CHECK(jackknife_se(reps) == Approx(direct).epsilon(0.15));
  }
}

TEST_CASE("error paths") {
  auto sys = LangevinSystem::make(1, 2, 1, PolynomialSpec::pure(4));
  IntegratorConfig cfg;
  cfg.steps = 50;
  cfg.burn_in = 10;
  cfg.thinning = 5;
  std::vector<Observable> obs = {
      {"bad", [](const SpectralField&) { return std::nan(""); }}};
  CHECK_THROWS(run_chain(sys, cfg, ChainMode::full, InitialKind::zero,
                         RngStream(1, 1), obs, false));

  BumpProfile h = build_bump();
  CHECK_THROWS(hat_multiplier(1, 2, h, 16, 1e-30)); // unreachable tolerance
}

TEST_CASE("gibbs vs langevin two-point (light)") {
  auto sys = LangevinSystem::make(1, 2, 2, PolynomialSpec::pure(4));
  auto gb = gibbs_sampler(sys, 60000, 5000, 5, RngStream(93, 0));
  std::vector<double> gm;
  for (auto& f : gb.samples) gm.push_back(f(1, 0) * f(1, 0));
  auto gst = series_stats(gm);

  IntegratorConfig cfg;
  cfg.dt = 0.004;
  cfg.steps = 500000;
  cfg.burn_in = 20000;
  cfg.thinning = 25;
  std::vector<Observable> obs = {
      {"m1", [](const SpectralField& f) { return f(1, 0) * f(1, 0); }}};
  auto lv = run_chain(sys, cfg, ChainMode::full, InitialKind::gaussian,
                      RngStream(93, 1), obs, false);
  double comb = std::hypot(gst.se, lv.stats[0].se);
  // first-order dt bias is still present at this step size; allow 4 sigma + bias room
  CHECK(std::abs(gst.mean - lv.stats[0].mean) <= 4 * comb + 0.02 * gst.mean);
}
