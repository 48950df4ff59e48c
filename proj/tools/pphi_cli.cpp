// Command-line driver: configuration, orchestration, persistence and
// reporting for counterterm sweeps, Langevin and Metropolis runs, the
// verification suites, and stereographic projection of field archives.
//
// Exit codes: 0 pass, 1 usage/config error, 2 numerical failure,
// 3 verdict failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "pphi/dynamics.hpp"
#include "pphi/gaussian.hpp"
#include "pphi/io.hpp"
#include "pphi/norms.hpp"
#include "pphi/rng.hpp"
#include "pphi/sphere.hpp"
#include "pphi/stats.hpp"
#include "pphi/stereo.hpp"
#include "pphi/verify.hpp"
#include "pphi/wick.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pphi;

namespace {

struct Global {
  std::string config_path;
  std::string out_dir = "runs";
  uint64_t seed = 0;
  bool seed_given = false;
  int threads = 1;
};

const std::vector<std::string> kCommonKeys = {
    "radius_R", "cutoff_N", "band_limit_L", "poly_degree_n", "poly_coeffs_a",
    "coupling_lambda", "source_g", "seed"};

std::vector<std::string> with_common(std::vector<std::string> extra) {
  extra.insert(extra.end(), kCommonKeys.begin(), kCommonKeys.end());
  return extra;
}

// config may be a flat key=value file or a previous run's manifest.json;
// rerunning from a manifest re-validates the stored hash
RunConfig load_config(const Global& g) {
  if (g.config_path.empty()) throw std::invalid_argument("--config is required");
  if (g.config_path.size() > 5 &&
      g.config_path.substr(g.config_path.size() - 5) == ".json") {
    std::ifstream in(g.config_path);
    if (!in) throw std::runtime_error("cannot open manifest: " + g.config_path);
    json m = json::parse(in);
    RunConfig cfg = RunConfig::parse(m.at("config_text").get<std::string>());
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(cfg.hash()));
    if (m.at("config_hash").get<std::string>() != buf)
      throw std::runtime_error("manifest config hash mismatch; refusing to rerun");
    return cfg;
  }
  return RunConfig::load(g.config_path);
}

int band_limit_policy(const RunConfig& cfg, double R, double N) {
  int L = int(cfg.num("band_limit_L", 0));
  if (L > 0) return L;
  return int(std::ceil(4.0 * N * R));
}

PolynomialSpec spec_from_config(const RunConfig& cfg) {
  int n = int(cfg.num("poly_degree_n", 4));
  double lambda = cfg.num("coupling_lambda", 1.0);
  std::vector<double> a = cfg.num_list("poly_coeffs_a");
  if (a.empty()) return PolynomialSpec::pure(n, lambda);
  return PolynomialSpec(n, a, lambda);
}

// source_g = zero | gauss:EPS,SIGMA (plane profile EPS exp(-|x|^2/2 SIGMA^2))
std::optional<SpectralField> source_from_config(const RunConfig& cfg,
                                                const SphereGrid& grid) {
  std::string s = cfg.str("source_g", "zero");
  if (s == "zero" || s.empty()) return std::nullopt;
  if (s.rfind("gauss:", 0) == 0) {
    double eps = 0, sigma = 1;
    if (std::sscanf(s.c_str() + 6, "%lf,%lf", &eps, &sigma) != 2)
      throw std::invalid_argument("source_g: expected gauss:EPS,SIGMA");
    return source_from_plane(
        [eps, sigma](Vec2 x) { return eps * std::exp(-norm2sq(x) / (2 * sigma * sigma)); },
        grid);
  }
  throw std::invalid_argument("source_g: unknown form '" + s + "'");
}

LangevinSystem system_from_config(const RunConfig& cfg) {
  double R = cfg.num("radius_R", 1.0);
  double N = cfg.num("cutoff_N", 2.0);
  int L = band_limit_policy(cfg, R, N);
  PolynomialSpec spec = spec_from_config(cfg);
  SphereGrid probe(R, L, spec.n);
  auto g = source_from_config(cfg, probe);
  return LangevinSystem::make(R, N, L, spec, g);
}

uint64_t effective_seed(const Global& g, const RunConfig& cfg) {
  if (g.seed_given) return g.seed;
  return uint64_t(cfg.integer("seed", 1));
}

fs::path make_run_dir(const Global& g, const std::string& command,
                      const RunConfig& cfg) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(cfg.hash()));
  fs::path dir = fs::path(g.out_dir) / (command + "_" + std::string(buf).substr(0, 12));
  if (fs::exists(dir))
    throw std::runtime_error("run directory already exists (no previous run is mutated): " +
                             dir.string());
  fs::create_directories(dir);
  return dir;
}

// worker pool over an index range; results merged in index order by caller
void parallel_for(int n_tasks, int threads, const std::function<void(int)>& task) {
  if (threads <= 1) {
    for (int i = 0; i < n_tasks; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(threads, n_tasks); ++t)
    pool.emplace_back([&] {
      for (;;) {
        int i = next.fetch_add(1);
        if (i >= n_tasks) return;
        task(i);
      }
    });
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// counterterm

int cmd_counterterm(const Global& g) {
  RunConfig cfg = load_config(g);
  cfg.reject_unknown_keys(with_common({"radius_R_list", "cutoff_N_list"}));
  fs::path dir = make_run_dir(g, "counterterm", cfg);
  RunManifest manifest(dir, "counterterm", cfg);

  std::vector<double> Rs = cfg.num_list("radius_R_list");
  std::vector<double> Ns = cfg.num_list("cutoff_N_list");
  if (Rs.empty()) Rs = {1, 2, 4};
  if (Ns.empty()) Ns = {16, 32, 64, 128, 256};

  BumpProfile bump = build_bump();
  CsvWriter csv({"radius_R", "cutoff_N", "band_limit_L", "c_RN", "c_tail_bound",
                 "chat_RN", "dev_from_logN_over_2pi", "chat_minus_c"});
  double dmin = HUGE_VAL, dmax = -HUGE_VAL, hdiff_max = 0;
  for (double R : Rs)
    for (double N : Ns) {
      int L = band_limit_policy(cfg, R, N);
      CountertermResult c = counterterm(R, N, L);
      CountertermResult ch = hat_counterterm(R, N, bump, L);
      double dev = c.value - std::log(N) / (2 * pi);
      dmin = std::min(dmin, dev);
      dmax = std::max(dmax, dev);
      hdiff_max = std::max(hdiff_max, std::abs(ch.value - c.value));
      csv.row({fmt_double(R), fmt_double(N), std::to_string(L), fmt_double(c.value),
               fmt_double(c.tail_bound), fmt_double(ch.value), fmt_double(dev),
               fmt_double(ch.value - c.value)});
    }
  csv.save((dir / "counterterm.csv").string());
  manifest.add_artifact("counterterm.csv");
  manifest.finalize();
  std::printf("counterterm: %zu rows -> %s\n", Rs.size() * Ns.size(),
              (dir / "counterterm.csv").c_str());
  std::printf("deviation band (max-min) = %.6f, max |chat - c| = %.6f\n",
              dmax - dmin, hdiff_max);
  return 0;
}

// ---------------------------------------------------------------------------
// langevin / gibbs

std::vector<Observable> standard_observables(int L_max) {
  std::vector<Observable> obs;
  obs.push_back({"c00", [](const SpectralField& f) { return f(0, 0); }});
  for (int l = 0; l <= std::min(L_max, 3); ++l)
    obs.push_back({"m" + std::to_string(l) + "_sq", [l](const SpectralField& f) {
                     return f(l, 0) * f(l, 0);
                   }});
  return obs;
}

int cmd_langevin(const Global& g) {
  RunConfig cfg = load_config(g);
  cfg.reject_unknown_keys(with_common({"dt", "steps", "burn_in", "thinning", "chains",
                                       "chain_mode", "initial", "store_fields",
                                       "blowup_threshold"}));
  fs::path dir = make_run_dir(g, "langevin", cfg);
  uint64_t seed = effective_seed(g, cfg);
  int chains = int(cfg.integer("chains", 1));
  std::vector<uint64_t> chain_seeds;
  for (int c = 0; c < chains; ++c) chain_seeds.push_back(uint64_t(c));
  RunManifest manifest(dir, "langevin", cfg, chain_seeds);

  LangevinSystem sys = system_from_config(cfg);
  IntegratorConfig icfg;
  icfg.dt = cfg.num("dt", 0.0);
  icfg.steps = cfg.integer("steps", 20000);
  icfg.burn_in = cfg.integer("burn_in", 2000);
  icfg.thinning = cfg.integer("thinning", 10);
  icfg.blowup_threshold = cfg.num("blowup_threshold", 1e6);
  ChainMode mode = cfg.str("chain_mode", "full") == "split" ? ChainMode::split
                                                            : ChainMode::full;
  InitialKind init = InitialKind::gaussian;
  std::string in_s = cfg.str("initial", "gaussian");
  if (in_s == "zero") init = InitialKind::zero;
  if (in_s == "gibbs") init = InitialKind::gibbs;
  bool store = cfg.integer("store_fields", 1) != 0;

  std::vector<Observable> obs = standard_observables(sys.L_max);
  std::vector<ChainResult> results(chains);
  std::vector<std::exception_ptr> errors(chains);
  parallel_for(chains, g.threads, [&](int c) {
    try {
      results[c] = run_chain(sys, icfg, mode, init, RngStream(seed, uint64_t(c)), obs, store);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  });
  for (int c = 0; c < chains; ++c) {
    if (!errors[c]) continue;
    try {
      std::rethrow_exception(errors[c]);
    } catch (const BlowupError& e) {
      json diag = {{"chain", c}, {"error", e.what()}, {"sup_norm", e.sup_norm},
                   {"step", e.step}};
      std::ofstream out(dir / "blowup_diagnostics.json");
      out << diag.dump(2) << "\n";
      manifest.add_artifact("blowup_diagnostics.json");
      std::fprintf(stderr, "langevin: %s\n", e.what());
      return 2;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "langevin: %s\n", e.what());
      return 2;
    }
  }

  CsvWriter stats({"chain", "observable", "mean", "se", "tau_int", "kept"});
  for (int c = 0; c < chains; ++c) {
    for (size_t k = 0; k < obs.size(); ++k) {
      const SeriesStats& st = results[c].stats[k];
      stats.row({std::to_string(c), obs[k].name, fmt_double(st.mean), fmt_double(st.se),
                 fmt_double(st.tau), std::to_string(st.n)});
    }
    if (store) {
      json meta = {{"kind", "phi"}, {"chain", c}, {"dt", results[c].dt},
                   {"thinning", icfg.thinning}, {"seed", seed}};
      std::string name = "phi_chain" + std::to_string(c) + ".fld";
      write_field_archive((dir / name).string(), results[c].fields, meta);
      manifest.add_artifact(name);
      if (mode == ChainMode::split) {
        std::string zn = "z_chain" + std::to_string(c) + ".fld";
        std::string pn = "psi_chain" + std::to_string(c) + ".fld";
        meta["kind"] = "Z";
        write_field_archive((dir / zn).string(), results[c].fields_z, meta);
        meta["kind"] = "Psi";
        write_field_archive((dir / pn).string(), results[c].fields_psi, meta);
        manifest.add_artifact(zn);
        manifest.add_artifact(pn);
      }
    }
  }
  stats.save((dir / "observables.csv").string());
  manifest.add_artifact("observables.csv");
  manifest.finalize();
  std::printf("langevin: %d chain(s), dt=%g -> %s\n", chains, results[0].dt,
              dir.c_str());
  return 0;
}

int cmd_gibbs(const Global& g) {
  RunConfig cfg = load_config(g);
  cfg.reject_unknown_keys(with_common({"sweeps", "burn_in", "thinning"}));
  fs::path dir = make_run_dir(g, "gibbs", cfg);
  RunManifest manifest(dir, "gibbs", cfg);
  uint64_t seed = effective_seed(g, cfg);

  LangevinSystem sys = system_from_config(cfg);
  GibbsResult res;
  try {
    res = gibbs_sampler(sys, cfg.integer("sweeps", 40000), cfg.integer("burn_in", 4000),
                        cfg.integer("thinning", 5), RngStream(seed, 0));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gibbs: %s\n", e.what());
    return 2;
  }
  json meta = {{"kind", "gibbs"}, {"acceptance", res.acceptance}, {"seed", seed}};
  write_field_archive((dir / "gibbs.fld").string(), res.samples, meta);
  manifest.add_artifact("gibbs.fld");

  std::vector<double> m0;
  for (auto& f : res.samples) m0.push_back(f(0, 0) * f(0, 0));
  auto st = series_stats(m0);
  CsvWriter diag({"quantity", "value"});
  diag.row({"acceptance", fmt_double(res.acceptance)});
  diag.row({"samples", std::to_string(res.samples.size())});
  diag.row({"c00_sq_mean", fmt_double(st.mean)});
  diag.row({"c00_sq_se", fmt_double(st.se)});
  diag.row({"c00_sq_tau", fmt_double(st.tau)});
  diag.row({"ess_c00_sq", fmt_double(double(st.n) / st.tau)});
  diag.save((dir / "diagnostics.csv").string());
  manifest.add_artifact("diagnostics.csv");
  manifest.finalize();
  std::printf("gibbs: %zu samples, acceptance %.3f -> %s\n", res.samples.size(),
              res.acceptance, dir.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// project

int cmd_project(const Global& g) {
  RunConfig cfg = load_config(g);
  cfg.reject_unknown_keys(with_common({"archive_path", "plane_extent_S", "plane_nside"}));
  fs::path dir = make_run_dir(g, "project", cfg);
  RunManifest manifest(dir, "project", cfg);

  std::string archive = cfg.str("archive_path");
  if (archive.empty()) throw std::invalid_argument("project: archive_path is required");
  std::vector<SpectralField> fields = read_field_archive(archive);
  double R = fields[0].R;
  double S = cfg.num("plane_extent_S", 8.0 * R);
  int nside = int(cfg.integer("plane_nside", 64));
  PlaneGrid plane(S, nside);

  // plane snapshots: raw little-endian doubles + sidecar
  {
    check_little_endian();
    std::ofstream out(dir / "plane_fields.bin", std::ios::binary);
    for (const auto& f : fields) {
      PlaneField p = pushforward_field(f, plane);
      out.write(reinterpret_cast<const char*>(p.values.data()),
                std::streamsize(p.values.size() * sizeof(double)));
    }
    json side = {{"format", "pphi-plane-archive"}, {"n_side", nside}, {"extent_S", S},
                 {"count", fields.size()}, {"source_R", R},
                 {"layout", "row-major x index times n_side plus y index"}};
    std::ofstream js(dir / "plane_fields.bin.json");
    js << side.dump(2) << "\n";
  }
  manifest.add_artifact("plane_fields.bin");

  // measure-identity residuals per field, and the azimuthal two-point profile
  CsvWriter resid({"field", "measure_identity_residual"});
  double worst = 0;
  for (size_t i = 0; i < fields.size(); ++i) {
    auto mi = measure_identity_check(fields[i]);
    worst = std::max(worst, mi.residual);
    resid.row({std::to_string(i), fmt_double(mi.residual)});
  }
  resid.save((dir / "measure_identity.csv").string());
  manifest.add_artifact("measure_identity.csv");

  // two-point function of the archive against plane distance from origin
  int nbin = nside / 2;
  std::vector<double> acc(nbin, 0.0);
  std::vector<int64_t> cnt(nbin, 0);
  for (const auto& f : fields) {
    PlaneField p = pushforward_field(f, plane);
    double center = p.values[plane.index(nside / 2, nside / 2)];
    for (int i = 0; i < nside; ++i)
      for (int j = 0; j < nside; ++j) {
        double r = std::sqrt(norm2sq(plane.node(i, j)));
        int b = int(r / (S / nbin));
        if (b < nbin) {
          acc[b] += center * p.values[plane.index(i, j)];
          ++cnt[b];
        }
      }
  }
  CsvWriter two({"r", "two_point"});
  std::vector<double> xs, ys;
  for (int b = 0; b < nbin; ++b)
    if (cnt[b] > 0) {
      xs.push_back((b + 0.5) * S / nbin);
      ys.push_back(acc[b] / cnt[b] / double(fields.size()));
      two.row({fmt_double(xs.back()), fmt_double(ys.back())});
    }
  two.save((dir / "two_point.csv").string());
  manifest.add_artifact("two_point.csv");

  // deterministic SVG line plot
  {
    double ymin = HUGE_VAL, ymax = -HUGE_VAL;
    for (double y : ys) {
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
    if (!(ymax > ymin)) ymax = ymin + 1;
    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='640' height='400' "
           "viewBox='0 0 640 400'>\n<rect width='640' height='400' fill='white'/>\n"
           "<polyline fill='none' stroke='black' stroke-width='1.5' points='";
    for (size_t k = 0; k < xs.size(); ++k) {
      double px = 40 + 560 * (xs[k] / xs.back());
      double py = 360 - 320 * ((ys[k] - ymin) / (ymax - ymin));
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px, py);
      svg << buf;
    }
    svg << "'/>\n<text x='320' y='390' text-anchor='middle' font-size='12'>"
           "two-point function vs plane distance</text>\n</svg>\n";
    std::ofstream out(dir / "two_point.svg", std::ios::binary);
    out << svg.str();
  }
  manifest.add_artifact("two_point.svg");
  manifest.finalize();
  std::printf("project: %zu fields -> %s (worst measure residual %.3e)\n",
              fields.size(), dir.c_str(), worst);
  return 0;
}

// ---------------------------------------------------------------------------
// verify suites

struct Verdict {
  std::string name;
  std::string status; // pass | fail | observational
  json details;
};

int emit_verdicts(const fs::path& dir, RunManifest& manifest,
                  const std::vector<Verdict>& vs) {
  json doc = json::array();
  bool any_fail = false;
  for (const auto& v : vs) {
    doc.push_back({{"name", v.name}, {"status", v.status}, {"details", v.details}});
    std::printf("[%s] %s\n", v.status == "pass" ? "PASS" : (v.status == "fail" ? "FAIL" : "OBS "),
                v.name.c_str());
    if (v.status == "fail") any_fail = true;
  }
  std::ofstream out(dir / "verdicts.json");
  out << doc.dump(2) << "\n";
  manifest.add_artifact("verdicts.json");
  manifest.finalize();
  return any_fail ? 3 : 0;
}

int cmd_verify(const Global& g, const std::string& suite) {
  RunConfig cfg = load_config(g);
  cfg.reject_unknown_keys(with_common({"draws", "chains", "steps", "burn_in", "thinning",
                                       "sweeps", "weight_L", "kappa", "plane_nside",
                                       "plane_extent_S", "dt"}));
  fs::path dir = make_run_dir(g, "verify_" + suite, cfg);
  RunManifest manifest(dir, "verify " + suite, cfg);
  uint64_t seed = effective_seed(g, cfg);
  double R = cfg.num("radius_R", 1.0);
  double N = cfg.num("cutoff_N", 2.0);
  PolynomialSpec spec = spec_from_config(cfg);
  std::vector<Verdict> vs;

  try {
    if (suite == "rp") {
      int Ldet = 48;
      SphereGrid grid(R, Ldet, 2);
      std::vector<Vec3> centers = {{1, 0.25, 0.1}, {1, -0.2, 0.25}, {1, 0.05, -0.3},
                                   {1, 0.4, 0.0}, {0.9, -0.35, -0.15}, {1, 0.1, 0.35},
                                   {1, -0.3, -0.2}, {1, 0.0, 0.0}};
      std::vector<GridField> fs_cat;
      for (size_t i = 0; i < centers.size(); ++i) {
        Vec3 c = centers[i];
        double nn = norm(c);
        fs_cat.push_back(geodesic_bump(
            grid, Vec3{c.x * R / nn, c.y * R / nn, c.z * R / nn}, (0.3 + 0.01 * i) * R));
      }
      auto covG = build_multiplier(MultiplierKind::G_R, R, 1, Ldet);
      auto gr = rp_gram_gaussian(fs_cat, covG, N);
      vs.push_back({"rp_gram_G_R_min_eig", gr.min_eig >= -1e-10 ? "pass" : "fail",
                    {{"min_eig", gr.min_eig}}});

      BumpProfile h = build_bump();
      auto khat = hat_multiplier(R, N, h, Ldet);
      ZonalMultiplier hcov;
      hcov.values.resize(Ldet + 1);
      for (int l = 0; l <= Ldet; ++l)
        hcov.values[l] = khat.values[l] * khat.values[l] * covG.values[l];
      auto grh = rp_gram_gaussian(fs_cat, hcov, N);
      vs.push_back({"rp_gram_hat_min_eig", grh.min_eig >= -1e-10 ? "pass" : "fail",
                    {{"min_eig", grh.min_eig}}});

      auto kgk = build_multiplier(MultiplierKind::G_RN, R, N, Ldet);
      auto gro = rp_gram_gaussian(fs_cat, kgk, N);
      vs.push_back({"rp_gram_spectral_cutoff_sign", "observational",
                    {{"min_eig", gro.min_eig}}});

      int Lmc = band_limit_policy(cfg, R, N);
      SphereGrid gmc(R, Lmc, spec.n);
      SpectralField f1 = make_halfsphere_function(gmc, {1, 0.25, 0.1}, 0.35 * R, N);
      SpectralField f2 = make_halfsphere_function(gmc, {1, -0.2, 0.25}, 0.3 * R, N);
      CylindricalFunctional F1{CylindricalFunctional::Outer::linear, {f1}};
      CylindricalFunctional F2{CylindricalFunctional::Outer::pair_product, {f1, f2}};
      auto mc = rp_mc_interacting(R, N, Lmc, spec, {F1, F2},
                                  cfg.integer("draws", 20000), 50, RngStream(seed, 0));
      vs.push_back({"rp_mc_interacting", mc.pass ? "pass" : "fail",
                    {{"min_eig", mc.min_eig}, {"se", mc.min_eig_se}, {"ess", mc.ess}}});
    } else if (suite == "symmetry") {
      auto sys = LangevinSystem::make(R, N, 3, spec);
      SphereGrid grid(R, 5, 2);
      auto cov = build_multiplier(MultiplierKind::G_RN, R, N, 5);
      Vec3 x = grid.node_position(2, 3), y = grid.node_position(4, 11);
      double direct = covariance_mode_sum(cov, R, x, y);
      double zmax = 0;
      for (double a : {0.7, 2.1}) {
        zmax = std::max(zmax, std::abs(covariance_mode_sum(cov, R, sphere_rot(x, a),
                                                           sphere_rot(y, a)) - direct));
        zmax = std::max(zmax, std::abs(covariance_mode_sum(cov, R, sphere_trans(x, R, a),
                                                           sphere_trans(y, R, a)) - direct));
      }
      vs.push_back({"gaussian_two_point_zonal", zmax <= 1e-10 ? "pass" : "fail",
                    {{"max_defect", zmax}}});

      auto gb = gibbs_sampler(sys, cfg.integer("sweeps", 30000),
                              cfg.integer("burn_in", 3000), 5, RngStream(seed, 1));
      SphereGrid grid3(R, 3, spec.n);
      SpectralField f(R, 3), h(R, 3);
      f(1, 1) = 1.0;
      f(2, 0) = 0.5;
      h(1, -1) = 0.8;
      h(3, 2) = 0.4;
      struct Pair {
        SphereMap map;
        double alpha;
        const char* name;
      } pairs[] = {{SphereMap::rot_x3, 0.7, "rot_x3_0.7"},
                   {SphereMap::rot_x3, 1.9, "rot_x3_1.9"},
                   {SphereMap::rot_x2, 0.5, "rot_x2_0.5"},
                   {SphereMap::rot_x2, 1.3, "rot_x2_1.3"}};
      for (auto& p : pairs) {
        auto z = symmetry_check(gb.samples, f, h, grid3, p.map, p.alpha);
        vs.push_back({std::string("symmetry_") + p.name,
                      std::abs(z.z) <= 3.0 ? "pass" : "fail",
                      {{"z", z.z}, {"mean_F", z.mean_F}}});
      }
    } else if (suite == "uv") {
      std::vector<double> Ns = {2, 4, 8, 16};
      std::vector<double> vals;
      for (double n2 : Ns)
        vals.push_back(y_variance_diff(R, spec, n2, 2 * n2, int(8 * n2 * R)));
      bool monotone = true;
      for (size_t i = 1; i < vals.size(); ++i)
        if (!(vals[i] < vals[i - 1])) monotone = false;
      vs.push_back({"uv_y_variance_strictly_decreasing", monotone ? "pass" : "fail",
                    {{"values", vals}}});
      std::vector<double> lx, ly;
      for (size_t i = 0; i < vals.size(); ++i) {
        lx.push_back(std::log(Ns[i]));
        ly.push_back(std::log(vals[i]));
      }
      auto fit = linear_fit(lx, ly);
      vs.push_back({"uv_y_variance_exponent_nonpositive", fit.slope <= 0 ? "pass" : "fail",
                    {{"slope", fit.slope}}});

      BumpProfile h = build_bump();
      std::vector<double> sx, sy;
      for (double n2 : {2.0, 4.0, 8.0, 16.0}) {
        sx.push_back(std::log(n2));
        sy.push_back(std::log(strip_variance(R, spec, n2, int(4 * n2 * R) + 16, h)));
      }
      auto sfit = linear_fit(sx, sy);
      vs.push_back({"uv_strip_variance_exponent", sfit.slope <= -0.8 ? "pass" : "fail",
                    {{"slope", sfit.slope}}});

      double kappa = cfg.num("kappa", 0.5), delta = 0.5;
      std::vector<double> xx, xy;
      for (double n2 : {4.0, 8.0, 16.0, 32.0}) {
        xx.push_back(std::log(n2));
        xy.push_back(std::log(x_norm_diff(R, n2, kappa, delta, int(30 * n2 * R))));
      }
      auto xfit = linear_fit(xx, xy);
      vs.push_back({"uv_x_norm_exponent", xfit.slope <= 0 ? "pass" : "fail",
                    {{"slope", xfit.slope}, {"expected", -2 * delta}}});
    } else if (suite == "tightness") {
      double kappa = cfg.num("kappa", 0.5);
      double L = cfg.num("weight_L", 1.0);
      int nside = int(cfg.integer("plane_nside", 64));
      std::vector<double> Rs = {1, 2, 4};
      std::vector<double> means(Rs.size());
      std::vector<std::exception_ptr> errs(Rs.size());
      parallel_for(int(Rs.size()), g.threads, [&](int i) {
        try {
          double Ri = Rs[i];
          auto sysR = LangevinSystem::make(Ri, N, int(4 * N * Ri), spec);
          IntegratorConfig icfg;
          icfg.steps = cfg.integer("steps", 60000);
          icfg.burn_in = cfg.integer("burn_in", 10000);
          icfg.thinning = cfg.integer("thinning", 100);
          auto res = run_chain(sysR, icfg, ChainMode::full, InitialKind::gaussian,
                               RngStream(seed, uint64_t(10 + i)), {}, true);
          PlaneGrid plane(8.0 * std::max(Ri, L), nside);
          means[i] = tightness_moment(res.fields, plane, spec.n, kappa, L).mean;
        } catch (...) {
          errs[i] = std::current_exception();
        }
      });
      for (auto& e : errs)
        if (e) std::rethrow_exception(e);
      double lo = *std::min_element(means.begin(), means.end());
      double hi = *std::max_element(means.begin(), means.end());
      double mean = (lo + hi) / 2;
      double band = (hi - lo) / ((means[0] + means[1] + means[2]) / 3.0);
      vs.push_back({"tightness_uniformity_band", band <= 0.5 ? "pass" : "fail",
                    {{"estimates", means}, {"band_rel", band}, {"mid", mean}}});
    } else if (suite == "integrability") {
      auto sys = LangevinSystem::make(R, N, 3, spec);
      SphereGrid grid(R, 3, spec.n);
      double eps = 0.01;
      auto fpl = [eps](Vec2 x) { return eps * std::exp(-norm2sq(x) / 2.0); };
      SpectralField gsrc = source_from_plane(fpl, grid);
      auto gb = gibbs_sampler(sys, cfg.integer("sweeps", 40000),
                              cfg.integer("burn_in", 4000), 5, RngStream(seed, 2));
      auto res = integrability_check(gb.samples, gsrc, spec.n);
      vs.push_back({"integrability_bound", res.pass ? "pass" : "fail",
                    {{"estimate", res.estimate}, {"se", res.se},
                     {"hairer_steele_lhs", res.hs_lhs}, {"hairer_steele_rhs", res.hs_rhs},
                     {"heavy_tail", res.heavy_tail}}});
    } else if (suite == "energy") {
      double L0 = cfg.num("weight_L", 1.0);
      auto sysE = LangevinSystem::make(std::max(R, L0), N, int(4 * N * std::max(R, L0)), spec);
      PlaneGrid plane(8.0 * std::max(R, L0), int(cfg.integer("plane_nside", 64)));
      IntegratorConfig icfg;
      icfg.steps = cfg.integer("steps", 400);
      icfg.burn_in = 0;
      icfg.thinning = 1;
      auto res = run_chain(sysE, icfg, ChainMode::split, InitialKind::gaussian,
                           RngStream(seed, 3), {}, true);
      std::vector<EnergyStep> steps;
      for (size_t s = 0; s < res.fields_psi.size(); ++s) {
        EnergyStep st;
        st.psi = pushforward_field(res.fields_psi[s], plane);
        PlaneField zp = pushforward_field(res.fields_z[s], plane);
        for (int k = 0; k < spec.n; ++k) {
          PlaneField zw = zp;
          zw.values = wick_power(zp.values, k, sysE.ctx.c);
          st.z_wick.push_back(std::move(zw));
        }
        steps.push_back(std::move(st));
      }
      auto rep = energy_report(steps, res.dt, spec.n, L0);
      bool ok = std::isfinite(rep.C_fit) && energy_monitor_pass(rep, rep.C_fit + 1e-9);
      vs.push_back({"energy_ledger", ok ? "pass" : "fail",
                    {{"C_fit", rep.C_fit}, {"kappa", rep.kappa}, {"p", rep.p},
                     {"steps", rep.rows.size()}}});
    } else {
      std::fprintf(stderr, "verify: unknown suite '%s'\n", suite.c_str());
      return 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "verify %s: %s\n", suite.c_str(), e.what());
    return 2;
  }
  return emit_verdicts(dir, manifest, vs);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for P(Phi)_2 measures on spheres"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--config", g.config_path, "path to a key=value config (or a manifest.json to rerun)");
  app.add_option("--seed", g.seed, "seed override")->each([&](const std::string&) {
    g.seed_given = true;
  });
  app.add_option("--threads", g.threads, "worker pool size");
  app.add_option("--out", g.out_dir, "output directory root");

  auto* c1 = app.add_subcommand("counterterm", "counterterm sweep table");
  auto* c2 = app.add_subcommand("langevin", "stochastic quantization chains");
  auto* c3 = app.add_subcommand("verify", "run a verification suite");
  std::string suite;
  c3->add_option("--suite", suite,
                 "one of rp | symmetry | uv | tightness | integrability | energy")
      ->required();
  auto* c4 = app.add_subcommand("project", "stereographic projection of an archive");
  auto* c5 = app.add_subcommand("gibbs", "direct Metropolis sampling");
  for (auto* sub : {c1, c2, c3, c4, c5}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 1 : 1;
  }

  try {
    if (c1->parsed()) return cmd_counterterm(g);
    if (c2->parsed()) return cmd_langevin(g);
    if (c3->parsed()) return cmd_verify(g, suite);
    if (c4->parsed()) return cmd_project(g);
    if (c5->parsed()) return cmd_gibbs(g);
  } catch (const BlowupError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
