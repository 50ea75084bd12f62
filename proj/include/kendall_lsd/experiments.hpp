#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kendall_lsd/estimators.hpp"
#include "kendall_lsd/io.hpp"
#include "kendall_lsd/models.hpp"
#include "kendall_lsd/oracles.hpp"
#include "kendall_lsd/sampling.hpp"
#include "kendall_lsd/spectra.hpp"
#include "kendall_lsd/stieltjes.hpp"

namespace klsd {

struct RunOptions {
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  int replications = 0;  // 0 = experiment default
  double eta = 1e-3;
  int grid_points = 0;  // 0 = experiment default
  int threads = 1;      // recorded in the manifest; sweeps are sequential
  std::string config_path;
};

namespace detail {

inline void ensure_dir(const std::string& dir) {
  std::filesystem::create_directories(dir);
}

inline Json options_json(const RunOptions& opts, const std::string& command) {
  Json j;
  j["command"] = command;
  j["seed"] = opts.seed;
  j["replications"] = opts.replications;
  j["eta"] = opts.eta;
  j["grid_points"] = opts.grid_points;
  j["threads"] = opts.threads;
  if (!opts.config_path.empty()) j["config_path"] = opts.config_path;
  j["matrix_format_version"] = kMatrixFormatVersion;
  return j;
}

}  // namespace detail

// Uniform energy grid, optionally refined near 1/3 where the c > 1
// limit concentrates a narrow spectral band; refinement spacing eta/2.
inline SpectralGrid refined_grid(double lo, double hi, int points, double eta,
                                 bool refine_third) {
  SpectralGrid g = SpectralGrid::uniform(lo, hi, points, eta);
  if (refine_third) {
    const double wlo = std::max(lo, 1.0 / 3.0 - 0.08);
    const double whi = std::min(hi, 1.0 / 3.0 + 0.08);
    for (double e = wlo; e <= whi; e += eta / 2.0) g.energies.push_back(e);
    std::sort(g.energies.begin(), g.energies.end());
    std::vector<double> dedup;
    for (double e : g.energies) {
      if (dedup.empty() || e - dedup.back() > eta / 20.0) dedup.push_back(e);
    }
    g.energies = std::move(dedup);
  }
  return g;
}

// ---- figure 1 regime: Frobenius gap vs compound-symmetry rho ----

struct Fig1Result {
  std::vector<double> rho, mean_gap, sd_gap;
};

inline Fig1Result run_fig1(const RunOptions& opts) {
  const int n = 100, p = 200;
  const int reps = opts.replications > 0 ? opts.replications : 100;
  detail::ensure_dir(opts.out_dir);

  Fig1Result res;
  for (int ir = 0; ir < 10; ++ir) {
    const double rho = 0.1 * ir;
    const CorrelationModel model = CorrelationModel::compound_symmetry(p, rho);
    const SigmaTriple triple = sigma_triple(model);
    std::vector<double> gaps(reps);
    for (int r = 0; r < reps; ++r) {
      const std::uint64_t s = Rng::stream(opts.seed, 1000 * ir + r).next_u64();
      gaps[r] = frobenius_gap(sample_mvn(model, n, s), triple);
    }
    const MCEstimate est = detail::mc_mean(gaps, opts.seed);
    res.rho.push_back(rho);
    res.mean_gap.push_back(est.mean);
    res.sd_gap.push_back(est.std_error * std::sqrt(static_cast<double>(reps)));
  }

  {
    auto f = detail::open_out(opts.out_dir + "/gap_vs_rho.csv");
    f << "rho,mean_gap,sd_gap\n";
    for (std::size_t i = 0; i < res.rho.size(); ++i) {
      f << detail::fmt17(res.rho[i]) << ',' << detail::fmt17(res.mean_gap[i])
        << ',' << detail::fmt17(res.sd_gap[i]) << '\n';
    }
  }
  Json manifest = detail::options_json(opts, "fig1");
  manifest["n"] = n;
  manifest["p"] = p;
  manifest["actual_replications"] = reps;
  manifest["outputs"] = {"gap_vs_rho.csv"};
  write_json(opts.out_dir + "/manifest.json", manifest);
  return res;
}

// ---- figure 2 regime: independent case, three correlation estimators ----

struct Fig2Case {
  std::string label;
  int p = 0, n = 0;
  double ks = 0.0;
};

struct Fig2Result {
  std::vector<Fig2Case> cases;
  double wn_atom_fraction = 0.0;  // share of W_n eigenvalues at 1/3, c = 2 shape
};

inline Fig2Result run_fig2(const RunOptions& opts) {
  detail::ensure_dir(opts.out_dir);
  const std::vector<std::pair<int, int>> shapes = {{100, 200}, {200, 100}};
  Fig2Result res;
  Json manifest = detail::options_json(opts, "fig2");
  Json outputs = Json::array();

  for (std::size_t si = 0; si < shapes.size(); ++si) {
    const auto [p, n] = shapes[si];
    const double c = static_cast<double>(p) / n;
    const CorrelationModel model = CorrelationModel::identity(p);
    const SampleMatrix x =
        sample_mvn(model, n, Rng::stream(opts.seed, si).next_u64());
    const std::string shape_tag =
        "p" + std::to_string(p) + "_n" + std::to_string(n);

    struct Kind {
      std::string name;
      Eigen::MatrixXd matrix;
      MatrixKind kind;
      bool affine;
    };
    const std::vector<Kind> kinds = {
        {"kendall", kendall_matrix_fast(x).matrix, MatrixKind::Kendall, true},
        {"pearson", pearson_matrix(x), MatrixKind::Pearson, false},
        {"spearman", spearman_matrix(x), MatrixKind::Spearman, false},
    };
    for (const auto& k : kinds) {
      const EmpiricalSpectrum spec =
          empirical_spectrum(k.matrix, k.kind, "identity", n, opts.seed);
      const DensityCurve curve =
          k.affine ? mp_affine_curve(c) : mp_standard_curve(c);
      const std::string base = k.name + "_" + shape_tag;
      write_histogram_csv(opts.out_dir + "/hist_" + base + ".csv",
                          histogram(spec));
      write_curve_csv(opts.out_dir + "/curve_" + base + ".csv", curve);
      outputs.push_back("hist_" + base + ".csv");
      outputs.push_back("curve_" + base + ".csv");
      if (!curve.atoms.empty()) {
        write_atoms_csv(opts.out_dir + "/atoms_" + base + ".csv", curve.atoms);
        outputs.push_back("atoms_" + base + ".csv");
      }
      res.cases.push_back({base, p, n, ks_distance(spec, curve)});
    }

    if (c > 1.0) {
      // W_n = M1 + (1/3) I has rank(M1) <= n-1, hence an exact eigenvalue
      // 1/3 with multiplicity >= p - n + 1: the finite-n face of the atom.
      const Eigen::MatrixXd wn =
          detail::m1_from_rows(detail::projection_rows(x.data)) +
          Eigen::MatrixXd::Identity(p, p) / 3.0;
      const Eigen::VectorXd ev = eigenvalues_sym(wn);
      int count = 0;
      for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (std::abs(ev(i) - 1.0 / 3.0) <= 1e-6) ++count;
      }
      res.wn_atom_fraction = static_cast<double>(count) / p;
    }
  }

  Json ks = Json::array();
  for (const auto& cse : res.cases) {
    ks.push_back({{"case", cse.label}, {"ks", cse.ks}});
  }
  manifest["ks"] = ks;
  manifest["wn_atom_fraction"] = res.wn_atom_fraction;
  manifest["outputs"] = outputs;
  write_json(opts.out_dir + "/manifest.json", manifest);
  return res;
}

// ---- figure 3 regime: low-rank factor structure, two scalings ----

struct Fig3Result {
  double ks_over_p = 0.0;
  double ks_over_sqrt_p = 0.0;
};

inline Fig3Result run_fig3(const RunOptions& opts) {
  detail::ensure_dir(opts.out_dir);
  const int p = 100, n = 200;
  const double c = 0.5;
  Fig3Result res;
  Json manifest = detail::options_json(opts, "fig3");
  Json outputs = Json::array();

  const DensityCurve reference = mp_affine_curve(c);
  write_curve_csv(opts.out_dir + "/curve_affine_mp.csv", reference);
  outputs.push_back("curve_affine_mp.csv");

  for (int si = 0; si < 2; ++si) {
    const FactorScale scale = si == 0 ? FactorScale::OverP : FactorScale::OverSqrtP;
    const std::string tag = si == 0 ? "over_p" : "over_sqrt_p";
    const CorrelationModel model = CorrelationModel::factor(
        p, 3, scale, Rng::stream(opts.seed, 100 + si).next_u64());
    const SampleMatrix x =
        sample_mvn(model, n, Rng::stream(opts.seed, si).next_u64());
    const EmpiricalSpectrum spec =
        empirical_spectrum(kendall_matrix_fast(x).matrix, MatrixKind::Kendall,
                           "factor_" + tag, n, opts.seed);
    write_histogram_csv(opts.out_dir + "/hist_" + tag + ".csv",
                        histogram(spec));
    outputs.push_back("hist_" + tag + ".csv");
    const double ks = ks_distance(spec, reference);
    (si == 0 ? res.ks_over_p : res.ks_over_sqrt_p) = ks;
  }

  manifest["ks_over_p"] = res.ks_over_p;
  manifest["ks_over_sqrt_p"] = res.ks_over_sqrt_p;
  manifest["outputs"] = outputs;
  write_json(opts.out_dir + "/manifest.json", manifest);
  return res;
}

// ---- figures 4 / 5: dependent Toeplitz families vs the solver curve ----

struct ShapeRun {
  int p = 0, n = 0;
  double c = 0.0;
  double ks = 0.0;     // Kendall matrix ESD vs solver curve
  double ks_wn = 0.0;  // Hoeffding surrogate W_n ESD vs solver curve
  double max_gap_vs_identity = 0.0;
  DensitySweep sweep;
  EmpiricalSpectrum spec;
  EmpiricalSpectrum spec_wn;
};

// One sampled draw per shape, compared against the fixed-point solver's
// density curve.  band2 == false selects the MA(1) closed form.
inline std::vector<ShapeRun> run_solver_figure(const RunOptions& opts,
                                               bool band2, double rho,
                                               const std::string& tag) {
  detail::ensure_dir(opts.out_dir);
  const std::vector<std::pair<int, int>> shapes = {
      {200, 400}, {300, 400}, {300, 200}, {400, 200}};
  std::vector<ShapeRun> runs;
  Json manifest = detail::options_json(opts, tag);
  manifest["rho"] = rho;
  Json outputs = Json::array();
  Json ks_list = Json::array();

  for (std::size_t si = 0; si < shapes.size(); ++si) {
    const auto [p, n] = shapes[si];
    const double c = static_cast<double>(p) / n;
    const CorrelationModel model = band2
                                       ? CorrelationModel::band_toeplitz2(p, rho)
                                       : CorrelationModel::ma1(p, rho);
    const SampleMatrix x =
        sample_mvn(model, n, Rng::stream(opts.seed, si).next_u64());

    ShapeRun run;
    run.p = p;
    run.n = n;
    run.c = c;
    run.spec = empirical_spectrum(kendall_matrix_fast(x).matrix,
                                  MatrixKind::Kendall, tag, n, opts.seed);
    const SigmaTriple triple = sigma_triple(model);
    const Eigen::MatrixXd wn =
        detail::m1_from_rows(detail::projection_rows(x.data)) + triple.sigma3;
    run.spec_wn =
        empirical_spectrum(wn, MatrixKind::Wn, tag, n, opts.seed);

    StieltjesSolver solve;
    if (band2) {
      auto solver = std::make_shared<BandToeplitz2Solver>(rho, c);
      solve = [solver](Complex z, Complex x0) { return solver->solve(z, x0); };
    } else {
      auto solver = std::make_shared<Ma1ClosedFormSolver>(rho, c);
      solve = [solver](Complex z, Complex x0) { return solver->solve(z, x0); };
    }

    const auto [mp_lo, mp_hi] = mp_affine_support(c);
    const double lo =
        std::min(run.spec.eigenvalues.minCoeff(), mp_lo) - 0.15;
    const double hi =
        std::max(run.spec.eigenvalues.maxCoeff(), mp_hi) + 0.15;
    const int points = opts.grid_points > 0 ? opts.grid_points : 900;
    const SpectralGrid grid =
        refined_grid(lo, hi, points, opts.eta, c > 1.0);
    // Richardson extrapolation in eta: the near-1/3 bump is only ~1e-2 wide
    // when c > 1 and first-order smoothing leakage would dominate its CDF
    run.sweep = density_from_stieltjes(solve, grid, /*richardson=*/true);
    run.ks = ks_distance(run.spec, run.sweep.curve);
    run.ks_wn = ks_distance(run.spec_wn, run.sweep.curve);

    for (std::size_t i = 0; i < run.sweep.curve.grid.size(); ++i) {
      const double gap = std::abs(run.sweep.curve.density[i] -
                                  mp_affine_density(c, run.sweep.curve.grid[i]));
      run.max_gap_vs_identity = std::max(run.max_gap_vs_identity, gap);
    }

    const std::string shape_tag =
        "p" + std::to_string(p) + "_n" + std::to_string(n);
    write_histogram_csv(opts.out_dir + "/hist_" + shape_tag + ".csv",
                        histogram(run.spec));
    write_curve_csv(opts.out_dir + "/curve_" + shape_tag + ".csv",
                    run.sweep.curve);
    write_curve_csv(opts.out_dir + "/curve_identity_" + shape_tag + ".csv",
                    mp_affine_curve(c));
    write_json(opts.out_dir + "/diag_" + shape_tag + ".json",
               sweep_diagnostics_json(run.sweep));
    outputs.push_back("hist_" + shape_tag + ".csv");
    outputs.push_back("curve_" + shape_tag + ".csv");
    outputs.push_back("curve_identity_" + shape_tag + ".csv");
    outputs.push_back("diag_" + shape_tag + ".json");
    ks_list.push_back({{"p", p},
                       {"n", n},
                       {"ks", run.ks},
                       {"ks_wn", run.ks_wn},
                       {"max_gap_vs_identity", run.max_gap_vs_identity}});
    runs.push_back(std::move(run));
  }

  manifest["ks"] = ks_list;
  manifest["outputs"] = outputs;
  write_json(opts.out_dir + "/manifest.json", manifest);
  return runs;
}

inline std::vector<ShapeRun> run_fig4(const RunOptions& opts) {
  return run_solver_figure(opts, false, 0.5, "fig4");
}

inline std::vector<ShapeRun> run_fig5(const RunOptions& opts) {
  return run_solver_figure(opts, true, 0.25, "fig5");
}

// ---- generic LSD sweep from a JSON config ----

inline Json run_lsd(const RunOptions& opts, const Json& config) {
  detail::ensure_dir(opts.out_dir);
  const CorrelationModel model = model_from_json(config.at("model"));
  double c;
  if (config.contains("c")) {
    c = config.at("c").get<double>();
  } else {
    c = static_cast<double>(model.p) / config.at("n").get<int>();
  }

  std::string mode = config.value("mode", "auto");
  if (mode == "auto") {
    switch (model.kind) {
      case ModelKind::MA1: mode = "ma1"; break;
      case ModelKind::BandToeplitz2: mode = "band2"; break;
      case ModelKind::GeneralToeplitz: mode = "toeplitz"; break;
      default: mode = "finite_p"; break;
    }
  }

  StieltjesSolver solve;
  if (mode == "ma1") {
    auto solver = std::make_shared<Ma1ClosedFormSolver>(model.rho, c);
    solve = [solver](Complex z, Complex x0) { return solver->solve(z, x0); };
  } else if (mode == "band2") {
    auto solver = std::make_shared<BandToeplitz2Solver>(model.rho, c);
    solve = [solver](Complex z, Complex x0) { return solver->solve(z, x0); };
  } else if (mode == "toeplitz") {
    auto solver =
        std::make_shared<ToeplitzFourierSolver>(model.toeplitz_lags(), c);
    solve = [solver](Complex z, Complex x0) { return solver->solve(z, x0); };
  } else if (mode == "finite_p") {
    auto solver = std::make_shared<FinitePTraceSolver>(sigma_triple(model), c);
    solve = [solver](Complex z, Complex x0) { return solver->solve(z, x0); };
  } else {
    throw std::invalid_argument("run_lsd: unknown mode " + mode);
  }

  const auto [mp_lo, mp_hi] = mp_affine_support(c);
  // off-diagonal correlations widen the support beyond the identity case;
  // pad by the total symbol amplitude of the arcsin-transformed lags
  double pad = 0.2;
  if (model.is_toeplitz_family()) {
    for (double r : model.toeplitz_lags()) {
      pad += 2.0 * (2.0 / kPi) * std::abs(std::asin(std::abs(r)));
    }
  }
  const double lo = config.value("grid_lo", mp_lo - pad);
  const double hi = config.value("grid_hi", mp_hi + pad);
  const int points =
      opts.grid_points > 0 ? opts.grid_points : config.value("grid_points", 900);
  const SpectralGrid grid = refined_grid(lo, hi, points, opts.eta, c > 1.0);

  const DensitySweep sweep = density_from_stieltjes(solve, grid);
  write_curve_csv(opts.out_dir + "/curve.csv", sweep.curve);
  write_atoms_csv(opts.out_dir + "/atoms.csv", sweep.curve.atoms);
  write_json(opts.out_dir + "/diagnostics.json", sweep_diagnostics_json(sweep));

  Json manifest = detail::options_json(opts, "lsd");
  manifest["model"] = model_to_json(model);
  manifest["c"] = c;
  manifest["mode"] = mode;
  manifest["grid_lo"] = lo;
  manifest["grid_hi"] = hi;
  manifest["grid_points"] = points;
  manifest["curve_mass"] = sweep.curve.total_mass();
  manifest["outputs"] = {"curve.csv", "atoms.csv", "diagnostics.json"};
  write_json(opts.out_dir + "/manifest.json", manifest);
  return manifest;
}

// ---- verify: the lemma-oracle battery plus solver consistency ----

namespace detail {

inline VerdictRecord oracle_verdict(const std::string& name,
                                    const std::string& params,
                                    const OracleResult& r) {
  return {name,        params,      r.mc.mean, r.mc.std_error,
          r.theory,    r.threshold, r.pass()};
}

inline VerdictRecord bound_verdict(const std::string& name,
                                   const std::string& params,
                                   const BoundCheck& b) {
  return {name,  params,      b.lhs.mean, b.lhs.std_error,
          b.rhs, b.threshold, b.pass()};
}

}  // namespace detail

inline std::vector<VerdictRecord> run_verify(const RunOptions& opts) {
  std::vector<VerdictRecord> v;
  const std::uint64_t seed = opts.seed;

  for (double rho : {0.0, 0.3, 0.5, 0.7}) {
    v.push_back(detail::oracle_verdict(
        "grothendieck_mc", "rho=" + std::to_string(rho),
        grothendieck_mc(rho, 1000000, Rng::stream(seed, 1).next_u64())));
  }
  for (double rho : {0.0, 0.6}) {
    v.push_back(detail::oracle_verdict(
        "esscher_mc", "rho=" + std::to_string(rho),
        esscher_mc(rho, 1000000, Rng::stream(seed, 2).next_u64())));
  }
  v.push_back(detail::oracle_verdict(
      "var_a12a13", "identity p=9",
      var_a12a13_check(CorrelationModel::identity(9), 200000,
                       Rng::stream(seed, 3).next_u64())));
  v.push_back(detail::oracle_verdict(
      "var_a12a13", "ma1 rho=0.5 p=10",
      var_a12a13_check(CorrelationModel::ma1(10, 0.5), 200000,
                       Rng::stream(seed, 4).next_u64())));

  {
    const CorrelationModel m5 = CorrelationModel::identity(5);
    v.push_back(detail::bound_verdict(
        "poincare_bound", "identity p=5 B=I",
        poincare_bound_check(m5, Eigen::MatrixXd::Identity(5, 5), 100000,
                             Rng::stream(seed, 5).next_u64())));
    const CorrelationModel m20 = CorrelationModel::ma1(20, 0.4);
    Eigen::MatrixXd g(20, 20);
    Rng rng(Rng::stream(seed, 6).next_u64());
    for (int i = 0; i < 20; ++i) {
      for (int j = 0; j < 20; ++j) g(i, j) = rng.next_normal();
    }
    const Eigen::MatrixXd q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
    v.push_back(detail::bound_verdict(
        "poincare_bound", "ma1 rho=0.4 p=20 B=orthogonal",
        poincare_bound_check(m20, q, 100000,
                             Rng::stream(seed, 7).next_u64())));
  }

  {
    const ErrorTermBounds b = error_term_bounds_check(
        CorrelationModel::identity(100), 100,
        opts.replications > 0 ? opts.replications : 100,
        Rng::stream(seed, 8).next_u64());
    v.push_back(detail::bound_verdict("error_term_m2", "identity n=p=100", b.m2));
    v.push_back(detail::bound_verdict("error_term_m3", "identity n=p=100", b.m3));
    v.push_back({"m2_zero_mean", "identity n=p=100", b.m2_entry.mean,
                 b.m2_entry.std_error, 0.0, 3.0,
                 std::abs(b.m2_entry.mean) <= 3.0 * b.m2_entry.std_error});
  }

  // Solver cross-formulation consistency at spot-check points.
  {
    double worst_quad = 0.0;
    for (double c : {0.5, 2.0}) {
      for (double e : {0.5, 1.0, 2.0}) {
        const Complex s = identity_stieltjes(c, Complex(e, 1e-2));
        worst_quad =
            std::max(worst_quad, stieltjes_quadratic_check(c, Complex(e, 1e-2), s));
      }
    }
    v.push_back({"identity_quadratic_residual", "c in {0.5,2}", worst_quad, 0.0,
                 0.0, 1e-10, worst_quad <= 1e-10});

    double worst_ma1 = 0.0;
    for (double rho : {0.2, 0.45}) {
      const Ma1ClosedFormSolver ma1(rho, 0.5);
      const ToeplitzFourierSolver toe({rho}, 0.5);
      for (double e : {0.6, 1.0, 1.5}) {
        const Complex z(e, 1e-2);
        worst_ma1 = std::max(worst_ma1,
                             std::abs(ma1.solve(z).s - toe.solve(z).s));
      }
    }
    v.push_back({"ma1_vs_toeplitz_s", "rho in {0.2,0.45} c=0.5", worst_ma1, 0.0,
                 0.0, 1e-8, worst_ma1 <= 1e-8});

    double worst_b2 = 0.0;
    {
      const BandToeplitz2Solver b2(0.25, 0.5);
      const ToeplitzFourierSolver toe({0.25, 0.25}, 0.5);
      for (double e : {0.6, 1.0, 1.5}) {
        const Complex z(e, 1e-2);
        worst_b2 =
            std::max(worst_b2, std::abs(b2.solve(z).s - toe.solve(z).s));
      }
    }
    v.push_back({"band2_vs_toeplitz_s", "rho=0.25 c=0.5", worst_b2, 0.0, 0.0,
                 1e-8, worst_b2 <= 1e-8});
  }

  detail::ensure_dir(opts.out_dir);
  write_json(opts.out_dir + "/verdicts.json", verdicts_to_json(v));
  Json manifest = detail::options_json(opts, "verify");
  bool all = true;
  for (const auto& rec : v) all = all && rec.pass;
  manifest["all_pass"] = all;
  manifest["outputs"] = {"verdicts.json"};
  write_json(opts.out_dir + "/manifest.json", manifest);
  return v;
}

inline bool all_pass(const std::vector<VerdictRecord>& v) {
  for (const auto& rec : v) {
    if (!rec.pass) return false;
  }
  return true;
}

}  // namespace klsd
