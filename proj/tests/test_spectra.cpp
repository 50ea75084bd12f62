#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "kendall_lsd/estimators.hpp"
#include "kendall_lsd/sampling.hpp"
#include "kendall_lsd/spectra.hpp"
#include "kendall_lsd/stieltjes.hpp"

using namespace klsd;

TEST_CASE("eigenvalues_sym basics") {
  REQUIRE((eigenvalues_sym(Eigen::MatrixXd::Identity(3, 3)) -
           Eigen::Vector3d::Ones())
              .cwiseAbs()
              .maxCoeff() < 1e-14);
  Eigen::MatrixXd d = Eigen::Vector3d(3, 1, 2).asDiagonal();
  const Eigen::VectorXd ev = eigenvalues_sym(d);
  REQUIRE(ev(0) == Catch::Approx(1.0));
  REQUIRE(ev(1) == Catch::Approx(2.0));
  REQUIRE(ev(2) == Catch::Approx(3.0));
}

TEST_CASE("eigenvalues_sym rejects asymmetric input") {
  Eigen::MatrixXd m(2, 2);
  m << 1, 2, 0, 1;
  REQUIRE_THROWS_AS(eigenvalues_sym(m), std::invalid_argument);
}

TEST_CASE("eigenvalues_sym matches the tridiagonal closed form") {
  const int p = 50;
  const Eigen::VectorXd dense =
      eigenvalues_sym(build_sigma(CorrelationModel::ma1(p, 0.4)));
  Eigen::VectorXd closed = ma1_eigen(p, 1.0, 0.4).values;
  std::sort(closed.data(), closed.data() + p);
  REQUIRE((dense - closed).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("esd_cdf step function") {
  EmpiricalSpectrum s;
  s.eigenvalues = Eigen::Vector3d(1, 2, 3);
  REQUIRE(esd_cdf(s, 0.5) == 0.0);
  REQUIRE(esd_cdf(s, 3.5) == 1.0);
  REQUIRE(esd_cdf(s, 2.0) == Catch::Approx(2.0 / 3.0));
}

TEST_CASE("kendall spectrum trace identity") {
  const SampleMatrix x = sample_mvn(CorrelationModel::ma1(30, 0.3), 60, 11);
  const EmpiricalSpectrum s = empirical_spectrum(
      kendall_matrix_fast(x).matrix, MatrixKind::Kendall, "ma1", 60, 11);
  REQUIRE(s.eigenvalues.sum() == Catch::Approx(30.0).margin(1e-8));
  REQUIRE(s.eigenvalues.minCoeff() >= -1e-10);
}

TEST_CASE("ks_distance on quantile-constructed spectrum") {
  // eigenvalues at the (i - 1/2)/p quantiles of the affine MP law
  const double c = 0.5;
  const DensityCurve curve = mp_affine_curve(c, 40000);
  const int p = 100;
  EmpiricalSpectrum s;
  s.eigenvalues.resize(p);
  for (int i = 0; i < p; ++i) {
    const double target = (i + 0.5) / p;
    double lo = curve.grid.front(), hi = curve.grid.back();
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (curve.cdf(mid) < target ? lo : hi) = mid;
    }
    s.eigenvalues(i) = lo;
  }
  REQUIRE(ks_distance(s, curve) <= 1.0 / p + 1e-3);
}

TEST_CASE("ks_distance zero for matching point mass") {
  DensityCurve curve;
  curve.grid = {0.0, 1.0};
  curve.density = {0.0, 0.0};
  curve.atoms = {{0.5, 1.0}};
  EmpiricalSpectrum s;
  s.eigenvalues = Eigen::VectorXd::Constant(10, 0.5);
  REQUIRE(ks_distance(s, curve) == 0.0);
}

TEST_CASE("ks_distance rejects non-normalized curves") {
  DensityCurve curve;
  curve.grid = {0.0, 1.0};
  curve.density = {0.4, 0.4};  // mass 0.4
  EmpiricalSpectrum s;
  s.eigenvalues = Eigen::VectorXd::Constant(3, 0.5);
  REQUIRE_THROWS_WITH(ks_distance(s, curve),
                      Catch::Matchers::ContainsSubstring("0.4"));
}

TEST_CASE("ks_distance invariant under zero-mass atoms") {
  const DensityCurve curve = mp_affine_curve(0.5);
  DensityCurve padded = curve;
  padded.atoms.push_back({1.0, 0.0});
  const SampleMatrix x = sample_mvn(CorrelationModel::identity(40), 80, 2);
  const EmpiricalSpectrum s = empirical_spectrum(
      kendall_matrix_fast(x).matrix, MatrixKind::Kendall, "identity", 80, 2);
  REQUIRE(ks_distance(s, curve) == ks_distance(s, padded));
}

TEST_CASE("levy_distance basics") {
  auto f = [](double x) { return x < 0.5 ? 0.0 : 1.0; };
  std::vector<double> grid;
  for (int i = 0; i <= 200; ++i) grid.push_back(i / 100.0 - 0.5);
  REQUIRE(levy_distance(f, f, grid) < 1e-6);

  const double delta = 0.07;
  auto g = [&](double x) { return x < 0.5 + delta ? 0.0 : 1.0; };
  REQUIRE(levy_distance(f, g, grid) <= delta + 1e-3);
}

TEST_CASE("levy distance between K_n and W_n shrinks with n") {
  const CorrelationModel m = CorrelationModel::identity(50);
  const SigmaTriple triple = sigma_triple(m);
  auto levy_kn_wn = [&](int n, std::uint64_t seed) {
    const SampleMatrix x = sample_mvn(m, n, seed);
    const HoeffdingPieces h = hoeffding_pieces(x, triple);
    const EmpiricalSpectrum sk = empirical_spectrum(
        kendall_matrix_fast(x).matrix, MatrixKind::Kendall, "identity", n, seed);
    const EmpiricalSpectrum sw =
        empirical_spectrum(h.w_n, MatrixKind::Wn, "identity", n, seed);
    const std::vector<double> grid = levy_grid(sk, sw);
    return levy_distance([&](double t) { return esd_cdf(sk, t); },
                         [&](double t) { return esd_cdf(sw, t); }, grid);
  };
  double small_n = 0.0, large_n = 0.0;
  for (int r = 0; r < 3; ++r) {
    small_n += levy_kn_wn(50, 100 + r);
    large_n += levy_kn_wn(400, 200 + r);
  }
  REQUIRE(large_n < small_n);
  REQUIRE(large_n / 3.0 < 0.1);
}

TEST_CASE("histogram normalization and shapes") {
  EmpiricalSpectrum flat;
  flat.eigenvalues.resize(1000);
  for (int i = 0; i < 1000; ++i) flat.eigenvalues(i) = i / 999.0;
  const Histogram h = histogram(flat, 25);
  double mass = 0.0;
  for (std::size_t b = 0; b < h.densities.size(); ++b) {
    mass += h.densities[b] * (h.edges[b + 1] - h.edges[b]);
    REQUIRE(h.densities[b] == Catch::Approx(1.0).margin(0.25));
  }
  REQUIRE(mass == Catch::Approx(1.0).margin(1e-12));

  EmpiricalSpectrum constant;
  constant.eigenvalues = Eigen::VectorXd::Constant(5, 2.0);
  const Histogram hc = histogram(constant, 20);
  double total = 0.0;
  for (std::size_t b = 0; b < hc.densities.size(); ++b) {
    total += hc.densities[b] * (hc.edges[b + 1] - hc.edges[b]);
  }
  REQUIRE(total == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("auto binning stays within declared limits") {
  EmpiricalSpectrum s;
  s.eigenvalues.resize(300);
  Rng rng(8);
  for (int i = 0; i < 300; ++i) s.eigenvalues(i) = rng.next_normal();
  std::sort(s.eigenvalues.data(), s.eigenvalues.data() + 300);
  const Histogram h = histogram(s);
  REQUIRE(h.densities.size() >= 20);
  REQUIRE(h.densities.size() <= 100);
}
