#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace klsd {

enum class MatrixKind { Kendall, Wn, M1, Spearman, Pearson, Other };

inline std::string to_string(MatrixKind k) {
  switch (k) {
    case MatrixKind::Kendall: return "kendall";
    case MatrixKind::Wn: return "wn";
    case MatrixKind::M1: return "m1";
    case MatrixKind::Spearman: return "spearman";
    case MatrixKind::Pearson: return "pearson";
    case MatrixKind::Other: return "other";
  }
  return "unknown";
}

// Sorted eigenvalues of a realized matrix plus provenance.
struct EmpiricalSpectrum {
  Eigen::VectorXd eigenvalues;  // ascending
  std::string model = "unknown";
  int n = 0;
  int p = 0;
  std::uint64_t seed = 0;
  MatrixKind kind = MatrixKind::Other;
};

// Ascending eigenvalues of a symmetric matrix.
inline Eigen::VectorXd eigenvalues_sym(const Eigen::MatrixXd& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("eigenvalues_sym: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues();  // already ascending
}

inline EmpiricalSpectrum empirical_spectrum(const Eigen::MatrixXd& m,
                                            MatrixKind kind,
                                            std::string model = "unknown",
                                            int n = 0, std::uint64_t seed = 0) {
  EmpiricalSpectrum s;
  s.eigenvalues = eigenvalues_sym(m);
  s.kind = kind;
  s.model = std::move(model);
  s.n = n;
  s.p = static_cast<int>(m.rows());
  s.seed = seed;
  return s;
}

// Fraction of eigenvalues <= x (right-continuous).
inline double esd_cdf(const EmpiricalSpectrum& spec, double x) {
  const auto& ev = spec.eigenvalues;
  const auto* begin = ev.data();
  const auto* end = ev.data() + ev.size();
  return static_cast<double>(std::upper_bound(begin, end, x) - begin) /
         static_cast<double>(ev.size());
}

// Density samples on a grid plus optional point-mass atoms.
struct DensityCurve {
  std::vector<double> grid;     // ascending
  std::vector<double> density;  // same length, >= 0
  std::vector<std::pair<double, double>> atoms;  // (location, mass)

  double continuous_mass() const {
    double m = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
      m += 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
    }
    return m;
  }

  double total_mass() const {
    double m = continuous_mass();
    for (const auto& [loc, mass] : atoms) m += mass;
    return m;
  }

  // CDF by cumulative trapezoid plus atom jumps.
  double cdf(double x) const {
    double c = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
      if (grid[i] <= x) {
        c += 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
      } else if (grid[i - 1] < x) {
        const double t = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
        const double dmid = density[i - 1] + t * (density[i] - density[i - 1]);
        c += 0.5 * (density[i - 1] + dmid) * (x - grid[i - 1]);
      }
    }
    for (const auto& [loc, mass] : atoms) {
      if (loc <= x) c += mass;
    }
    return c;
  }
};

// sup |ESD - curve CDF| over the eigenvalues (both sides of each jump)
// and the curve grid.
inline double ks_distance(const EmpiricalSpectrum& spec,
                          const DensityCurve& curve) {
  const double mass = curve.total_mass();
  if (std::abs(mass - 1.0) > 0.03) {
    throw std::invalid_argument("ks_distance: curve mass " +
                                std::to_string(mass) + " is not ~1");
  }
  double d = 0.0;
  const auto& ev = spec.eigenvalues;
  const auto np = static_cast<double>(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    // repeated eigenvalues: the ESD value just right (left) of the jump is
    // set by the last (first) index sharing this value
    const bool last_dup = i + 1 == ev.size() || ev(i + 1) != ev(i);
    const bool first_dup = i == 0 || ev(i - 1) != ev(i);
    const double t = curve.cdf(ev(i)) / mass;
    // left limit of the theory CDF: drop any atom sitting exactly here
    double atom_here = 0.0;
    for (const auto& [loc, m] : curve.atoms) {
      if (loc == ev(i)) atom_here += m;
    }
    if (last_dup) d = std::max(d, std::abs((i + 1) / np - t));
    if (first_dup) {
      d = std::max(d, std::abs(i / np - (t - atom_here / mass)));
    }
  }
  for (double g : curve.grid) {
    d = std::max(d, std::abs(esd_cdf(spec, g) - curve.cdf(g) / mass));
  }
  return d;
}

// Smallest eps with g(x - eps) - eps <= f(x) <= g(x + eps) + eps on the
// grid, located by bisection to 1e-6.
inline double levy_distance(const std::function<double(double)>& f,
                            const std::function<double(double)>& g,
                            const std::vector<double>& grid) {
  std::vector<double> fv(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) fv[i] = f(grid[i]);

  auto ok = [&](double eps) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double x = grid[i];
      if (g(x - eps) - eps > fv[i] + 1e-12) return false;
      if (fv[i] > g(x + eps) + eps + 1e-12) return false;
    }
    return true;
  };

  double lo = 0.0, hi = 1.0;
  if (ok(lo)) return 0.0;
  while (!ok(hi)) hi *= 2.0;
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

// Merged evaluation grid for two spectra: 4096 points over the union of
// supports padded by 5%.
inline std::vector<double> levy_grid(const EmpiricalSpectrum& a,
                                     const EmpiricalSpectrum& b) {
  double lo = std::min(a.eigenvalues.minCoeff(), b.eigenvalues.minCoeff());
  double hi = std::max(a.eigenvalues.maxCoeff(), b.eigenvalues.maxCoeff());
  const double pad = 0.05 * std::max(1e-12, hi - lo);
  lo -= pad;
  hi += pad;
  std::vector<double> g(4096);
  for (int i = 0; i < 4096; ++i) g[i] = lo + (hi - lo) * i / 4095.0;
  return g;
}

struct Histogram {
  std::vector<double> edges;      // bins + 1
  std::vector<double> densities;  // bars integrate to 1
};

// Density-normalized histogram; bins == 0 requests Freedman-Diaconis,
// clamped to [20, 100].
inline Histogram histogram(const EmpiricalSpectrum& spec, int bins = 0) {
  const auto& ev = spec.eigenvalues;
  const int n = static_cast<int>(ev.size());
  double lo = ev.minCoeff();
  double hi = ev.maxCoeff();
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  if (bins < 1) {
    const double q1 = ev(std::clamp(n / 4, 0, n - 1));
    const double q3 = ev(std::clamp(3 * n / 4, 0, n - 1));
    const double iqr = std::max(q3 - q1, 1e-12);
    const double width = 2.0 * iqr / std::cbrt(static_cast<double>(n));
    bins = std::clamp(static_cast<int>(std::ceil((hi - lo) / width)), 20, 100);
  }

  Histogram h;
  h.edges.resize(bins + 1);
  h.densities.assign(bins, 0.0);
  const double width = (hi - lo) / bins;
  for (int b = 0; b <= bins; ++b) h.edges[b] = lo + b * width;
  for (int i = 0; i < n; ++i) {
    int b = static_cast<int>((ev(i) - lo) / width);
    b = std::clamp(b, 0, bins - 1);
    h.densities[b] += 1.0;
  }
  for (double& d : h.densities) d /= n * width;
  return h;
}

}  // namespace klsd
