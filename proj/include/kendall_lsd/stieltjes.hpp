#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kendall_lsd/models.hpp"
#include "kendall_lsd/spectra.hpp"

namespace klsd {

using Complex = std::complex<double>;

enum class SolveMode { FinitePTrace, ToeplitzFourier, ClosedForm };

// Per-z record of the subordination value x(z) in C^-, the Stieltjes
// value s(z) in C^+, and solver diagnostics.
struct StieltjesSolution {
  Complex z;
  Complex x;
  Complex s;
  int iterations = 0;
  double residual = 0.0;
  SolveMode mode = SolveMode::FinitePTrace;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, Complex z, Complex x, double residual,
              int iterations)
      : std::runtime_error(what + " at z = (" + std::to_string(z.real()) +
                           ", " + std::to_string(z.imag()) + "), residual " +
                           [&] {
                             char buf[32];
                             std::snprintf(buf, sizeof(buf), "%g", residual);
                             return std::string(buf);
                           }()),
        z(z),
        x(x),
        residual(residual),
        iterations(iterations) {}

  Complex z;
  Complex x;
  double residual;
  int iterations;
};

namespace detail {

struct FixedPointConfig {
  double damping = 0.5;
  int max_iterations = 10000;
  double residual_tol = 1e-10;
};

// Damped Picard iteration x <- (1-a) x + a / (1 + 2c T(x)) with Aitken
// delta-squared acceleration once past 50 steps.  T is the mode's trace
// functional of the master equation.
template <class TraceFn>
StieltjesSolution solve_subordination(TraceFn&& trace, double c, Complex z,
                                      Complex x0,
                                      const FixedPointConfig& cfg = {}) {
  if (z.imag() <= 0.0) {
    throw std::invalid_argument("solve: z must lie in the upper half plane");
  }
  Complex x = x0, prev1 = x0;
  int iter = 0;
  bool converged = false;
  double residual = std::numeric_limits<double>::infinity();
  for (; iter < cfg.max_iterations; ++iter) {
    // convergence is judged on the equation residual itself: near an atom
    // |x| is small and a tiny step in x can still leave 1/x far off target
    const Complex rhs = 1.0 + 2.0 * c * trace(x);
    residual = std::abs(1.0 / x - rhs);
    if (residual <= cfg.residual_tol) {
      converged = true;
      break;
    }
    const Complex target = 1.0 / rhs;
    Complex xn = (1.0 - cfg.damping) * x + cfg.damping * target;
    if (iter > 50 && iter % 10 == 0) {
      const Complex denom = xn - 2.0 * x + prev1;
      if (std::abs(denom) > 1e-14) {
        const Complex acc = xn - (xn - x) * (xn - x) / denom;
        if (std::isfinite(acc.real()) && std::isfinite(acc.imag())) xn = acc;
      }
    }
    prev1 = x;
    x = xn;
  }

  if (!converged) {
    throw SolverError("fixed-point iteration did not converge", z, x, residual,
                      iter);
  }
  if (x.imag() > 1e-6) {
    throw SolverError("solution left the lower-half-plane branch", z, x,
                      residual, iter);
  }
  // Round-off can leave a vanishing positive imaginary part; clamp it.
  if (x.imag() > 0.0) x = Complex(x.real(), 0.0);

  StieltjesSolution sol;
  sol.z = z;
  sol.x = x;
  sol.iterations = iter;
  sol.residual = residual;
  return sol;
}

}  // namespace detail

// Plug-in mode: the limiting trace in the master equation is replaced by
// the model's own finite-p matrices,
//   T(x, z) = (1/p) tr[(Sigma3 + 2x Sigma2 - zI)^(-1) Sigma2].
// When Sigma2 and Sigma3 commute (every Toeplitz-family model here) they
// are diagonalized once in a common basis and each iteration costs O(p);
// otherwise each iteration factorizes the complex p x p matrix.
class FinitePTraceSolver {
 public:
  FinitePTraceSolver(SigmaTriple triple, double c)
      : c_(c), p_(triple.p()), sigma2_(triple.sigma2), sigma3_(triple.sigma3) {
    if (c <= 0.0) throw std::invalid_argument("aspect ratio c must be > 0");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma2_);
    const Eigen::MatrixXd cross =
        es.eigenvectors().transpose() * sigma3_ * es.eigenvectors();
    const double offdiag =
        (cross - Eigen::MatrixXd(cross.diagonal().asDiagonal()))
            .cwiseAbs()
            .maxCoeff();
    if (offdiag <= 1e-10 * std::max(1.0, cross.cwiseAbs().maxCoeff())) {
      commuting_ = true;
      mu2_ = es.eigenvalues();
      mu3_ = cross.diagonal();
    }
  }

  double c() const { return c_; }

  StieltjesSolution solve(Complex z, Complex x0 = Complex(1.0, 0.0)) const {
    auto trace = [this, z](Complex x) { return trace_fn(x, z); };
    StieltjesSolution sol = detail::solve_subordination(trace, c_, z, x0);
    sol.mode = SolveMode::FinitePTrace;
    sol.s = stieltjes_at(sol.x, z);
    return sol;
  }

  Complex trace_fn(Complex x, Complex z) const {
    if (commuting_) {
      Complex t = 0.0;
      for (int k = 0; k < p_; ++k) t += mu2_(k) / (mu3_(k) + 2.0 * x * mu2_(k) - z);
      return t / static_cast<double>(p_);
    }
    return dense_traces(x, z).first;
  }

  Complex stieltjes_at(Complex x, Complex z) const {
    if (commuting_) {
      Complex t = 0.0;
      for (int k = 0; k < p_; ++k) t += 1.0 / (mu3_(k) + 2.0 * x * mu2_(k) - z);
      return t / static_cast<double>(p_);
    }
    return dense_traces(x, z).second;
  }

 private:
  // ((1/p) tr[M^-1 Sigma2], (1/p) tr[M^-1]) for M = Sigma3 + 2x Sigma2 - zI.
  std::pair<Complex, Complex> dense_traces(Complex x, Complex z) const {
    Eigen::MatrixXcd m = sigma3_.cast<Complex>() + 2.0 * x * sigma2_.cast<Complex>();
    m.diagonal().array() -= z;
    const Eigen::MatrixXcd inv = m.partialPivLu().inverse();
    return {(inv * sigma2_.cast<Complex>()).trace() / static_cast<double>(p_),
            inv.trace() / static_cast<double>(p_)};
  }

  double c_;
  int p_;
  Eigen::MatrixXd sigma2_, sigma3_;
  bool commuting_ = false;
  Eigen::VectorXd mu2_, mu3_;
};

// Analytic-limit mode for Toeplitz-family models: the trace functional is
// the periodic-trapezoid quadrature of f2/f1 over [0, 2pi), and
// s(z) = (1/2pi) int 1/f1.
class ToeplitzFourierSolver {
 public:
  ToeplitzFourierSolver(std::vector<double> lags, double c,
                        int quad_points = 4096)
      : lags_(std::move(lags)), c_(c), n_(quad_points) {
    if (c <= 0.0) throw std::invalid_argument("aspect ratio c must be > 0");
    if (n_ < 512) throw std::invalid_argument("quad_points must be >= 512");
    // f1(t) = (1/3 + 2x/3 - z) + A(t) + B(t) (x - 1), f2(t) = 1/3 + B(t)/2;
    // A and B collect the arcsin Fourier coefficients.
    a_.assign(n_, 0.0);
    b_.assign(n_, 0.0);
    for (int j = 0; j < n_; ++j) {
      const double theta = 2.0 * kPi * j / n_;
      for (std::size_t k = 0; k < lags_.size(); ++k) {
        const double ck = std::cos((k + 1) * theta);
        a_[j] += 2.0 * (2.0 / kPi) * std::asin(lags_[k]) * ck;
        b_[j] += 2.0 * (4.0 / kPi) * std::asin(lags_[k] / 2.0) * ck;
      }
    }
  }

  double c() const { return c_; }

  StieltjesSolution solve(Complex z, Complex x0 = Complex(1.0, 0.0)) const {
    auto trace = [this, z](Complex x) { return trace_fn(x, z); };
    StieltjesSolution sol = detail::solve_subordination(trace, c_, z, x0);
    sol.mode = SolveMode::ToeplitzFourier;
    sol.s = stieltjes_at(sol.x, z);
    return sol;
  }

  Complex trace_fn(Complex x, Complex z) const {
    const Complex w = 1.0 / 3.0 + 2.0 * x / 3.0 - z;
    Complex t = 0.0;
    for (int j = 0; j < n_; ++j) {
      const Complex f1 = w + a_[j] + b_[j] * (x - 1.0);
      if (std::abs(f1) < 1e-12) {
        throw SolverError("symbol f1 vanishes on the quadrature grid", z, x,
                          0.0, 0);
      }
      t += (1.0 / 3.0 + 0.5 * b_[j]) / f1;
    }
    return t / static_cast<double>(n_);
  }

  Complex stieltjes_at(Complex x, Complex z) const {
    const Complex w = 1.0 / 3.0 + 2.0 * x / 3.0 - z;
    Complex t = 0.0;
    for (int j = 0; j < n_; ++j) t += 1.0 / (w + a_[j] + b_[j] * (x - 1.0));
    return t / static_cast<double>(n_);
  }

 private:
  std::vector<double> lags_;
  double c_;
  int n_;
  std::vector<double> a_, b_;  // Fourier sums at the quadrature nodes
};

// MA(1) closed form: s(z) from the square-root expression, with the
// coupling constant
//   kappa(x) = asin(rho/2) / (asin(rho) + 2 (x-1) asin(rho/2)),
// and the master equation written with the trace functional
//   T(x, z) = (1 - kappa (1 + 2x - 3z))/3 * s + kappa.
class Ma1ClosedFormSolver {
 public:
  Ma1ClosedFormSolver(double rho, double c) : rho_(rho), c_(c) {
    if (std::abs(rho) > 0.5) {
      throw std::invalid_argument("ma1 solver requires |rho| <= 1/2");
    }
    if (c <= 0.0) throw std::invalid_argument("aspect ratio c must be > 0");
    asin_rho_ = std::asin(rho);
    asin_half_ = std::asin(rho / 2.0);
  }

  double c() const { return c_; }

  StieltjesSolution solve(Complex z, Complex x0 = Complex(1.0, 0.0)) const {
    auto trace = [this, z](Complex x) { return trace_fn(x, z); };
    StieltjesSolution sol = detail::solve_subordination(trace, c_, z, x0);
    sol.mode = SolveMode::ClosedForm;
    sol.s = stieltjes_at(sol.x, z);
    return sol;
  }

  // s(z) = -1 / sqrt((1/3 + 2x/3 - z)^2 - 4 g(x)^2), branch with Im s > 0.
  Complex stieltjes_at(Complex x, Complex z) const {
    const Complex w = 1.0 / 3.0 + 2.0 * x / 3.0 - z;
    const Complex g =
        (2.0 / kPi) * asin_rho_ + (4.0 / kPi) * (x - 1.0) * asin_half_;
    const Complex root = std::sqrt(w * w - 4.0 * g * g);
    const Complex s = -1.0 / root;
    return s.imag() >= 0.0 ? s : -s;
  }

  Complex coupling(Complex x, Complex z) const {
    if (rho_ == 0.0) return 0.0;
    const Complex denom = asin_rho_ + 2.0 * (x - 1.0) * asin_half_;
    if (std::abs(denom) < 1e-12) {
      throw SolverError("pole in the MA(1) coupling constant", z, x, 0.0, 0);
    }
    return asin_half_ / denom;
  }

  Complex trace_fn(Complex x, Complex z) const {
    const Complex kappa = coupling(x, z);
    const Complex s = stieltjes_at(x, z);
    return (1.0 - kappa * (1.0 + 2.0 * x - 3.0 * z)) / 3.0 * s + kappa;
  }

 private:
  double rho_, c_;
  double asin_rho_, asin_half_;
};

// Band-Toeplitz (lags rho, rho) reduction: Sigma3 = a Sigma2 + (1-a)/3 I
// with a = asin(rho)/asin(rho/2) - 2, which closes the equation over the
// single symbol f2 and gives s(z) in closed form.
class BandToeplitz2Solver {
 public:
  BandToeplitz2Solver(double rho, double c, int quad_points = 4096)
      : rho_(rho), c_(c), n_(quad_points) {
    if (c <= 0.0) throw std::invalid_argument("aspect ratio c must be > 0");
    if (n_ < 512) throw std::invalid_argument("quad_points must be >= 512");
    a_ = rho == 0.0 ? 0.0 : std::asin(rho) / std::asin(rho / 2.0) - 2.0;
    f2_.assign(n_, 0.0);
    for (int j = 0; j < n_; ++j) {
      const double theta = 2.0 * kPi * j / n_;
      f2_[j] = 1.0 / 3.0 + (4.0 / kPi) * std::asin(rho / 2.0) *
                               (std::cos(theta) + std::cos(2.0 * theta));
    }
  }

  double c() const { return c_; }
  double shift() const { return a_; }

  StieltjesSolution solve(Complex z, Complex x0 = Complex(1.0, 0.0)) const {
    auto trace = [this, z](Complex x) { return trace_fn(x, z); };
    StieltjesSolution sol = detail::solve_subordination(trace, c_, z, x0);
    sol.mode = SolveMode::ClosedForm;
    if (std::abs(sol.x) < 1e-12) {
      throw SolverError("degenerate x ~ 0 in band-Toeplitz closed form", z,
                        sol.x, sol.residual, sol.iterations);
    }
    sol.s = stieltjes_at(sol.x, z);
    return sol;
  }

  Complex trace_fn(Complex x, Complex z) const {
    const Complex z1 = z - (1.0 - a_) / 3.0;
    Complex t = 0.0;
    for (int j = 0; j < n_; ++j) {
      const Complex denom = (2.0 * x + a_) * f2_[j] - z1;
      if (std::abs(denom) < 1e-12) {
        throw SolverError("symbol f1 vanishes on the quadrature grid", z, x,
                          0.0, 0);
      }
      t += f2_[j] / denom;
    }
    return t / static_cast<double>(n_);
  }

  Complex stieltjes_at(Complex x, Complex z) const {
    const Complex z1 = z - (1.0 - a_) / 3.0;
    return ((2.0 * x + a_) * (1.0 - x) - 2.0 * c_ * x) / (2.0 * c_ * z1 * x);
  }

 private:
  double rho_, c_;
  int n_;
  double a_;
  std::vector<double> f2_;
};

// Explicit independent-case root
//   s(z) = [1 - 2c/3 - z + sqrt((z - 1 - 2c/3)^2 - 16c/9)] / (4c/3 (z - 1/3))
// with the branch chosen so Im s > 0.
inline Complex identity_stieltjes(double c, Complex z) {
  const Complex root = std::sqrt((z - 1.0 - 2.0 * c / 3.0) * (z - 1.0 - 2.0 * c / 3.0) -
                                 16.0 * c / 9.0);
  const Complex denom = 4.0 * c / 3.0 * (z - 1.0 / 3.0);
  const Complex s1 = (1.0 - 2.0 * c / 3.0 - z + root) / denom;
  const Complex s2 = (1.0 - 2.0 * c / 3.0 - z - root) / denom;
  return s1.imag() >= s2.imag() ? s1 : s2;
}

// Residual of the independent-case quadratic
//   (2/3) c (z - 1/3) s^2 + (z - 1 + 2c/3) s + 1 = 0.
inline double stieltjes_quadratic_check(double c, Complex z, Complex s) {
  return std::abs((2.0 / 3.0) * c * (z - 1.0 / 3.0) * s * s +
                  (z - 1.0 + 2.0 * c / 3.0) * s + 1.0);
}

// Support edges of the affine Marchenko-Pastur law: 1/3 + (2/3)(1 -+ sqrt(c))^2.
inline std::pair<double, double> mp_affine_support(double c) {
  const double sc = std::sqrt(c);
  return {1.0 / 3.0 + (2.0 / 3.0) * (1.0 - sc) * (1.0 - sc),
          1.0 / 3.0 + (2.0 / 3.0) * (1.0 + sc) * (1.0 + sc)};
}

// Continuous density of the affine MP law; the c > 1 atom at 1/3 is
// reported separately by mp_affine_atom.
inline double mp_affine_density(double c, double x) {
  const auto [lo, hi] = mp_affine_support(c);
  if (x <= lo || x >= hi) return 0.0;
  return 9.0 / (4.0 * kPi * c * (3.0 * x - 1.0)) *
         std::sqrt((hi - x) * (x - lo));
}

inline std::optional<std::pair<double, double>> mp_affine_atom(double c) {
  if (c > 1.0) return std::make_pair(1.0 / 3.0, 1.0 - 1.0 / c);
  return std::nullopt;
}

inline DensityCurve mp_affine_curve(double c, int points = 2000) {
  const auto [lo, hi] = mp_affine_support(c);
  DensityCurve curve;
  curve.grid.resize(points);
  curve.density.resize(points);
  const double pad = 1e-9 * (hi - lo);
  for (int i = 0; i < points; ++i) {
    const double x = lo + pad + (hi - lo - 2 * pad) * i / (points - 1.0);
    curve.grid[i] = x;
    curve.density[i] = mp_affine_density(c, x);
  }
  if (auto atom = mp_affine_atom(c)) curve.atoms.push_back(*atom);
  return curve;
}

// Standard Marchenko-Pastur density with ratio c (variance 1).
inline DensityCurve mp_standard_curve(double c, int points = 2000) {
  const double sc = std::sqrt(c);
  const double lo = (1.0 - sc) * (1.0 - sc);
  const double hi = (1.0 + sc) * (1.0 + sc);
  DensityCurve curve;
  curve.grid.resize(points);
  curve.density.resize(points);
  for (int i = 0; i < points; ++i) {
    const double x = lo + (hi - lo) * (i + 0.5) / points;
    curve.grid[i] = x;
    curve.density[i] =
        std::sqrt(std::max(0.0, (hi - x) * (x - lo))) / (2.0 * kPi * c * x);
  }
  if (c > 1.0) curve.atoms.emplace_back(0.0, 1.0 - 1.0 / c);
  return curve;
}

// Evaluation grid for the inversion sweep.
struct SpectralGrid {
  std::vector<double> energies;  // strictly ascending
  double eta = 1e-3;

  static SpectralGrid uniform(double lo, double hi, int points,
                              double eta = 1e-3) {
    SpectralGrid g;
    g.eta = eta;
    g.energies.resize(points);
    for (int i = 0; i < points; ++i) {
      g.energies[i] = lo + (hi - lo) * i / (points - 1.0);
    }
    return g;
  }
};

struct SweepPoint {
  double energy = 0.0;
  int iterations = 0;
  double residual = 0.0;
  double im_x = 0.0;
  double im_s = 0.0;
};

struct DensitySweep {
  DensityCurve curve;
  std::vector<SweepPoint> points;
  std::vector<StieltjesSolution> solutions;
};

using StieltjesSolver = std::function<StieltjesSolution(Complex, Complex)>;

// Inversion density Im s(E + i eta)/pi along the grid, with warm-start
// continuation in E (x0 at the next energy is the converged x here; the
// first point starts from the large-|z| limit x = 1).  The optional
// Richardson step extrapolates eta and eta/2 linearly to eta -> 0.
inline DensitySweep density_from_stieltjes(const StieltjesSolver& solve,
                                           const SpectralGrid& grid,
                                           bool richardson = false) {
  if (grid.eta < 1e-4 || grid.eta > 1e-1) {
    throw std::invalid_argument("grid.eta must lie in [1e-4, 1e-1]");
  }
  DensitySweep sweep;
  Complex x_warm(1.0, 0.0);
  for (double e : grid.energies) {
    StieltjesSolution sol;
    try {
      sol = solve(Complex(e, grid.eta), x_warm);
    } catch (const SolverError& err) {
      throw SolverError("sweep failed at energy " + std::to_string(e), err.z,
                        err.x, err.residual, err.iterations);
    }
    x_warm = sol.x;
    double density = sol.s.imag() / kPi;
    if (richardson) {
      const StieltjesSolution half = solve(Complex(e, grid.eta / 2.0), sol.x);
      density = 2.0 * half.s.imag() / kPi - density;
    }
    if (density < -1e-6) {
      throw SolverError("negative density: wrong branch", sol.z, sol.x,
                        sol.residual, sol.iterations);
    }
    sweep.curve.grid.push_back(e);
    sweep.curve.density.push_back(std::max(0.0, density));
    sweep.points.push_back({e, sol.iterations, sol.residual, sol.x.imag(),
                            sol.s.imag()});
    sweep.solutions.push_back(sol);
  }
  return sweep;
}

// Restarting the iteration from several initial points in the closed
// lower half plane must land on the same x; returns the max pairwise gap.
inline double restart_agreement(const StieltjesSolver& solve, Complex z) {
  static const Complex starts[] = {
      {1.0, 0.0},   {0.5, -0.5}, {2.0, -1.0},  {0.1, -0.1},
      {0.8, -2.0},  {3.0, -0.2}, {0.3, -1.5},  {1.5, -0.8},
  };
  std::vector<Complex> sols;
  for (Complex x0 : starts) sols.push_back(solve(z, x0).x);
  double gap = 0.0;
  for (std::size_t i = 0; i < sols.size(); ++i) {
    for (std::size_t j = i + 1; j < sols.size(); ++j) {
      gap = std::max(gap, std::abs(sols[i] - sols[j]));
    }
  }
  return gap;
}

}  // namespace klsd
