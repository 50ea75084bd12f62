#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kendall_lsd/estimators.hpp"
#include "kendall_lsd/models.hpp"
#include "kendall_lsd/rng.hpp"
#include "kendall_lsd/sampling.hpp"

namespace klsd {

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t n_samples = 0;
  std::uint64_t seed = 0;
};

// One check's outcome, serialized to the verdicts bundle.
struct VerdictRecord {
  std::string name;
  std::string params;
  double estimate = 0.0;
  double se = 0.0;
  double theory = 0.0;
  double threshold = 0.0;  // multiple of SE (or absolute slack for bounds)
  bool pass = false;
};

namespace detail {

inline MCEstimate mc_mean(const std::vector<double>& samples,
                          std::uint64_t seed) {
  const auto n = samples.size();
  if (n < 2) throw std::invalid_argument("mc_mean: need >= 2 samples");
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return {mean, sd / std::sqrt(static_cast<double>(n)),
          static_cast<std::uint64_t>(n), seed};
}

// Sample variance with a standard error from the central fourth moment.
inline MCEstimate mc_variance(const std::vector<double>& samples,
                              std::uint64_t seed) {
  const auto n = samples.size();
  if (n < 2) throw std::invalid_argument("mc_variance: need >= 2 samples");
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(n);
  double m2 = 0.0, m4 = 0.0;
  for (double v : samples) {
    const double d = (v - mean) * (v - mean);
    m2 += d;
    m4 += d * d;
  }
  m2 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  const double var_of_var = std::max(0.0, m4 - m2 * m2);
  return {m2 * static_cast<double>(n) / static_cast<double>(n - 1),
          std::sqrt(var_of_var / static_cast<double>(n)),
          static_cast<std::uint64_t>(n), seed};
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

struct OracleResult {
  MCEstimate mc;
  double theory = 0.0;
  double threshold = 3.0;  // pass iff |mc.mean - theory| <= threshold * SE
  bool pass() const {
    if (mc.std_error == 0.0) return mc.mean == theory;
    return std::abs(mc.mean - theory) <= threshold * mc.std_error;
  }
};

// E[sign(z1) sign(z2)] = (2/pi) asin(rho) for a standard bivariate normal.
inline OracleResult grothendieck_mc(double rho, std::uint64_t n_samples,
                                    std::uint64_t seed) {
  if (std::abs(rho) > 1.0) {
    throw std::invalid_argument("grothendieck_mc: |rho| must be <= 1");
  }
  Rng rng(seed);
  const double tail = std::sqrt(1.0 - rho * rho);
  std::vector<double> vals(n_samples);
  for (auto& v : vals) {
    const double g1 = rng.next_normal();
    const double g2 = rng.next_normal();
    v = detail::sign(g1) * detail::sign(rho * g1 + tail * g2);
  }
  OracleResult r;
  r.mc = detail::mc_mean(vals, seed);
  r.theory = (2.0 / kPi) * std::asin(rho);
  return r;
}

// E[prod_j sign(z_j)] for the 4-dimensional normal whose covariance has
// the (1, 1/2, rho, rho/2) block pattern; closed form
// ((2/pi) asin rho)^2 - ((2/pi) asin(rho/2))^2 + 1/9.
inline OracleResult esscher_mc(double rho, std::uint64_t n_samples,
                               std::uint64_t seed) {
  if (std::abs(rho) >= 1.0) {
    throw std::invalid_argument("esscher_mc: rho must be in (-1, 1)");
  }
  Eigen::Matrix4d cov;
  cov << 1.0, 0.5, rho, rho / 2.0,
         0.5, 1.0, rho / 2.0, rho,
         rho, rho / 2.0, 1.0, 0.5,
         rho / 2.0, rho, 0.5, 1.0;
  Eigen::LLT<Eigen::Matrix4d> llt(cov);
  Eigen::Matrix4d factor;
  if (llt.info() == Eigen::Success) {
    factor = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(cov);
    if (es.eigenvalues().minCoeff() < -1e-10) {
      throw std::domain_error("esscher_mc: block covariance is not PSD");
    }
    factor = es.eigenvectors() *
             es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  Rng rng(seed);
  std::vector<double> vals(n_samples);
  Eigen::Vector4d g;
  for (auto& v : vals) {
    for (int k = 0; k < 4; ++k) g(k) = rng.next_normal();
    const Eigen::Vector4d z = factor * g;
    v = detail::sign(z(0)) * detail::sign(z(1)) * detail::sign(z(2)) *
        detail::sign(z(3));
  }
  OracleResult r;
  r.mc = detail::mc_mean(vals, seed);
  const double t1 = (2.0 / kPi) * std::asin(rho);
  const double t2 = (2.0 / kPi) * std::asin(rho / 2.0);
  r.theory = t1 * t1 - t2 * t2 + 1.0 / 9.0;
  return r;
}

// Closed-form var(A_12' A_13) = tr(Sigma1^2) - tr(Sigma2^2).
inline double var_a12a13_theory(const SigmaTriple& triple) {
  return triple.sigma1.squaredNorm() - triple.sigma2.squaredNorm();
}

// MC variance of A_12' A_13 = sum_j sign(x_1j - x_2j) sign(x_1j - x_3j)
// over independent Gaussian triples, vs the closed form.
inline OracleResult var_a12a13_check(const CorrelationModel& model,
                                     std::uint64_t n_samples,
                                     std::uint64_t seed) {
  if (model.p > 50) {
    throw std::invalid_argument("var_a12a13_check: p must be <= 50");
  }
  const Eigen::MatrixXd sigma = build_sigma(model);
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  Eigen::MatrixXd factor;
  if (llt.info() == Eigen::Success) {
    factor = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
    factor = es.eigenvectors() *
             es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  Rng rng(seed);
  const int p = model.p;
  Eigen::VectorXd g(p), x1(p), x2(p), x3(p);
  auto draw = [&](Eigen::VectorXd& x) {
    for (int j = 0; j < p; ++j) g(j) = rng.next_normal();
    x = factor * g;
  };
  std::vector<double> vals(n_samples);
  for (auto& v : vals) {
    draw(x1);
    draw(x2);
    draw(x3);
    double dot = 0.0;
    for (int j = 0; j < p; ++j) {
      dot += detail::sign(x1(j) - x2(j)) * detail::sign(x1(j) - x3(j));
    }
    v = dot;
  }
  OracleResult r;
  r.mc = detail::mc_variance(vals, seed);
  r.theory = var_a12a13_theory(sigma_triple(model));
  r.threshold = 4.0;  // variance statistic: heavier-tailed sampling error
  return r;
}

struct BoundCheck {
  MCEstimate lhs;
  double rhs = 0.0;
  double threshold = 3.0;
  // One-sided: the MC mean must not exceed the bound beyond sampling noise.
  bool pass() const { return lhs.mean - threshold * lhs.std_error <= rhs; }
};

// var(A' B A) <= 3 ||Sigma|| tr(B Sigma2 B') for A = 2 Phi(x) - 1.
inline BoundCheck poincare_bound_check(const CorrelationModel& model,
                                       const Eigen::MatrixXd& b,
                                       std::uint64_t n_samples,
                                       std::uint64_t seed) {
  const Eigen::MatrixXd sigma = build_sigma(model);
  const int p = model.p;
  if (b.rows() != p || b.cols() != p) {
    throw std::invalid_argument("poincare_bound_check: B must be p x p");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  Eigen::MatrixXd factor;
  if (llt.info() == Eigen::Success) {
    factor = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
    factor = es.eigenvectors() *
             es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  Rng rng(seed);
  Eigen::VectorXd g(p), a(p);
  std::vector<double> vals(n_samples);
  for (auto& v : vals) {
    for (int j = 0; j < p; ++j) g(j) = rng.next_normal();
    const Eigen::VectorXd x = factor * g;
    for (int j = 0; j < p; ++j) a(j) = 2.0 * detail::std_normal_cdf(x(j)) - 1.0;
    v = a.dot(b * a);
  }

  const SigmaTriple triple = sigma_triple(sigma);
  const double op_norm =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sigma, Eigen::EigenvaluesOnly)
          .eigenvalues()
          .cwiseAbs()
          .maxCoeff();
  BoundCheck check;
  check.lhs = detail::mc_variance(vals, seed);
  check.rhs = 3.0 * op_norm * (b * triple.sigma2 * b.transpose()).trace();
  return check;
}

// (tr Sigma1^2 - tr Sigma2^2) / p^2 across dimensions; the quantity whose
// vanishing is the theorem's assumption on the quadratic sign statistic.
inline std::vector<std::pair<int, double>> assumption_a_scan(
    const std::function<CorrelationModel(int)>& family,
    const std::vector<int>& p_list) {
  std::vector<std::pair<int, double>> table;
  for (int p : p_list) {
    const CorrelationModel model = family(p);
    const double v = var_a12a13_theory(sigma_triple(model));
    table.emplace_back(p, v / (static_cast<double>(p) * p));
  }
  return table;
}

struct ErrorTermBounds {
  BoundCheck m2;        // (1/p) E ||M2||_F^2 vs its bound
  BoundCheck m3;        // (1/p) E ||M3 - Sigma3||_F^2 vs its bound
  MCEstimate m2_entry;  // replication mean of a fixed M2 entry (E M2 = 0)
  bool pass() const {
    return m2.pass() && m3.pass() &&
           std::abs(m2_entry.mean) <= 3.0 * m2_entry.std_error;
  }
};

// MC means of the two Hoeffding error terms against the closed-form
// upper bounds
//   (1/p) E||M2||_F^2      <= 4p^2/(3np(n-1)) + (8/np) tr(Sigma2^2)
//   (1/p) E||M3-Sigma3||_F^2 <= 2p^2/(3np(n-1)) + (32/np) tr{Sigma1(Sigma1+Sigma2)}.
inline ErrorTermBounds error_term_bounds_check(const CorrelationModel& model,
                                               int n, int replications,
                                               std::uint64_t seed) {
  if (n > 300 || model.p > 300) {
    throw std::invalid_argument("error_term_bounds_check: desk scale only");
  }
  const SigmaTriple triple = sigma_triple(model);
  const int p = model.p;
  std::vector<double> m2_vals(replications), m3_vals(replications),
      entry_vals(replications);
  for (int r = 0; r < replications; ++r) {
    const SampleMatrix x = sample_mvn(model, n, Rng::stream(seed, r).next_u64());
    const HoeffdingPieces pieces = hoeffding_pieces(x, triple);
    m2_vals[r] = pieces.m2.squaredNorm() / p;
    m3_vals[r] = (pieces.m3 - triple.sigma3).squaredNorm() / p;
    entry_vals[r] = pieces.m2(0, p - 1);
  }
  const double np = static_cast<double>(n) * p;
  ErrorTermBounds out;
  out.m2.lhs = detail::mc_mean(m2_vals, seed);
  out.m2.rhs = 4.0 * p / (3.0 * n * (n - 1.0)) +
               8.0 / np * triple.sigma2.squaredNorm();
  out.m3.lhs = detail::mc_mean(m3_vals, seed);
  out.m3.rhs = 2.0 * p / (3.0 * n * (n - 1.0)) +
               32.0 / np *
                   (triple.sigma1 * (triple.sigma1 + triple.sigma2)).trace();
  out.m2_entry = detail::mc_mean(entry_vals, seed);
  return out;
}

}  // namespace klsd
