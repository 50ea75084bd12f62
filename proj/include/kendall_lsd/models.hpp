#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "kendall_lsd/rng.hpp"

namespace klsd {

inline constexpr double kPi = std::numbers::pi;

enum class ModelKind {
  Identity,
  CompoundSymmetry,
  MA1,
  BandToeplitz2,
  GeneralToeplitz,
  Factor,
};

enum class FactorScale { OverP, OverSqrtP };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Identity: return "identity";
    case ModelKind::CompoundSymmetry: return "compound_symmetry";
    case ModelKind::MA1: return "ma1";
    case ModelKind::BandToeplitz2: return "band_toeplitz2";
    case ModelKind::GeneralToeplitz: return "general_toeplitz";
    case ModelKind::Factor: return "factor";
  }
  return "unknown";
}

// Population Pearson correlation structure.  The single source of truth
// for every derived quantity (samples, arcsin triple, symbols).
struct CorrelationModel {
  ModelKind kind = ModelKind::Identity;
  int p = 1;
  double rho = 0.0;                   // CompoundSymmetry / MA1 / BandToeplitz2
  std::vector<double> rho_seq;        // GeneralToeplitz
  int factor_rank = 3;                // Factor
  FactorScale factor_scale = FactorScale::OverP;
  std::uint64_t loadings_seed = 0;    // Factor

  static CorrelationModel identity(int p) {
    CorrelationModel m;
    m.kind = ModelKind::Identity;
    m.p = p;
    return m;
  }
  static CorrelationModel compound_symmetry(int p, double rho) {
    CorrelationModel m;
    m.kind = ModelKind::CompoundSymmetry;
    m.p = p;
    m.rho = rho;
    return m;
  }
  static CorrelationModel ma1(int p, double rho) {
    CorrelationModel m;
    m.kind = ModelKind::MA1;
    m.p = p;
    m.rho = rho;
    return m;
  }
  static CorrelationModel band_toeplitz2(int p, double rho) {
    CorrelationModel m;
    m.kind = ModelKind::BandToeplitz2;
    m.p = p;
    m.rho = rho;
    return m;
  }
  static CorrelationModel general_toeplitz(int p, std::vector<double> seq) {
    CorrelationModel m;
    m.kind = ModelKind::GeneralToeplitz;
    m.p = p;
    m.rho_seq = std::move(seq);
    return m;
  }
  static CorrelationModel factor(int p, int rank, FactorScale scale,
                                 std::uint64_t seed) {
    CorrelationModel m;
    m.kind = ModelKind::Factor;
    m.p = p;
    m.factor_rank = rank;
    m.factor_scale = scale;
    m.loadings_seed = seed;
    return m;
  }

  // Lag correlations as a Toeplitz sequence (rho_1, rho_2, ...).
  // Only meaningful for the Toeplitz-family kinds.
  std::vector<double> toeplitz_lags() const {
    switch (kind) {
      case ModelKind::Identity: return {};
      case ModelKind::MA1: return {rho};
      case ModelKind::BandToeplitz2: return {rho, rho};
      case ModelKind::GeneralToeplitz: return rho_seq;
      default:
        throw std::domain_error("toeplitz_lags: model " + to_string(kind) +
                                " is not a Toeplitz family");
    }
  }

  bool is_toeplitz_family() const {
    return kind == ModelKind::Identity || kind == ModelKind::MA1 ||
           kind == ModelKind::BandToeplitz2 ||
           kind == ModelKind::GeneralToeplitz;
  }
};

// Entrywise (2/pi) arcsin map.  halved=true applies arcsin(m_ij / 2).
// This is the scalar Grothendieck map applied entry by entry, not a
// matrix function.
inline Eigen::MatrixXd arcsin_map(const Eigen::MatrixXd& sigma, bool halved) {
  const double tol = 1e-12;
  Eigen::MatrixXd out(sigma.rows(), sigma.cols());
  for (Eigen::Index j = 0; j < sigma.cols(); ++j) {
    for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
      double v = sigma(i, j);
      if (std::abs(v) > 1.0 + tol) {
        throw std::domain_error("arcsin_map: entry " + std::to_string(v) +
                                " outside [-1, 1]");
      }
      v = std::clamp(v, -1.0, 1.0);
      out(i, j) = (2.0 / kPi) * std::asin(halved ? v / 2.0 : v);
    }
  }
  return out;
}

namespace detail {

inline void check_unit_diagonal_range(const Eigen::MatrixXd& sigma) {
  for (int i = 0; i < sigma.rows(); ++i) {
    for (int j = 0; j < sigma.cols(); ++j) {
      if (sigma(i, j) < -1.0 - 1e-12 || sigma(i, j) > 1.0 + 1e-12) {
        throw std::runtime_error("correlation entry out of [-1, 1]");
      }
    }
  }
}

inline void check_psd(const Eigen::MatrixXd& sigma) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma,
                                                    Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin < -1e-10) {
    throw std::runtime_error(
        "correlation matrix is not PSD; smallest eigenvalue " +
        std::to_string(lmin));
  }
}

}  // namespace detail

// Population correlation matrix for the given model.  Deterministic;
// Factor loadings come only from the embedded seed.
inline Eigen::MatrixXd build_sigma(const CorrelationModel& model) {
  const int p = model.p;
  if (p < 1) throw std::domain_error("build_sigma: p must be >= 1");
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(p, p);

  switch (model.kind) {
    case ModelKind::Identity:
      break;
    case ModelKind::CompoundSymmetry: {
      if (std::abs(model.rho) >= 1.0) {
        throw std::domain_error(
            "compound symmetry requires rho in (-1, 1), got " +
            std::to_string(model.rho));
      }
      sigma.setConstant(model.rho);
      sigma.diagonal().setOnes();
      detail::check_psd(sigma);
      break;
    }
    case ModelKind::MA1: {
      // Positive-definiteness at finite p: lambda_k = 1 + 2 rho cos(k pi/(p+1)).
      const double lmin =
          1.0 - 2.0 * std::abs(model.rho) * std::cos(kPi / (p + 1));
      if (std::abs(model.rho) > 0.5 || lmin <= 0.0) {
        throw std::domain_error("ma1 requires |rho| <= 1/2, got " +
                                std::to_string(model.rho));
      }
      for (int i = 0; i + 1 < p; ++i) {
        sigma(i, i + 1) = model.rho;
        sigma(i + 1, i) = model.rho;
      }
      break;
    }
    case ModelKind::BandToeplitz2: {
      // Symbol positivity 1 + 2 rho (cos t + cos 2t) > 0, checked on a grid.
      for (int k = 0; k < 720; ++k) {
        const double t = kPi * k / 360.0;
        if (1.0 + 2.0 * model.rho * (std::cos(t) + std::cos(2 * t)) <= 0.0) {
          throw std::domain_error(
              "band_toeplitz2 symbol not positive at rho = " +
              std::to_string(model.rho));
        }
      }
      for (int i = 0; i < p; ++i) {
        if (i + 1 < p) sigma(i, i + 1) = sigma(i + 1, i) = model.rho;
        if (i + 2 < p) sigma(i, i + 2) = sigma(i + 2, i) = model.rho;
      }
      detail::check_psd(sigma);
      break;
    }
    case ModelKind::GeneralToeplitz: {
      for (double r : model.rho_seq) {
        if (std::abs(r) > 1.0) {
          throw std::domain_error("toeplitz lag correlation outside [-1, 1]");
        }
      }
      for (std::size_t k = 0; k < model.rho_seq.size(); ++k) {
        const int lag = static_cast<int>(k) + 1;
        for (int i = 0; i + lag < p; ++i) {
          sigma(i, i + lag) = sigma(i + lag, i) = model.rho_seq[k];
        }
      }
      detail::check_psd(sigma);
      break;
    }
    case ModelKind::Factor: {
      if (model.factor_rank < 1) {
        throw std::domain_error("factor rank must be positive");
      }
      Rng rng(model.loadings_seed);
      Eigen::MatrixXd z(model.factor_rank, p);
      for (int i = 0; i < model.factor_rank; ++i) {
        for (int j = 0; j < p; ++j) z(i, j) = rng.next_normal();
      }
      const double scale = model.factor_scale == FactorScale::OverP
                               ? 1.0 / p
                               : 1.0 / std::sqrt(static_cast<double>(p));
      Eigen::MatrixXd sigma0 =
          Eigen::MatrixXd::Identity(p, p) + scale * z.transpose() * z;
      Eigen::VectorXd d = sigma0.diagonal().array().rsqrt();
      sigma = d.asDiagonal() * sigma0 * d.asDiagonal();
      // Symmetrize away the round-off from the two diagonal scalings.
      sigma = ((sigma + sigma.transpose()) / 2.0).eval();
      detail::check_psd(sigma);
      break;
    }
  }

  detail::check_unit_diagonal_range(sigma);
  return sigma;
}

// Gaussian-ensemble matrices: Sigma1 = (2/pi) asin(Sigma),
// Sigma2 = (2/pi) asin(Sigma/2), Sigma3 = Sigma1 - 2 Sigma2.
struct SigmaTriple {
  Eigen::MatrixXd sigma1;
  Eigen::MatrixXd sigma2;
  Eigen::MatrixXd sigma3;

  int p() const { return static_cast<int>(sigma1.rows()); }
};

inline SigmaTriple sigma_triple(const Eigen::MatrixXd& sigma) {
  SigmaTriple t;
  t.sigma1 = arcsin_map(sigma, false);
  t.sigma2 = arcsin_map(sigma, true);
  t.sigma3 = t.sigma1 - 2.0 * t.sigma2;
  return t;
}

inline SigmaTriple sigma_triple(const CorrelationModel& model) {
  return sigma_triple(build_sigma(model));
}

// Real even trigonometric polynomial a0 + 2 sum_k c_k cos(k theta).
struct ToeplitzSymbol {
  double a0 = 0.0;
  std::vector<double> coeffs;

  double operator()(double theta) const {
    double v = a0;
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
      v += 2.0 * coeffs[k] * std::cos((k + 1) * theta);
    }
    return v;
  }
};

// Same shape with a complex constant and complex cosine coefficients.
struct ComplexSymbol {
  std::complex<double> a0;
  std::vector<std::complex<double>> coeffs;

  std::complex<double> operator()(double theta) const {
    std::complex<double> v = a0;
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
      v += 2.0 * coeffs[k] * std::cos((k + 1) * theta);
    }
    return v;
  }
};

// Fourier symbols of Sigma3 + 2x Sigma2 - zI (f1) and Sigma2 (f2) for a
// Toeplitz-family model with lag correlations rho_k:
//   f1(t) = 1/3 + 2x/3 - z
//           + 2 sum_k [(2/pi) asin(rho_k) + (4(x-1)/pi) asin(rho_k/2)] cos(kt)
//   f2(t) = 1/3 + (4/pi) sum_k asin(rho_k/2) cos(kt)
struct SymbolPair {
  ComplexSymbol f1;
  ToeplitzSymbol f2;
};

inline SymbolPair toeplitz_symbols(const std::vector<double>& lags,
                                   std::complex<double> x,
                                   std::complex<double> z) {
  SymbolPair s;
  s.f1.a0 = 1.0 / 3.0 + 2.0 * x / 3.0 - z;
  s.f2.a0 = 1.0 / 3.0;
  for (double r : lags) {
    const double a = std::asin(r);
    const double ah = std::asin(r / 2.0);
    s.f1.coeffs.push_back((2.0 / kPi) * a + (4.0 / kPi) * (x - 1.0) * ah);
    s.f2.coeffs.push_back((2.0 / kPi) * ah);
  }
  return s;
}

inline SymbolPair toeplitz_symbols(const CorrelationModel& model,
                                   std::complex<double> x,
                                   std::complex<double> z) {
  return toeplitz_symbols(model.toeplitz_lags(), x, z);
}

// Closed-form spectrum of the symmetric tridiagonal Toeplitz matrix with
// constant diagonal `diag` and off-diagonal `offdiag`.
struct Ma1Eigen {
  Eigen::VectorXd values;  // k = 1..p, unsorted (cosine order)
  int p = 0;

  // Component j (0-based) of eigenvector k (0-based).
  double vector_component(int k, int j) const {
    return std::sqrt(2.0 / (p + 1)) *
           std::sin((j + 1.0) * (k + 1.0) * kPi / (p + 1));
  }

  Eigen::MatrixXd basis() const {
    Eigen::MatrixXd u(p, p);
    for (int k = 0; k < p; ++k) {
      for (int j = 0; j < p; ++j) u(j, k) = vector_component(k, j);
    }
    return u;
  }
};

inline Ma1Eigen ma1_eigen(int p, double diag, double offdiag) {
  if (p < 1) throw std::domain_error("ma1_eigen: p must be >= 1");
  Ma1Eigen e;
  e.p = p;
  e.values.resize(p);
  for (int k = 1; k <= p; ++k) {
    e.values(k - 1) = diag + 2.0 * offdiag * std::cos(k * kPi / (p + 1));
  }
  return e;
}

}  // namespace klsd
