#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "kendall_lsd/models.hpp"
#include "kendall_lsd/rng.hpp"

namespace klsd {

// n x p Gaussian sample with its provenance.  Rows are observations.
struct SampleMatrix {
  Eigen::MatrixXd data;
  CorrelationModel model;
  std::uint64_t seed = 0;
  bool sqrt_fallback = false;  // eigenvalue square root was used

  int n() const { return static_cast<int>(data.rows()); }
  int p() const { return static_cast<int>(data.cols()); }
};

// i.i.d. rows from N(0, Sigma).  Cholesky factor when Sigma is PD,
// eigenvalue square root with negative eigenvalues clamped to 0 otherwise.
inline SampleMatrix sample_mvn(const CorrelationModel& model, int n,
                               std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("sample_mvn: n must be >= 2");
  const Eigen::MatrixXd sigma = build_sigma(model);
  const int p = model.p;

  Eigen::MatrixXd factor;  // x_row = z_row * factor^T
  bool fallback = false;
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() == Eigen::Success) {
    factor = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    factor = es.eigenvectors() * lam.asDiagonal();
    fallback = true;
  }

  Rng rng(seed);
  Eigen::MatrixXd z(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) z(i, j) = rng.next_normal();
  }

  SampleMatrix s;
  s.data = z * factor.transpose();
  s.model = model;
  s.seed = seed;
  s.sqrt_fallback = fallback;
  return s;
}

enum class MonotoneTransform { Cube, Exp, ProbitRank };

// Strictly increasing componentwise map; exists to exercise the rank
// invariance of the Kendall matrix.
inline SampleMatrix monotone_transform(const SampleMatrix& x,
                                       MonotoneTransform t) {
  SampleMatrix out = x;
  switch (t) {
    case MonotoneTransform::Cube:
      out.data = x.data.array().cube();
      break;
    case MonotoneTransform::Exp:
      out.data = x.data.array().exp();
      break;
    case MonotoneTransform::ProbitRank:
      out.data = 2.0 * x.data.array() + 1.0;
      break;
  }
  return out;
}

}  // namespace klsd
