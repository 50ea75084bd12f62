#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "kendall_lsd/models.hpp"
#include "kendall_lsd/sampling.hpp"

namespace klsd {

// p x p Kendall rank correlation matrix.  Entries are tau-a with the
// sign(0) = 0 convention for ties, so the matrix stays symmetric and
// well-defined even on degenerate inputs.
struct KendallMatrix {
  Eigen::MatrixXd matrix;
  int n = 0;
};

namespace detail {

// Both Kendall paths accumulate the integer numerator
// sum_{i<j} sign(x_ik - x_jk) sign(x_il - x_jl) and share this scaling,
// so fast and naive agree bit-exactly.
inline double kendall_scale(long long num, int n) {
  return static_cast<double>(num) * 2.0 /
         (static_cast<double>(n) * static_cast<double>(n - 1));
}

inline long long pairs2(long long t) { return t * (t - 1) / 2; }

// Inversion count (strict) by bottom-up merge sort; `v` ends sorted.
inline long long count_inversions(std::vector<double>& v,
                                  std::vector<double>& buf) {
  const std::size_t n = v.size();
  buf.resize(n);
  long long inv = 0;
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo + width < n; lo += 2 * width) {
      const std::size_t mid = lo + width;
      const std::size_t hi = std::min(lo + 2 * width, n);
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (v[j] < v[i]) {
          inv += static_cast<long long>(mid - i);
          buf[k++] = v[j++];
        } else {
          buf[k++] = v[i++];
        }
      }
      while (i < mid) buf[k++] = v[i++];
      while (j < hi) buf[k++] = v[j++];
      std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
    }
  }
  return inv;
}

// Tied-pair count sum_g t_g (t_g - 1) / 2 over equal-value groups.
inline long long tie_pairs(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  long long t = 0;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    t += pairs2(static_cast<long long>(j - i));
    i = j;
  }
  return t;
}

}  // namespace detail

// Literal pair accumulation of Eq. K_n = 2/(n(n-1)) sum A_ij A_ij^T;
// O(n^2 p^2), intended as a desk-scale oracle.
inline KendallMatrix kendall_matrix_naive(const Eigen::MatrixXd& x) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  if (n < 2) throw std::invalid_argument("kendall: n must be >= 2");

  std::vector<std::vector<long long>> num(p, std::vector<long long>(p, 0));
  std::vector<int> s(p);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (int k = 0; k < p; ++k) {
        const double d = x(i, k) - x(j, k);
        s[k] = d > 0 ? 1 : (d < 0 ? -1 : 0);
      }
      for (int k = 0; k < p; ++k) {
        if (s[k] == 0) continue;
        for (int l = k; l < p; ++l) num[k][l] += s[k] * s[l];
      }
    }
  }

  KendallMatrix out;
  out.n = n;
  out.matrix.resize(p, p);
  for (int k = 0; k < p; ++k) {
    for (int l = k; l < p; ++l) {
      const double v = detail::kendall_scale(num[k][l], n);
      out.matrix(k, l) = v;
      out.matrix(l, k) = v;
    }
  }
  return out;
}

// Knight's O(n log n)-per-pair algorithm.  For each column pair the
// numerator C - D is recovered from the inversion count of the second
// column ordered by the first, with the usual tie corrections:
//   C - D = n0 - n1 - n2 + n3 - 2 D.
inline KendallMatrix kendall_matrix_fast(const Eigen::MatrixXd& x) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  if (n < 2) throw std::invalid_argument("kendall: n must be >= 2");

  const long long n0 = detail::pairs2(n);

  // Per-column sort orders and tie-pair counts.
  std::vector<std::vector<int>> order(p, std::vector<int>(n));
  std::vector<long long> col_ties(p);
  for (int k = 0; k < p; ++k) {
    std::iota(order[k].begin(), order[k].end(), 0);
    std::sort(order[k].begin(), order[k].end(),
              [&](int a, int b) { return x(a, k) < x(b, k); });
    std::vector<double> col(n);
    for (int i = 0; i < n; ++i) col[i] = x(i, k);
    col_ties[k] = detail::tie_pairs(std::move(col));
  }

  KendallMatrix out;
  out.n = n;
  out.matrix.resize(p, p);
  std::vector<double> y(n), buf(n);
  for (int k = 0; k < p; ++k) {
    out.matrix(k, k) = detail::kendall_scale(n0 - col_ties[k], n);
    for (int l = k + 1; l < p; ++l) {
      for (int i = 0; i < n; ++i) y[i] = x(order[k][i], l);

      // Walk x-tie runs: sort each run by y, count n1 and joint ties n3.
      long long n1 = 0, n3 = 0;
      int i = 0;
      while (i < n) {
        int j = i;
        const double xv = x(order[k][i], k);
        while (j < n && x(order[k][j], k) == xv) ++j;
        if (j - i > 1) {
          std::sort(y.begin() + i, y.begin() + j);
          n1 += detail::pairs2(j - i);
          int a = i;
          while (a < j) {
            int b = a;
            while (b < j && y[b] == y[a]) ++b;
            n3 += detail::pairs2(b - a);
            a = b;
          }
        }
        i = j;
      }

      const long long inv = detail::count_inversions(y, buf);
      const long long num = n0 - n1 - col_ties[l] + n3 - 2 * inv;
      const double v = detail::kendall_scale(num, n);
      out.matrix(k, l) = v;
      out.matrix(l, k) = v;
    }
  }
  return out;
}

inline KendallMatrix kendall_matrix_fast(const SampleMatrix& x) {
  return kendall_matrix_fast(x.data);
}
inline KendallMatrix kendall_matrix_naive(const SampleMatrix& x) {
  return kendall_matrix_naive(x.data);
}

namespace detail {

inline double std_normal_cdf(double v) {
  return 0.5 * std::erfc(-v / std::numbers::sqrt2);
}

// Projection rows A_i = 2 Phi(x_i) - 1, valid for the Gaussian ensemble
// with unit-variance marginals.
inline Eigen::MatrixXd projection_rows(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      a(i, j) = 2.0 * std_normal_cdf(x(i, j)) - 1.0;
    }
  }
  return a;
}

inline Eigen::MatrixXd m1_from_rows(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  Eigen::MatrixXd centered = a.rowwise() - a.colwise().mean();
  return (2.0 / (n - 1)) * centered.transpose() * centered;
}

}  // namespace detail

// Hoeffding pieces of K_n for a Gaussian sample:
// K_n = M1 + M2 + M2^T + M3 exactly, W_n = M1 + Sigma3.
struct HoeffdingPieces {
  Eigen::MatrixXd a_rows;  // n x p, row i is A_i
  Eigen::MatrixXd m1;
  Eigen::MatrixXd m2;
  Eigen::MatrixXd m3;
  Eigen::MatrixXd w_n;
};

// O(n^2 p) pair loop; desk-scale validation only.
inline HoeffdingPieces hoeffding_pieces(const SampleMatrix& x,
                                        const SigmaTriple& triple) {
  const int n = x.n();
  const int p = x.p();
  if (triple.p() != p) {
    throw std::invalid_argument("hoeffding_pieces: dimension mismatch");
  }

  HoeffdingPieces h;
  h.a_rows = detail::projection_rows(x.data);
  h.m1 = detail::m1_from_rows(h.a_rows);

  h.m2 = Eigen::MatrixXd::Zero(p, p);
  h.m3 = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd aij(p), d(p), eps(p);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (int k = 0; k < p; ++k) {
        const double diff = x.data(i, k) - x.data(j, k);
        aij(k) = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
      }
      d = h.a_rows.row(i) - h.a_rows.row(j);
      eps = aij - d;
      h.m2.noalias() += d * eps.transpose();
      h.m3.noalias() += eps * eps.transpose();
    }
  }
  const double scale = 2.0 / (static_cast<double>(n) * (n - 1));
  h.m2 *= scale;
  h.m3 *= scale;
  h.w_n = h.m1 + triple.sigma3;
  return h;
}

// (1/p) || K_n - W_n ||_F^2 without materializing M2 / M3.
inline double frobenius_gap(const SampleMatrix& x, const SigmaTriple& triple) {
  const Eigen::MatrixXd k = kendall_matrix_fast(x).matrix;
  const Eigen::MatrixXd a = detail::projection_rows(x.data);
  const Eigen::MatrixXd w = detail::m1_from_rows(a) + triple.sigma3;
  return (k - w).squaredNorm() / x.p();
}

namespace detail {

inline std::vector<double> column_ranks(const Eigen::MatrixXd& x, int col) {
  const int n = static_cast<int>(x.rows());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](int a, int b) { return x(a, col) < x(b, col); });
  std::vector<double> r(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j < n && x(idx[j], col) == x(idx[i], col)) ++j;
    const double avg = (i + j + 1) / 2.0;  // average rank, 1-based
    for (int t = i; t < j; ++t) r[idx[t]] = avg;
    i = j;
  }
  return r;
}

inline Eigen::MatrixXd pearson_of(const Eigen::MatrixXd& data) {
  const int n = static_cast<int>(data.rows());
  const int p = static_cast<int>(data.cols());
  Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
  Eigen::VectorXd norms = centered.colwise().norm();
  for (int j = 0; j < p; ++j) {
    if (norms(j) == 0.0) {
      throw std::runtime_error("correlation undefined: column " +
                               std::to_string(j) + " is constant");
    }
  }
  Eigen::MatrixXd c = centered.transpose() * centered / (n - 1.0);
  Eigen::VectorXd inv = (norms / std::sqrt(n - 1.0)).cwiseInverse();
  return inv.asDiagonal() * c * inv.asDiagonal();
}

}  // namespace detail

inline Eigen::MatrixXd pearson_matrix(const Eigen::MatrixXd& x) {
  return detail::pearson_of(x);
}
inline Eigen::MatrixXd pearson_matrix(const SampleMatrix& x) {
  return detail::pearson_of(x.data);
}

// Pearson correlation of the columnwise rank vectors.
inline Eigen::MatrixXd spearman_matrix(const Eigen::MatrixXd& x) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  if (n < 2) throw std::invalid_argument("spearman: n must be >= 2");
  Eigen::MatrixXd r(n, p);
  for (int j = 0; j < p; ++j) {
    const std::vector<double> rj = detail::column_ranks(x, j);
    for (int i = 0; i < n; ++i) r(i, j) = rj[i];
  }
  return detail::pearson_of(r);
}
inline Eigen::MatrixXd spearman_matrix(const SampleMatrix& x) {
  return spearman_matrix(x.data);
}

}  // namespace klsd
