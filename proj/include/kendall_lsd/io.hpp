#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kendall_lsd/models.hpp"
#include "kendall_lsd/oracles.hpp"
#include "kendall_lsd/spectra.hpp"
#include "kendall_lsd/stieltjes.hpp"

namespace klsd {

using Json = nlohmann::json;

namespace detail {

inline std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  return f;
}

inline std::ifstream open_in(const std::string& path, bool binary = false) {
  std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
  if (!f) throw std::runtime_error("cannot open " + path + " for reading");
  return f;
}

}  // namespace detail

// ---- dense matrix: CSV (17 significant digits) and KSPC binary ----

inline void write_matrix_csv(const std::string& path,
                             const Eigen::MatrixXd& m) {
  auto f = detail::open_out(path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) f << ',';
      f << detail::fmt17(m(i, j));
    }
    f << '\n';
  }
}

inline constexpr std::uint32_t kMatrixFormatVersion = 1;

// Magic "KSPC", version u32, p u32, then p*p row-major f64, little-endian.
inline void write_matrix_binary(const std::string& path,
                                const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("binary matrix format stores square matrices");
  }
  auto f = detail::open_out(path, true);
  f.write("KSPC", 4);
  const std::uint32_t version = kMatrixFormatVersion;
  const std::uint32_t p = static_cast<std::uint32_t>(m.rows());
  f.write(reinterpret_cast<const char*>(&version), 4);
  f.write(reinterpret_cast<const char*>(&p), 4);
  // Eigen defaults to column-major storage; emit rows explicitly.
  std::vector<double> row(p);
  for (std::uint32_t i = 0; i < p; ++i) {
    for (std::uint32_t j = 0; j < p; ++j) row[j] = m(i, j);
    f.write(reinterpret_cast<const char*>(row.data()), 8 * p);
  }
}

inline Eigen::MatrixXd read_matrix_binary(const std::string& path) {
  auto f = detail::open_in(path, true);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "KSPC", 4) != 0) {
    throw std::runtime_error(path + ": bad magic bytes");
  }
  std::uint32_t version = 0, p = 0;
  f.read(reinterpret_cast<char*>(&version), 4);
  f.read(reinterpret_cast<char*>(&p), 4);
  if (!f || version != kMatrixFormatVersion) {
    throw std::runtime_error(path + ": unsupported format version");
  }
  Eigen::MatrixXd m(p, p);
  std::vector<double> row(p);
  for (std::uint32_t i = 0; i < p; ++i) {
    f.read(reinterpret_cast<char*>(row.data()), 8 * p);
    if (!f) throw std::runtime_error(path + ": truncated payload");
    for (std::uint32_t j = 0; j < p; ++j) m(i, j) = row[j];
  }
  return m;
}

// ---- model <-> JSON ----

inline Json model_to_json(const CorrelationModel& model) {
  Json j;
  j["kind"] = to_string(model.kind);
  j["p"] = model.p;
  switch (model.kind) {
    case ModelKind::Identity:
      break;
    case ModelKind::CompoundSymmetry:
    case ModelKind::MA1:
    case ModelKind::BandToeplitz2:
      j["rho"] = model.rho;
      break;
    case ModelKind::GeneralToeplitz:
      j["rho_seq"] = model.rho_seq;
      break;
    case ModelKind::Factor:
      j["rank"] = model.factor_rank;
      j["scale"] = model.factor_scale == FactorScale::OverP ? "p" : "sqrt_p";
      j["loadings_seed"] = model.loadings_seed;
      break;
  }
  return j;
}

inline CorrelationModel model_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const int p = j.at("p").get<int>();
  if (kind == "identity") return CorrelationModel::identity(p);
  if (kind == "compound_symmetry") {
    return CorrelationModel::compound_symmetry(p, j.at("rho").get<double>());
  }
  if (kind == "ma1") return CorrelationModel::ma1(p, j.at("rho").get<double>());
  if (kind == "band_toeplitz2") {
    return CorrelationModel::band_toeplitz2(p, j.at("rho").get<double>());
  }
  if (kind == "general_toeplitz") {
    return CorrelationModel::general_toeplitz(
        p, j.at("rho_seq").get<std::vector<double>>());
  }
  if (kind == "factor") {
    const FactorScale scale = j.at("scale").get<std::string>() == "p"
                                  ? FactorScale::OverP
                                  : FactorScale::OverSqrtP;
    return CorrelationModel::factor(p, j.at("rank").get<int>(), scale,
                                    j.at("loadings_seed").get<std::uint64_t>());
  }
  throw std::invalid_argument("unknown model kind: " + kind);
}

// ---- spectra / curves ----

inline void write_histogram_csv(const std::string& path, const Histogram& h) {
  auto f = detail::open_out(path);
  f << "bin_left,bin_right,density\n";
  for (std::size_t b = 0; b + 1 < h.edges.size(); ++b) {
    f << detail::fmt17(h.edges[b]) << ',' << detail::fmt17(h.edges[b + 1])
      << ',' << detail::fmt17(h.densities[b]) << '\n';
  }
}

inline void write_curve_csv(const std::string& path, const DensityCurve& c) {
  auto f = detail::open_out(path);
  f << "x,density\n";
  for (std::size_t i = 0; i < c.grid.size(); ++i) {
    f << detail::fmt17(c.grid[i]) << ',' << detail::fmt17(c.density[i]) << '\n';
  }
}

inline void write_atoms_csv(const std::string& path,
                            const std::vector<std::pair<double, double>>& atoms) {
  auto f = detail::open_out(path);
  f << "location,mass\n";
  for (const auto& [loc, mass] : atoms) {
    f << detail::fmt17(loc) << ',' << detail::fmt17(mass) << '\n';
  }
}

inline void write_eigenvalues_csv(const std::string& path,
                                  const EmpiricalSpectrum& spec) {
  auto f = detail::open_out(path);
  f << "eigenvalue\n";
  for (Eigen::Index i = 0; i < spec.eigenvalues.size(); ++i) {
    f << detail::fmt17(spec.eigenvalues(i)) << '\n';
  }
}

inline void write_sample_csv(const std::string& path, const Eigen::MatrixXd& x) {
  auto f = detail::open_out(path);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (j) f << ',';
    f << "v" << j;
  }
  f << '\n';
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (j) f << ',';
      f << detail::fmt17(x(i, j));
    }
    f << '\n';
  }
}

// ---- solver diagnostics / verdicts ----

inline Json sweep_diagnostics_json(const DensitySweep& sweep) {
  Json points = Json::array();
  for (const auto& pt : sweep.points) {
    points.push_back({{"E", pt.energy},
                      {"iterations", pt.iterations},
                      {"residual", pt.residual},
                      {"im_x", pt.im_x},
                      {"im_s", pt.im_s}});
  }
  return {{"points", points}};
}

inline Json verdict_to_json(const VerdictRecord& v) {
  return {{"name", v.name},     {"params", v.params}, {"estimate", v.estimate},
          {"se", v.se},         {"theory", v.theory}, {"threshold", v.threshold},
          {"pass", v.pass}};
}

inline Json verdicts_to_json(const std::vector<VerdictRecord>& records) {
  Json arr = Json::array();
  for (const auto& v : records) arr.push_back(verdict_to_json(v));
  return arr;
}

inline void write_json(const std::string& path, const Json& j) {
  auto f = detail::open_out(path);
  f << j.dump(2) << '\n';
}

inline Json read_json(const std::string& path) {
  auto f = detail::open_in(path);
  return Json::parse(f);
}

}  // namespace klsd
