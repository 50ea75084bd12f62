#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "kendall_lsd/experiments.hpp"
#include "kendall_lsd/io.hpp"

using namespace klsd;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("klsd_test_" + std::to_string(std::rand()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("matrix binary round trip") {
  TempDir tmp;
  Eigen::MatrixXd m(3, 3);
  m << 1, 0.5, -0.25, 0.5, 1, 1e-17, -0.25, 1e-17, 1;
  const std::string path = tmp.file("m.kspc");
  write_matrix_binary(path, m);
  const Eigen::MatrixXd back = read_matrix_binary(path);
  REQUIRE((m - back).cwiseAbs().maxCoeff() == 0.0);

  // header: magic + version + dimension
  std::ifstream f(path, std::ios::binary);
  char magic[4];
  f.read(magic, 4);
  REQUIRE(std::string(magic, 4) == "KSPC");
}

TEST_CASE("matrix binary rejects corrupted headers") {
  TempDir tmp;
  const std::string path = tmp.file("bad.kspc");
  {
    std::ofstream f(path, std::ios::binary);
    f << "NOPE";
  }
  REQUIRE_THROWS_WITH(read_matrix_binary(path),
                      Catch::Matchers::ContainsSubstring("magic"));
}

TEST_CASE("matrix csv uses 17 significant digits") {
  TempDir tmp;
  Eigen::MatrixXd m(1, 1);
  m << 1.0 / 3.0;
  const std::string path = tmp.file("m.csv");
  write_matrix_csv(path, m);
  REQUIRE(slurp(path) == "0.33333333333333331\n");
}

TEST_CASE("model json round trip") {
  const std::vector<CorrelationModel> models = {
      CorrelationModel::identity(7),
      CorrelationModel::compound_symmetry(5, 0.3),
      CorrelationModel::ma1(9, -0.2),
      CorrelationModel::band_toeplitz2(11, 0.25),
      CorrelationModel::general_toeplitz(13, {0.3, 0.1}),
      CorrelationModel::factor(15, 4, FactorScale::OverSqrtP, 77),
  };
  for (const auto& m : models) {
    const CorrelationModel back = model_from_json(model_to_json(m));
    REQUIRE(back.kind == m.kind);
    REQUIRE(back.p == m.p);
    REQUIRE((build_sigma(back) - build_sigma(m)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("curve and histogram csv headers") {
  TempDir tmp;
  DensityCurve c;
  c.grid = {0.0, 1.0};
  c.density = {0.5, 0.5};
  write_curve_csv(tmp.file("c.csv"), c);
  REQUIRE(slurp(tmp.file("c.csv")).rfind("x,density\n", 0) == 0);

  Histogram h;
  h.edges = {0.0, 0.5, 1.0};
  h.densities = {1.0, 1.0};
  write_histogram_csv(tmp.file("h.csv"), h);
  REQUIRE(slurp(tmp.file("h.csv")).rfind("bin_left,bin_right,density\n", 0) ==
          0);

  write_atoms_csv(tmp.file("a.csv"), {{1.0 / 3.0, 0.5}});
  const std::string atoms = slurp(tmp.file("a.csv"));
  REQUIRE(atoms.rfind("location,mass\n", 0) == 0);
  REQUIRE(atoms.find("0.5") != std::string::npos);
}

TEST_CASE("verdict json schema") {
  const Json j = verdict_to_json(
      {"grothendieck_mc", "rho=0.5", 0.3331, 0.0005, 1.0 / 3.0, 3.0, true});
  for (const char* key :
       {"name", "params", "estimate", "se", "theory", "threshold", "pass"}) {
    REQUIRE(j.contains(key));
  }
  REQUIRE(j["pass"].get<bool>());
}

TEST_CASE("lsd run emits a manifest and normalized curve") {
  TempDir tmp;
  RunOptions opts;
  opts.out_dir = tmp.file("lsd");
  opts.seed = 3;
  opts.eta = 1e-3;
  Json cfg;
  cfg["model"] = model_to_json(CorrelationModel::ma1(50, 0.5));
  cfg["c"] = 0.5;
  cfg["grid_points"] = 400;
  const Json manifest = run_lsd(opts, cfg);
  REQUIRE(manifest["mode"] == "ma1");
  REQUIRE(std::abs(manifest["curve_mass"].get<double>() - 1.0) < 1e-2);
  REQUIRE(std::filesystem::exists(opts.out_dir + "/curve.csv"));
  REQUIRE(std::filesystem::exists(opts.out_dir + "/diagnostics.json"));
  const Json diag = read_json(opts.out_dir + "/diagnostics.json");
  REQUIRE(diag["points"].size() > 0);
  for (const char* key : {"E", "iterations", "residual", "im_x", "im_s"}) {
    REQUIRE(diag["points"][0].contains(key));
  }
}

TEST_CASE("identical configs produce byte-identical outputs") {
  TempDir tmp;
  RunOptions opts;
  opts.seed = 5;
  Json cfg;
  cfg["model"] = model_to_json(CorrelationModel::identity(30));
  cfg["c"] = 0.5;
  cfg["grid_points"] = 200;

  opts.out_dir = tmp.file("a");
  run_lsd(opts, cfg);
  opts.out_dir = tmp.file("b");
  run_lsd(opts, cfg);
  REQUIRE(slurp(tmp.file("a") + "/curve.csv") ==
          slurp(tmp.file("b") + "/curve.csv"));
  REQUIRE(slurp(tmp.file("a") + "/manifest.json") ==
          slurp(tmp.file("b") + "/manifest.json"));
}
