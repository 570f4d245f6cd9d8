#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "wqlab/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("wqlab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write_config(const json& j, const std::string& name = "config.json") {
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p.string();
  }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return wqlab::run(args, out_, err_);
  }

  std::string slurp(const std::string& rel) const {
    std::ifstream f(dir_ / rel, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

json two_point_config() {
  return json::parse(R"({
    "master_seed": 17,
    "measures": {"tp": {"type": "two_point", "a": [0, 0, 0], "b": [1, 0, 0], "w": 0.5}},
    "experiments": [
      {"id": "tp", "measure": "tp", "p": 1, "norm": "linf", "n_values": [16, 32, 64, 128, 256, 512, 1024],
       "replications": 400, "bootstrap": 200, "solver": {"kind": "exact"}},
      {"id": "cube", "measure": {"type": "uniform_box", "lower": [0, 0, 0], "upper": [1, 1, 1]}, "p": 1,
       "n_values": [8, 16], "replications": 3, "bootstrap": 50, "solver": {"kind": "semidiscrete", "grid_level": 3}}
    ]})");
}

}  // namespace

TEST_F(Cli, ExactPrintsDistance) {
  const json cfg = {{"master_seed", 1},
                    {"exact", {{{"id", "pair"},
                                {"mu", {{"points", {{0, 0, 0}}}, {"weights", {1}}}},
                                {"nu", {{"points", {{3, 4, 0}}}, {"weights", {1}}}},
                                {"p", 2},
                                {"norm", "l2"}}}}};
  ASSERT_EQ(run({"exact", "--config", write_config(cfg), "--out", dir_.string()}), 0) << err_.str();
  EXPECT_EQ(out_.str(), "pair: rho = 5\n");
  EXPECT_EQ(slurp("pair.exact.csv"), "source_index,target_index,mass\n0,0,1\n");
  const json manifest = json::parse(slurp("exact.manifest.json"));
  EXPECT_EQ(manifest.at("master_seed"), 1);
  EXPECT_EQ(manifest.at("outputs"), json::array({"pair.exact.csv"}));
  EXPECT_EQ(manifest.at("config_hash").get<std::string>().rfind("fnv1a64:", 0), 0U);
}

TEST_F(Cli, ConfigErrorsExitTwo) {
  json cfg = two_point_config();
  cfg.erase("master_seed");
  EXPECT_EQ(run({"simulate", "--config", write_config(cfg), "--out", dir_.string()}), 2);
  EXPECT_NE(err_.str().find("master_seed"), std::string::npos);

  std::ofstream(dir_ / "bad.json") << "{\n  \"master_seed\": 1,\n  oops\n}";
  EXPECT_EQ(run({"simulate", "--config", (dir_ / "bad.json").string()}), 2);
  EXPECT_NE(err_.str().find("line 3"), std::string::npos) << err_.str();

  EXPECT_EQ(run({"frobnicate", "--config", write_config(two_point_config())}), 2);
  EXPECT_EQ(run({"simulate"}), 2);

  cfg = two_point_config();
  cfg["experiments"][0]["n_values"] = json::array({16, -1});
  EXPECT_EQ(run({"simulate", "--config", write_config(cfg), "--out", dir_.string()}), 2);
  EXPECT_NE(err_.str().find("experiments[0].n_values[1]"), std::string::npos) << err_.str();

  cfg = two_point_config();
  cfg["experiments"][0]["measure"] = "missing";
  EXPECT_EQ(run({"simulate", "--config", write_config(cfg), "--out", dir_.string()}), 2);

  EXPECT_EQ(run({"simulate", "--config", write_config(two_point_config()), "--experiment", "nope"}), 2);
}

TEST_F(Cli, CapacityExitsThree) {
  json cfg = two_point_config();
  cfg["experiments"][1]["solver"]["edge_cap"] = 100;
  EXPECT_EQ(run({"simulate", "--config", write_config(cfg), "--out", dir_.string(), "--experiment", "cube"}), 3);
  EXPECT_NE(err_.str().find("N=8"), std::string::npos) << err_.str();
}

TEST_F(Cli, RateOnTwoPointSuite) {
  ASSERT_EQ(run({"rate", "--config", write_config(two_point_config()), "--out", dir_.string(), "--experiment", "tp"}),
            0)
      << err_.str();
  std::istringstream csv(slurp("tp.rate.csv"));
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  EXPECT_EQ(header, "measure_id,p,norm,n_points,slope,intercept,stderr_slope");
  const double slope = std::stod(row.substr(row.find(",7,") + 3));
  EXPECT_NEAR(slope, -0.5, 0.05);
}

TEST_F(Cli, SimulateIsReproducible) {
  const std::string cfg = write_config(two_point_config());
  const fs::path a = dir_ / "a", b = dir_ / "b", c = dir_ / "c";
  ASSERT_EQ(run({"simulate", "--config", cfg, "--out", a.string(), "--workers", "1", "--experiment", "cube"}), 0);
  ASSERT_EQ(run({"simulate", "--config", cfg, "--out", b.string(), "--workers", "4", "--experiment", "cube"}), 0);
  ASSERT_EQ(run({"--config", (a / "simulate.manifest.json").string(), "--out", c.string(), "--workers", "2"}), 0)
      << err_.str();
  for (const char* f : {"cube.simulate.csv", "cube.summary.csv", "simulate.manifest.json"}) {
    EXPECT_EQ(slurp(std::string("a/") + f), slurp(std::string("b/") + f)) << f;
    EXPECT_EQ(slurp(std::string("a/") + f), slurp(std::string("c/") + f)) << f;
  }
  EXPECT_FALSE(fs::exists(a / "tp.simulate.csv"));
  const std::string summary = slurp("a/cube.summary.csv");
  EXPECT_EQ(summary.substr(0, summary.find('\n')), "measure_id,p,norm,N,V_hat,ci_lo,ci_hi,rescaled");
}

TEST_F(Cli, SeedOverrideChangesResults) {
  const std::string cfg = write_config(two_point_config());
  ASSERT_EQ(run({"simulate", "--config", cfg, "--out", (dir_ / "a").string(), "--experiment", "cube"}), 0);
  ASSERT_EQ(run({"simulate", "--config", cfg, "--out", (dir_ / "b").string(), "--experiment", "cube", "--seed", "18"}),
            0);
  EXPECT_NE(slurp("a/cube.simulate.csv"), slurp("b/cube.simulate.csv"));
  EXPECT_EQ(json::parse(slurp("b/simulate.manifest.json")).at("config").at("master_seed"), 18);
}

TEST_F(Cli, CubeCheckAndDyadic) {
  json cfg = two_point_config();
  cfg["dyadic"] = json::parse(R"([{"id": "d0", "measure": {"type": "uniform_box", "lower": [0,0,0], "upper": [1,1,1]},
                                   "nu": {"points": [[0,0,0]], "weights": [1]}, "p": 1, "levels": 20}])");
  const std::string path = write_config(cfg);
  ASSERT_EQ(run({"cube-check", "--config", path, "--out", dir_.string(), "--experiment", "cube"}), 0) << err_.str();
  EXPECT_NE(slurp("cube.cube-check.csv").find("SATISFIED"), std::string::npos);
  EXPECT_EQ(slurp("cube.cube-check.csv").find("UNSATISFIED"), std::string::npos);
  ASSERT_EQ(run({"dyadic", "--config", path, "--out", dir_.string()}), 0) << err_.str();
  EXPECT_NEAR(json::parse(out_.str()).at("upper_bound").get<double>(), 1.75, 1e-5);
}
