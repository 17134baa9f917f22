#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path& scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::path(testing::TempDir()) / "cdw_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(CDW_CLI_PATH) + " " + args + " > " + (scratch() / "stdout.txt").string() +
                          " 2> " + (scratch() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::string> provenance;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (header[k] == name) return k;
    }
    throw std::runtime_error("no column " + name);
  }
  double num(std::size_t row, const std::string& name) const { return std::stod(rows[row][col(name)]); }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

Csv read_csv(const fs::path& p) {
  Csv c;
  std::ifstream f(p);
  std::string line;
  while (std::getline(f, line)) {
    if (line.rfind("# ", 0) == 0) {
      c.provenance.push_back(line);
    } else if (c.header.empty()) {
      c.header = split(line);
    } else {
      c.rows.push_back(split(line));
    }
  }
  return c;
}

fs::path out(const std::string& name) { return scratch() / name; }

}  // namespace

TEST(Cli, CurvesTables) {
  ASSERT_EQ(run("curves --u-grid 0,1,1000 --s-points 10 --out " + out("curves").string()), 0);
  const auto phi = read_csv(out("curves") / "curve_phi.csv");
  EXPECT_EQ(phi.header, (std::vector<std::string>{"u", "phi", "u2_phi"}));
  ASSERT_EQ(phi.rows.size(), 3u);
  EXPECT_DOUBLE_EQ(phi.num(0, "phi"), 1.0 / 12.0);
  EXPECT_NEAR(phi.num(1, "phi"), 3.0 - 8.0 / std::exp(1.0), 1e-15);
  EXPECT_NEAR(phi.num(2, "u2_phi"), 1.0, 5e-3);

  const auto norm = read_csv(out("curves") / "curve_normalization.csv");
  for (std::size_t r = 0; r < norm.rows.size(); ++r) {
    EXPECT_NEAR(norm.num(r, "mass"), 1.0, 1e-6);
    EXPECT_NEAR(norm.num(r, "mean"), norm.num(r, "phi"), 1e-6);
  }
  const auto k0 = read_csv(out("curves") / "curve_k0.csv");
  // K0(2) = 0.11389387274953344
  bool seen = false;
  for (std::size_t r = 0; r < k0.rows.size(); ++r) {
    if (std::abs(k0.num(r, "a") - 1.0) < 1e-12) {
      EXPECT_NEAR(k0.num(r, "K0_2sqrt_a"), 0.11389387274953344, 1e-15);
      seen = true;
    }
  }
  EXPECT_TRUE(seen);
  const auto cov = read_csv(out("curves") / "curve_covariance.csv");
  EXPECT_DOUBLE_EQ(cov.num(50, "bridge"), -1.0 / 24.0);
}

TEST(Cli, ThresholdIsDeterministicAndForceRecomputes) {
  const std::string args = "threshold --L 16,32 --n 20 --lambda 50 --seed 3 --out ";
  ASSERT_EQ(run(args + out("th_a").string()), 0);
  ASSERT_EQ(run(args + out("th_b").string() + " --workers 3"), 0);
  for (const char* f : {"threshold_summary.csv", "threshold_fields.csv"}) {
    EXPECT_EQ(slurp(out("th_a") / f), slurp(out("th_b") / f)) << f;
  }
  const auto s = read_csv(out("th_a") / "threshold_summary.csv");
  EXPECT_EQ(s.header, (std::vector<std::string>{"L", "realization", "S", "k_plus", "k_minus", "top_plus", "z_plus_max", "F_th"}));
  ASSERT_EQ(s.rows.size(), 40u);
  const double lambda = 50.0;
  const double eta = 2.0 / (2.0 + lambda + std::sqrt(lambda * lambda + 4.0 * lambda));
  for (std::size_t r = 0; r < s.rows.size(); ++r) {
    EXPECT_NEAR(s.num(r, "F_th"), lambda * (0.5 - eta * s.num(r, "z_plus_max")), 1e-12);
  }
  // z+ max is the largest z+ in the fields file
  const auto f = read_csv(out("th_a") / "threshold_fields.csv");
  ASSERT_EQ(f.rows.size(), 20u * 16u + 20u * 32u);
  double top = -1e9;
  for (std::size_t r = 0; r < 16; ++r) top = std::max(top, f.num(r, "z_plus"));
  EXPECT_DOUBLE_EQ(top, s.num(0, "z_plus_max"));
  // provenance is recorded
  EXPECT_NE(std::find(s.provenance.begin(), s.provenance.end(), "# lambda 50"), s.provenance.end());
  EXPECT_NE(std::find(s.provenance.begin(), s.provenance.end(), "# seed 3"), s.provenance.end());
}

TEST(Cli, ThresholdOracleCheck) {
  ASSERT_EQ(run("threshold --L 6 --n 30 --lambda 10 --oracle-check --out " + out("th_oracle").string()), 0);
  const auto j = nlohmann::json::parse(slurp(out("th_oracle") / "threshold_check.json"));
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["brute_force"]["checked"], 30);
  EXPECT_EQ(j["brute_force"]["mismatches"], 0);
  EXPECT_EQ(j["toy_vs_full"][0]["total"], 30);

  ASSERT_EQ(run("threshold --model full --L 6 --n 10 --lambda 10 --oracle-check --out " + out("th_full").string()), 0);
  const auto k = nlohmann::json::parse(slurp(out("th_full") / "threshold_check.json"));
  EXPECT_EQ(k["brute_force"]["mismatches"], 0);
}

TEST(Cli, T2tOutputs) {
  ASSERT_EQ(run("t2t --L 64,256 --n 100 --correspondence-check --u-grid 0,1,30,100 --out " + out("t2t").string()), 0);
  const auto ev = read_csv(out("t2t") / "t2t_events.csv");
  EXPECT_EQ(ev.header, (std::vector<std::string>{"L", "realization", "tau", "init_site", "i_L", "i_R", "size",
                                                 "sigma_cum", "X_after"}));
  // sigma_cum accumulates size within each realization
  for (std::size_t r = 1; r < ev.rows.size(); ++r) {
    if (ev.rows[r][0] != ev.rows[r - 1][0] || ev.rows[r][1] != ev.rows[r - 1][1]) continue;
    EXPECT_EQ(ev.num(r, "sigma_cum"), ev.num(r - 1, "sigma_cum") + ev.num(r, "size"));
    EXPECT_LT(ev.num(r, "X_after"), ev.num(r - 1, "X_after"));
  }
  const auto sig = read_csv(out("t2t") / "t2t_sigma.csv");
  ASSERT_EQ(sig.rows.size(), 8u);
  EXPECT_NEAR(sig.num(4, "mean"), 1.0 / 12.0, 0.015);
  const auto j = nlohmann::json::parse(slurp(out("t2t") / "t2t_summary.json"));
  EXPECT_TRUE(j["correspondence"][0]["failures"].empty());
  EXPECT_TRUE(j["correspondence"][1]["failures"].empty());
  EXPECT_GT(j["events_vs_lnL"]["slope"].get<double>(), 0.0);
}

TEST(Cli, FlatOutputs) {
  ASSERT_EQ(run("flat --L 64 --n 50 --u-grid 0,4,40 --out " + out("flat").string()), 0);
  const auto t = read_csv(out("flat") / "flat_scaling.csv");
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_DOUBLE_EQ(t.num(2, "X_sqrtL"), 40.0 / 8.0);
  EXPECT_DOUBLE_EQ(t.num(0, "P_over_L32"), t.num(0, "mean_P") / 512.0);
  const auto p = read_csv(out("flat") / "flat_P.csv");
  ASSERT_EQ(p.rows.size(), 50u);
  double mean = 0.0;
  for (std::size_t r = 0; r < p.rows.size(); ++r) mean += p.num(r, "P") / 50.0;
  EXPECT_NEAR(mean, t.num(0, "mean_P"), 1e-9 * mean);
}

TEST(Cli, WorkerCountDoesNotChangeOutput) {
  for (int w : {1, 4}) {
    const std::string dir = out("workers" + std::to_string(w)).string();
    ASSERT_EQ(run("t2t --L 128 --n 150 --workers " + std::to_string(w) + " --out " + dir), 0);
    ASSERT_EQ(run("flat --L 128 --n 60 --workers " + std::to_string(w) + " --out " + dir), 0);
  }
  for (const char* f : {"t2t_events.csv", "t2t_sigma.csv", "t2t_summary.json", "flat_scaling.csv", "flat_P.csv"}) {
    EXPECT_EQ(slurp(out("workers1") / f), slurp(out("workers4") / f)) << f;
  }
}

TEST(Cli, TestSuitePassesAndReportsEveryCheck) {
  ASSERT_EQ(run("test --out " + out("suite").string()), 0);
  const auto j = nlohmann::json::parse(slurp(out("suite") / "test_report.json"));
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_TRUE(j["all_passed"].get<bool>());
  ASSERT_GE(j["tests"].size(), 20u);
  for (const auto& t : j["tests"]) {
    EXPECT_TRUE(t.contains("statistic"));
    EXPECT_TRUE(t.contains("threshold"));
    EXPECT_TRUE(t["pass"].get<bool>()) << t["name"];
  }
}

TEST(Cli, CorruptedUpdateFailsTheSuite) {
  ASSERT_EQ(run("test --inject-fault sum --out " + out("suite_bad").string()), 1);
  const auto j = nlohmann::json::parse(slurp(out("suite_bad") / "test_report.json"));
  EXPECT_FALSE(j["all_passed"].get<bool>());
  for (const auto& t : j["tests"]) {
    if (t["name"] == "sum_conservation") {
      EXPECT_FALSE(t["pass"].get<bool>());
    }
    // the corrupted update still moves z by integers
    if (t["name"] == "fractional_part_conservation") {
      EXPECT_TRUE(t["pass"].get<bool>());
    }
  }
}

TEST(Cli, ConfigFileAndOverrides) {
  const auto cfg = out("run.cfg");
  std::ofstream(cfg) << "# campaign\nL = 12\nn = 4\nseed = 9\n";
  ASSERT_EQ(run("threshold --config " + cfg.string() + " --n 6 --out " + out("cfg").string()), 0);
  const auto s = read_csv(out("cfg") / "threshold_summary.csv");
  EXPECT_EQ(s.rows.size(), 6u);
  EXPECT_EQ(s.rows[0][0], "12");
  EXPECT_NE(std::find(s.provenance.begin(), s.provenance.end(), "# seed 9"), s.provenance.end());
}

TEST(Cli, ConfigErrorsExitWithTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("threshold --L 2 --out " + out("err").string()), 2);
  EXPECT_EQ(run("threshold --L abc --out " + out("err").string()), 2);
  EXPECT_EQ(run("t2t --u-grid 1,0.5 --out " + out("err").string()), 2);
  EXPECT_EQ(run("t2t --u-grid -1,2 --out " + out("err").string()), 2);
  EXPECT_EQ(run("threshold --lambda -3 --out " + out("err").string()), 2);
  EXPECT_EQ(run("threshold --model big --out " + out("err").string()), 2);
  EXPECT_EQ(run("flat --model full --out " + out("err").string()), 2);
  const auto cfg = out("bad.cfg");
  std::ofstream(cfg) << "no_such_key = 1\n";
  EXPECT_EQ(run("threshold --config " + cfg.string() + " --out " + out("err").string()), 2);
  EXPECT_EQ(run("--help"), 0);
}
