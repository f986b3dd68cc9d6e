#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "g2lab/config.hpp"
#include "g2lab/pipeline.hpp"
#include "g2lab/timetag_io.hpp"

using namespace g2lab;

namespace {

struct Outcome {
  int status;
  std::string out;
  std::string err;
};

std::filesystem::path work_dir() {
  auto d = std::filesystem::temp_directory_path() / "g2lab_cli";
  std::filesystem::create_directories(d);
  return d;
}

Outcome run(const std::string& args) {
  const auto err_path = work_dir() / "stderr.txt";
  const std::string cmd = std::string(G2LAB_CLI_PATH) + " " + args + " 2>" + err_path.string();
  Outcome o{};
  FILE* pipe = popen(cmd.c_str(), "r");
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) o.out += buf.data();
  const int raw = pclose(pipe);
  o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream e(err_path);
  o.err.assign(std::istreambuf_iterator<char>(e), {});
  return o;
}

void write_text(const std::filesystem::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST(Cli, UnknownFlagIsUsageError) {
  const auto o = run("correlate --bogus 1");
  EXPECT_EQ(o.status, 2);
  EXPECT_NE(o.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run("").status, 2);
}

TEST(Cli, HelpAndVersionSucceed) {
  EXPECT_EQ(run("--help").status, 0);
  const auto v = run("--version");
  EXPECT_EQ(v.status, 0);
  EXPECT_NE(v.out.find(kToolVersion), std::string::npos);
}

TEST(Cli, SelftestPasses) {
  const auto o = run("selftest");
  EXPECT_EQ(o.status, 0) << o.out;
  EXPECT_EQ(o.out.find("FAIL"), std::string::npos);
}

TEST(Cli, CorrelateAndCommutatorFromSavedTags) {
  const auto dir = work_dir();
  ExperimentConfig c;
  c.coherent.rate_hz = 2.58e7;
  c.detection.detector_r.efficiency = 0.0534;
  c.detection.detector_t.efficiency = 0.0388;
  c.correlation.max_lag = 20'000;
  c.duration = seconds_to_ticks(0.01);
  c.seed = 5;
  c.write_timetags = true;
  c.outputs = (dir / "sim").string();
  const auto r = run_experiment(c);

  const std::string r_tags = (dir / "sim" / "detector_r.ttg").string();
  const std::string t_tags = (dir / "sim" / "detector_t.ttg").string();
  const std::string cross_json = (dir / "cross.json").string();
  auto o = run("correlate --in " + r_tags + " --in " + t_tags + " --binwidth-ns 1 --max-lag-ns 20 --json " +
               cross_json + " --threads 2");
  ASSERT_EQ(o.status, 0) << o.err;

  // Single input: auto-correlation printed as CSV on stdout.
  auto merged = merge(load_ttg(r_tags), load_ttg(t_tags));
  save_ttg(dir / "merged.ttg", merged);
  o = run("correlate --in " + (dir / "merged.ttg").string() + " --binwidth-ns 1 --max-lag-ns 20");
  ASSERT_EQ(o.status, 0) << o.err;
  EXPECT_EQ(o.out.rfind("lag_ns,g2,stderr,raw_pairs\n", 0), 0u);
  o = run("correlate --in " + (dir / "merged.ttg").string() + " --binwidth-ns 1 --max-lag-ns 20 --json " +
          (dir / "auto.json").string());
  ASSERT_EQ(o.status, 0) << o.err;

  char mean_n[64];
  std::snprintf(mean_n, sizeof mean_n, "%.17g", r.commutator->mean_n.value);
  o = run("commutator --auto " + (dir / "auto.json").string() + " --cross " + cross_json + " --mean-n " + mean_n);
  ASSERT_EQ(o.status, 0) << o.err;
  char expected[64];
  std::snprintf(expected, sizeof expected, "%.6f ± ", r.commutator->value);
  EXPECT_EQ(o.out.rfind(expected, 0), 0u) << o.out;
}

TEST(Cli, CalibrateFromCountFile) {
  const auto path = work_dir() / "counts.csv";
  write_text(path, "k,count\n0,2\n1,1\n3,1\n");
  const auto o = run("calibrate-eta --counts " + path.string() + " --beta 0.9");
  ASSERT_EQ(o.status, 0) << o.err;
  // mean k = 1, η = k̄ (1-β)/β = 1/9
  EXPECT_NE(o.out.find("eta 0.111111"), std::string::npos) << o.out;
}

TEST(Cli, RuntimeErrorsAreOneLine) {
  const auto dir = work_dir();
  write_text(dir / "garbage.ttg", "not a time-tag file");
  auto o = run("correlate --in " + (dir / "garbage.ttg").string());
  EXPECT_EQ(o.status, 1);
  EXPECT_EQ(o.err.rfind("error: format: ", 0), 0u) << o.err;
  EXPECT_EQ(std::count(o.err.begin(), o.err.end(), '\n'), 1);

  write_text(dir / "bad.json", R"({"source": {"type": "coherent", "rate_hz": 1e6}, "duration_s": 1})");
  o = run("simulate --config " + (dir / "bad.json").string());
  EXPECT_EQ(o.status, 1);
  EXPECT_EQ(o.err.rfind("error: config: ", 0), 0u) << o.err;

  write_text(dir / "infeasible.csv", "500,3\n");
  o = run("calibrate-eta --counts " + (dir / "infeasible.csv").string());
  EXPECT_EQ(o.status, 1);
  EXPECT_EQ(o.err.rfind("error: infeasible: ", 0), 0u) << o.err;
}

TEST(Cli, SimulateWritesOutputs) {
  const auto dir = work_dir() / "simulate";
  std::filesystem::remove_all(dir);
  write_text(work_dir() / "tiny.json", R"({
    "source": {"type": "coherent", "rate_hz": 2.58e7},
    "detection": {"detector_r": {"efficiency": 0.0534}, "detector_t": {"efficiency": 0.0388}},
    "correlation": {"binwidth_ns": 1, "max_lag_ns": 10},
    "duration_s": 0.01, "seed": 3})");
  const auto o = run("simulate --config " + (work_dir() / "tiny.json").string() + " --outputs " + dir.string() +
                     " --scale 0.5");
  ASSERT_EQ(o.status, 0) << o.err;
  for (const char* f : {"auto.csv", "cross.csv", "auto.json", "cross.json", "result.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  const auto result = Json::parse(std::ifstream(dir / "result.json"));
  EXPECT_EQ(result.at("config").at("duration_s").get<double>(), 0.005);
  EXPECT_EQ(result.at("tool"), kToolName);
  EXPECT_FALSE(result.contains("wall_time"));
}
