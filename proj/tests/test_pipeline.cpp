#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "g2lab/config.hpp"
#include "g2lab/histogram_io.hpp"
#include "g2lab/pipeline.hpp"

using namespace g2lab;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "g2lab_pipeline" / name;
  std::filesystem::remove_all(dir);
  return dir;
}

ExperimentConfig small_config(SourceKind kind) {
  ExperimentConfig c;
  c.source = kind;
  c.coherent.rate_hz = 2.58e7;
  c.detection.detector_r.efficiency = 0.0534;
  c.detection.detector_t.efficiency = 0.0388;
  c.correlation.max_lag = 50'000;
  c.duration = seconds_to_ticks(0.02);
  c.seed = 12;
  return c;
}

}  // namespace

TEST(Config, JsonRoundTrip) {
  auto c = small_config(SourceKind::Ion);
  c.detection.tdc_dead_time = 2000;
  c.detection.detector_r.jitter_sigma = 350;
  c.detection.detector_t.dark_rate_hz = 25.0;
  c.straylight_fraction = 0.01;
  c.outputs = "somewhere";
  const auto back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_EQ(back.detection.tdc_dead_time, 2000u);
  EXPECT_EQ(back.detection.detector_r.jitter_sigma, 350u);
  EXPECT_EQ(back.duration, c.duration);
}

TEST(Config, ParsesSampleFile) {
  const auto j = Json::parse(R"({
    "source": {"type": "ion", "saturation": 1.0, "detuning_linewidths": -0.5},
    "detection": {"reflectivity": 0.5, "detector_r": {"efficiency": 0.0534}, "detector_t": {"efficiency": 0.0388}},
    "correlation": {"binwidth_ns": 1, "max_lag_ns": 500},
    "duration_s": 100, "seed": 7})");
  const auto c = config_from_json(j);
  EXPECT_EQ(c.source, SourceKind::Ion);
  EXPECT_EQ(c.duration, 100'000'000'000'000ull);
  EXPECT_EQ(c.correlation.max_lag, 500'000u);
  EXPECT_NEAR(combined_efficiency(c.detection), 0.0461, 1e-12);
  EXPECT_NEAR(c.source_rate_hz(), 3.0634e7, 1e3);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, RejectsBadDocuments) {
  auto base = config_to_json(small_config(SourceKind::Coherent));
  auto no_seed = base;
  no_seed.erase("seed");
  EXPECT_THROW(config_from_json(no_seed), ConfigError);
  auto unknown = base;
  unknown["detection"]["mystery"] = 1;
  EXPECT_THROW(config_from_json(unknown), ConfigError);
  auto bad_type = base;
  bad_type["source"]["type"] = "laser";
  EXPECT_THROW(config_from_json(bad_type), ConfigError);
  auto wrong_kind = base;
  wrong_kind["duration_s"] = "long";
  EXPECT_THROW(config_from_json(wrong_kind), ConfigError);

  auto c = small_config(SourceKind::Coherent);
  c.duration = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config(SourceKind::Coherent);
  c.detection.reflectivity = 0.0;
  EXPECT_THROW(c.validate(), DomainError);
}

TEST(Config, HashIgnoresOutputLocationOnly) {
  auto a = small_config(SourceKind::Coherent);
  auto b = a;
  b.outputs = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed += 1;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 64u);
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(HistogramIo, JsonRoundTripAndCsvShape) {
  auto s = TimeTagStream::from_times({100, 900, 2500}, 3000);
  const auto h = auto_correlate(s, 1000, 2000, 1);
  EXPECT_EQ(histogram_from_json(Json::parse(histogram_to_json(h).dump())), h);

  std::ostringstream csv;
  write_histogram_csv(csv, h);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "lag_ns,g2,stderr,raw_pairs");
  std::getline(lines, line);
  EXPECT_EQ(line.substr(0, 7), "-2.000,");
  int rows = 1;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 5);
  EXPECT_NE(csv.str().find(",inf,0\n"), std::string::npos);

  auto broken = histogram_to_json(h);
  broken["g2"].erase(0);
  EXPECT_THROW(histogram_from_json(broken), FormatError);
  EXPECT_THROW(histogram_from_json(Json::parse("{}")), FormatError);
}

TEST(Pipeline, CoherentRunProducesConsistentEstimates) {
  const auto c = small_config(SourceKind::Coherent);
  RunOptions o;
  o.write_outputs = false;
  const auto r = run_experiment(c, o);
  ASSERT_TRUE(r.commutator && r.auto_histogram && r.cross_histogram && r.mean_n_model);
  EXPECT_EQ(r.counts.merged, r.counts.detected_r + r.counts.detected_t);
  EXPECT_NEAR(r.commutator->mean_n.value, *r.mean_n_model, 5.0 * r.commutator->mean_n.error);
  EXPECT_NEAR(r.commutator->value, 1.0, 5.0 * r.commutator->std_error);
  EXPECT_EQ(r.commutator_vs_delay.size(), 101u);
}

TEST(Pipeline, ResultDoesNotDependOnSegmentLength) {
  auto c = small_config(SourceKind::Ion);
  c.duration = seconds_to_ticks(0.004);
  c.detection.detector_r.jitter_sigma = 400;
  c.detection.detector_t.dark_rate_hz = 1e5;
  c.detection.detector_r.dead_time = 1500;
  c.detection.tdc_dead_time = 2000;
  c.straylight_fraction = 0.05;
  c.detection.spatial_overlap = 0.8;
  RunOptions a, b;
  a.write_outputs = b.write_outputs = false;
  a.segment = 1'000'000'000;
  b.segment = 77'777;
  const auto ra = run_experiment(c, a);
  const auto rb = run_experiment(c, b);
  EXPECT_EQ(*ra.auto_histogram, *rb.auto_histogram);
  EXPECT_EQ(*ra.cross_histogram, *rb.cross_histogram);
  EXPECT_EQ(result_to_json(ra, c), result_to_json(rb, c));
}

TEST(Pipeline, RepeatedRunsWriteIdenticalFiles) {
  auto c = small_config(SourceKind::Ion);
  c.duration = seconds_to_ticks(0.005);
  c.write_timetags = true;
  c.outputs = scratch("first").string();
  run_experiment(c);
  c.outputs = scratch("second").string();
  run_experiment(c);
  for (const char* f : {"auto.csv", "auto.json", "cross.csv", "cross.json", "result.json", "detector_r.ttg",
                        "detector_t.ttg"}) {
    const auto a = slurp(std::filesystem::path(scratch("x").parent_path() / "first" / f));
    const auto b = slurp(std::filesystem::path(scratch("x").parent_path() / "second" / f));
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, b) << f;
  }
}

TEST(Pipeline, SavedTimeTagsReproduceHistograms) {
  auto c = small_config(SourceKind::Coherent);
  c.duration = seconds_to_ticks(0.005);
  c.write_timetags = true;
  c.outputs = scratch("tags").string();
  const auto r = run_experiment(c);
  const auto tr = load_ttg(std::filesystem::path(c.outputs) / "detector_r.ttg");
  const auto tt = load_ttg(std::filesystem::path(c.outputs) / "detector_t.ttg");
  EXPECT_EQ(tr.size(), r.counts.detected_r);
  EXPECT_EQ(cross_correlate(tr, tt, c.correlation.bin_width, c.correlation.max_lag, 1), *r.cross_histogram);
  EXPECT_EQ(auto_correlate(merge(tr, tt), c.correlation.bin_width, c.correlation.max_lag, 1), *r.auto_histogram);
}

TEST(Pipeline, ShelvingConfigRunsCalibration) {
  auto c = small_config(SourceKind::Shelving);
  c.shelving.n_cycles = 100'000;
  RunOptions o;
  o.write_outputs = false;
  const auto r = run_experiment(c, o);
  ASSERT_TRUE(r.efficiency.has_value());
  EXPECT_FALSE(r.commutator.has_value());
  EXPECT_NEAR(r.efficiency->eta, 0.0461, 5.0 * r.efficiency->std_error);
  EXPECT_TRUE(result_to_json(r, c).contains("efficiency"));
}

TEST(Pipeline, InvalidConfigFailsBeforeWork) {
  auto c = small_config(SourceKind::Coherent);
  c.outputs = scratch("invalid").string();
  c.detection.detector_t.efficiency = 2.0;
  EXPECT_THROW(run_experiment(c), DomainError);
  EXPECT_FALSE(std::filesystem::exists(c.outputs));
}
