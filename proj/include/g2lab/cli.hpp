#ifndef G2LAB_CLI_HPP
#define G2LAB_CLI_HPP

// Command-line front end. Exit codes: 0 success, 1 runtime failure (one
// `error: <kind>: <message>` line on stderr), 2 usage error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "g2lab/config.hpp"
#include "g2lab/correlator.hpp"
#include "g2lab/errors.hpp"
#include "g2lab/estimators.hpp"
#include "g2lab/histogram_io.hpp"
#include "g2lab/pipeline.hpp"
#include "g2lab/selftest.hpp"
#include "g2lab/timetag_io.hpp"

namespace g2lab::cli {

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json read_json(const std::string& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

/// `k,count` rows with an optional header line.
inline std::map<std::uint64_t, std::uint64_t> read_count_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::map<std::uint64_t, std::uint64_t> hist;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    unsigned long long k = 0, n = 0;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%llu,%llu%c", &k, &n, &tail) != 2) {
      if (lineno == 1 && line.find_first_of("0123456789") != 0) continue;
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected 'k,count'");
    }
    hist[k] += n;
  }
  if (hist.empty()) throw FormatError(path + ": no counts");
  return hist;
}

inline void emit_histogram(const CorrelationHistogram& h, const std::string& csv, const std::string& json,
                           const Json& provenance) {
  if (!csv.empty()) {
    write_atomically(csv, [&](std::ostream& os) { write_histogram_csv(os, h); });
  }
  if (!json.empty()) {
    write_atomically(json, [&](std::ostream& os) { os << histogram_to_json(h, provenance).dump(1) << '\n'; });
  }
  if (csv.empty() && json.empty()) write_histogram_csv(std::cout, h);
}

}  // namespace detail

inline int cli_main(int argc, char** argv) {
  CLI::App app{"Photon time-tag simulator and g2 correlator", kToolName};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string config_path;
  double scale = 1.0;
  std::string outputs;
  auto* simulate = app.add_subcommand("simulate", "Run a simulated measurement from a JSON config");
  simulate->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--scale", scale, "Multiply the run duration (or cycle count) by this factor")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--outputs", outputs, "Override the output directory");

  std::vector<std::string> inputs;
  double binwidth_ns = 1.0, max_lag_ns = 500.0;
  std::string csv_out, json_out;
  unsigned threads = 0;
  auto* correlate = app.add_subcommand("correlate", "Correlate one (auto) or two (cross) time-tag files");
  correlate->add_option("--in", inputs, "TTG1 time-tag file; give two for a cross-correlation")
      ->required()
      ->expected(1, 2)
      ->check(CLI::ExistingFile);
  correlate->add_option("--binwidth-ns", binwidth_ns, "Bin width in ns")->check(CLI::PositiveNumber);
  correlate->add_option("--max-lag-ns", max_lag_ns, "Largest lag in ns")->check(CLI::NonNegativeNumber);
  correlate->add_option("--csv", csv_out, "Write the histogram as CSV here");
  correlate->add_option("--json", json_out, "Write the histogram as JSON here");
  correlate->add_option("--threads", threads, "Worker threads (default: G2LAB_THREADS or hardware)");

  std::string auto_path, cross_path;
  double mean_n = 0.0, mean_n_err = 0.0;
  auto* commutator = app.add_subcommand("commutator", "Zero-delay commutator from saved histograms");
  commutator->add_option("--auto", auto_path, "Auto-correlation JSON")->required()->check(CLI::ExistingFile);
  commutator->add_option("--cross", cross_path, "Cross-correlation JSON")->required()->check(CLI::ExistingFile);
  commutator->add_option("--mean-n", mean_n, "Mean detected photons per bin")->required();
  commutator->add_option("--mean-n-err", mean_n_err, "Uncertainty of --mean-n")->check(CLI::NonNegativeNumber);

  std::string counts_path;
  double branching = 0.995;
  auto* calibrate = app.add_subcommand("calibrate-eta", "Fit the detection efficiency from shelving-cycle counts");
  calibrate->add_option("--counts", counts_path, "CSV of 'k,count' rows")->required()->check(CLI::ExistingFile);
  calibrate->add_option("--beta", branching, "Branching ratio into the cycling transition");

  auto* selftest = app.add_subcommand("selftest", "Run the built-in oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << detail::one_line(e.what()) << '\n' << app.help();
    return 2;
  }

  try {
    if (*simulate) {
      ExperimentConfig cfg = config_from_json(detail::read_json(config_path));
      if (!outputs.empty()) cfg.outputs = outputs;
      if (scale != 1.0) {
        cfg.duration = static_cast<Ticks>(static_cast<double>(cfg.duration) * scale);
        cfg.shelving.n_cycles = static_cast<std::uint64_t>(static_cast<double>(cfg.shelving.n_cycles) * scale);
      }
      const RunResult r = run_experiment(cfg);
      std::printf("config_hash %s\n", r.config_hash.c_str());
      if (r.efficiency) {
        std::printf("eta %.6g ± %.3g (chi2 %.3g / %llu dof)\n", r.efficiency->eta, r.efficiency->std_error,
                    r.efficiency->fit_residual, static_cast<unsigned long long>(r.efficiency->degrees_of_freedom));
      } else {
        std::printf("detected %llu + %llu photons\n", static_cast<unsigned long long>(r.counts.detected_r),
                    static_cast<unsigned long long>(r.counts.detected_t));
        if (r.commutator) {
          std::printf("g2_auto(0) %.6g ± %.3g\n", r.commutator->g2_auto_0.value, r.commutator->g2_auto_0.error);
          std::printf("g2_cross(0) %.6g ± %.3g\n", r.commutator->g2_cross_0.value, r.commutator->g2_cross_0.error);
          std::printf("mean_n %.6g\n", r.commutator->mean_n.value);
          std::printf("commutator %.6f ± %.6f\n", r.commutator->value, r.commutator->std_error);
        }
      }
      std::printf("outputs %s (%.1f s)\n", cfg.outputs.c_str(), r.wall_time_s);
    } else if (*correlate) {
      const Ticks w = ns_to_ticks(binwidth_ns);
      const Ticks lag = ns_to_ticks(max_lag_ns);
      const unsigned nthreads = threads > 0 ? threads : default_thread_count();
      const TimeTagStream a = load_ttg(inputs[0]);
      Json provenance{{"tool", kToolName}, {"version", kToolVersion}, {"inputs", inputs}};
      if (inputs.size() == 2) {
        const TimeTagStream b = load_ttg(inputs[1]);
        detail::emit_histogram(cross_correlate(a, b, w, lag, nthreads), csv_out, json_out, provenance);
      } else {
        detail::emit_histogram(auto_correlate(a, w, lag, nthreads), csv_out, json_out, provenance);
      }
    } else if (*commutator) {
      const auto ha = histogram_from_json(detail::read_json(auto_path));
      const auto hc = histogram_from_json(detail::read_json(cross_path));
      if (ha.kind != CorrelationKind::Auto || hc.kind != CorrelationKind::Cross) {
        throw ConfigError("--auto must hold an auto histogram and --cross a cross histogram");
      }
      const auto c = commutator_zero_delay({ha.g2_at(0), ha.std_error_at(0)}, {hc.g2_at(0), hc.std_error_at(0)},
                                           {mean_n, mean_n_err});
      std::printf("%.6f ± %.6f\n", c.value, c.std_error);
    } else if (*calibrate) {
      const auto est = fit_efficiency(detail::read_count_csv(counts_path), branching);
      std::printf("eta %.6g ± %.3g\n", est.eta, est.std_error);
      std::printf("chi2 %.4g on %llu dof\n", est.fit_residual,
                  static_cast<unsigned long long>(est.degrees_of_freedom));
      std::printf("cycles %llu, mean detected %.6g\n", static_cast<unsigned long long>(est.cycles),
                  est.mean_detected);
    } else if (*selftest) {
      const int failures = selftest::run_all(std::cout);
      if (failures > 0) throw NumericalError(std::to_string(failures) + " self-test check(s) failed");
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << error_kind(e) << ": " << detail::one_line(e.what()) << '\n';
    return 1;
  }
}

}  // namespace g2lab::cli

#endif  // G2LAB_CLI_HPP
