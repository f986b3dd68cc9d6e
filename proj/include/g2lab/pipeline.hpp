#ifndef G2LAB_PIPELINE_HPP
#define G2LAB_PIPELINE_HPP

#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "g2lab/config.hpp"
#include "g2lab/correlator.hpp"
#include "g2lab/detection.hpp"
#include "g2lab/estimators.hpp"
#include "g2lab/histogram_io.hpp"
#include "g2lab/sources.hpp"
#include "g2lab/timetag.hpp"
#include "g2lab/timetag_io.hpp"

namespace g2lab {

inline constexpr const char* kToolName = "g2lab";
inline constexpr const char* kToolVersion = "1.0.0";

struct RunCounts {
  std::uint64_t source_photons = 0;
  std::uint64_t straylight_photons = 0;
  std::uint64_t detected_r = 0;
  std::uint64_t detected_t = 0;
  /// Merged stream after the TDC dead time, complete bins only.
  std::uint64_t merged = 0;
};

struct RunResult {
  std::string config_hash;
  std::uint64_t seed = 0;
  SourceKind source = SourceKind::Coherent;
  RunCounts counts;
  std::optional<CorrelationHistogram> auto_histogram;
  std::optional<CorrelationHistogram> cross_histogram;
  /// ⟨N⟩ from the measured count rate, which the commutator uses.
  std::optional<CommutatorEstimate> commutator;
  /// ⟨N⟩ from the detection model (source rate, efficiencies, bin width).
  std::optional<double> mean_n_model;
  std::optional<CommutatorEstimate> commutator_model;
  std::vector<DelayCommutator> commutator_vs_delay;
  std::optional<EfficiencyEstimate> efficiency;
  /// Not persisted, so outputs stay byte-identical across runs.
  double wall_time_s = 0.0;
};

struct RunOptions {
  /// Simulated time processed per pipeline step.
  Ticks segment = 10'000'000'000;  // 10 ms
  bool write_outputs = true;
};

/// Shelving-cycle calibration: geometric bursts, per-photon loss at
/// `eta_true`, maximum-likelihood fit of the efficiency.
inline EfficiencyEstimate run_efficiency_calibration(double branching, double eta_true, std::uint64_t n_cycles,
                                                     std::uint64_t seed) {
  if (!(eta_true >= 0.0 && eta_true <= 1.0)) throw DomainError("efficiency must lie in [0, 1]");
  auto cycles = gen_shelving_cycles(branching, n_cycles, derive_seed(seed, "cycles"));
  Rng rng = make_rng(derive_seed(seed, "efficiency"));
  std::map<std::uint64_t, std::uint64_t> hist;
  for (auto n : cycles) {
    std::binomial_distribution<std::uint64_t> detected(n, eta_true);
    ++hist[detected(rng)];
  }
  return fit_efficiency(hist, branching);
}

namespace detail {

class SourceStage {
 public:
  explicit SourceStage(const ExperimentConfig& cfg) {
    const auto seed = derive_seed(cfg.seed, "source");
    if (cfg.source == SourceKind::Ion) {
      source_.emplace<IonSource>(cfg.ion.to_params(), seed);
    } else {
      source_.emplace<PoissonSource>(cfg.coherent.rate_hz, seed);
    }
  }

  void generate_until(Ticks end, TagChunk& out) {
    std::visit([&](auto& s) {
      if constexpr (!std::is_same_v<std::decay_t<decltype(s)>, std::monostate>) s.generate_until(end, out);
    }, source_);
  }

 private:
  std::variant<std::monostate, PoissonSource, IonSource> source_;
};

inline Json estimate_json(const CommutatorEstimate& c) {
  return Json{{"value", c.value},
              {"stderr", c.std_error},
              {"g2_auto_0", {{"value", c.g2_auto_0.value}, {"stderr", c.g2_auto_0.error}}},
              {"g2_cross_0", {{"value", c.g2_cross_0.value}, {"stderr", c.g2_cross_0.error}}},
              {"mean_n", {{"value", c.mean_n.value}, {"stderr", c.mean_n.error}}}};
}

inline Json efficiency_json(const EfficiencyEstimate& e) {
  return Json{{"eta", e.eta},
              {"stderr", e.std_error},
              {"chi_square", e.fit_residual},
              {"degrees_of_freedom", e.degrees_of_freedom},
              {"mean_detected", e.mean_detected},
              {"cycles", e.cycles}};
}

}  // namespace detail

inline const char* to_string(SourceKind k) {
  switch (k) {
    case SourceKind::Coherent:
      return "coherent";
    case SourceKind::Ion:
      return "ion";
    case SourceKind::Shelving:
      return "shelving";
  }
  return "unknown";
}

/// Result document written as result.json.
inline Json result_to_json(const RunResult& r, const ExperimentConfig& cfg) {
  Json j{{"tool", kToolName},
         {"version", kToolVersion},
         {"config_hash", r.config_hash},
         {"seed", r.seed},
         {"source", to_string(r.source)},
         {"config", physics_config_json(cfg)}};
  if (r.efficiency) {
    j["efficiency"] = detail::efficiency_json(*r.efficiency);
    return j;
  }
  j["counts"] = {{"source_photons", r.counts.source_photons},
                 {"straylight_photons", r.counts.straylight_photons},
                 {"detected_r", r.counts.detected_r},
                 {"detected_t", r.counts.detected_t},
                 {"merged_complete_bins", r.counts.merged}};
  if (r.commutator) j["commutator"] = detail::estimate_json(*r.commutator);
  if (r.mean_n_model) j["mean_n_model"] = *r.mean_n_model;
  if (r.commutator_model) j["commutator_model_mean_n"] = detail::estimate_json(*r.commutator_model);
  Json vs = Json::array();
  for (const auto& d : r.commutator_vs_delay) {
    vs.push_back({{"lag_ns", d.lag_ns}, {"value", d.value}, {"stderr", detail::finite_or_null(d.std_error)}});
  }
  j["commutator_vs_delay"] = std::move(vs);
  return j;
}

inline void write_outputs(const RunResult& r, const ExperimentConfig& cfg) {
  const std::filesystem::path dir(cfg.outputs);
  std::filesystem::create_directories(dir);
  const Json provenance{{"seed", r.seed}, {"config_hash", r.config_hash}, {"tool", kToolName}, {"version", kToolVersion}};
  if (r.auto_histogram) {
    write_atomically(dir / "auto.csv", [&](std::ostream& os) { write_histogram_csv(os, *r.auto_histogram); });
    write_atomically(dir / "auto.json",
                     [&](std::ostream& os) { os << histogram_to_json(*r.auto_histogram, provenance).dump(1) << '\n'; });
  }
  if (r.cross_histogram) {
    write_atomically(dir / "cross.csv", [&](std::ostream& os) { write_histogram_csv(os, *r.cross_histogram); });
    write_atomically(dir / "cross.json",
                     [&](std::ostream& os) { os << histogram_to_json(*r.cross_histogram, provenance).dump(1) << '\n'; });
  }
  write_atomically(dir / "result.json", [&](std::ostream& os) { os << result_to_json(r, cfg).dump(2) << '\n'; });
}

/// End-to-end simulated measurement.
///
/// Per segment of simulated time: source → optional straylight → spatial
/// overlap loss → beam splitter → one detector per arm. The two arms are cross-correlated; their
/// merge (after the optional TDC dead time) is auto-correlated. All stages
/// carry their state across segments, so the result does not depend on the
/// segment length.
inline RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  RunResult result;
  result.config_hash = config_hash(cfg);
  result.seed = cfg.seed;
  result.source = cfg.source;

  if (cfg.source == SourceKind::Shelving) {
    result.efficiency = run_efficiency_calibration(cfg.shelving.branching, combined_efficiency(cfg.detection),
                                                   cfg.shelving.n_cycles, cfg.seed);
  } else {
    const Ticks duration = cfg.duration;
    detail::SourceStage source(cfg);
    const double stray_rate = cfg.straylight_fraction * cfg.source_rate_hz();
    PoissonSource straylight(stray_rate, derive_seed(cfg.seed, "straylight"));
    Thinner overlap(cfg.detection.spatial_overlap, derive_seed(cfg.seed, "spatial_overlap"));
    BeamSplitter splitter(cfg.detection.reflectivity, derive_seed(cfg.seed, "beam_splitter"));
    Detector det_r(cfg.detection.detector_r, derive_seed(cfg.seed, "detector_r"), duration);
    Detector det_t(cfg.detection.detector_t, derive_seed(cfg.seed, "detector_t"), duration);
    DeadTimeFilter tdc(cfg.detection.tdc_dead_time);
    StreamingCrossCorrelator cross(cfg.correlation.bin_width, cfg.correlation.max_lag, duration);
    StreamingAutoCorrelator autoc(cfg.correlation.bin_width, cfg.correlation.max_lag, duration);

    std::unique_ptr<TtgStreamWriter> writer_r, writer_t;
    if (cfg.write_timetags && opts.write_outputs) {
      std::filesystem::create_directories(cfg.outputs);
      writer_r = std::make_unique<TtgStreamWriter>(std::filesystem::path(cfg.outputs) / "detector_r.ttg", duration);
      writer_t = std::make_unique<TtgStreamWriter>(std::filesystem::path(cfg.outputs) / "detector_t.ttg", duration);
    }

    TagChunk photons, stray, mixed, arm_r, arm_t, merged;
    const Ticks segment = std::max<Ticks>(opts.segment, 1);
    for (Ticks start = 0; start < duration;) {
      const Ticks end = duration - start > segment ? start + segment : duration;
      photons.clear();
      source.generate_until(end, photons);
      result.counts.source_photons += photons.size();
      if (stray_rate > 0.0) {
        stray.clear();
        straylight.generate_until(end, stray);
        result.counts.straylight_photons += stray.size();
        merge_chunks(photons, stray, mixed);
        std::swap(photons, mixed);
      }
      if (cfg.detection.spatial_overlap < 1.0) overlap.apply(photons);
      splitter.split(photons, arm_r, arm_t);
      det_r.process(arm_r, end);
      det_t.process(arm_t, end);
      std::fill(arm_r.ch.begin(), arm_r.ch.end(), std::uint8_t{0});
      std::fill(arm_t.ch.begin(), arm_t.ch.end(), std::uint8_t{1});
      result.counts.detected_r += arm_r.size();
      result.counts.detected_t += arm_t.size();
      if (writer_r) {
        writer_r->append(arm_r);
        writer_t->append(arm_t);
      }
      cross.feed(arm_r, arm_t);
      merge_chunks(arm_r, arm_t, merged);
      tdc.apply(merged);
      autoc.feed(merged);
      start = end;
    }
    if (writer_r) {
      writer_r->finish();
      writer_t->finish();
    }

    result.cross_histogram = cross.result();
    result.auto_histogram = autoc.result();
    const auto& ha = *result.auto_histogram;
    const auto& hc = *result.cross_histogram;
    result.counts.merged = ha.n1;
    const Measured g2a{ha.g2_at(0), ha.std_error_at(0)};
    const Measured g2c{hc.g2_at(0), hc.std_error_at(0)};
    if (ha.n1 > 0) {
      const Measured mean_n = mean_n_from_counts(ha.n1, ha.bins);
      result.commutator = commutator_zero_delay(g2a, g2c, mean_n);
      result.commutator_vs_delay = commutator_vs_delay(ha, hc, mean_n.value);
    }

    // Detection-model path: photons per coherence time scaled by the
    // overlap, bin-to-coherence-time ratio and combined efficiency.
    double coherence_time = cfg.coherent.coherence_time;
    double photons_per_coherence = cfg.coherent.rate_hz * coherence_time;
    if (cfg.source == SourceKind::Ion) {
      const IonParams p = cfg.ion.to_params();
      coherence_time = p.coherence_time;
      photons_per_coherence = p.branching * upper_state_population(p.saturation);
    }
    const double model = mean_detected_per_bin(cfg.detection, photons_per_coherence, coherence_time);
    result.mean_n_model = model;
    if (model > 0.0) result.commutator_model = commutator_zero_delay(g2a, g2c, Measured{model, 0.0});
  }

  result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (opts.write_outputs) write_outputs(result, cfg);
  return result;
}

}  // namespace g2lab

#endif  // G2LAB_PIPELINE_HPP
