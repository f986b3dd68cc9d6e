#ifndef G2LAB_CONFIG_HPP
#define G2LAB_CONFIG_HPP

// Experiment configuration as a single JSON document. Every dimensional
// field carries its unit in the key name.
//
// {
//   "source": {"type": "ion", "linewidth_mhz": 19.6, "saturation": 1.0,
//              "detuning_linewidths": -0.5, "branching": 0.995},
//   "detection": {"reflectivity": 0.5, "spatial_overlap": 1.0, "tdc_dead_time_ns": 0,
//                 "detector_r": {"efficiency": 0.0534, "dead_time_ns": 0,
//                                "dark_rate_hz": 0, "jitter_sigma_ns": 0},
//                 "detector_t": {...}},
//   "correlation": {"binwidth_ns": 1, "max_lag_ns": 500},
//   "duration_s": 100, "seed": 1, "outputs": "out",
//   "straylight_fraction": 0, "write_timetags": false
// }
//
// Coherent sources use {"type": "coherent", "rate_hz": ..., "coherence_time_s": ...};
// shelving calibration runs use {"type": "shelving", "branching": ..., "n_cycles": ...}.

#include <openssl/evp.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "g2lab/detection.hpp"
#include "g2lab/errors.hpp"
#include "g2lab/sources.hpp"
#include "g2lab/timetag.hpp"
#include "json.hpp"

namespace g2lab {

using Json = nlohmann::json;

enum class SourceKind { Coherent, Ion, Shelving };

/// Emitter settings in configuration units.
struct IonSettings {
  /// Γ / 2π in MHz.
  double linewidth_mhz = 19.6;
  double saturation = 1.0;
  /// Δ / Γ.
  double detuning_linewidths = -0.5;
  double branching = 0.995;

  /// T_coh is taken as the excited-state lifetime 1/Γ.
  IonParams to_params() const {
    IonParams p;
    p.linewidth = 2.0 * std::numbers::pi * linewidth_mhz * 1e6;
    p.saturation = saturation;
    p.detuning = detuning_linewidths * p.linewidth;
    p.branching = branching;
    p.coherence_time = 1.0 / p.linewidth;
    return p;
  }
};

struct ShelvingSettings {
  double branching = 0.995;
  std::uint64_t n_cycles = 1'000'000;
};

struct CorrelationSettings {
  Ticks bin_width = 1000;
  Ticks max_lag = 500'000;
};

struct ExperimentConfig {
  SourceKind source = SourceKind::Coherent;
  CoherentParams coherent;
  IonSettings ion;
  ShelvingSettings shelving;
  DetectionConfig detection;
  CorrelationSettings correlation;
  Ticks duration = 0;
  std::uint64_t seed = 0;
  std::string outputs = "out";
  /// Rate of an independent Poisson background, as a fraction of the source rate.
  double straylight_fraction = 0.0;
  bool write_timetags = false;

  void validate() const {
    switch (source) {
      case SourceKind::Coherent:
        coherent.validate();
        break;
      case SourceKind::Ion:
        ion.to_params().validate();
        break;
      case SourceKind::Shelving:
        if (!(shelving.branching > 0.0 && shelving.branching < 1.0)) {
          throw DomainError("branching ratio must lie in (0, 1)");
        }
        if (shelving.n_cycles == 0) throw DomainError("need at least one shelving cycle");
        break;
    }
    detection.validate();
    if (correlation.bin_width == 0) throw DomainError("bin width must be positive");
    if (detection.bin_width != correlation.bin_width) throw ConfigError("detection and correlation bin widths differ");
    if (source != SourceKind::Shelving) {
      if (duration == 0) throw ConfigError("duration must be positive");
      if (duration < correlation.bin_width) throw ConfigError("duration is shorter than one bin");
    }
    if (!(straylight_fraction >= 0.0 && straylight_fraction <= 1.0)) {
      throw DomainError("straylight fraction must lie in [0, 1]");
    }
    if (outputs.empty()) throw ConfigError("outputs directory must be named");
  }

  /// Mean source photon rate in Hz, before any loss.
  double source_rate_hz() const {
    switch (source) {
      case SourceKind::Coherent:
        return coherent.rate_hz;
      case SourceKind::Ion:
        return scattering_rate(ion.to_params());
      case SourceKind::Shelving:
        return 0.0;
    }
    return 0.0;
  }
};

namespace detail {

inline double ns_from(Ticks t) { return static_cast<double>(t) / kTicksPerNs; }

inline Json detector_to_json(const DetectorConfig& d) {
  return Json{{"efficiency", d.efficiency},
              {"dead_time_ns", ns_from(d.dead_time)},
              {"dark_rate_hz", d.dark_rate_hz},
              {"jitter_sigma_ns", ns_from(d.jitter_sigma)}};
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

inline DetectorConfig detector_from_json(const Json& j) {
  DetectorConfig d;
  d.efficiency = get_or(j, "efficiency", 1.0);
  d.dead_time = ns_to_ticks(get_or(j, "dead_time_ns", 0.0));
  d.dark_rate_hz = get_or(j, "dark_rate_hz", 0.0);
  d.jitter_sigma = ns_to_ticks(get_or(j, "jitter_sigma_ns", 0.0));
  return d;
}

inline void reject_unknown_keys(const Json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

}  // namespace detail

/// Canonical JSON form; key order is fixed (sorted) by the JSON library.
inline Json config_to_json(const ExperimentConfig& c) {
  Json source;
  switch (c.source) {
    case SourceKind::Coherent:
      source = {{"type", "coherent"}, {"rate_hz", c.coherent.rate_hz}, {"coherence_time_s", c.coherent.coherence_time}};
      break;
    case SourceKind::Ion:
      source = {{"type", "ion"},
                {"linewidth_mhz", c.ion.linewidth_mhz},
                {"saturation", c.ion.saturation},
                {"detuning_linewidths", c.ion.detuning_linewidths},
                {"branching", c.ion.branching}};
      break;
    case SourceKind::Shelving:
      source = {{"type", "shelving"}, {"branching", c.shelving.branching}, {"n_cycles", c.shelving.n_cycles}};
      break;
  }
  return Json{{"source", source},
              {"detection",
               {{"reflectivity", c.detection.reflectivity},
                {"spatial_overlap", c.detection.spatial_overlap},
                {"tdc_dead_time_ns", detail::ns_from(c.detection.tdc_dead_time)},
                {"detector_r", detail::detector_to_json(c.detection.detector_r)},
                {"detector_t", detail::detector_to_json(c.detection.detector_t)}}},
              {"correlation",
               {{"binwidth_ns", detail::ns_from(c.correlation.bin_width)},
                {"max_lag_ns", detail::ns_from(c.correlation.max_lag)}}},
              {"duration_s", static_cast<double>(c.duration) / kTicksPerSecond},
              {"seed", c.seed},
              {"outputs", c.outputs},
              {"straylight_fraction", c.straylight_fraction},
              {"write_timetags", c.write_timetags}};
}

inline ExperimentConfig config_from_json(const Json& j) {
  try {
    detail::reject_unknown_keys(j,
                                {"source", "detection", "correlation", "duration_s", "seed", "outputs",
                                 "straylight_fraction", "write_timetags"},
                                "config");
    ExperimentConfig c;
    if (!j.contains("seed")) throw ConfigError("config must set an explicit seed");
    c.seed = j.at("seed").get<std::uint64_t>();

    const Json& src = j.at("source");
    const auto type = src.at("type").get<std::string>();
    if (type == "coherent") {
      detail::reject_unknown_keys(src, {"type", "rate_hz", "coherence_time_s"}, "source");
      c.source = SourceKind::Coherent;
      c.coherent.rate_hz = src.at("rate_hz").get<double>();
      c.coherent.coherence_time = detail::get_or(src, "coherence_time_s", 0.1);
    } else if (type == "ion") {
      detail::reject_unknown_keys(src, {"type", "linewidth_mhz", "saturation", "detuning_linewidths", "branching"},
                                  "source");
      c.source = SourceKind::Ion;
      c.ion.linewidth_mhz = detail::get_or(src, "linewidth_mhz", 19.6);
      c.ion.saturation = detail::get_or(src, "saturation", 1.0);
      c.ion.detuning_linewidths = detail::get_or(src, "detuning_linewidths", -0.5);
      c.ion.branching = detail::get_or(src, "branching", 0.995);
    } else if (type == "shelving") {
      detail::reject_unknown_keys(src, {"type", "branching", "n_cycles"}, "source");
      c.source = SourceKind::Shelving;
      c.shelving.branching = detail::get_or(src, "branching", 0.995);
      c.shelving.n_cycles = detail::get_or<std::uint64_t>(src, "n_cycles", 1'000'000);
    } else {
      throw ConfigError("unknown source type '" + type + "'");
    }

    if (j.contains("correlation")) {
      const Json& corr = j.at("correlation");
      detail::reject_unknown_keys(corr, {"binwidth_ns", "max_lag_ns"}, "correlation");
      c.correlation.bin_width = ns_to_ticks(detail::get_or(corr, "binwidth_ns", 1.0));
      c.correlation.max_lag = ns_to_ticks(detail::get_or(corr, "max_lag_ns", 500.0));
    }
    if (j.contains("detection")) {
      const Json& det = j.at("detection");
      detail::reject_unknown_keys(
          det, {"reflectivity", "spatial_overlap", "tdc_dead_time_ns", "detector_r", "detector_t"}, "detection");
      c.detection.reflectivity = detail::get_or(det, "reflectivity", 0.5);
      c.detection.spatial_overlap = detail::get_or(det, "spatial_overlap", 1.0);
      c.detection.tdc_dead_time = ns_to_ticks(detail::get_or(det, "tdc_dead_time_ns", 0.0));
      if (det.contains("detector_r")) c.detection.detector_r = detail::detector_from_json(det.at("detector_r"));
      if (det.contains("detector_t")) c.detection.detector_t = detail::detector_from_json(det.at("detector_t"));
    }
    c.detection.bin_width = c.correlation.bin_width;
    c.duration = seconds_to_ticks(detail::get_or(j, "duration_s", 0.0));
    c.outputs = detail::get_or<std::string>(j, "outputs", "out");
    c.straylight_fraction = detail::get_or(j, "straylight_fraction", 0.0);
    c.write_timetags = detail::get_or(j, "write_timetags", false);
    return c;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config JSON: ") + e.what());
  }
}

inline std::string sha256_hex(const std::string& data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xf]);
  }
  return out;
}

/// Canonical JSON without the output location: everything that determines
/// the simulated data.
inline Json physics_config_json(const ExperimentConfig& c) {
  Json j = config_to_json(c);
  j.erase("outputs");
  return j;
}

/// Stable content hash: SHA-256 of the compact canonical JSON, excluding
/// the output directory.
inline std::string config_hash(const ExperimentConfig& c) { return sha256_hex(physics_config_json(c).dump()); }

}  // namespace g2lab

#endif  // G2LAB_CONFIG_HPP
