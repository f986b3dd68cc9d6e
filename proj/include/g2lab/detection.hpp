#ifndef G2LAB_DETECTION_HPP
#define G2LAB_DETECTION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "g2lab/errors.hpp"
#include "g2lab/random.hpp"
#include "g2lab/sources.hpp"
#include "g2lab/timetag.hpp"

namespace g2lab {

struct DetectorConfig {
  /// Probability that a photon reaching this detector is registered.
  double efficiency = 1.0;
  Ticks dead_time = 0;
  double dark_rate_hz = 0.0;
  Ticks jitter_sigma = 0;

  void validate() const {
    if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw DomainError("detector efficiency must lie in [0, 1]");
    if (!(dark_rate_hz >= 0.0) || !std::isfinite(dark_rate_hz)) throw DomainError("dark rate must be non-negative");
  }
};

struct DetectionConfig {
  double reflectivity = 0.5;
  DetectorConfig detector_r;
  DetectorConfig detector_t;
  /// Dead time of the time-to-digital converter, applied to the merged stream.
  Ticks tdc_dead_time = 0;
  /// min(A_det, A_mode) / A_mode.
  double spatial_overlap = 1.0;
  Ticks bin_width = 1000;

  void validate() const {
    if (!(reflectivity > 0.0 && reflectivity < 1.0)) throw DomainError("beam-splitter reflectivity must lie in (0, 1)");
    detector_r.validate();
    detector_t.validate();
    if (!(spatial_overlap > 0.0 && spatial_overlap <= 1.0)) throw DomainError("spatial overlap must lie in (0, 1]");
    if (bin_width == 0) throw DomainError("bin width must be positive");
  }
};

/// Fraction of source photons registered by either detector: the sum of the
/// two arms' overall efficiencies, R η_r + (1 - R) η_t.
inline double combined_efficiency(const DetectionConfig& cfg) {
  return cfg.reflectivity * cfg.detector_r.efficiency + (1.0 - cfg.reflectivity) * cfg.detector_t.efficiency;
}

/// Routes each tag to the reflected output with probability R. One draw per tag.
class BeamSplitter {
 public:
  BeamSplitter(double reflectivity, std::uint64_t seed) : r_(reflectivity), rng_(make_rng(seed)) {
    if (!(reflectivity >= 0.0 && reflectivity <= 1.0)) throw DomainError("reflectivity must lie in [0, 1]");
  }

  void split(const TagChunk& in, TagChunk& reflected, TagChunk& transmitted) {
    reflected.clear();
    transmitted.clear();
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (uniform01(rng_) < r_) {
        reflected.push_back(in.t[i], in.ch[i]);
      } else {
        transmitted.push_back(in.t[i], in.ch[i]);
      }
    }
  }

 private:
  double r_;
  Rng rng_;
};

inline std::pair<TimeTagStream, TimeTagStream> beam_split(const TimeTagStream& s, double reflectivity,
                                                          std::uint64_t seed) {
  BeamSplitter splitter(reflectivity, seed);
  TagChunk r, t;
  splitter.split(s.to_chunk(), r, t);
  return {TimeTagStream(TimeTagStream::Unchecked{}, std::move(r.t), std::move(r.ch), s.duration(), s.ticks_per_ns()),
          TimeTagStream(TimeTagStream::Unchecked{}, std::move(t.t), std::move(t.ch), s.duration(), s.ticks_per_ns())};
}

/// One photodetector fed chunk by chunk:
/// efficiency thinning, dark counts, Gaussian timing jitter, dead time.
///
/// Jitter is truncated at ±8σ so that tags held back by that margin at the
/// end of each chunk are the only ones that can still be reordered.
class Detector {
 public:
  static constexpr double kJitterTruncation = 8.0;

  Detector(const DetectorConfig& cfg, std::uint64_t seed, Ticks duration)
      : cfg_(cfg),
        duration_(duration),
        thinner_(cfg.efficiency, derive_seed(seed, "efficiency")),
        dark_(cfg.dark_rate_hz, derive_seed(seed, "dark")),
        jitter_rng_(make_rng(derive_seed(seed, "jitter"))),
        dead_(cfg.dead_time) {
    cfg.validate();
    if (cfg.jitter_sigma > 0) {
      margin_ = static_cast<Ticks>(std::ceil(kJitterTruncation * static_cast<double>(cfg.jitter_sigma))) + 1;
    }
  }

  /// `chunk` holds the incident tags with timestamps in [previous end, end).
  /// On return it holds the registered tags that are final, i.e. all of
  /// them once `end` reaches the stream duration.
  void process(TagChunk& chunk, Ticks end) {
    end = std::min(end, duration_);
    thinner_.apply(chunk);
    if (cfg_.dark_rate_hz > 0.0) {
      darks_.clear();
      dark_.generate_until(end, darks_);
      merge_chunks(chunk, darks_, scratch_);
      std::swap(chunk, scratch_);
    }
    if (cfg_.jitter_sigma > 0) jitter(chunk, end);
    dead_.apply(chunk);
  }

 private:
  void jitter(TagChunk& chunk, Ticks end) {
    const double sigma = static_cast<double>(cfg_.jitter_sigma);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      double dt;
      do {
        dt = normal_(jitter_rng_);
      } while (std::abs(dt) > kJitterTruncation);
      const double t = static_cast<double>(chunk.t[i]) + std::round(dt * sigma);
      if (t < 0.0 || t >= static_cast<double>(duration_)) continue;
      pending_.push_back({static_cast<Ticks>(t), chunk.ch[i]});
    }
    std::sort(pending_.begin(), pending_.end());
    const Ticks limit = end >= duration_ ? duration_ : (end > margin_ ? end - margin_ : 0);
    const auto split = std::lower_bound(pending_.begin(), pending_.end(), TimeTag{limit, 0});
    chunk.clear();
    for (auto it = pending_.begin(); it != split; ++it) chunk.push_back(it->timestamp, it->channel);
    pending_.erase(pending_.begin(), split);
  }

  DetectorConfig cfg_;
  Ticks duration_;
  Thinner thinner_;
  PoissonSource dark_;
  Rng jitter_rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  DeadTimeFilter dead_;
  Ticks margin_ = 0;
  std::vector<TimeTag> pending_;
  TagChunk darks_, scratch_;
};

inline TimeTagStream detect(const TimeTagStream& s, const DetectorConfig& d, std::uint64_t seed) {
  Detector detector(d, seed, s.duration());
  TagChunk c = s.to_chunk();
  detector.process(c, s.duration());
  return TimeTagStream(TimeTagStream::Unchecked{}, std::move(c.t), std::move(c.ch), s.duration(), s.ticks_per_ns());
}

/// Mean detected photons per bin from the mean photon number per coherence
/// time: overlap · (T_bw / T_coh) · η · ⟨a†a⟩, with η the combined efficiency.
inline double mean_detected_per_bin(const DetectionConfig& cfg, double photons_per_coherence_time,
                                    double coherence_time_s) {
  if (!(coherence_time_s > 0.0)) throw DomainError("coherence time must be positive");
  if (!(photons_per_coherence_time >= 0.0)) throw DomainError("mean photon number must be non-negative");
  cfg.validate();
  const double bin_s = ticks_to_seconds(cfg.bin_width);
  return cfg.spatial_overlap * (bin_s / coherence_time_s) * combined_efficiency(cfg) * photons_per_coherence_time;
}

}  // namespace g2lab

#endif  // G2LAB_DETECTION_HPP
