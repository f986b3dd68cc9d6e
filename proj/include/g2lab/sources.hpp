#ifndef G2LAB_SOURCES_HPP
#define G2LAB_SOURCES_HPP

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

#include "g2lab/bloch.hpp"
#include "g2lab/errors.hpp"
#include "g2lab/random.hpp"
#include "g2lab/timetag.hpp"

namespace g2lab {

/// Driven two-level emitter. Angular frequencies in rad/s.
struct IonParams {
  double linewidth = 2.0 * std::numbers::pi * 19.6e6;
  double saturation = 1.0;
  double detuning = -std::numbers::pi * 19.6e6;
  /// Probability that a decay returns to the ground state with a detectable photon.
  double branching = 0.995;
  /// Seconds; the excited-state lifetime 1/Γ.
  double coherence_time = 1.0 / (2.0 * std::numbers::pi * 19.6e6);

  void validate() const {
    if (!(linewidth > 0.0) || !std::isfinite(linewidth)) throw DomainError("linewidth must be positive");
    if (!(saturation >= 0.0) || !std::isfinite(saturation)) throw DomainError("saturation must be non-negative");
    if (!std::isfinite(detuning)) throw DomainError("detuning must be finite");
    if (!(branching > 0.0 && branching <= 1.0)) throw DomainError("branching ratio must lie in (0, 1]");
    if (!(coherence_time > 0.0)) throw DomainError("coherence time must be positive");
  }
};

struct CoherentParams {
  double rate_hz = 1.0e6;
  /// Seconds. Laser coherence is far longer than any correlation delay and
  /// does not enter the simulation.
  double coherence_time = 0.1;

  void validate() const {
    if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) throw DomainError("coherent rate must be positive");
    if (!(coherence_time > 0.0)) throw DomainError("coherence time must be positive");
  }
};

/// ρ22 = S / (2 (1 + S)).
inline double upper_state_population(double saturation) { return bloch::steady_excited_population(saturation); }

/// R_sc = β Γ ρ22, photons per second.
inline double scattering_rate(const IonParams& p) {
  p.validate();
  return p.branching * p.linewidth * upper_state_population(p.saturation);
}

/// Normalized intensity correlation ρ22(τ)/ρ22(∞) of the emitter, τ in
/// seconds, from a direct Bloch integration starting in the ground state.
/// Delays beyond 100 lifetimes return the value at 100 lifetimes.
inline double ion_g2_model(double tau, const IonParams& p) {
  p.validate();
  if (!(tau >= 0.0)) throw DomainError("delay must be non-negative");
  if (!(p.saturation > 0.0)) throw DomainError("correlation model needs saturation > 0");
  const double u = std::min(tau * p.linewidth, 100.0);
  return bloch::excited_population(u, p.saturation, p.detuning / p.linewidth) /
         upper_state_population(p.saturation);
}

/// Homogeneous Poisson process on one channel, generated incrementally.
class PoissonSource {
 public:
  PoissonSource(double rate_hz, std::uint64_t seed, std::uint8_t channel = 0)
      : rate_per_tick_(rate_hz / kTicksPerSecond), channel_(channel), rng_(make_rng(seed)) {
    if (!(rate_hz >= 0.0) || !std::isfinite(rate_hz)) throw DomainError("rate must be finite and non-negative");
    if (rate_per_tick_ > 0.0) next_ = exp_(rng_) / rate_per_tick_;
  }

  /// Appends every event with timestamp < end.
  void generate_until(Ticks end, TagChunk& out) {
    if (rate_per_tick_ <= 0.0) return;
    const double limit = static_cast<double>(end);
    while (next_ < limit) {
      out.push_back(static_cast<Ticks>(next_), channel_);
      next_ += exp_(rng_) / rate_per_tick_;
    }
  }

 private:
  double rate_per_tick_;
  std::uint8_t channel_;
  Rng rng_;
  std::exponential_distribution<double> exp_{1.0};
  double next_ = 0.0;
};

/// Single driven emitter as a renewal process of quantum jumps.
///
/// After each jump the atom is in the ground state; the time to the next
/// jump is drawn from the no-jump survival law by inverting its cumulative
/// hazard at an Exp(1) variate. Each jump yields a detectable photon with
/// probability β. The emission starts from the ground state at t = 0.
class IonSource {
 public:
  IonSource(const IonParams& p, std::uint64_t seed, std::uint8_t channel = 0)
      : branching_(p.branching), channel_(channel), rng_(make_rng(seed)) {
    p.validate();
    if (p.saturation == 0.0) return;
    transient_ = std::make_shared<const bloch::TwoLevelTransient>(p.saturation, p.detuning / p.linewidth);
    ticks_per_lifetime_ = kTicksPerSecond / p.linewidth;
    advance();
  }

  void generate_until(Ticks end, TagChunk& out) {
    if (!transient_) return;
    const double limit = static_cast<double>(end);
    while (next_ < limit) {
      if (branching_ >= 1.0 || uniform01(rng_) < branching_) out.push_back(static_cast<Ticks>(next_), channel_);
      advance();
    }
  }

  const bloch::TwoLevelTransient* transient() const noexcept { return transient_.get(); }

 private:
  void advance() { next_ += transient_->waiting_time(exp_(rng_)) * ticks_per_lifetime_; }

  double branching_;
  std::uint8_t channel_;
  Rng rng_;
  std::exponential_distribution<double> exp_{1.0};
  std::shared_ptr<const bloch::TwoLevelTransient> transient_;
  double ticks_per_lifetime_ = 0.0;
  double next_ = 0.0;
};

inline TimeTagStream gen_coherent(const CoherentParams& p, Ticks duration, std::uint64_t seed) {
  p.validate();
  PoissonSource source(p.rate_hz, seed);
  TagChunk c;
  source.generate_until(duration, c);
  return TimeTagStream(TimeTagStream::Unchecked{}, std::move(c.t), std::move(c.ch), duration);
}

inline TimeTagStream gen_single_ion(const IonParams& p, Ticks duration, std::uint64_t seed) {
  IonSource source(p, seed);
  TagChunk c;
  source.generate_until(duration, c);
  return TimeTagStream(TimeTagStream::Unchecked{}, std::move(c.t), std::move(c.ch), duration);
}

/// Photons emitted per shelving cycle: geometric, P(n) = βⁿ (1 - β).
inline std::vector<std::uint64_t> gen_shelving_cycles(double branching, std::uint64_t n_cycles, std::uint64_t seed) {
  if (!(branching > 0.0 && branching < 1.0)) throw DomainError("branching ratio must lie in (0, 1)");
  if (n_cycles == 0) throw DomainError("need at least one shelving cycle");
  Rng rng = make_rng(seed);
  std::geometric_distribution<std::uint64_t> geometric(1.0 - branching);
  std::vector<std::uint64_t> counts(n_cycles);
  for (auto& c : counts) c = geometric(rng);
  return counts;
}

}  // namespace g2lab

#endif  // G2LAB_SOURCES_HPP
