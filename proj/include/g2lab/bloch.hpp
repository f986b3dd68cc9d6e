#ifndef G2LAB_BLOCH_HPP
#define G2LAB_BLOCH_HPP

// Optical Bloch equations of a driven two-level atom in the rotating frame.
//
// Time is measured in units of the excited-state lifetime 1/Γ, so the decay
// rate is 1 and the detuning and Rabi frequency are given in units of Γ.
// With ρ_eg = x + i y:
//
//   dρ_ee/du = -Ω y - ρ_ee
//   dx/du    = -Δ y - x/2
//   dy/du    =  Δ x - (Ω/2)(ρ_gg - ρ_ee) - y/2
//
// The full master equation has ρ_gg = 1 - ρ_ee. The conditional (no-jump)
// evolution drops the recycling term, so ρ_gg obeys dρ_gg/du = Ω y and the
// trace decays; the trace is the probability that no photon has been
// emitted since the last one.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "g2lab/errors.hpp"

namespace g2lab::bloch {

/// Rabi frequency (units of Γ) that produces saturation `s` at detuning
/// `detuning` (units of Γ): s = (Ω²/2) / (Δ² + 1/4).
inline double rabi_from_saturation(double s, double detuning) {
  if (!(s >= 0.0)) throw DomainError("saturation must be non-negative");
  return std::sqrt(2.0 * s * (detuning * detuning + 0.25));
}

/// Steady-state excited population, S / (2 (1 + S)).
inline double steady_excited_population(double s) {
  if (!(s >= 0.0)) throw DomainError("saturation must be non-negative");
  return s / (2.0 * (1.0 + s));
}

/// Fixed RK4 step: at most 1/200 of a lifetime and small against the
/// fastest coherent rotation.
inline double rk4_step(double rabi, double detuning) {
  const double fastest = std::max({1.0, rabi, std::abs(detuning)});
  return std::min(1.0 / 200.0, 0.02 / fastest);
}

inline constexpr std::size_t kMaxSteps = 50'000'000;

struct BlochState {
  double gg, ee, x, y;
};

template <bool Recycle>
BlochState derivative(const BlochState& s, double rabi, double detuning) {
  const double gg = Recycle ? 1.0 - s.ee : s.gg;
  return {rabi * s.y, -rabi * s.y - s.ee, -detuning * s.y - 0.5 * s.x,
          detuning * s.x - 0.5 * rabi * (gg - s.ee) - 0.5 * s.y};
}

template <bool Recycle>
BlochState rk4(const BlochState& s, double h, double rabi, double detuning) {
  auto axpy = [](const BlochState& a, double k, const BlochState& d) {
    return BlochState{a.gg + k * d.gg, a.ee + k * d.ee, a.x + k * d.x, a.y + k * d.y};
  };
  const BlochState k1 = derivative<Recycle>(s, rabi, detuning);
  const BlochState k2 = derivative<Recycle>(axpy(s, h / 2, k1), rabi, detuning);
  const BlochState k3 = derivative<Recycle>(axpy(s, h / 2, k2), rabi, detuning);
  const BlochState k4 = derivative<Recycle>(axpy(s, h, k3), rabi, detuning);
  BlochState out{s.gg + h / 6 * (k1.gg + 2 * k2.gg + 2 * k3.gg + k4.gg),
                 s.ee + h / 6 * (k1.ee + 2 * k2.ee + 2 * k3.ee + k4.ee),
                 s.x + h / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x),
                 s.y + h / 6 * (k1.y + 2 * k2.y + 2 * k3.y + k4.y)};
  if (Recycle) out.gg = 1.0 - out.ee;
  if (!std::isfinite(out.gg) || !std::isfinite(out.ee) || !std::isfinite(out.x) || !std::isfinite(out.y)) {
    throw NumericalError("Bloch integration produced a non-finite state");
  }
  return out;
}

inline constexpr BlochState kGroundState{1.0, 0.0, 0.0, 0.0};

/// Excited population at time `u` after starting in the ground state,
/// integrated directly with RK4 (no table).
inline double excited_population(double u, double saturation, double detuning) {
  if (!(u >= 0.0)) throw DomainError("delay must be non-negative");
  const double rabi = rabi_from_saturation(saturation, detuning);
  const double h_max = rk4_step(rabi, detuning);
  const double steps_real = std::ceil(u / h_max);
  if (steps_real > static_cast<double>(kMaxSteps)) throw NumericalError("Bloch integration needs too many steps");
  const auto steps = static_cast<std::size_t>(steps_real);
  if (steps == 0) return 0.0;
  const double h = u / static_cast<double>(steps);
  BlochState s = kGroundState;
  for (std::size_t i = 0; i < steps; ++i) s = rk4<true>(s, h, rabi, detuning);
  return s.ee;
}

/// Tabulated transients for one operating point, used on the hot path of
/// the emitter simulation.
///
/// Holds ρ_ee(u)/ρ_ee(∞) from the ground state (the intensity correlation of
/// the emitted light) and the cumulative emission hazard of the no-jump
/// evolution, H(u) = -ln Tr ρ̃(u), which is what waiting times are drawn from.
class TwoLevelTransient {
 public:
  TwoLevelTransient(double saturation, double detuning, double u_max = 100.0)
      : saturation_(saturation), detuning_(detuning), u_max_(u_max) {
    if (!(saturation > 0.0)) throw DomainError("transient table needs saturation > 0");
    if (!(u_max > 0.0)) throw DomainError("table range must be positive");
    rabi_ = rabi_from_saturation(saturation, detuning);
    steady_ = steady_excited_population(saturation);
    const double h_max = rk4_step(rabi_, detuning);
    const double steps_real = std::ceil(u_max / h_max);
    if (steps_real > static_cast<double>(kMaxSteps)) throw NumericalError("Bloch table needs too many steps");
    const auto steps = static_cast<std::size_t>(steps_real);
    h_ = u_max / static_cast<double>(steps);

    g2_.resize(steps + 1);
    hazard_.resize(steps + 1);
    BlochState full = kGroundState;
    BlochState cond = kGroundState;
    g2_[0] = 0.0;
    hazard_[0] = 0.0;
    for (std::size_t i = 1; i <= steps; ++i) {
      full = rk4<true>(full, h_, rabi_, detuning);
      cond = rk4<false>(cond, h_, rabi_, detuning);
      g2_[i] = std::max(0.0, full.ee) / steady_;
      const double survival = cond.gg + cond.ee;
      if (!(survival > 0.0)) throw NumericalError("no-jump survival underflowed");
      hazard_[i] = std::max(hazard_[i - 1], -std::log(survival));
    }
    tail_rate_ = (hazard_[steps] - hazard_[steps - 1]) / h_;
    if (!(tail_rate_ > 0.0)) throw NumericalError("emission hazard did not converge to a positive rate");
    build_guide();
  }

  double saturation() const noexcept { return saturation_; }
  double detuning() const noexcept { return detuning_; }
  double rabi() const noexcept { return rabi_; }
  double step() const noexcept { return h_; }
  double range() const noexcept { return u_max_; }
  double steady_state() const noexcept { return steady_; }

  /// Normalized intensity correlation at delay u; held constant beyond the table.
  double g2(double u) const noexcept { return interpolate(g2_, u); }

  /// -ln P(no emission during [0, u]).
  double cumulative_hazard(double u) const noexcept {
    if (u >= u_max_) return hazard_.back() + tail_rate_ * (u - u_max_);
    return interpolate(hazard_, u);
  }

  /// Inverts the cumulative hazard: returns the waiting time u with H(u) = e.
  /// With e ~ Exp(1) the result is distributed as the time to the next photon.
  double waiting_time(double e) const noexcept {
    const double h_end = hazard_.back();
    if (e >= h_end) return u_max_ + (e - h_end) / tail_rate_;
    if (e <= 0.0) return 0.0;
    std::size_t j = std::min(guide_.size() - 1, static_cast<std::size_t>(e / guide_width_));
    std::size_t i = guide_[j];
    while (hazard_[i + 1] <= e) ++i;
    const double frac = (e - hazard_[i]) / (hazard_[i + 1] - hazard_[i]);
    return (static_cast<double>(i) + frac) * h_;
  }

 private:
  double interpolate(const std::vector<double>& table, double u) const noexcept {
    if (u <= 0.0) return table.front();
    const double pos = u / h_;
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= table.size()) return table.back();
    const double frac = pos - static_cast<double>(i);
    return table[i] + frac * (table[i + 1] - table[i]);
  }

  void build_guide() {
    const std::size_t cells = hazard_.size() - 1;
    guide_.assign(cells, 0);
    guide_width_ = hazard_.back() / static_cast<double>(cells);
    std::size_t i = 0;
    for (std::size_t j = 0; j < cells; ++j) {
      const double level = static_cast<double>(j) * guide_width_;
      while (i + 1 < cells && hazard_[i + 1] <= level) ++i;
      guide_[j] = i;
    }
  }

  double saturation_;
  double detuning_;
  double u_max_;
  double rabi_ = 0.0;
  double steady_ = 0.0;
  double h_ = 0.0;
  double tail_rate_ = 0.0;
  double guide_width_ = 0.0;
  std::vector<double> g2_;
  std::vector<double> hazard_;
  std::vector<std::size_t> guide_;
};

}  // namespace g2lab::bloch

#endif  // G2LAB_BLOCH_HPP
