#ifndef G2LAB_ESTIMATORS_HPP
#define G2LAB_ESTIMATORS_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "g2lab/correlator.hpp"
#include "g2lab/errors.hpp"

namespace g2lab {

/// A measured value with its one-sigma uncertainty.
struct Measured {
  double value = 0.0;
  double error = 0.0;
};

/// Expectation of the field commutator in the post-detection state,
/// (g2_auto(0) - g2_cross(0)) · ⟨N⟩.
struct CommutatorEstimate {
  double value = 0.0;
  double std_error = 0.0;
  Measured g2_auto_0;
  Measured g2_cross_0;
  Measured mean_n;
};

struct EfficiencyEstimate {
  double eta = 0.0;
  double std_error = 0.0;
  /// Pearson χ² of the observed counts against the fitted distribution.
  double fit_residual = 0.0;
  std::uint64_t degrees_of_freedom = 0;
  double mean_detected = 0.0;
  std::uint64_t cycles = 0;
};

struct DelayCommutator {
  std::int64_t lag_bins = 0;
  double lag_ns = 0.0;
  double value = 0.0;
  double std_error = 0.0;
};

/// First-order propagation with the three inputs treated as independent.
inline CommutatorEstimate commutator_zero_delay(Measured g2_auto_0, Measured g2_cross_0, Measured mean_n) {
  if (!(mean_n.value > 0.0)) throw DomainError("mean photon number must be positive");
  CommutatorEstimate c;
  c.g2_auto_0 = g2_auto_0;
  c.g2_cross_0 = g2_cross_0;
  c.mean_n = mean_n;
  const double diff = g2_auto_0.value - g2_cross_0.value;
  c.value = diff * mean_n.value;
  const double n2 = mean_n.value * mean_n.value;
  c.std_error = std::sqrt(n2 * (g2_auto_0.error * g2_auto_0.error + g2_cross_0.error * g2_cross_0.error) +
                          diff * diff * mean_n.error * mean_n.error);
  return c;
}

/// ⟨N⟩ per bin from the total detected count over `bins` complete bins,
/// with its Poisson error.
inline Measured mean_n_from_counts(std::uint64_t total_counts, std::uint64_t bins) {
  if (bins == 0) throw DomainError("need at least one complete bin");
  const double n = static_cast<double>(total_counts);
  return {n / static_cast<double>(bins), std::sqrt(n) / static_cast<double>(bins)};
}

/// (g2_auto(k) - g2_cross(k)) · ⟨N⟩ for every signed lag of the cross histogram.
inline std::vector<DelayCommutator> commutator_vs_delay(const CorrelationHistogram& h_auto,
                                                        const CorrelationHistogram& h_cross, double mean_n) {
  if (h_auto.kind != CorrelationKind::Auto || h_cross.kind != CorrelationKind::Cross) {
    throw ConfigError("commutator_vs_delay needs an auto and a cross histogram");
  }
  if (h_auto.bin_width != h_cross.bin_width || h_auto.max_lag_bins != h_cross.max_lag_bins) {
    throw ConfigError("auto and cross histograms have different bin widths or lag ranges");
  }
  std::vector<DelayCommutator> out;
  out.reserve(h_cross.size());
  for (std::int64_t k = -h_cross.max_lag_bins; k <= h_cross.max_lag_bins; ++k) {
    const double a = h_auto.g2_at(k), c = h_cross.g2_at(k);
    const double ea = h_auto.std_error_at(k), ec = h_cross.std_error_at(k);
    out.push_back({k, static_cast<double>(k) * ticks_to_ns(h_cross.bin_width), (a - c) * mean_n,
                   mean_n * std::sqrt(ea * ea + ec * ec)});
  }
  return out;
}

/// Probability of detecting k photons in one shelving cycle, i.e. the
/// geometric emission law thinned by efficiency η:
/// (1-β) βᵏ ηᵏ / (1 + β(η-1))^(k+1).
inline double detection_pmf(std::uint64_t k, double branching, double eta) {
  if (!(branching > 0.0 && branching < 1.0)) throw DomainError("branching ratio must lie in (0, 1)");
  if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("efficiency must lie in [0, 1]");
  if (eta == 0.0) return k == 0 ? 1.0 : 0.0;
  const double denom = 1.0 + branching * (eta - 1.0);
  return (1.0 - branching) / denom * std::pow(branching * eta / denom, static_cast<double>(k));
}

namespace detail {

/// P(K >= m) under detection_pmf: the detected counts are geometric with
/// ratio βη / (1 + β(η-1)).
inline double detection_tail(std::uint64_t m, double branching, double eta) {
  if (eta == 0.0) return m == 0 ? 1.0 : 0.0;
  const double ratio = branching * eta / (1.0 + branching * (eta - 1.0));
  return std::pow(ratio, static_cast<double>(m));
}

/// Pearson χ² with cells pooled until each expects at least five counts;
/// the last cell is the open tail.
inline std::pair<double, std::uint64_t> pooled_chi_square(const std::map<std::uint64_t, std::uint64_t>& counts,
                                                          std::uint64_t total, double branching, double eta) {
  constexpr double kMinExpected = 5.0;
  const double n = static_cast<double>(total);
  double chi2 = 0.0;
  std::uint64_t cells = 0;
  double obs = 0.0, expct = 0.0;
  std::uint64_t k = 0;
  auto it = counts.begin();
  while (true) {
    const double tail_after = n * detail::detection_tail(k + 1, branching, eta);
    obs += (it != counts.end() && it->first == k) ? static_cast<double>((it++)->second) : 0.0;
    expct += n * detection_pmf(k, branching, eta);
    if (expct >= kMinExpected && tail_after >= kMinExpected) {
      chi2 += (obs - expct) * (obs - expct) / expct;
      ++cells;
      obs = expct = 0.0;
    } else if (tail_after < kMinExpected) {
      double rest = 0.0;
      for (; it != counts.end(); ++it) rest += static_cast<double>(it->second);
      obs += rest;
      expct += tail_after;
      if (expct > 0.0) {
        chi2 += (obs - expct) * (obs - expct) / expct;
        ++cells;
      }
      break;
    }
    ++k;
  }
  return {chi2, cells > 2 ? cells - 2 : 0};
}

}  // namespace detail

/// Maximum-likelihood detection efficiency from a histogram of detected
/// photons per shelving cycle (k -> number of cycles).
///
/// The detected counts are geometric with mean βη/(1-β), so the MLE is
/// η̂ = k̄ (1-β)/β. The error is from the observed Fisher information,
/// I = Σk (1-β) / (η² (1 - β + βη)).
inline EfficiencyEstimate fit_efficiency(const std::map<std::uint64_t, std::uint64_t>& counts, double branching) {
  if (!(branching > 0.0 && branching < 1.0)) throw DomainError("branching ratio must lie in (0, 1)");
  std::uint64_t total = 0;
  double sum_k = 0.0;
  for (const auto& [k, f] : counts) {
    total += f;
    sum_k += static_cast<double>(k) * static_cast<double>(f);
  }
  if (total == 0) throw DomainError("count histogram is empty");

  EfficiencyEstimate est;
  est.cycles = total;
  est.mean_detected = sum_k / static_cast<double>(total);
  est.eta = est.mean_detected * (1.0 - branching) / branching;
  if (est.eta > 1.0) {
    throw InfeasibleEstimate("mean detected count " + std::to_string(est.mean_detected) +
                             " exceeds the emitted mean β/(1-β); efficiency would be " + std::to_string(est.eta));
  }
  if (sum_k > 0.0) {
    const double a = 1.0 - branching + branching * est.eta;
    est.std_error = est.eta * std::sqrt(a / (sum_k * (1.0 - branching)));
  }
  const auto [chi2, dof] = detail::pooled_chi_square(counts, total, branching, est.eta);
  est.fit_residual = chi2;
  est.degrees_of_freedom = dof;
  return est;
}

/// Convenience overload for raw per-cycle counts.
inline EfficiencyEstimate fit_efficiency(const std::vector<std::uint64_t>& per_cycle, double branching) {
  std::map<std::uint64_t, std::uint64_t> hist;
  for (auto k : per_cycle) ++hist[k];
  return fit_efficiency(hist, branching);
}

/// Zero-delay auto-correlation of coherent light: 1 + 1/⟨N⟩.
inline double coherent_g2_auto_prediction(double mean_n) {
  if (!(mean_n > 0.0)) throw DomainError("mean photon number must be positive");
  return 1.0 + 1.0 / mean_n;
}

}  // namespace g2lab

#endif  // G2LAB_ESTIMATORS_HPP
