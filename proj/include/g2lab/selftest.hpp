#ifndef G2LAB_SELFTEST_HPP
#define G2LAB_SELFTEST_HPP

// Quick oracle checks shipped with the CLI (`g2lab selftest`). Each check
// compares a library result against an independent computation.

#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "g2lab/correlator.hpp"
#include "g2lab/estimators.hpp"
#include "g2lab/sources.hpp"
#include "g2lab/timetag.hpp"

namespace g2lab::selftest {

struct Check {
  std::string name;
  std::function<bool()> run;
};

namespace detail {

inline TimeTagStream random_stream(Rng& rng, std::size_t max_tags, Ticks duration) {
  std::uniform_int_distribution<std::size_t> size(0, max_tags);
  std::uniform_int_distribution<Ticks> when(0, duration - 1);
  std::vector<Ticks> t(size(rng));
  for (auto& x : t) x = when(rng);
  return TimeTagStream::from_times(std::move(t), duration);
}

/// All ordered pairs with |bin difference| <= lags; the auto variant
/// includes self-pairs.
inline std::vector<std::uint64_t> brute_pairs(const TimeTagStream& a, const TimeTagStream& b, Ticks w,
                                              std::int64_t lags, bool auto_mode) {
  const std::uint64_t bins = a.duration() / w;
  std::vector<std::uint64_t> out(auto_mode ? lags + 1 : 2 * lags + 1, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto bi = static_cast<std::int64_t>(a.timestamps()[i] / w);
    if (static_cast<std::uint64_t>(bi) >= bins) continue;
    for (std::size_t j = 0; j < b.size(); ++j) {
      const auto bj = static_cast<std::int64_t>(b.timestamps()[j] / w);
      if (static_cast<std::uint64_t>(bj) >= bins) continue;
      const std::int64_t k = bj - bi;
      if (auto_mode) {
        if (k >= 0 && k <= lags) ++out[static_cast<std::size_t>(k)];
      } else if (k >= -lags && k <= lags) {
        ++out[static_cast<std::size_t>(k + lags)];
      }
    }
  }
  return out;
}

}  // namespace detail

inline std::vector<Check> checks() {
  return {
      {"merge orders ties by channel",
       [] {
         auto a = TimeTagStream::from_tags(std::vector<TimeTag>{{1, 0}, {5, 0}, {9, 0}}, 10);
         auto b = TimeTagStream::from_tags(std::vector<TimeTag>{{3, 1}, {5, 1}}, 10);
         return merge(a, b).tags() == std::vector<TimeTag>{{1, 0}, {3, 1}, {5, 0}, {5, 1}, {9, 0}};
       }},
      {"non-paralyzable dead time",
       [] {
         auto s = TimeTagStream::from_times({0, 1000, 3000}, 4000);
         return apply_dead_time(s, 2000).timestamps().size() == 2 && apply_dead_time(s, 2000)[1].timestamp == 3000;
       }},
      {"bin counts drop nothing inside complete bins",
       [] {
         auto s = TimeTagStream::from_times({200, 700, 1100}, 2000);
         return bin_counts(s, 1000) == std::vector<std::uint64_t>{2, 1};
       }},
      {"upper-state population at S = 1", [] { return std::abs(upper_state_population(1.0) - 0.25) < 1e-15; }},
      {"emitter correlation vanishes at zero delay", [] { return ion_g2_model(0.0, IonParams{}) == 0.0; }},
      {"emitter correlation settles to one",
       [] {
         IonParams p;
         return std::abs(ion_g2_model(100.0 / p.linewidth, p) - 1.0) < 1e-3;
       }},
      {"detection pmf matches binomial thinning sum",
       [] {
         const double beta = 0.995, eta = 0.0461;
         for (std::uint64_t k = 0; k <= 50; ++k) {
           long double sum = 0;
           for (std::uint64_t n = k; n <= 100000; ++n) {
             const long double lc = std::lgamma(n + 1.0L) - std::lgamma(k + 1.0L) - std::lgamma(n - k + 1.0L);
             sum += std::exp(lc + k * std::log((long double)eta) + (n - k) * std::log1p(-(long double)eta) +
                             n * std::log((long double)beta)) *
                    (1 - (long double)beta);
           }
           if (std::abs(static_cast<double>(sum) - detection_pmf(k, beta, eta)) > 1e-12) return false;
         }
         return true;
       }},
      {"correlator equals brute-force pair enumeration",
       [] {
         Rng rng = make_rng(2024);
         for (int trial = 0; trial < 20; ++trial) {
           const Ticks duration = 50'000 + trial * 1'003;
           auto a = detail::random_stream(rng, 300, duration);
           auto b = detail::random_stream(rng, 300, duration);
           const Ticks w = 1000;
           const std::int64_t lags = 7;
           if (cross_correlate(a, b, w, lags * w, 1).raw_pairs != detail::brute_pairs(a, b, w, lags, false)) {
             return false;
           }
           if (auto_correlate(a, w, lags * w, 1).raw_pairs != detail::brute_pairs(a, a, w, lags, true)) return false;
         }
         return true;
       }},
      {"commutator of a one-photon Fock bin",
       [] { return commutator_zero_delay({2, 0}, {1, 0}, {1, 0}).value == 1.0; }},
  };
}

/// Runs every check, printing one line each. Returns the number of failures.
inline int run_all(std::ostream& os) {
  int failures = 0;
  for (const auto& c : checks()) {
    bool ok = false;
    try {
      ok = c.run();
    } catch (const std::exception& e) {
      os << "  exception: " << e.what() << '\n';
    }
    os << (ok ? "PASS  " : "FAIL  ") << c.name << '\n';
    failures += ok ? 0 : 1;
  }
  return failures;
}

}  // namespace g2lab::selftest

#endif  // G2LAB_SELFTEST_HPP
