#ifndef G2LAB_CORRELATOR_HPP
#define G2LAB_CORRELATOR_HPP

// Binned-product intensity correlations.
//
// With n_b the number of tags in bin b of width T_bw and B complete bins,
//
//   g2_cross(k) = B Σ_b n1_b n2_{b+k} / (N1 N2),   k ∈ [-K, K]
//   g2_auto(k)  = B Σ_b n_b  n_{b+k}  / N²,        k ∈ [0, K]
//
// The auto-correlation keeps self-pairs: at k = 0 its numerator is Σ n_b².
// Bins are never materialized; pair counts come from sweeping the sorted
// timestamps with the bin index computed as t / T_bw.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "g2lab/errors.hpp"
#include "g2lab/timetag.hpp"

namespace g2lab {

enum class CorrelationKind { Auto, Cross };

inline const char* to_string(CorrelationKind k) { return k == CorrelationKind::Auto ? "auto" : "cross"; }

struct CorrelationHistogram {
  CorrelationKind kind = CorrelationKind::Cross;
  Ticks bin_width = 0;
  /// Largest lag in bins (K).
  std::int64_t max_lag_bins = 0;
  /// One entry per lag bin, starting at min_lag(): -K for cross, 0 for auto.
  std::vector<std::uint64_t> raw_pairs;
  std::vector<double> g2;
  std::vector<double> std_error;
  std::uint64_t n1 = 0;
  std::uint64_t n2 = 0;
  Ticks duration = 0;
  std::uint64_t bins = 0;

  std::int64_t min_lag() const noexcept { return kind == CorrelationKind::Auto ? 0 : -max_lag_bins; }
  std::size_t size() const noexcept { return raw_pairs.size(); }
  std::int64_t lag_at(std::size_t i) const noexcept { return min_lag() + static_cast<std::int64_t>(i); }
  Ticks max_lag() const noexcept { return static_cast<Ticks>(max_lag_bins) * bin_width; }

  /// Index of lag k; the auto-correlation is even in k.
  std::size_t index_of(std::int64_t k) const {
    if (kind == CorrelationKind::Auto) k = k < 0 ? -k : k;
    if (k < min_lag() || k > max_lag_bins) throw ConfigError("lag " + std::to_string(k) + " outside histogram");
    return static_cast<std::size_t>(k - min_lag());
  }

  double g2_at(std::int64_t k) const { return g2[index_of(k)]; }
  double std_error_at(std::int64_t k) const { return std_error[index_of(k)]; }
  std::uint64_t raw_at(std::int64_t k) const { return raw_pairs[index_of(k)]; }

  /// Mean detected counts per bin of the combined input.
  double mean_counts_per_bin() const noexcept {
    if (bins == 0) return 0.0;
    const double total = kind == CorrelationKind::Auto ? static_cast<double>(n1) : static_cast<double>(n1 + n2);
    return total / static_cast<double>(bins);
  }

  friend bool operator==(const CorrelationHistogram&, const CorrelationHistogram&) = default;
};

/// Fills std_error with the Poisson pair-count error g2/√raw; +∞ where no
/// pairs were counted.
inline CorrelationHistogram g2_statistical_error(CorrelationHistogram h) {
  h.std_error.assign(h.size(), 0.0);
  for (std::size_t i = 0; i < h.size(); ++i) {
    h.std_error[i] = h.raw_pairs[i] == 0 ? std::numeric_limits<double>::infinity()
                                         : h.g2[i] / std::sqrt(static_cast<double>(h.raw_pairs[i]));
  }
  return h;
}

/// Normalizes raw pair counts into a histogram with errors.
inline CorrelationHistogram make_histogram(CorrelationKind kind, Ticks bin_width, std::int64_t max_lag_bins,
                                           std::vector<std::uint64_t> raw, std::uint64_t n1, std::uint64_t n2,
                                           Ticks duration) {
  CorrelationHistogram h;
  h.kind = kind;
  h.bin_width = bin_width;
  h.max_lag_bins = max_lag_bins;
  h.raw_pairs = std::move(raw);
  h.n1 = n1;
  h.n2 = n2;
  h.duration = duration;
  h.bins = complete_bins(duration, bin_width);
  const double norm = static_cast<double>(n1) * static_cast<double>(n2);
  h.g2.resize(h.raw_pairs.size());
  for (std::size_t i = 0; i < h.raw_pairs.size(); ++i) {
    h.g2[i] = norm > 0.0 ? static_cast<double>(h.bins) * static_cast<double>(h.raw_pairs[i]) / norm : 0.0;
  }
  return g2_statistical_error(std::move(h));
}

/// Worker threads for correlation: G2LAB_THREADS if set, else the hardware count.
inline unsigned default_thread_count() {
  if (const char* env = std::getenv("G2LAB_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {

inline std::int64_t lag_bins_for(Ticks bin_width, Ticks max_lag) {
  if (bin_width == 0) throw DomainError("bin width must be positive");
  return static_cast<std::int64_t>(max_lag / bin_width);
}

/// Tags before the end of the last complete bin.
inline std::size_t complete_prefix(std::span<const Ticks> t, Ticks bin_width, std::uint64_t bins) {
  const Ticks end = bins * bin_width;
  return static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), end) - t.begin());
}

/// Cross pair counts for left tags with index in [begin, end).
inline void cross_pairs_range(std::span<const Ticks> a, std::span<const Ticks> b, Ticks w, std::int64_t lags,
                              std::size_t begin, std::size_t end, std::vector<std::uint64_t>& counts) {
  if (begin >= end) return;
  const auto bin = [w](Ticks t) { return static_cast<std::int64_t>(t / w); };
  const auto first_with_bin = [&](std::int64_t target) {
    if (target <= 0) return std::size_t{0};
    const Ticks t = static_cast<Ticks>(target) * w;
    return static_cast<std::size_t>(std::lower_bound(b.begin(), b.end(), t) - b.begin());
  };
  std::size_t lo = first_with_bin(bin(a[begin]) - lags);
  std::size_t hi = lo;
  for (std::size_t i = begin; i < end; ++i) {
    const std::int64_t ba = bin(a[i]);
    while (lo < b.size() && bin(b[lo]) < ba - lags) ++lo;
    if (hi < lo) hi = lo;
    while (hi < b.size() && bin(b[hi]) <= ba + lags) ++hi;
    for (std::size_t j = lo; j < hi; ++j) ++counts[static_cast<std::size_t>(bin(b[j]) - ba + lags)];
  }
}

/// Auto pair counts (self-pairs included, same-bin pairs counted in both
/// orders) for left tags with index in [begin, end).
inline void auto_pairs_range(std::span<const Ticks> t, Ticks w, std::int64_t lags, std::size_t begin,
                             std::size_t end, std::vector<std::uint64_t>& counts) {
  const auto bin = [w](Ticks x) { return static_cast<std::int64_t>(x / w); };
  std::size_t hi = begin;
  for (std::size_t i = begin; i < end; ++i) {
    const std::int64_t bi = bin(t[i]);
    if (hi <= i) hi = i + 1;
    while (hi < t.size() && bin(t[hi]) <= bi + lags) ++hi;
    ++counts[0];
    for (std::size_t j = i + 1; j < hi; ++j) {
      const auto k = static_cast<std::size_t>(bin(t[j]) - bi);
      counts[k] += k == 0 ? 2 : 1;
    }
  }
}

template <typename RangeFn>
std::vector<std::uint64_t> run_chunked(std::size_t n, std::size_t width, unsigned threads, RangeFn&& fn) {
  std::vector<std::uint64_t> total(width, 0);
  threads = std::max(1u, threads);
  if (threads == 1 || n < 2 * static_cast<std::size_t>(threads)) {
    fn(std::size_t{0}, n, total);
    return total;
  }
  std::vector<std::vector<std::uint64_t>> partial(threads, std::vector<std::uint64_t>(width, 0));
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (unsigned k = 0; k < threads; ++k) {
    const std::size_t begin = n * k / threads;
    const std::size_t end = n * (k + 1) / threads;
    workers.emplace_back([&, k, begin, end] { fn(begin, end, partial[k]); });
  }
  for (auto& w : workers) w.join();
  for (const auto& p : partial) {
    for (std::size_t i = 0; i < width; ++i) total[i] += p[i];
  }
  return total;
}

}  // namespace detail

/// Cross-correlation of two streams over signed lags [-max_lag, max_lag].
/// Pair counts are integers, so the result does not depend on `threads`.
inline CorrelationHistogram cross_correlate(const TimeTagStream& s1, const TimeTagStream& s2, Ticks bin_width,
                                            Ticks max_lag, unsigned threads = default_thread_count()) {
  require_compatible(s1, s2);
  const std::int64_t lags = detail::lag_bins_for(bin_width, max_lag);
  const std::uint64_t bins = complete_bins(s1.duration(), bin_width);
  const auto a = s1.timestamps().first(detail::complete_prefix(s1.timestamps(), bin_width, bins));
  const auto b = s2.timestamps().first(detail::complete_prefix(s2.timestamps(), bin_width, bins));
  const std::size_t width = static_cast<std::size_t>(2 * lags + 1);
  auto raw = detail::run_chunked(a.size(), width, threads,
                                 [&](std::size_t begin, std::size_t end, std::vector<std::uint64_t>& counts) {
                                   detail::cross_pairs_range(a, b, bin_width, lags, begin, end, counts);
                                 });
  return make_histogram(CorrelationKind::Cross, bin_width, lags, std::move(raw), a.size(), b.size(), s1.duration());
}

/// Auto-correlation over lags [0, max_lag]; the zero-lag bin keeps self-pairs.
inline CorrelationHistogram auto_correlate(const TimeTagStream& s, Ticks bin_width, Ticks max_lag,
                                           unsigned threads = default_thread_count()) {
  const std::int64_t lags = detail::lag_bins_for(bin_width, max_lag);
  const std::uint64_t bins = complete_bins(s.duration(), bin_width);
  const auto t = s.timestamps().first(detail::complete_prefix(s.timestamps(), bin_width, bins));
  const std::size_t width = static_cast<std::size_t>(lags + 1);
  auto raw = detail::run_chunked(t.size(), width, threads,
                                 [&](std::size_t begin, std::size_t end, std::vector<std::uint64_t>& counts) {
                                   detail::auto_pairs_range(t, bin_width, lags, begin, end, counts);
                                 });
  return make_histogram(CorrelationKind::Auto, bin_width, lags, std::move(raw), t.size(), t.size(), s.duration());
}

/// Incremental auto-correlation for streams that arrive in time-ordered chunks.
/// Each pair is counted when its later tag arrives.
class StreamingAutoCorrelator {
 public:
  StreamingAutoCorrelator(Ticks bin_width, Ticks max_lag, Ticks duration)
      : w_(bin_width), lags_(detail::lag_bins_for(bin_width, max_lag)), duration_(duration),
        bins_(complete_bins(duration, bin_width)), counts_(static_cast<std::size_t>(lags_ + 1), 0) {}

  void feed(const TagChunk& c) {
    for (Ticks t : c.t) add(t);
  }

  void add(Ticks t) {
    const std::int64_t b = static_cast<std::int64_t>(t / w_);
    if (static_cast<std::uint64_t>(b) >= bins_) return;
    while (!recent_.empty() && recent_.front() < b - lags_) recent_.pop_front();
    for (std::int64_t prev : recent_) {
      const auto k = static_cast<std::size_t>(b - prev);
      counts_[k] += k == 0 ? 2 : 1;
    }
    ++counts_[0];
    recent_.push_back(b);
    ++n_;
  }

  std::uint64_t count() const noexcept { return n_; }

  CorrelationHistogram result() const {
    return make_histogram(CorrelationKind::Auto, w_, lags_, counts_, n_, n_, duration_);
  }

 private:
  Ticks w_;
  std::int64_t lags_;
  Ticks duration_;
  std::uint64_t bins_;
  std::vector<std::uint64_t> counts_;
  std::deque<std::int64_t> recent_;
  std::uint64_t n_ = 0;
};

/// Incremental cross-correlation. Both inputs must be fed up to the same
/// time horizon in each call; arrivals are processed in (time, stream) order.
class StreamingCrossCorrelator {
 public:
  StreamingCrossCorrelator(Ticks bin_width, Ticks max_lag, Ticks duration)
      : w_(bin_width), lags_(detail::lag_bins_for(bin_width, max_lag)), duration_(duration),
        bins_(complete_bins(duration, bin_width)), counts_(static_cast<std::size_t>(2 * lags_ + 1), 0) {}

  void feed(const TagChunk& first, const TagChunk& second) {
    std::size_t i = 0, j = 0;
    while (i < first.size() || j < second.size()) {
      if (j >= second.size() || (i < first.size() && first.t[i] <= second.t[j])) {
        add(first.t[i++], 0);
      } else {
        add(second.t[j++], 1);
      }
    }
  }

  void add(Ticks t, int stream) {
    const std::int64_t b = static_cast<std::int64_t>(t / w_);
    if (static_cast<std::uint64_t>(b) >= bins_) return;
    auto& other = recent_[1 - stream];
    while (!other.empty() && other.front() < b - lags_) other.pop_front();
    // lag = bin(second) - bin(first)
    if (stream == 0) {
      for (std::int64_t prev : other) ++counts_[static_cast<std::size_t>(prev - b + lags_)];
    } else {
      for (std::int64_t prev : other) ++counts_[static_cast<std::size_t>(b - prev + lags_)];
    }
    auto& own = recent_[stream];
    while (!own.empty() && own.front() < b - lags_) own.pop_front();
    own.push_back(b);
    ++n_[stream];
  }

  CorrelationHistogram result() const {
    return make_histogram(CorrelationKind::Cross, w_, lags_, counts_, n_[0], n_[1], duration_);
  }

 private:
  Ticks w_;
  std::int64_t lags_;
  Ticks duration_;
  std::uint64_t bins_;
  std::vector<std::uint64_t> counts_;
  std::deque<std::int64_t> recent_[2];
  std::uint64_t n_[2] = {0, 0};
};

}  // namespace g2lab

#endif  // G2LAB_CORRELATOR_HPP
