#ifndef G2LAB_TIMETAG_HPP
#define G2LAB_TIMETAG_HPP

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "g2lab/errors.hpp"
#include "g2lab/random.hpp"

namespace g2lab {

/// Time in integer picoseconds.
using Ticks = std::uint64_t;

inline constexpr std::uint32_t kTicksPerNs = 1000;
inline constexpr double kTicksPerSecond = 1e12;

inline Ticks ns_to_ticks(double ns) {
  if (!(ns >= 0.0) || !std::isfinite(ns)) throw DomainError("time must be finite and non-negative");
  return static_cast<Ticks>(std::llround(ns * kTicksPerNs));
}

inline Ticks seconds_to_ticks(double s) {
  if (!(s >= 0.0) || !std::isfinite(s)) throw DomainError("time must be finite and non-negative");
  return static_cast<Ticks>(std::llround(s * kTicksPerSecond));
}

inline constexpr double ticks_to_ns(Ticks t) { return static_cast<double>(t) / kTicksPerNs; }
inline constexpr double ticks_to_seconds(Ticks t) { return static_cast<double>(t) / kTicksPerSecond; }

struct TimeTag {
  Ticks timestamp = 0;
  std::uint8_t channel = 0;

  friend constexpr auto operator<=>(const TimeTag&, const TimeTag&) = default;
};

/// Mutable struct-of-arrays buffer of tags, used by the streaming stages.
/// Sorted by (timestamp, channel) wherever a stage requires it.
struct TagChunk {
  std::vector<Ticks> t;
  std::vector<std::uint8_t> ch;

  std::size_t size() const noexcept { return t.size(); }
  bool empty() const noexcept { return t.empty(); }
  void clear() noexcept {
    t.clear();
    ch.clear();
  }
  void push_back(Ticks ts, std::uint8_t c) {
    t.push_back(ts);
    ch.push_back(c);
  }
  void reserve(std::size_t n) {
    t.reserve(n);
    ch.reserve(n);
  }
};

inline bool tag_less(Ticks ta, std::uint8_t ca, Ticks tb, std::uint8_t cb) noexcept {
  return ta < tb || (ta == tb && ca < cb);
}

/// Sorted merge of two sorted chunks; ties ordered by channel, then `a` first.
inline void merge_chunks(const TagChunk& a, const TagChunk& b, TagChunk& out) {
  out.clear();
  out.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (tag_less(b.t[j], b.ch[j], a.t[i], a.ch[i])) {
      out.push_back(b.t[j], b.ch[j]);
      ++j;
    } else {
      out.push_back(a.t[i], a.ch[i]);
      ++i;
    }
  }
  for (; i < a.size(); ++i) out.push_back(a.t[i], a.ch[i]);
  for (; j < b.size(); ++j) out.push_back(b.t[j], b.ch[j]);
}

/// Sorted photon detection record over the window [0, duration).
///
/// Invariants, checked on construction: tags ordered by (timestamp, channel)
/// and every timestamp < duration. Immutable afterwards.
class TimeTagStream {
 public:
  struct Unchecked {};

  TimeTagStream() = default;

  TimeTagStream(std::vector<Ticks> timestamps, std::vector<std::uint8_t> channels, Ticks duration,
                std::uint32_t ticks_per_ns = kTicksPerNs)
      : t_(std::move(timestamps)), ch_(std::move(channels)), duration_(duration), ticks_per_ns_(ticks_per_ns) {
    validate();
  }

  TimeTagStream(Unchecked, std::vector<Ticks> timestamps, std::vector<std::uint8_t> channels, Ticks duration,
                std::uint32_t ticks_per_ns = kTicksPerNs) noexcept
      : t_(std::move(timestamps)), ch_(std::move(channels)), duration_(duration), ticks_per_ns_(ticks_per_ns) {}

  TimeTagStream(TagChunk chunk, Ticks duration) : TimeTagStream(std::move(chunk.t), std::move(chunk.ch), duration) {}

  static TimeTagStream from_tags(std::span<const TimeTag> tags, Ticks duration) {
    std::vector<Ticks> t;
    std::vector<std::uint8_t> ch;
    t.reserve(tags.size());
    ch.reserve(tags.size());
    for (const auto& tag : tags) {
      t.push_back(tag.timestamp);
      ch.push_back(tag.channel);
    }
    return TimeTagStream(std::move(t), std::move(ch), duration);
  }

  /// Builds a stream from unsorted tags, all on one channel.
  static TimeTagStream from_times(std::vector<Ticks> times, Ticks duration, std::uint8_t channel = 0) {
    std::sort(times.begin(), times.end());
    std::vector<std::uint8_t> ch(times.size(), channel);
    return TimeTagStream(std::move(times), std::move(ch), duration);
  }

  std::size_t size() const noexcept { return t_.size(); }
  bool empty() const noexcept { return t_.empty(); }
  Ticks duration() const noexcept { return duration_; }
  std::uint32_t ticks_per_ns() const noexcept { return ticks_per_ns_; }
  double ticks_per_second() const noexcept { return ticks_per_ns_ * 1e9; }

  std::span<const Ticks> timestamps() const noexcept { return t_; }
  std::span<const std::uint8_t> channels() const noexcept { return ch_; }
  TimeTag operator[](std::size_t i) const noexcept { return {t_[i], ch_[i]}; }

  std::vector<TimeTag> tags() const {
    std::vector<TimeTag> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = (*this)[i];
    return out;
  }

  TagChunk to_chunk() const { return TagChunk{t_, ch_}; }

  /// Mean detection rate in counts per second.
  double rate_hz() const noexcept {
    return duration_ == 0 ? 0.0 : static_cast<double>(size()) / (static_cast<double>(duration_) / ticks_per_second());
  }

  friend bool operator==(const TimeTagStream&, const TimeTagStream&) = default;

 private:
  void validate() const {
    if (t_.size() != ch_.size()) throw FormatError("timestamp and channel arrays differ in length");
    if (ticks_per_ns_ == 0) throw FormatError("resolution must be non-zero");
    for (std::size_t i = 0; i < t_.size(); ++i) {
      if (t_[i] >= duration_) {
        throw FormatError("tag " + std::to_string(i) + " at " + std::to_string(t_[i]) + " lies outside window of " +
                          std::to_string(duration_) + " ticks");
      }
      if (i > 0 && tag_less(t_[i], ch_[i], t_[i - 1], ch_[i - 1])) {
        throw FormatError("tag " + std::to_string(i) + " is out of order");
      }
    }
  }

  std::vector<Ticks> t_;
  std::vector<std::uint8_t> ch_;
  Ticks duration_ = 0;
  std::uint32_t ticks_per_ns_ = kTicksPerNs;
};

inline void require_compatible(const TimeTagStream& a, const TimeTagStream& b) {
  if (a.duration() != b.duration()) {
    throw ConfigError("stream durations differ: " + std::to_string(a.duration()) + " vs " +
                      std::to_string(b.duration()));
  }
  if (a.ticks_per_ns() != b.ticks_per_ns()) throw ConfigError("stream resolutions differ");
}

inline TimeTagStream merge(const TimeTagStream& a, const TimeTagStream& b) {
  require_compatible(a, b);
  TagChunk out;
  merge_chunks(a.to_chunk(), b.to_chunk(), out);
  return TimeTagStream(TimeTagStream::Unchecked{}, std::move(out.t), std::move(out.ch), a.duration(), a.ticks_per_ns());
}

/// Independent Bernoulli retention of each tag. Consumes exactly one draw per
/// tag, so feeding a stream in consecutive chunks gives the same result as
/// feeding it whole.
class Thinner {
 public:
  Thinner(double p, std::uint64_t seed) : p_(p), rng_(make_rng(seed)) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("retention probability must lie in [0, 1]");
  }

  void apply(TagChunk& c) {
    std::size_t w = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (uniform01(rng_) < p_) {
        c.t[w] = c.t[i];
        c.ch[w] = c.ch[i];
        ++w;
      }
    }
    c.t.resize(w);
    c.ch.resize(w);
  }

 private:
  double p_;
  Rng rng_;
};

/// Non-paralyzable dead time: a tag survives iff it arrives at least `dead`
/// after the last surviving tag. State carries across chunks.
class DeadTimeFilter {
 public:
  explicit DeadTimeFilter(Ticks dead) : dead_(dead) {}

  void apply(TagChunk& c) {
    if (dead_ == 0) return;
    std::size_t w = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!last_ || c.t[i] >= *last_ + dead_) {
        last_ = c.t[i];
        c.t[w] = c.t[i];
        c.ch[w] = c.ch[i];
        ++w;
      }
    }
    c.t.resize(w);
    c.ch.resize(w);
  }

 private:
  Ticks dead_;
  std::optional<Ticks> last_;
};

inline TimeTagStream thin(const TimeTagStream& s, double p, std::uint64_t seed) {
  Thinner thinner(p, seed);
  TagChunk c = s.to_chunk();
  thinner.apply(c);
  return TimeTagStream(TimeTagStream::Unchecked{}, std::move(c.t), std::move(c.ch), s.duration(), s.ticks_per_ns());
}

inline TimeTagStream apply_dead_time(const TimeTagStream& s, Ticks dead) {
  DeadTimeFilter filter(dead);
  TagChunk c = s.to_chunk();
  filter.apply(c);
  return TimeTagStream(TimeTagStream::Unchecked{}, std::move(c.t), std::move(c.ch), s.duration(), s.ticks_per_ns());
}

/// Number of complete bins of width `bin_width` inside the stream window.
inline std::uint64_t complete_bins(Ticks duration, Ticks bin_width) {
  if (bin_width == 0) throw DomainError("bin width must be positive");
  return duration / bin_width;
}

/// Dense per-bin counts over the complete bins; a trailing partial bin is dropped.
inline std::vector<std::uint64_t> bin_counts(const TimeTagStream& s, Ticks bin_width) {
  const std::uint64_t bins = complete_bins(s.duration(), bin_width);
  std::vector<std::uint64_t> counts(bins, 0);
  for (Ticks t : s.timestamps()) {
    const std::uint64_t b = t / bin_width;
    if (b >= bins) break;
    ++counts[b];
  }
  return counts;
}

}  // namespace g2lab

#endif  // G2LAB_TIMETAG_HPP
