#ifndef G2LAB_TIMETAG_IO_HPP
#define G2LAB_TIMETAG_IO_HPP

// TTG1 binary time-tag files:
//
//   offset  size  field
//   0       4     magic "TTG1"
//   4       4     u32 resolution, ticks per nanosecond (1000)
//   8       8     u64 duration in ticks
//   16      8     u64 record count
//   24      9*n   records: u64 timestamp, u8 channel
//
// All integers little-endian.

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "g2lab/errors.hpp"
#include "g2lab/timetag.hpp"

namespace g2lab {

inline constexpr std::array<char, 4> kTtgMagic = {'T', 'T', 'G', '1'};
inline constexpr std::size_t kTtgHeaderSize = 24;
inline constexpr std::size_t kTtgRecordSize = 9;

namespace detail {

template <typename T>
void put_le(char* out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out[i] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
}

template <typename T>
T get_le(const char* in) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[i])) << (8 * i);
  return static_cast<T>(v);
}

inline std::array<char, kTtgHeaderSize> encode_header(std::uint32_t ticks_per_ns, Ticks duration, std::uint64_t count) {
  std::array<char, kTtgHeaderSize> h{};
  std::memcpy(h.data(), kTtgMagic.data(), 4);
  put_le<std::uint32_t>(h.data() + 4, ticks_per_ns);
  put_le<std::uint64_t>(h.data() + 8, duration);
  put_le<std::uint64_t>(h.data() + 16, count);
  return h;
}

inline void write_records(std::ostream& os, std::span<const Ticks> t, std::span<const std::uint8_t> ch) {
  constexpr std::size_t kBatch = 4096;
  std::array<char, kBatch * kTtgRecordSize> buf;
  for (std::size_t i = 0; i < t.size(); i += kBatch) {
    const std::size_t n = std::min(kBatch, t.size() - i);
    for (std::size_t k = 0; k < n; ++k) {
      put_le<std::uint64_t>(buf.data() + k * kTtgRecordSize, t[i + k]);
      buf[k * kTtgRecordSize + 8] = static_cast<char>(ch[i + k]);
    }
    os.write(buf.data(), static_cast<std::streamsize>(n * kTtgRecordSize));
  }
}

}  // namespace detail

inline void write_ttg(std::ostream& os, const TimeTagStream& s) {
  const auto header = detail::encode_header(s.ticks_per_ns(), s.duration(), s.size());
  os.write(header.data(), header.size());
  detail::write_records(os, s.timestamps(), s.channels());
}

inline TimeTagStream read_ttg(std::istream& is) {
  std::array<char, kTtgHeaderSize> h{};
  if (!is.read(h.data(), h.size())) throw FormatError("TTG1: truncated header");
  if (std::memcmp(h.data(), kTtgMagic.data(), 4) != 0) throw FormatError("TTG1: bad magic");
  const auto ticks_per_ns = detail::get_le<std::uint32_t>(h.data() + 4);
  const auto duration = detail::get_le<std::uint64_t>(h.data() + 8);
  const auto count = detail::get_le<std::uint64_t>(h.data() + 16);

  std::vector<Ticks> t;
  std::vector<std::uint8_t> ch;
  constexpr std::size_t kBatch = 4096;
  std::array<char, kBatch * kTtgRecordSize> buf;
  std::uint64_t remaining = count;
  while (remaining > 0) {
    const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(kBatch, remaining));
    if (!is.read(buf.data(), static_cast<std::streamsize>(n * kTtgRecordSize))) {
      throw FormatError("TTG1: truncated records (" + std::to_string(count - remaining + is.gcount() / kTtgRecordSize) +
                        " of " + std::to_string(count) + ")");
    }
    for (std::size_t k = 0; k < n; ++k) {
      t.push_back(detail::get_le<std::uint64_t>(buf.data() + k * kTtgRecordSize));
      ch.push_back(static_cast<std::uint8_t>(buf[k * kTtgRecordSize + 8]));
    }
    remaining -= n;
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("TTG1: trailing bytes after last record");
  return TimeTagStream(std::move(t), std::move(ch), duration, ticks_per_ns);
}

/// Writes `content` to `path` through a temporary sibling and a rename, so a
/// crash never leaves a partial file under the final name.
template <typename Writer>
void write_atomically(const std::filesystem::path& path, Writer&& write) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
    write(os);
    os.flush();
    if (!os) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

inline void save_ttg(const std::filesystem::path& path, const TimeTagStream& s) {
  write_atomically(path, [&](std::ostream& os) { write_ttg(os, s); });
}

inline TimeTagStream load_ttg(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_ttg(is);
}

/// Appends chunks to a TTG1 file as they are produced; the record count in
/// the header is patched on finish().
class TtgStreamWriter {
 public:
  TtgStreamWriter(std::filesystem::path path, Ticks duration)
      : path_(std::move(path)), tmp_(path_), duration_(duration) {
    tmp_ += ".tmp";
    os_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!os_) throw IoError("cannot open " + tmp_.string() + " for writing");
    const auto header = detail::encode_header(kTicksPerNs, duration_, 0);
    os_.write(header.data(), header.size());
  }

  void append(const TagChunk& c) {
    detail::write_records(os_, c.t, c.ch);
    count_ += c.size();
  }

  void finish() {
    const auto header = detail::encode_header(kTicksPerNs, duration_, count_);
    os_.seekp(0);
    os_.write(header.data(), header.size());
    os_.close();
    if (!os_) throw IoError("write failed: " + tmp_.string());
    std::error_code ec;
    std::filesystem::rename(tmp_, path_, ec);
    if (ec) throw IoError("cannot rename " + tmp_.string() + ": " + ec.message());
  }

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  Ticks duration_;
  std::uint64_t count_ = 0;
  std::ofstream os_;
};

}  // namespace g2lab

#endif  // G2LAB_TIMETAG_IO_HPP
