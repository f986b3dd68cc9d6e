#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "g2lab/timetag.hpp"
#include "g2lab/timetag_io.hpp"

using namespace g2lab;

namespace {

TimeTagStream sample_stream() {
  return TimeTagStream::from_tags(std::vector<TimeTag>{{0, 0}, {5, 1}, {5, 2}, {999, 0}, {1'000'000, 3}}, 2'000'000);
}

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "g2lab_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(TimeTag, UnitConversionsRoundToNearestTick) {
  EXPECT_EQ(ns_to_ticks(1.0), 1000u);
  EXPECT_EQ(ns_to_ticks(1.5), 1500u);
  EXPECT_EQ(ns_to_ticks(0.0004), 0u);
  EXPECT_EQ(seconds_to_ticks(100.0), 100'000'000'000'000ull);
  EXPECT_DOUBLE_EQ(ticks_to_ns(2500), 2.5);
  EXPECT_THROW(ns_to_ticks(-1.0), DomainError);
}

TEST(TimeTag, ConstructionRejectsDisorder) {
  EXPECT_THROW(TimeTagStream({5, 3}, {0, 0}, 10), FormatError);
  EXPECT_THROW(TimeTagStream({5, 5}, {1, 0}, 10), FormatError);
  EXPECT_NO_THROW(TimeTagStream({5, 5}, {0, 1}, 10));
}

TEST(TimeTag, ConstructionRejectsTagsOutsideWindow) {
  EXPECT_THROW(TimeTagStream({10}, {0}, 10), FormatError);
  EXPECT_THROW(TimeTagStream({1, 2}, {0}, 10), FormatError);
}

TEST(TimeTag, FromTimesSorts) {
  auto s = TimeTagStream::from_times({7, 1, 4}, 10, 3);
  EXPECT_EQ(s.tags(), (std::vector<TimeTag>{{1, 3}, {4, 3}, {7, 3}}));
}

TEST(TimeTag, RateIsCountOverDuration) {
  auto s = TimeTagStream::from_times({1, 2, 3, 4}, seconds_to_ticks(2.0));
  EXPECT_DOUBLE_EQ(s.rate_hz(), 2.0);
}

TEST(TimeTag, MergeIsStableAndOrdered) {
  auto a = TimeTagStream::from_tags(std::vector<TimeTag>{{1, 0}, {5, 0}, {9, 0}}, 10);
  auto b = TimeTagStream::from_tags(std::vector<TimeTag>{{3, 1}, {5, 1}}, 10);
  auto m = merge(a, b);
  EXPECT_EQ(m.tags(), (std::vector<TimeTag>{{1, 0}, {3, 1}, {5, 0}, {5, 1}, {9, 0}}));
  EXPECT_EQ(merge(b, a), m);
}

TEST(TimeTag, MergeRequiresMatchingWindows) {
  auto a = TimeTagStream::from_times({1}, 10);
  auto b = TimeTagStream::from_times({1}, 11);
  EXPECT_THROW(merge(a, b), ConfigError);
}

TEST(TimeTag, ThinningExtremes) {
  auto s = sample_stream();
  EXPECT_EQ(thin(s, 1.0, 3), s);
  EXPECT_TRUE(thin(s, 0.0, 3).empty());
  EXPECT_THROW(thin(s, 1.5, 3), DomainError);
  EXPECT_THROW(thin(s, -0.1, 3), DomainError);
}

TEST(TimeTag, ThinningKeepsBinomialFraction) {
  std::vector<Ticks> t(200'000);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = i;
  auto s = TimeTagStream::from_times(t, t.size());
  const double p = 0.3;
  const auto kept = static_cast<double>(thin(s, p, 11).size());
  const double n = static_cast<double>(t.size());
  EXPECT_NEAR(kept, n * p, 5.0 * std::sqrt(n * p * (1 - p)));
}

TEST(TimeTag, ThinningIsChunkInvariant) {
  std::vector<Ticks> t(1000);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 3 * i;
  auto s = TimeTagStream::from_times(t, 3000);
  const auto whole = thin(s, 0.4, 99);

  Thinner thinner(0.4, 99);
  TagChunk all;
  for (std::size_t start = 0; start < t.size(); start += 137) {
    TagChunk c;
    for (std::size_t i = start; i < std::min(t.size(), start + 137); ++i) c.push_back(t[i], 0);
    thinner.apply(c);
    for (std::size_t i = 0; i < c.size(); ++i) all.push_back(c.t[i], c.ch[i]);
  }
  EXPECT_EQ(TimeTagStream(all, 3000), whole);
}

TEST(TimeTag, DeadTimeIsNonParalyzable) {
  // 0 kept; 1000 and 1999 fall inside [0, 2000); 2000 kept; 3000 dropped
  // (measured from 2000, not from the dropped 1999); 4000 kept.
  auto s = TimeTagStream::from_times({0, 1000, 1999, 2000, 3000, 4000}, 5000);
  auto d = apply_dead_time(s, 2000);
  EXPECT_EQ(std::vector<Ticks>(d.timestamps().begin(), d.timestamps().end()), (std::vector<Ticks>{0, 2000, 4000}));
  EXPECT_EQ(apply_dead_time(s, 0), s);
}

TEST(TimeTag, DeadTimeStateCarriesAcrossChunks) {
  DeadTimeFilter f(2000);
  TagChunk a, b;
  a.push_back(0, 0);
  a.push_back(1500, 0);
  b.push_back(1900, 0);
  b.push_back(2100, 0);
  f.apply(a);
  f.apply(b);
  EXPECT_EQ(a.t, (std::vector<Ticks>{0}));
  EXPECT_EQ(b.t, (std::vector<Ticks>{2100}));
}

TEST(TimeTag, BinCountsDropTrailingPartialBin) {
  auto s = TimeTagStream::from_times({0, 999, 1000, 2500, 2999, 3000, 3400}, 3500);
  EXPECT_EQ(complete_bins(3500, 1000), 3u);
  EXPECT_EQ(bin_counts(s, 1000), (std::vector<std::uint64_t>{2, 1, 2}));
  EXPECT_THROW(complete_bins(10, 0), DomainError);
}

TEST(TimeTagIo, RoundTripInMemory) {
  auto s = sample_stream();
  std::stringstream buf;
  write_ttg(buf, s);
  EXPECT_EQ(buf.str().size(), kTtgHeaderSize + kTtgRecordSize * s.size());
  EXPECT_EQ(read_ttg(buf), s);
}

TEST(TimeTagIo, HeaderIsLittleEndian) {
  std::stringstream buf;
  write_ttg(buf, TimeTagStream::from_times({0x0102}, 0x0A0B0C));
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 4), "TTG1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 0xE8);  // 1000 = 0x03E8
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 0x03);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 0x0C);
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 1);  // record count
  EXPECT_EQ(static_cast<unsigned char>(bytes[24]), 0x02);
  EXPECT_EQ(static_cast<unsigned char>(bytes[25]), 0x01);
}

TEST(TimeTagIo, RejectsCorruptInput) {
  std::stringstream good;
  write_ttg(good, sample_stream());
  const std::string bytes = good.str();

  std::stringstream bad_magic(std::string("XXXX") + bytes.substr(4));
  EXPECT_THROW(read_ttg(bad_magic), FormatError);

  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_ttg(truncated), FormatError);

  std::stringstream trailing(bytes + "z");
  EXPECT_THROW(read_ttg(trailing), FormatError);

  std::string disordered = bytes;
  std::swap_ranges(disordered.begin() + kTtgHeaderSize, disordered.begin() + kTtgHeaderSize + kTtgRecordSize,
                   disordered.begin() + kTtgHeaderSize + 3 * kTtgRecordSize);
  std::stringstream dis(disordered);
  EXPECT_THROW(read_ttg(dis), FormatError);

  std::stringstream empty;
  EXPECT_THROW(read_ttg(empty), FormatError);
}

TEST(TimeTagIo, FileRoundTripLeavesNoTemporary) {
  const auto path = temp_path("roundtrip.ttg");
  auto s = sample_stream();
  save_ttg(path, s);
  EXPECT_EQ(load_ttg(path), s);
  EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  EXPECT_THROW(load_ttg(temp_path("missing.ttg")), IoError);
}

TEST(TimeTagIo, StreamWriterMatchesBatchWriter) {
  const auto streamed = temp_path("streamed.ttg");
  const auto batch = temp_path("batch.ttg");
  auto s = sample_stream();
  {
    TtgStreamWriter w(streamed, s.duration());
    TagChunk first, second;
    for (std::size_t i = 0; i < s.size(); ++i) (i < 2 ? first : second).push_back(s[i].timestamp, s[i].channel);
    w.append(first);
    w.append(second);
    w.finish();
  }
  save_ttg(batch, s);
  std::ifstream a(streamed, std::ios::binary), b(batch, std::ios::binary);
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
}
