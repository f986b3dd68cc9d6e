#ifndef G2LAB_HISTOGRAM_IO_HPP
#define G2LAB_HISTOGRAM_IO_HPP

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#include "g2lab/correlator.hpp"
#include "g2lab/errors.hpp"
#include "json.hpp"

namespace g2lab {

using Json = nlohmann::json;

namespace detail {

inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace detail

/// Plot-ready CSV, one row per signed lag. The auto-correlation is mirrored
/// onto negative lags.
inline void write_histogram_csv(std::ostream& os, const CorrelationHistogram& h) {
  os << "lag_ns,g2,stderr,raw_pairs\n";
  char lag[32];
  for (std::int64_t k = -h.max_lag_bins; k <= h.max_lag_bins; ++k) {
    const std::size_t i = h.index_of(k);
    std::snprintf(lag, sizeof lag, "%.3f", static_cast<double>(k) * ticks_to_ns(h.bin_width));
    os << lag << ',' << detail::format_double(h.g2[i]) << ',' << detail::format_double(h.std_error[i]) << ','
       << h.raw_pairs[i] << '\n';
  }
}

/// Full histogram document. Infinite errors are stored as null.
inline Json histogram_to_json(const CorrelationHistogram& h, const Json& provenance = Json::object()) {
  Json lags = Json::array();
  Json errs = Json::array();
  for (std::size_t i = 0; i < h.size(); ++i) {
    lags.push_back(h.lag_at(i));
    errs.push_back(detail::finite_or_null(h.std_error[i]));
  }
  return Json{{"kind", to_string(h.kind)},
              {"bin_width_ticks", h.bin_width},
              {"max_lag_bins", h.max_lag_bins},
              {"duration_ticks", h.duration},
              {"complete_bins", h.bins},
              {"n1", h.n1},
              {"n2", h.n2},
              {"lag_bins", std::move(lags)},
              {"raw_pairs", h.raw_pairs},
              {"g2", h.g2},
              {"stderr", std::move(errs)},
              {"provenance", provenance}};
}

inline CorrelationHistogram histogram_from_json(const Json& j) {
  try {
    CorrelationHistogram h;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "auto") {
      h.kind = CorrelationKind::Auto;
    } else if (kind == "cross") {
      h.kind = CorrelationKind::Cross;
    } else {
      throw FormatError("unknown histogram kind '" + kind + "'");
    }
    h.bin_width = j.at("bin_width_ticks").get<Ticks>();
    h.max_lag_bins = j.at("max_lag_bins").get<std::int64_t>();
    h.duration = j.at("duration_ticks").get<Ticks>();
    h.bins = j.at("complete_bins").get<std::uint64_t>();
    h.n1 = j.at("n1").get<std::uint64_t>();
    h.n2 = j.at("n2").get<std::uint64_t>();
    h.raw_pairs = j.at("raw_pairs").get<std::vector<std::uint64_t>>();
    h.g2 = j.at("g2").get<std::vector<double>>();
    for (const auto& e : j.at("stderr")) {
      h.std_error.push_back(e.is_null() ? std::numeric_limits<double>::infinity() : e.get<double>());
    }
    const std::size_t expected =
        static_cast<std::size_t>(h.kind == CorrelationKind::Auto ? h.max_lag_bins + 1 : 2 * h.max_lag_bins + 1);
    if (h.bin_width == 0 || h.max_lag_bins < 0 || h.raw_pairs.size() != expected || h.g2.size() != expected ||
        h.std_error.size() != expected) {
      throw FormatError("histogram arrays do not match the declared lag range");
    }
    return h;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("histogram JSON: ") + e.what());
  }
}

}  // namespace g2lab

#endif  // G2LAB_HISTOGRAM_IO_HPP
