#include "occtool/occupancy_signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "occtool/csv.hpp"
#include "occtool/errors.hpp"
#include "occtool/time_util.hpp"

namespace occtool {

Reducer reducer_from_string(const std::string& s) {
  if (s == "max") return Reducer::max;
  if (s == "mean") return Reducer::mean;
  throw InputError("unknown reducer: '" + s + "' (want max or mean)");
}

std::vector<IntervalSample> aggregate(const std::vector<OccupancySample>& samples,
                                      double interval_seconds, Reducer reducer) {
  if (interval_seconds <= 0.0) throw InputError("interval must be positive");
  std::vector<IntervalSample> out;
  if (samples.empty()) return out;

  for (size_t i = 1; i < samples.size(); ++i)
    if (samples[i].timestamp < samples[i - 1].timestamp)
      throw InputError("samples must be time-ordered for aggregation");

  std::map<int64_t, std::vector<int64_t>> buckets;
  for (const auto& s : samples) {
    const int64_t k = static_cast<int64_t>(std::floor(s.timestamp / interval_seconds));
    buckets[k].push_back(s.count);
  }

  const int64_t k_first = buckets.begin()->first;
  const int64_t k_last = buckets.rbegin()->first;
  for (int64_t k = k_first; k <= k_last; ++k) {
    IntervalSample iv;
    iv.k = k;
    iv.start_ts = static_cast<double>(k) * interval_seconds;
    auto it = buckets.find(k);
    if (it != buckets.end()) {
      if (reducer == Reducer::max) {
        iv.n = *std::max_element(it->second.begin(), it->second.end());
      } else {
        double sum = 0.0;
        for (int64_t v : it->second) sum += static_cast<double>(v);
        iv.n = static_cast<int64_t>(round_half_up(sum / static_cast<double>(it->second.size()), 0));
      }
    }
    iv.occupied = iv.n >= 1;
    out.push_back(iv);
  }
  return out;
}

std::vector<IntervalSample> tile_annual_profile(
    const std::vector<std::vector<IntervalSample>>& day_profiles, int year,
    double interval_seconds) {
  if (day_profiles.empty()) throw InputError("tiling needs at least one day profile");
  if (interval_seconds <= 0.0) throw InputError("interval must be positive");
  const double slots_d = 86400.0 / interval_seconds;
  const int64_t slots = static_cast<int64_t>(slots_d);
  if (static_cast<double>(slots) != slots_d)
    throw InputError("interval must divide a day evenly");

  // Normalize each profile to one day of slots (profile interval index mod
  // slots-per-day; later entries win, missing slots are vacant).
  std::vector<std::vector<int64_t>> profiles;
  for (const auto& p : day_profiles) {
    std::vector<int64_t> day(slots, 0);
    for (const auto& iv : p) {
      const int64_t slot = ((iv.k % slots) + slots) % slots;
      day[slot] = iv.n;
    }
    profiles.push_back(std::move(day));
  }

  const int64_t year_start_day = days_from_civil(year, 1, 1);
  const int days = is_leap_year(year) ? 366 : 365;
  const int64_t p_count = static_cast<int64_t>(profiles.size());

  std::vector<IntervalSample> out;
  out.reserve(static_cast<size_t>(days) * slots);
  for (int doy = 1; doy <= days; ++doy) {
    const auto& profile =
        doy <= 365 ? profiles[static_cast<size_t>(doy % p_count)] : profiles.back();
    const double day_start =
        static_cast<double>(year_start_day + doy - 1) * 86400.0;
    for (int64_t s = 0; s < slots; ++s) {
      IntervalSample iv;
      iv.start_ts = day_start + static_cast<double>(s) * interval_seconds;
      iv.k = static_cast<int64_t>(std::floor(iv.start_ts / interval_seconds));
      iv.n = profile[s];
      iv.occupied = iv.n >= 1;
      out.push_back(iv);
    }
  }
  return out;
}

void write_interval_csv(std::ostream& out, const std::vector<IntervalSample>& series) {
  out << "k,start_iso,n,occupied\n";
  for (const auto& iv : series)
    out << iv.k << "," << format_iso8601(iv.start_ts) << "," << iv.n << ","
        << (iv.occupied ? 1 : 0) << "\n";
}

std::vector<IntervalSample> read_interval_csv(std::istream& in) {
  std::vector<IntervalSample> out;
  CsvReader reader(in);
  std::vector<std::string> fields;
  size_t line_no = 0;
  bool saw_header = false;

  while (reader.next(fields, line_no)) {
    if (!saw_header) {
      saw_header = true;
      if (!fields.empty() && fields[0] == "k") continue;
    }
    if (fields.size() != 4)
      throw InputError("line " + std::to_string(line_no) + ": expected k,start_iso,n,occupied");
    IntervalSample iv;
    iv.k = parse_int_field(fields[0], "k", line_no);
    iv.start_ts = parse_iso8601(fields[1]);
    iv.n = parse_int_field(fields[2], "n", line_no);
    iv.occupied = parse_int_field(fields[3], "occupied", line_no) != 0;
    if (iv.n < 0) throw InputError("line " + std::to_string(line_no) + ": negative count");
    if (iv.occupied != (iv.n >= 1))
      throw InputError("line " + std::to_string(line_no) + ": occupied flag contradicts count");
    out.push_back(iv);
  }
  return out;
}

}  // namespace occtool
