#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "occtool/types.hpp"

namespace occtool {

// One control interval of aggregated occupancy.
struct IntervalSample {
  int64_t k = 0;          // interval index, floor(timestamp / interval)
  double start_ts = 0.0;  // epoch seconds of the interval start
  int64_t n = 0;          // aggregated count
  bool occupied = false;  // n >= 1
};

enum class Reducer { max, mean };
Reducer reducer_from_string(const std::string& s);

// Buckets frame-level samples into fixed intervals (default 5 minutes in the
// CLI). The returned series is gap-free from the first to the last occupied
// bucket; empty buckets aggregate to 0. `mean` rounds half-up to an integer.
std::vector<IntervalSample> aggregate(const std::vector<OccupancySample>& samples,
                                      double interval_seconds, Reducer reducer = Reducer::max);

// Tiles measured day profiles over a calendar year, assigning profile
// day_of_year % profiles.size() to each day; a leap day repeats the last
// profile. Profiles are day-slot patterns at the interval resolution.
std::vector<IntervalSample> tile_annual_profile(
    const std::vector<std::vector<IntervalSample>>& day_profiles, int year,
    double interval_seconds);

void write_interval_csv(std::ostream& out, const std::vector<IntervalSample>& series);
std::vector<IntervalSample> read_interval_csv(std::istream& in);

}  // namespace occtool
