#pragma once

#include <cstdint>
#include <string>

namespace occtool {

// Proleptic Gregorian calendar helpers (no timezone handling; everything UTC).
int64_t days_from_civil(int y, unsigned m, unsigned d);
void civil_from_days(int64_t z, int& y, unsigned& m, unsigned& d);
bool is_leap_year(int y);
int days_in_month(int y, unsigned m);

// Parses "YYYY-MM-DD[ T]HH:MM:SS[.frac][Z]" into Unix epoch seconds.
// Throws InputError on anything else.
double parse_iso8601(const std::string& s);

// Epoch seconds -> "YYYY-MM-DDTHH:MM:SSZ" (fractional part truncated).
std::string format_iso8601(double epoch_seconds);

inline double fahrenheit_to_celsius(double f) { return (f - 32.0) * 5.0 / 9.0; }
inline double celsius_to_fahrenheit(double c) { return c * 9.0 / 5.0 + 32.0; }

// Half-up rounding to `decimals` places (ties go toward +inf).
double round_half_up(double x, int decimals);

}  // namespace occtool
