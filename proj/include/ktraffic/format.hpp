#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <string>
#include <system_error>

namespace ktraffic {

inline constexpr int kSignificantDigits = 15;

/// Locale-independent rendering with 15 significant digits.
inline std::string format_number(double value) {
  if (value == 0.0) return "0";  // also folds -0
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                 std::chars_format::general, kSignificantDigits);
  if (ec != std::errc{}) return "nan";
  return std::string(buf.data(), ptr);
}

/// Round to the nearest double representable with 15 significant digits, so
/// shortest-roundtrip serializers (JSON) never emit more digits than that.
inline double round_significant(double value) {
  if (!std::isfinite(value) || value == 0.0) return value == 0.0 ? 0.0 : value;
  const std::string text = format_number(value);
  double out = 0.0;
  std::from_chars(text.data(), text.data() + text.size(), out);
  return out;
}

}  // namespace ktraffic
