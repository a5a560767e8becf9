#pragma once

// Fixed-point decimal with nine fractional digits, used for measure values so
// that sums are exact and independent of accumulation order.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>

namespace xidx {

class Decimal {
 public:
  using Rep = __int128;
  static constexpr int kScaleDigits = 9;
  static constexpr std::int64_t kScale = 1'000'000'000;

  constexpr Decimal() = default;

  static constexpr Decimal from_units(Rep units) noexcept {
    Decimal d;
    d.units_ = units;
    return d;
  }

  static constexpr Decimal from_int(std::int64_t v) noexcept {
    return from_units(static_cast<Rep>(v) * kScale);
  }

  // Plain decimal notation is parsed exactly; extra fractional digits and
  // exponent notation go through double and are rounded to the scale.
  static std::optional<Decimal> parse(std::string_view s) {
    if (s.empty()) return std::nullopt;
    std::size_t i = 0;
    bool negative = false;
    if (s[i] == '+' || s[i] == '-') negative = s[i++] == '-';
    Rep int_part = 0;
    Rep frac_part = 0;
    int frac_digits = 0;
    int int_digits = 0;
    bool exact = true;
    for (; i < s.size() && s[i] >= '0' && s[i] <= '9'; ++i, ++int_digits) {
      if (int_digits >= 27) return std::nullopt;
      int_part = int_part * 10 + (s[i] - '0');
    }
    if (i < s.size() && s[i] == '.') {
      ++i;
      for (; i < s.size() && s[i] >= '0' && s[i] <= '9'; ++i) {
        if (frac_digits < kScaleDigits) {
          frac_part = frac_part * 10 + (s[i] - '0');
          ++frac_digits;
        } else {
          exact = false;
        }
      }
      if (int_digits == 0 && frac_digits == 0 && exact) return std::nullopt;
    } else if (int_digits == 0) {
      return std::nullopt;
    }
    if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) exact = false;
    if (exact) {
      if (i != s.size()) return std::nullopt;
      for (int d = frac_digits; d < kScaleDigits; ++d) frac_part *= 10;
      const Rep units = int_part * kScale + frac_part;
      return from_units(negative ? -units : units);
    }
    return from_double_text(s);
  }

  static std::optional<Decimal> from_double(double v) {
    if (!std::isfinite(v) || std::fabs(v) > 1e26) return std::nullopt;
    const double whole = std::trunc(v);
    const double frac = v - whole;
    return from_units(static_cast<Rep>(whole) * kScale +
                      static_cast<Rep>(std::llround(frac * static_cast<double>(kScale))));
  }

  constexpr Rep units() const noexcept { return units_; }
  constexpr bool is_integer() const noexcept { return units_ % kScale == 0; }

  double to_double() const noexcept {
    return static_cast<double>(units_ / kScale) +
           static_cast<double>(units_ % kScale) / static_cast<double>(kScale);
  }

  std::string to_string() const {
    Rep v = units_;
    const bool negative = v < 0;
    if (negative) v = -v;
    std::string whole = digits(v / kScale);
    std::string frac = digits(v % kScale);
    frac.insert(0, static_cast<std::size_t>(kScaleDigits) - frac.size(), '0');
    while (!frac.empty() && frac.back() == '0') frac.pop_back();
    std::string out = negative ? "-" : "";
    out += whole;
    if (!frac.empty()) out += "." + frac;
    return out;
  }

  friend constexpr Decimal operator+(Decimal a, Decimal b) noexcept {
    return from_units(a.units_ + b.units_);
  }
  Decimal& operator+=(Decimal other) noexcept {
    units_ += other.units_;
    return *this;
  }
  friend constexpr bool operator==(Decimal a, Decimal b) noexcept { return a.units_ == b.units_; }
  friend constexpr auto operator<=>(Decimal a, Decimal b) noexcept { return a.units_ <=> b.units_; }

 private:
  static std::optional<Decimal> from_double_text(std::string_view s) {
    const std::string buf(s);
    char* end = nullptr;
    const double v = std::strtod(buf.c_str(), &end);
    if (end != buf.c_str() + buf.size()) return std::nullopt;
    return from_double(v);
  }

  static std::string digits(Rep v) {
    if (v == 0) return "0";
    std::string out;
    while (v > 0) {
      out.insert(out.begin(), static_cast<char>('0' + static_cast<int>(v % 10)));
      v /= 10;
    }
    return out;
  }

  Rep units_ = 0;
};

}  // namespace xidx
