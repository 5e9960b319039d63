#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace narrative {

// UTC calendar day, stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}

  static Date from_ymd(int year, unsigned month, unsigned day);
  // Strict YYYY-MM-DD. Throws DataError on malformed or impossible dates.
  static Date parse(std::string_view text);

  std::string to_string() const;
  constexpr std::int32_t days() const { return days_; }

  constexpr Date operator+(int n) const { return Date(days_ + n); }
  constexpr Date operator-(int n) const { return Date(days_ - n); }
  constexpr int operator-(Date other) const { return days_ - other.days_; }
  constexpr auto operator<=>(const Date&) const = default;

 private:
  std::int32_t days_ = 0;
};

}  // namespace narrative
