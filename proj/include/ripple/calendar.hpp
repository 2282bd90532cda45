#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace ripple {

/// Calendar month, YYYY-MM.
struct Month {
  int year = 1970;
  int month = 1;

  static Month parse(std::string_view text);
  std::string str() const;
  Month next() const;

  auto operator<=>(const Month&) const = default;
};

/// Calendar date, YYYY-MM-DD.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  static Date parse(std::string_view text);
  static Date from_days(long days);

  std::string str() const;
  Month month_of() const { return Month{year, month}; }
  /// Days since 1970-01-01.
  long days() const;
  /// 0 = Monday ... 6 = Sunday.
  int weekday() const;
  Date next_business_day() const;

  auto operator<=>(const Date&) const = default;
};

}  // namespace ripple
