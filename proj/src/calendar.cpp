#include "ripple/calendar.hpp"

#include <charconv>
#include <cstdio>

#include "ripple/error.hpp"

namespace ripple {
namespace {

int parse_int(std::string_view text, std::string_view whole) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::ParseError, "bad date field in '" + std::string(whole) + "'");
  }
  return value;
}

int days_in_month(int y, int m) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  return m == 2 && leap ? 29 : kDays[m - 1];
}

}  // namespace

Month Month::parse(std::string_view text) {
  if (text.size() != 7 || text[4] != '-') {
    throw Error(ErrorCode::ParseError, "month must be YYYY-MM, got '" + std::string(text) + "'");
  }
  Month m{parse_int(text.substr(0, 4), text), parse_int(text.substr(5, 2), text)};
  if (m.month < 1 || m.month > 12) {
    throw Error(ErrorCode::ParseError, "month out of range in '" + std::string(text) + "'");
  }
  return m;
}

std::string Month::str() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
  return buf;
}

Month Month::next() const { return month == 12 ? Month{year + 1, 1} : Month{year, month + 1}; }

Date Date::parse(std::string_view text) {
  // Accept a full datetime ("YYYY-MM-DDTHH:MM:SS") and keep the date part.
  if (text.size() > 10 && (text[10] == 'T' || text[10] == ' ')) text = text.substr(0, 10);
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw Error(ErrorCode::ParseError, "date must be YYYY-MM-DD, got '" + std::string(text) + "'");
  }
  Date d{parse_int(text.substr(0, 4), text), parse_int(text.substr(5, 2), text),
         parse_int(text.substr(8, 2), text)};
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month)) {
    throw Error(ErrorCode::ParseError, "date out of range in '" + std::string(text) + "'");
  }
  return d;
}

std::string Date::str() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  return buf;
}

// Howard Hinnant's days_from_civil / civil_from_days.
long Date::days() const {
  const int y = year - (month <= 2);
  const long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned mp = static_cast<unsigned>(month + (month > 2 ? -3 : 9));
  const unsigned doy = (153 * mp + 2) / 5 + static_cast<unsigned>(day) - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

Date Date::from_days(long z) {
  z += 719468;
  const long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long y = static_cast<long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

int Date::weekday() const {
  // 1970-01-01 was a Thursday.
  const long w = (days() + 3) % 7;
  return static_cast<int>(w < 0 ? w + 7 : w);
}

Date Date::next_business_day() const {
  Date d = from_days(days() + 1);
  while (d.weekday() >= 5) d = from_days(d.days() + 1);
  return d;
}

}  // namespace ripple
