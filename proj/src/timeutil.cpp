#include "chatact/timeutil.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>

#include "chatact/error.hpp"

namespace chatact {
namespace {

// Proleptic Gregorian day count relative to 1970-01-01.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

[[noreturn]] void bad_timestamp(std::string_view text) {
  throw DataError("invalid timestamp '" + std::string(text) + "'");
}

class Cursor {
 public:
  explicit Cursor(std::string_view s) : s_(s) {}

  bool done() const { return pos_ >= s_.size(); }
  char peek() const { return done() ? '\0' : s_[pos_]; }

  // Reads exactly n digits.
  bool digits(std::size_t n, int& out) {
    out = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (done() || !std::isdigit(static_cast<unsigned char>(s_[pos_]))) return false;
      out = out * 10 + (s_[pos_++] - '0');
    }
    return true;
  }

  bool expect(char c) {
    if (peek() != c) return false;
    ++pos_;
    return true;
  }

  // Fraction digits after a '.', scaled to microseconds (extra digits truncate).
  std::int64_t fraction_micros() {
    std::int64_t micros = 0;
    int count = 0;
    while (!done() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      if (count < 6) {
        micros = micros * 10 + (s_[pos_] - '0');
        ++count;
      }
      ++pos_;
    }
    while (count++ < 6) micros *= 10;
    return micros;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

bool looks_numeric(std::string_view s) {
  if (s.empty()) return false;
  bool seen_digit = false;
  bool seen_dot = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      seen_digit = true;
    } else if (c == '.' && !seen_dot) {
      seen_dot = true;
    } else if (c == '-' && i == 0) {
    } else {
      return false;
    }
  }
  return seen_digit;
}

Timestamp parse_epoch_string(std::string_view s) {
  const bool negative = s.front() == '-';
  if (negative) s.remove_prefix(1);
  const auto dot = s.find('.');
  const auto whole = s.substr(0, dot);
  std::int64_t seconds = 0;
  for (char c : whole) seconds = seconds * 10 + (c - '0');
  std::int64_t micros = 0;
  if (dot != std::string_view::npos) {
    Cursor frac(s.substr(dot + 1));
    micros = frac.fraction_micros();
  }
  std::int64_t total = seconds * 1'000'000 + micros;
  if (negative) total = -total;
  return Timestamp(Microseconds(total));
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  if (looks_numeric(text)) return parse_epoch_string(text);

  Cursor c(text);
  int year, month, day, hour, minute, second;
  if (!c.digits(4, year) || !c.expect('-') || !c.digits(2, month) || !c.expect('-') ||
      !c.digits(2, day)) {
    bad_timestamp(text);
  }
  if (!(c.expect('T') || c.expect('t') || c.expect(' '))) bad_timestamp(text);
  if (!c.digits(2, hour) || !c.expect(':') || !c.digits(2, minute) || !c.expect(':') ||
      !c.digits(2, second)) {
    bad_timestamp(text);
  }
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60) {
    bad_timestamp(text);
  }
  std::int64_t micros = 0;
  if (c.expect('.')) micros = c.fraction_micros();

  std::int64_t offset_seconds = 0;
  if (c.expect('Z') || c.expect('z')) {
  } else if (c.peek() == '+' || c.peek() == '-') {
    const int sign = c.peek() == '+' ? 1 : -1;
    c.expect(c.peek());
    int oh, om;
    if (!c.digits(2, oh) || !c.expect(':') || !c.digits(2, om)) bad_timestamp(text);
    offset_seconds = sign * (oh * 3600 + om * 60);
  } else {
    bad_timestamp(text);
  }
  if (!c.done()) bad_timestamp(text);

  const std::int64_t days = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
  const std::int64_t secs = days * 86400 + hour * 3600 + minute * 60 + second - offset_seconds;
  return Timestamp(Microseconds(secs * 1'000'000 + micros));
}

Timestamp timestamp_from_epoch_seconds(double seconds) {
  if (!std::isfinite(seconds)) throw DataError("non-finite epoch timestamp");
  return Timestamp(Microseconds(static_cast<std::int64_t>(std::llround(seconds * 1e6))));
}

std::string format_rfc3339(Timestamp ts) {
  const std::int64_t total = ts.time_since_epoch().count();
  std::int64_t secs = total / 1'000'000;
  std::int64_t micros = total % 1'000'000;
  if (micros < 0) {
    micros += 1'000'000;
    secs -= 1;
  }
  std::int64_t days = secs / 86400;
  std::int64_t rem = secs % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  std::int64_t y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lld", static_cast<long long>(y), m, d,
                static_cast<long long>(rem / 3600), static_cast<long long>(rem % 3600 / 60),
                static_cast<long long>(rem % 60));
  std::string out = buf;
  if (micros != 0) {
    std::snprintf(buf, sizeof buf, ".%06lld", static_cast<long long>(micros));
    std::string frac = buf;
    while (frac.back() == '0') frac.pop_back();
    out += frac;
  }
  out += 'Z';
  return out;
}

Microseconds parse_duration(std::string_view text) {
  if (text.empty()) throw DataError("empty duration");
  if (looks_numeric(text)) {
    return Microseconds(static_cast<std::int64_t>(std::llround(std::stod(std::string(text)) * 1e6)));
  }
  double total_seconds = 0.0;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t j = i;
    while (j < text.size() && (std::isdigit(static_cast<unsigned char>(text[j])) || text[j] == '.')) ++j;
    if (j == i || j == text.size()) throw DataError("invalid duration '" + std::string(text) + "'");
    const double value = std::stod(std::string(text.substr(i, j - i)));
    switch (text[j]) {
      case 's': total_seconds += value; break;
      case 'm': total_seconds += value * 60; break;
      case 'h': total_seconds += value * 3600; break;
      case 'd': total_seconds += value * 86400; break;
      default: throw DataError("invalid duration unit in '" + std::string(text) + "'");
    }
    i = j + 1;
  }
  if (total_seconds <= 0) throw DataError("duration must be positive");
  return Microseconds(static_cast<std::int64_t>(std::llround(total_seconds * 1e6)));
}

}  // namespace chatact
