#include "llmctl/timefmt.hpp"

#include <chrono>
#include <cstdio>

#include "llmctl/error.hpp"

namespace llmctl {

namespace {

int parse_digits(std::string_view s, std::size_t pos, std::size_t n) {
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9') throw ValidationError("bad timestamp: " + std::string(s));
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

struct Civil {
  int y, mo, d, h, mi, s;
};

Civil to_civil(EpochSeconds t) {
  using namespace std::chrono;
  const sys_seconds tp{seconds{t}};
  const auto day = floor<days>(tp);
  const year_month_day ymd{day};
  const hh_mm_ss hms{tp - day};
  return {int(ymd.year()), int(unsigned(ymd.month())), int(unsigned(ymd.day())),
          int(hms.hours().count()), int(hms.minutes().count()), int(hms.seconds().count())};
}

}  // namespace

EpochSeconds parse_timestamp(std::string_view text) {
  if (text.size() != 19 || text[4] != '-' || text[7] != '-' || (text[10] != ' ' && text[10] != 'T') ||
      text[13] != ':' || text[16] != ':') {
    throw ValidationError("bad timestamp: " + std::string(text));
  }
  using namespace std::chrono;
  const year_month_day ymd{year{parse_digits(text, 0, 4)}, month{unsigned(parse_digits(text, 5, 2))},
                           day{unsigned(parse_digits(text, 8, 2))}};
  const int h = parse_digits(text, 11, 2), mi = parse_digits(text, 14, 2), s = parse_digits(text, 17, 2);
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) throw ValidationError("bad timestamp: " + std::string(text));
  return sys_days{ymd}.time_since_epoch().count() * 86400LL + h * 3600 + mi * 60 + s;
}

std::string format_timestamp(EpochSeconds t) {
  const Civil c = to_civil(t);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d %02d:%02d:%02d", c.y, c.mo, c.d, c.h, c.mi, c.s);
  return buf;
}

std::string format_iso_compact(EpochSeconds t) {
  std::string s = format_timestamp(t);
  s[10] = 'T';
  return s;
}

EpochSeconds now_epoch_seconds() {
  using namespace std::chrono;
  return duration_cast<seconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace llmctl
