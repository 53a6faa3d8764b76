#include "heatseg/core.hpp"

#include <algorithm>
#include <cstdio>

namespace heatseg {

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static const int lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap(y)) return 29;
  return lengths[m - 1];
}

}  // namespace

// Howard Hinnant's civil calendar algorithms.
std::int64_t serial_day(const Date& d) {
  std::int64_t y = d.year;
  const int m = d.month;
  const int day = d.day;
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + day - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

Date date_from_serial(std::int64_t days) {
  days += 719468;
  const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(days - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

int weekday(const Date& d) {
  // 1970-01-01 was a Thursday.
  std::int64_t s = serial_day(d) + 3;
  return static_cast<int>(((s % 7) + 7) % 7);
}

bool is_valid_date(const Date& d) {
  if (d.month < 1 || d.month > 12) return false;
  if (d.day < 1 || d.day > days_in_month(d.year, d.month)) return false;
  return true;
}

int day_of_year(const Date& d) {
  return static_cast<int>(serial_day(d) - serial_day(Date{d.year, 1, 1})) + 1;
}

int week_of_year(const Date& d) {
  int w = (day_of_year(d) - 1) / 7 + 1;
  return std::min(w, 52);
}

Date parse_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-')
    throw std::invalid_argument("bad date '" + s + "', expected YYYY-MM-DD");
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (s[i] < '0' || s[i] > '9')
      throw std::invalid_argument("bad date '" + s + "', expected YYYY-MM-DD");
  Date d;
  d.year = std::stoi(s.substr(0, 4));
  d.month = std::stoi(s.substr(5, 2));
  d.day = std::stoi(s.substr(8, 2));
  if (!is_valid_date(d)) throw std::invalid_argument("invalid calendar date '" + s + "'");
  return d;
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

Date SampleWindow::end_sunday() const {
  return date_from_serial(serial_day(start_monday) + static_cast<std::int64_t>(n_weeks) * 7 - 1);
}

WeekId week_of(const Date& date, const SampleWindow& window) {
  std::int64_t offset = serial_day(date) - serial_day(window.start_monday);
  if (offset < 0 || offset >= static_cast<std::int64_t>(window.n_weeks) * 7)
    throw std::out_of_range("date " + format_date(date) + " outside sample window " +
                            format_date(window.start_monday) + ".." +
                            format_date(window.end_sunday()));
  int idx = static_cast<int>(offset / 7) + 1;
  return WeekId{idx, date_from_serial(serial_day(window.start_monday) + (idx - 1) * 7)};
}

WeekId week_by_index(int index, const SampleWindow& window) {
  if (index < 1 || index > window.n_weeks)
    throw std::out_of_range("week index " + std::to_string(index) + " outside 1.." +
                            std::to_string(window.n_weeks));
  return WeekId{index, date_from_serial(serial_day(window.start_monday) + (index - 1) * 7)};
}

bool is_valid_region(const RegionId& r, std::string* why) {
  auto fail = [&](const std::string& m) {
    if (why) *why = m;
    return false;
  };
  if (r.code.empty()) return fail("empty region code");
  if (r.population <= 0) return fail("population must be positive");
  if (r.latitude < -90.0 || r.latitude > 90.0) return fail("latitude out of [-90,90]");
  if (r.longitude < -180.0 || r.longitude > 180.0) return fail("longitude out of [-180,180]");
  return true;
}

bool is_valid_cbg(const std::string& cbg) {
  if (cbg.size() != 12) return false;
  for (char c : cbg)
    if (c < '0' || c > '9') return false;
  int fips = (cbg[0] - '0') * 10 + (cbg[1] - '0');
  // State FIPS codes in use: 01..56 excluding 03, 07, 14, 43, 52; 72 (PR).
  if (fips == 3 || fips == 7 || fips == 14 || fips == 43 || fips == 52) return false;
  return (fips >= 1 && fips <= 56) || fips == 72;
}

GroupLabel classify_cbg(const CbgProfile& profile) {
  auto label = try_classify_cbg(profile);
  if (!label)
    throw std::invalid_argument("CBG " + profile.cbg + " has zero population, unclassifiable");
  return *label;
}

std::optional<GroupLabel> try_classify_cbg(const CbgProfile& profile) {
  if (profile.total_pop <= 0) return std::nullopt;
  // Strict majority; an exact half is NonWhite.
  return 2 * profile.white_pop > profile.total_pop ? GroupLabel::White : GroupLabel::NonWhite;
}

std::string to_string(PoiCategory c) {
  switch (c) {
    case PoiCategory::OutdoorLeisure: return "outdoor_leisure";
    case PoiCategory::IndoorLeisure: return "indoor_leisure";
    case PoiCategory::Grocery: return "grocery";
    case PoiCategory::Other: return "other";
  }
  return "other";
}

std::optional<PoiCategory> category_from_string(const std::string& s) {
  if (s == "outdoor_leisure") return PoiCategory::OutdoorLeisure;
  if (s == "indoor_leisure") return PoiCategory::IndoorLeisure;
  if (s == "grocery") return PoiCategory::Grocery;
  if (s == "other") return PoiCategory::Other;
  return std::nullopt;
}

CategoryMap CategoryMap::defaults() {
  CategoryMap m;
  for (int naics : {712190, 713110, 713910, 713990}) m.assign(naics, PoiCategory::OutdoorLeisure);
  for (int naics : {512131, 713940, 722410, 722511}) m.assign(naics, PoiCategory::IndoorLeisure);
  m.assign(445110, PoiCategory::Grocery);
  return m;
}

void CategoryMap::assign(int naics, PoiCategory category) { entries_[naics] = category; }

PoiCategory CategoryMap::category_of(int naics) const {
  auto it = entries_.find(naics);
  return it == entries_.end() ? PoiCategory::Other : it->second;
}

std::int64_t WeeklyVisitRecord::resolved_visitors() const {
  std::int64_t n = 0;
  for (const auto& [cbg, count] : visitors_by_cbg) n += count;
  return n;
}

bool is_valid_visit_record(const WeeklyVisitRecord& rec, std::string* why) {
  auto fail = [&](const std::string& m) {
    if (why) *why = m;
    return false;
  };
  if (rec.total_visits < 0 || rec.total_visitors < 0) return fail("negative count");
  if (rec.total_visits < rec.total_visitors) return fail("total_visits < total_visitors");
  std::int64_t resolved = 0;
  for (const auto& [cbg, count] : rec.visitors_by_cbg) {
    if (count <= 0) return fail("non-positive visitor count for CBG " + cbg);
    resolved += count;
  }
  if (resolved > rec.total_visitors)
    return fail("visitors_by_cbg sums beyond total_visitors");
  return true;
}

}  // namespace heatseg
