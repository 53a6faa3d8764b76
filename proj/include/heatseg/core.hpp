#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Shared domain types and calendar conventions. Weeks are Monday-through-Sunday,
// anchored so that week 1 starts on 2018-01-01 (a Monday); the full sample holds
// 114 weeks and ends on 2020-03-08.

namespace heatseg {

struct Date {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31

  auto operator<=>(const Date&) const = default;
};

// Days since 1970-01-01 (negative before). Proleptic Gregorian.
std::int64_t serial_day(const Date& d);
Date date_from_serial(std::int64_t days);

// 0 = Monday .. 6 = Sunday.
int weekday(const Date& d);

bool is_valid_date(const Date& d);
int day_of_year(const Date& d);  // 1..366

// Calendar week-of-year, 1..52: days 1..7 are week 1 and so on; days 365/366
// fold into week 52.
int week_of_year(const Date& d);

// Strict "YYYY-MM-DD".
Date parse_date(const std::string& s);
std::string format_date(const Date& d);

struct SampleWindow {
  Date start_monday{2018, 1, 1};
  int n_weeks = 114;

  Date end_sunday() const;
};

struct WeekId {
  int index = 0;  // 1..T
  Date monday;

  auto operator<=>(const WeekId&) const = default;
};

// Maps a date to the sample week containing it. Throws std::out_of_range when
// the date falls outside the window.
WeekId week_of(const Date& date, const SampleWindow& window = {});

WeekId week_by_index(int index, const SampleWindow& window = {});

struct RegionId {
  std::string code;   // CBSA code for MSAs, UA code for urban areas
  std::string name;
  std::string state;  // first-listed state for multi-state names
  std::int64_t population = 0;
  double latitude = 0.0;
  double longitude = 0.0;
};

bool is_valid_region(const RegionId& r, std::string* why = nullptr);

// 12-digit census block group identifier; first two digits a state FIPS code.
bool is_valid_cbg(const std::string& cbg);

enum class GroupLabel { White, NonWhite };

struct CbgProfile {
  std::string cbg;
  std::string region_code;  // empty: home CBG outside every study region
  std::int64_t total_pop = 0;
  std::int64_t white_pop = 0;
};

// White iff the strict majority of the CBG population is White; an exact 50%
// share classifies as NonWhite. Throws std::invalid_argument on total_pop == 0.
GroupLabel classify_cbg(const CbgProfile& profile);

// Same rule, but zero-population CBGs yield nullopt so callers can keep their
// visits in the totals while excluding them from group counts.
std::optional<GroupLabel> try_classify_cbg(const CbgProfile& profile);

enum class PoiCategory { OutdoorLeisure, IndoorLeisure, Grocery, Other };

std::string to_string(PoiCategory c);
std::optional<PoiCategory> category_from_string(const std::string& s);

// NAICS -> category assignment. The shipped defaults cover the outdoor/indoor
// leisure and grocery code lists used by the category-split analyses; the map
// is configuration, unmapped codes fall through to Other.
class CategoryMap {
 public:
  static CategoryMap defaults();

  void assign(int naics, PoiCategory category);
  PoiCategory category_of(int naics) const;

 private:
  std::map<int, PoiCategory> entries_;
};

struct PoiRecord {
  std::string poi_id;
  std::string region_code;
  int naics = 0;  // 6-digit industry code
  double latitude = 0.0;
  double longitude = 0.0;
};

struct WeeklyVisitRecord {
  std::string poi_id;
  WeekId week;
  std::int64_t total_visits = 0;    // t^V
  std::int64_t total_visitors = 0;  // t^N
  // Sorted by CBG code; the canonical on-disk order.
  std::vector<std::pair<std::string, std::int64_t>> visitors_by_cbg;

  std::int64_t resolved_visitors() const;
};

// Checks the record-level count invariants; returns a reason on failure.
bool is_valid_visit_record(const WeeklyVisitRecord& rec, std::string* why = nullptr);

}  // namespace heatseg
