#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "heatseg/core.hpp"

using namespace heatseg;

TEST_CASE("serial day round trip and weekday") {
  CHECK(serial_day(Date{1970, 1, 1}) == 0);
  CHECK(weekday(Date{2018, 1, 1}) == 0);  // Monday
  CHECK(weekday(Date{2020, 3, 8}) == 6);  // Sunday
  for (std::int64_t s : {-400LL, 0LL, 17532LL, 18325LL, 29220LL}) {
    CHECK(serial_day(date_from_serial(s)) == s);
  }
  CHECK(is_valid_date(Date{2020, 2, 29}));
  CHECK(!is_valid_date(Date{2019, 2, 29}));
  CHECK(!is_valid_date(Date{2018, 13, 1}));
}

TEST_CASE("week_of maps the sample window") {
  CHECK(week_of(Date{2018, 1, 1}).index == 1);
  CHECK(week_of(Date{2018, 1, 7}).index == 1);
  CHECK(week_of(Date{2018, 1, 8}).index == 2);
  CHECK(week_of(Date{2020, 3, 8}).index == 114);
  CHECK(SampleWindow{}.end_sunday() == Date{2020, 3, 8});
  CHECK_THROWS_AS(week_of(Date{2017, 12, 31}), std::out_of_range);
  CHECK_THROWS_AS(week_of(Date{2020, 3, 9}), std::out_of_range);
}

TEST_CASE("week_of is total and monotone; monday fixed point") {
  SampleWindow window;
  int last = 0;
  for (std::int64_t s = serial_day(window.start_monday);
       s <= serial_day(window.end_sunday()); ++s) {
    WeekId w = week_of(date_from_serial(s), window);
    CHECK(w.index >= last);
    last = w.index;
    CHECK(serial_day(w.monday) <= s);
    CHECK(s <= serial_day(w.monday) + 6);
  }
  for (int i = 1; i <= window.n_weeks; ++i) {
    WeekId w = week_by_index(i, window);
    CHECK(week_of(w.monday, window) == w);
  }
}

TEST_CASE("week_of_year folds trailing days into week 52") {
  CHECK(week_of_year(Date{2018, 1, 1}) == 1);
  CHECK(week_of_year(Date{2018, 1, 7}) == 1);
  CHECK(week_of_year(Date{2018, 1, 8}) == 2);
  CHECK(week_of_year(Date{2018, 12, 31}) == 52);
  CHECK(week_of_year(Date{2020, 12, 31}) == 52);
}

TEST_CASE("classify_cbg uses a strict majority") {
  CHECK(classify_cbg({"c", "", 100, 60}) == GroupLabel::White);
  CHECK(classify_cbg({"c", "", 100, 50}) == GroupLabel::NonWhite);
  CHECK(classify_cbg({"c", "", 100, 51}) == GroupLabel::White);
  CHECK_THROWS_AS(classify_cbg({"c", "", 0, 0}), std::invalid_argument);
  CHECK(!try_classify_cbg({"c", "", 0, 0}).has_value());
  // depends only on the ratio
  CHECK(classify_cbg({"a", "", 10, 6}) == classify_cbg({"b", "", 1000, 600}));
}

TEST_CASE("CBG id validation") {
  CHECK(is_valid_cbg("360470001001"));
  CHECK(!is_valid_cbg("36047000100"));    // 11 digits
  CHECK(!is_valid_cbg("3604700010012"));  // 13 digits
  CHECK(!is_valid_cbg("990470001001"));   // bad FIPS
  CHECK(!is_valid_cbg("36047000100a"));
}

TEST_CASE("category map defaults and stability") {
  CategoryMap map = CategoryMap::defaults();
  CHECK(map.category_of(712190) == PoiCategory::OutdoorLeisure);
  CHECK(map.category_of(713940) == PoiCategory::IndoorLeisure);
  CHECK(map.category_of(445110) == PoiCategory::Grocery);
  CHECK(map.category_of(541110) == PoiCategory::Other);
  CHECK(map.category_of(713990) == map.category_of(713990));
  map.assign(541110, PoiCategory::IndoorLeisure);
  CHECK(map.category_of(541110) == PoiCategory::IndoorLeisure);
}

TEST_CASE("visit record invariants") {
  WeeklyVisitRecord rec;
  rec.poi_id = "p";
  rec.total_visits = 20;
  rec.total_visitors = 10;
  rec.visitors_by_cbg = {{"360470001001", 4}, {"360470002001", 6}};
  CHECK(is_valid_visit_record(rec));
  CHECK(rec.resolved_visitors() == 10);

  rec.total_visits = 5;  // visits < visitors
  CHECK(!is_valid_visit_record(rec));

  rec.total_visits = 20;
  rec.visitors_by_cbg = {{"360470001001", 11}};  // beyond total_visitors
  CHECK(!is_valid_visit_record(rec));

  rec.visitors_by_cbg = {};  // unresolved homes allowed
  CHECK(is_valid_visit_record(rec));
}

TEST_CASE("region validation") {
  RegionId r{"19100", "Dallas, TX", "TX", 7500000, 32.8, -96.8};
  CHECK(is_valid_region(r));
  r.population = 0;
  CHECK(!is_valid_region(r));
  r.population = 10;
  r.latitude = 95.0;
  CHECK(!is_valid_region(r));
}
