#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "heatseg/project.hpp"

using namespace heatseg;
using climate::BinSpec;
using climate::ScenarioDelta;
using project::RegionActivity;

namespace {

ScenarioDelta delta_with(const std::map<std::string, double>& by_label,
                         const std::string& scenario = "s") {
  ScenarioDelta delta;
  delta.spec = BinSpec{};
  delta.scenario = scenario;
  delta.region_codes = {"R1"};
  delta.temp_delta = Eigen::MatrixXd::Zero(1, delta.spec.n_temp_bins());
  delta.precip_delta = Eigen::MatrixXd::Zero(1, delta.spec.n_precip_bins());
  double balance = 0.0;
  for (int b = 0; b < delta.spec.n_temp_bins(); ++b) {
    auto it = by_label.find(delta.spec.temp_label(b));
    if (it != by_label.end()) {
      delta.temp_delta(0, b) = it->second;
      balance += it->second;
    }
  }
  // conserve days through the reference bin
  delta.temp_delta(0, delta.spec.reference_temp_bin) -= balance;
  return delta;
}

std::map<std::string, double> paper_beta() {
  // the hot-day coefficients anchored by the headline arithmetic
  BinSpec spec;
  std::map<std::string, double> beta;
  for (int b = 0; b < spec.n_temp_bins(); ++b)
    if (b != spec.reference_temp_bin) beta[spec.temp_label(b)] = 0.0;
  beta["t_30_35"] = 0.000625;
  beta["t_ge_35"] = 0.0017;
  return beta;
}

}  // namespace

TEST_CASE("six very hot days shift isolation by more than a percentage point") {
  auto beta = paper_beta();
  auto delta = delta_with({{"t_ge_35", 6.0}});
  double shift = project::project_vi_shift(beta, delta, "R1");
  CHECK(shift == doctest::Approx(0.0102).epsilon(1e-12));
  CHECK(shift > 0.01);

  auto delta16 = delta_with({{"t_30_35", 16.0}});
  CHECK(project::project_vi_shift(beta, delta16, "R1") == doctest::Approx(0.0100).epsilon(1e-12));

  CHECK(project::project_vi_shift(beta, delta_with({}), "R1") == 0.0);
}

TEST_CASE("bin mismatch and missing region are errors") {
  auto beta = paper_beta();
  beta.erase("t_lt_0");
  auto delta = delta_with({{"t_ge_35", 1.0}});
  CHECK_THROWS(project::project_vi_shift(beta, delta, "R1"));
  CHECK_THROWS(project::project_vi_shift(paper_beta(), delta, "R9"));
}

TEST_CASE("encounters change arithmetic") {
  RegionActivity activity{"R1", 1e6, 5e4, 1000000};
  auto zero = project::encounters_change(0.0, activity, "s");
  CHECK(zero.per_capita_change_yr == 0.0);
  CHECK(zero.total_change_yr == 0.0);

  auto entry = project::encounters_change(0.001, activity, "s");
  CHECK(entry.per_capita_change_yr == doctest::Approx(-1.04).epsilon(1e-12));
  CHECK(entry.total_change_yr == doctest::Approx(-1.04e6).epsilon(1e-12));

  RegionActivity bad = activity;
  bad.devices = 0.0;
  CHECK_THROWS(project::encounters_change(0.001, bad, "s"));
}

TEST_CASE("Dallas-calibrated golden projections") {
  // Calibration: 7.5M residents, 0.052 devices per person, 10M weekly visits.
  RegionActivity dallas{"19100", 1e7, 390000.0, 7500000};
  auto beta = paper_beta();

  auto ssp5 = delta_with({{"t_30_35", 0.736}, {"t_ge_35", 0.2}}, "ssp5");
  ssp5.region_codes = {"19100"};
  double shift5 = project::project_vi_shift(beta, ssp5, "19100");
  CHECK(shift5 == doctest::Approx(0.0008).epsilon(1e-12));
  auto entry5 = project::encounters_change(shift5, dallas, "ssp5");
  CHECK(std::abs(entry5.total_change_yr) == doctest::Approx(8.0e6).epsilon(0.01));

  auto ssp1 = delta_with({{"t_30_35", 0.648}, {"t_ge_35", 0.05}}, "ssp1");
  ssp1.region_codes = {"19100"};
  double shift1 = project::project_vi_shift(beta, ssp1, "19100");
  auto entry1 = project::encounters_change(shift1, dallas, "ssp1");
  CHECK(std::abs(entry1.total_change_yr) == doctest::Approx(4.9e6).epsilon(0.01));

  // positive isolation shift means fewer encounters
  CHECK(entry5.total_change_yr < 0.0);
  CHECK(std::abs(entry5.total_change_yr) > std::abs(entry1.total_change_yr));
}

TEST_CASE("projection is linear in the deltas") {
  auto beta = paper_beta();
  RegionActivity activity{"R1", 2e5, 1e4, 400000};
  auto d1 = delta_with({{"t_30_35", 0.5}, {"t_ge_35", 0.25}});
  auto d2 = delta_with({{"t_30_35", 1.0}, {"t_ge_35", 0.5}});
  double s1 = project::project_vi_shift(beta, d1, "R1");
  double s2 = project::project_vi_shift(beta, d2, "R1");
  CHECK(s2 == doctest::Approx(2.0 * s1).epsilon(1e-12));
  auto e1 = project::encounters_change(s1, activity, "a");
  auto e2 = project::encounters_change(s2, activity, "a");
  CHECK(e2.per_capita_change_yr == doctest::Approx(2.0 * e1.per_capita_change_yr).epsilon(1e-12));
  CHECK(e2.total_change_yr == doctest::Approx(2.0 * e1.total_change_yr).epsilon(1e-12));
}

TEST_CASE("scenario ordering under bin-wise dominance") {
  auto beta = paper_beta();
  // worst case dominates best case on the positive-coefficient bins
  auto worst = delta_with({{"t_30_35", 0.9}, {"t_ge_35", 0.4}});
  auto best = delta_with({{"t_30_35", 0.4}, {"t_ge_35", 0.1}});
  CHECK(project::project_vi_shift(beta, worst, "R1") >=
        project::project_vi_shift(beta, best, "R1"));
}

TEST_CASE("self-projection yields exactly zero change") {
  auto beta = paper_beta();
  auto delta = delta_with({});  // scenario equals climatology
  RegionActivity activity{"R1", 2e5, 1e4, 400000};
  double shift = project::project_vi_shift(beta, delta, "R1");
  CHECK(shift == 0.0);
  auto entry = project::encounters_change(shift, activity, "ref");
  CHECK(entry.per_capita_change_yr == 0.0);
  CHECK(entry.total_change_yr == 0.0);
}

TEST_CASE("project_all covers regions with activity data") {
  auto beta = paper_beta();
  auto delta = delta_with({{"t_ge_35", 0.5}});
  delta.region_codes = {"R1"};
  std::map<std::string, RegionActivity> activity{
      {"R1", {"R1", 2e5, 1e4, 400000}}};
  auto projection = project::project_all(beta, delta, activity);
  REQUIRE(projection.entries.size() == 1);
  CHECK(projection.entries[0].region_code == "R1");
  CHECK(projection.entries[0].scenario == "s");
  CHECK(projection.entries[0].delta_vi_weekly == doctest::Approx(0.5 * 0.0017));
}
