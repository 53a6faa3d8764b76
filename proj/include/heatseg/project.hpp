#pragma once

#include <map>
#include <string>
#include <vector>

#include "heatseg/climate.hpp"

// Converts fitted temperature coefficients and scenario bin-day deltas into
// per-capita and total changes in between-group encounters for the scenario
// year. Sign convention: a positive isolation shift means fewer encounters,
// so encounter changes are negative when isolation rises.

namespace heatseg::project {

inline constexpr double kWeeksPerYear = 52.0;

struct RegionActivity {
  std::string region_code;
  double mean_weekly_visits = 0.0;  // sample-average total visit volume
  double devices = 0.0;             // registered devices
  std::int64_t population = 0;
};

struct ProjectionEntry {
  std::string region_code;
  std::string scenario;
  double delta_vi_weekly = 0.0;
  double per_capita_change_yr = 0.0;  // per device-holder, per year
  double total_change_yr = 0.0;       // scaled by population/devices
};

struct EncounterProjection {
  std::vector<ProjectionEntry> entries;
};

// Weekly isolation shift sum_b beta_b * delta_days_b over temperature bins.
// The reference bin carries an implicit zero coefficient; any other bin
// missing from `beta` is a bin mismatch error.
double project_vi_shift(const std::map<std::string, double>& beta_by_label,
                        const climate::ScenarioDelta& delta, const std::string& region_code);

// per-capita = -shift * visits * weeks / devices; total = per-capita * population.
ProjectionEntry encounters_change(double vi_shift_weekly, const RegionActivity& activity,
                                  const std::string& scenario,
                                  double weeks_per_year = kWeeksPerYear);

// Full projection over every region present in the delta. Regions without
// activity data are skipped (reported by the caller).
EncounterProjection project_all(const std::map<std::string, double>& beta_by_label,
                                const climate::ScenarioDelta& delta,
                                const std::map<std::string, RegionActivity>& activity,
                                double weeks_per_year = kWeeksPerYear);

// projection.csv:
//   region_code,scenario,delta_vi_weekly,per_capita_change_yr,total_change_yr,
//   per_capita_decrease_yr,total_decrease_yr
// (the last two columns are the magnitudes of the signed changes)
void write_projection(const std::string& path, const std::vector<ProjectionEntry>& entries);

}  // namespace heatseg::project
