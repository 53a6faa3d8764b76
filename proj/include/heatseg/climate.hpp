#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "heatseg/core.hpp"

// Gridded daily weather -> region-day series (population-weighted), weekly
// bin-day counts, long-run climatology, and scenario-minus-climatology deltas.
//
// Calendar-week convention for climatology and scenarios: each year is cut
// into 52 seven-day weeks (days 1..364); days 365/366 are dropped. Every week
// then holds exactly 7 days in every year, so bin counts sum to 7 and deltas
// conserve days. Annual totals use the fixed 52-weeks-per-year constant.

namespace heatseg::climate {

inline constexpr int kWeeksPerYear = 52;

struct GridCellDay {
  std::string cell_id;
  Date date;
  double tmax_c = 0.0;
  double precip_mm = 0.0;
  double population = 0.0;
};

struct RegionDayWeather {
  std::string region_code;
  Date date;
  double tmax_c = 0.0;
  double precip_mm = 0.0;
};

// Half-open [lower, upper) temperature bins with open-ended extremes:
// (-inf, e0), [e0, e1), ..., [e_last, +inf). Precipitation bins are the exact
// dry bin {0}, then (0, p0), [p0, p1), ..., [p_last, +inf).
struct BinSpec {
  std::vector<double> temp_edges = {0, 5, 10, 15, 20, 25, 30, 35};
  int reference_temp_bin = 5;  // [20, 25)
  std::vector<double> precip_edges = {5, 15};
  int reference_precip_bin = 0;  // dry days

  int n_temp_bins() const { return static_cast<int>(temp_edges.size()) + 1; }
  int n_precip_bins() const { return static_cast<int>(precip_edges.size()) + 2; }
  int temp_bin(double tmax_c) const;
  int precip_bin(double precip_mm) const;
  std::string temp_label(int bin) const;
  std::string precip_label(int bin) const;
  void validate() const;  // throws std::invalid_argument

  bool operator==(const BinSpec&) const = default;
};

// Population-weighted means per (region, date), cells summed in cell_id order.
// Throws when a region-date has no mapped population weight.
std::vector<RegionDayWeather> aggregate_to_region(
    std::vector<GridCellDay> cells,
    const std::unordered_map<std::string, std::string>& cell_to_region);

struct WeekBins {
  std::vector<int> temp_days;    // one count per temperature bin, sums to 7
  std::vector<int> precip_days;  // one count per precipitation bin, sums to 7
  double precip_total_mm = 0.0;
};

// Exactly 7 consecutive Monday-aligned days. Throws on gaps or misalignment.
WeekBins bin_week(const std::vector<RegionDayWeather>& days, const BinSpec& spec);

struct ExposurePanel {
  BinSpec spec;
  std::vector<std::string> region_codes;  // sorted
  std::vector<WeekId> weeks;              // ascending
  Eigen::MatrixXi temp_days;              // (region*week) x n_temp_bins
  Eigen::MatrixXi precip_days;            // (region*week) x n_precip_bins
  Eigen::VectorXd precip_total;           // weekly mm per (region*week)

  int row(int region, int week) const { return region * static_cast<int>(weeks.size()) + week; }
  int region_index(const std::string& code) const;  // -1 if absent
};

// Bins every fully covered sample week for every region in the series. A week
// partially covered for some region is an incomplete-week error.
ExposurePanel build_exposure_panel(const std::vector<RegionDayWeather>& daily,
                                   const BinSpec& spec, const SampleWindow& window = {});

struct Climatology {
  BinSpec spec;
  std::vector<std::string> region_codes;
  int n_years = 0;
  Eigen::MatrixXd temp_mean;    // (region*52) x n_temp_bins, mean days per week
  Eigen::MatrixXd precip_mean;  // (region*52) x n_precip_bins

  int row(int region, int week_of_year) const { return region * kWeeksPerYear + week_of_year; }
};

// Mean weekly bin-day counts per region and calendar week across the
// reference years (inclusive). Requires complete daily coverage of days
// 1..364 of every year; gaps raise an error listing missing dates.
Climatology climatology(const std::vector<RegionDayWeather>& daily, int first_year,
                        int last_year, const BinSpec& spec);

struct ScenarioDelta {
  BinSpec spec;
  std::string scenario;
  std::vector<std::string> region_codes;
  Eigen::MatrixXd temp_delta;    // region x n_temp_bins, avg weekly day-count change
  Eigen::MatrixXd precip_delta;  // region x n_precip_bins
};

// Average weekly scenario bin counts minus climatology, per region and bin.
// The scenario series must cover days 1..364 of a single calendar year.
ScenarioDelta scenario_delta(const std::vector<RegionDayWeather>& scenario_daily,
                             int scenario_year, const Climatology& reference,
                             const BinSpec& spec, const std::string& label);

// Mean daily tmax per region over a series (the climate-normal split input).
std::map<std::string, double> mean_tmax_by_region(const std::vector<RegionDayWeather>& daily);

// grid_daily.csv: cell_id,date,tmax_c,precip_mm,population
std::vector<GridCellDay> parse_grid_daily(const std::string& path);
void write_grid_daily(const std::string& path, const std::vector<GridCellDay>& cells);

// exposure_panel.csv: region_code,week_monday,bin_label,days
// (the p_total_mm pseudo-bin row carries weekly millimeters in `days`)
void write_exposure_panel(const std::string& path, const ExposurePanel& panel);
ExposurePanel read_exposure_panel(const std::string& path, const BinSpec& spec,
                                  const SampleWindow& window = {});

// scenario_delta.csv: region_code,bin_label,delta_days_per_week,scenario
void write_scenario_deltas(const std::string& path, const std::vector<ScenarioDelta>& deltas);

}  // namespace heatseg::climate
