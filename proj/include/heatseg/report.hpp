#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "heatseg/climate.hpp"
#include "heatseg/core.hpp"
#include "heatseg/infer.hpp"
#include "heatseg/isolation.hpp"

// Pipeline orchestration: a strict key-value configuration, staged execution
// writing plot-ready CSVs, LOESS trend smoothing, representativeness
// diagnostics, and per-region summary tables. Reruns with identical inputs
// produce byte-identical outputs.

namespace heatseg::report {

inline constexpr const char* kToolVersion = "0.1.0";

class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, const std::string& message, int exit_code = 1)
      : std::runtime_error("[" + stage + "] " + message),
        stage_(std::move(stage)),
        exit_code_(exit_code) {}
  const std::string& stage() const { return stage_; }
  int exit_code() const { return exit_code_; }

 private:
  std::string stage_;
  int exit_code_;
};

struct PipelineConfig {
  // Input files (absolute after load; empty when not configured).
  std::string visits, pois, cbgs, regions, cbg_to_region, grid_to_region;
  std::string grid_daily, reference_grid;
  std::map<std::string, std::string> scenario_grids;  // label -> path
  std::string devices, region_income, representativeness_input;

  int reference_first_year = 0;
  int reference_last_year = 0;
  int scenario_year = 2050;

  std::string output_dir = "out";
  std::string factors = "state_month";  // one of the six fixed-effects menus
  infer::VcovSpec vcov;
  std::string split = "none";  // none|climate_normal|income|population_quartiles
  std::set<PoiCategory> categories;  // empty = all
  bool continuous_precip = false;
  // Visit volume entering the encounter projection: the region's total visits
  // or only its estimated NonWhite visits.
  std::string projection_visits = "total";  // total|nonwhite
  climate::BinSpec bins;
  SampleWindow window;

  std::string config_hash;  // FNV-1a of the raw config bytes

  // Strict parse: unknown keys are rejected; every referenced file must
  // exist (exit code 2 otherwise). Relative paths resolve against the config
  // file's directory. `overrides` apply before validation.
  static PipelineConfig load(const std::string& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides = {});
};

enum Stage : unsigned {
  kStageIsolation = 1u << 0,
  kStageExposure = 1u << 1,
  kStageFit = 1u << 2,
  kStageProject = 1u << 3,
  kStageReport = 1u << 4,
  kStageAll = kStageIsolation | kStageExposure | kStageFit | kStageProject | kStageReport,
};

struct PipelineResult {
  std::vector<std::string> outputs;  // file names written under output_dir
};

// Runs the requested stages (plus whatever they need in memory) and writes
// their artifacts. Throws PipelineError with a stage tag on any failure.
PipelineResult run_pipeline(const PipelineConfig& config, unsigned stages = kStageAll);

// Tricube-weighted local polynomial fit evaluated at every input point.
// Windows hold the nearest ceil(span*n) points (floored at degree+3 for
// solvability), consecutive and truncated at the series ends. x must be
// strictly increasing.
std::vector<double> loess_trend(const std::vector<double>& x, const std::vector<double>& y,
                                double span = 0.6, int degree = 2);

struct BucketPair {
  std::string bucket;
  double devices = 0.0;
  double census = 0.0;
};

// Aggregates both series over the bucketing's CBG universe; buckets with no
// counts are emitted with zeros.
std::vector<BucketPair> representativeness(const std::map<std::string, double>& device_counts,
                                           const std::map<std::string, double>& census_var,
                                           const std::map<std::string, std::string>& bucketing);

struct RegionSummary {
  std::string region_code;
  double mean_vi = 0.0;  // NaN when excluded or never observed
  int weeks_observed = 0;
  bool excluded = false;
};

// Mean VI over non-missing weeks per region; excluded regions appear as
// sentinel rows.
std::vector<RegionSummary> summarize_panel(const isolation::IsolationPanel& panel);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace heatseg::report
