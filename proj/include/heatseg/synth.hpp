#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "heatseg/climate.hpp"
#include "heatseg/core.hpp"
#include "heatseg/ingest.hpp"
#include "heatseg/isolation.hpp"
#include "heatseg/regress.hpp"

// Seeded synthetic cities, visit tables, weather grids, and regression DGPs,
// plus the brute-force oracles the tests check against. All randomness comes
// from a SplitMix64-style counter generator (integer state, documented output
// function), never from library defaults, so fixed seeds reproduce the same
// data on every platform.

namespace heatseg::synth {

// Counter-based generator: output i is the SplitMix64 finalizer applied to
// base + i * golden-gamma. Normal deviates are Irwin-Hall(12) shaped, built
// from additions only.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  double next_unit();  // [0, 1), 53 bits
  double next_normal(double sd = 1.0);
  std::int64_t next_int(std::int64_t lo, std::int64_t hi);  // inclusive

 private:
  std::uint64_t base_ = 0;
  std::uint64_t counter_ = 0;
};

struct CityParams {
  int n_pois = 20;
  int n_cbgs = 10;
  double white_share = 0.5;        // fraction of CBGs classified White
  double segregation_dial = 0.5;   // 0 mixed .. 1 fully separated POI choice
  double visits_scale = 500.0;     // expected resident visitors per week
  double outside_visitor_rate = 0.0;
  int n_weeks = 1;
  std::uint64_t seed = 1;
};

// One deterministic synthetic city. Dial 1 makes every POI single-group;
// dial 0 gives every CBG the identical POI choice distribution. Throws on
// infeasible counts (needs at least one CBG per group, one POI per set).
ingest::DatasetBundle generate_city(const CityParams& params);

// Per-visit enumeration oracle: expands every resident visitor into unit
// visits (visits-per-visitor many), averages the POI White-visit shares per
// group with compensated summation, and differences the group means. Refuses
// instances beyond max_expanded unit entries. Returns the VI, throwing when
// either group has no resident visits.
double oracle_vi(const ingest::DatasetBundle& bundle, const std::string& region_code,
                 int week_index, std::int64_t max_expanded = 1000000);

struct DenseOlsResult {
  Eigen::VectorXd beta;
  std::vector<std::string> col_labels;
  std::vector<std::string> dropped_columns;
};

// Dense dummy-variable WLS on an *undemeaned* design: one dummy per factor
// level (reference levels dropped, intercept added), trend columns expanded
// per group, solved by rank-revealing QR. Refuses designs beyond 5000 rows.
DenseOlsResult oracle_ols_dense(const regress::DesignMatrix& design);

struct DgpParams {
  int n_regions = 20;
  int n_weeks = 30;
  int n_states = 4;
  std::vector<double> beta_true;  // per non-reference temperature bin
  std::vector<double> rho_true;   // per non-reference precipitation bin
  double fe_scale_region = 0.05;
  double fe_scale_week = 0.02;
  double fe_scale_state_month = 0.02;
  double noise_sd = 0.01;
  std::uint64_t seed = 1;
  climate::BinSpec bins;
  SampleWindow window;
};

struct DgpData {
  isolation::IsolationPanel vi_panel;
  climate::ExposurePanel exposure;
  std::vector<double> beta_true;  // aligned with non-reference temp labels
  std::vector<double> rho_true;   // aligned with non-reference precip labels
  std::vector<std::string> temp_labels;
  std::vector<std::string> precip_labels;
};

// Seasonal-temperature exposure panel plus an outcome built from the fixed
// effects model with known coefficients; the ground truth comes back for
// recovery and coverage tests.
DgpData generate_dgp(const DgpParams& params);

// Full synthetic dataset on disk: every CSV the pipeline ingests plus a
// ready-to-run pipeline config (pipeline.cfg).
struct SynthDatasetConfig {
  int n_regions = 20;
  int n_weeks = 30;
  int pois_per_region = 12;
  int cbgs_per_region = 8;
  int cells_per_region = 2;
  double white_share = 0.6;
  double segregation_dial = 0.5;
  double visits_scale = 400.0;
  double outside_visitor_rate = 0.05;
  double device_rate = 0.052;  // devices per person
  int reference_years = 3;     // climatology window immediately before sample
  int scenario_year = 2050;
  std::uint64_t seed = 1;
  SampleWindow window;
};

void write_synth_dataset(const SynthDatasetConfig& config, const std::string& out_dir);

}  // namespace heatseg::synth
