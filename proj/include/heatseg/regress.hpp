#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "heatseg/climate.hpp"
#include "heatseg/core.hpp"
#include "heatseg/isolation.hpp"

// Regression layer: builds the region-week design from the isolation and
// exposure panels, absorbs high-dimensional fixed effects by alternating
// weighted group demeaning, and fits population-weighted least squares,
// including interaction (varying-coefficient) and subsample variants.

namespace heatseg::regress {

enum class Factor {
  Region,
  Week,
  StateByMonth,          // state x sample month, the preferred third effect
  StateByCalendarMonth,  // state x month-of-year seasonality
  StateByQuarter,        // state x calendar quarter seasonality
  StateByCalendarWeek,   // state x week-of-year seasonality
};

enum class Trend { StateLinearWeekly };

struct FactorSpec {
  std::vector<Factor> factors{Factor::Region, Factor::Week, Factor::StateByMonth};
  std::vector<Trend> trends;

  // The six standard fixed-effects menus; `name` one of: region_week,
  // state_quarter, state_cal_month, state_month, state_cal_week, state_trend.
  static FactorSpec variant(const std::string& name);
  static const std::vector<std::string>& variant_names();
  std::string id() const;
};

enum class Side { Above, Below };

struct DesignOptions {
  // Region -> side; when set, every weather column is duplicated into
  // above/below copies (varying-coefficient form).
  std::optional<std::map<std::string, Side>> split;
  // Replace precipitation bins by one weekly-total column.
  bool continuous_precip = false;
  // Restrict rows to these region codes (subsample fits).
  std::optional<std::set<std::string>> region_subset;
};

struct DesignMatrix {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::VectorXd w;  // region population
  std::vector<std::string> col_labels;

  // Dense level ids per factor dimension, one entry per row.
  std::vector<std::vector<int>> factor_levels;
  std::vector<int> factor_level_counts;
  std::vector<std::vector<int>> trend_groups;
  std::vector<int> trend_group_counts;
  std::vector<Eigen::VectorXd> trend_values;

  // Row metadata carried through to inference.
  std::vector<int> region_row;           // row -> ordinal into region_codes
  std::vector<int> week_row;             // row -> sample week index
  std::vector<std::string> region_codes; // ordinal -> code
  Eigen::VectorXd lat, lon;              // per row, region centroid

  FactorSpec factor_spec;
  std::vector<std::string> warnings;
  bool demeaned = false;
  int demean_sweeps = 0;
  double demean_final_delta = 0.0;

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index cols() const { return X.cols(); }
};

// Joins the two panels on (region, week), drops missing-VI rows listwise,
// omits the reference bins, and attaches factor levels and weights. Throws
// when the intersection is empty; all-zero columns are kept with a warning.
DesignMatrix build_design(const isolation::IsolationPanel& vi_panel,
                          const climate::ExposurePanel& exposure, const FactorSpec& factors,
                          const DesignOptions& options = {});

struct DemeanConfig {
  double tolerance = 1e-10;
  int max_sweeps = 10000;
};

// Replaces outcome and regressors by residuals from the weighted projection
// onto all factor dimensions (iterative alternating group demeaning) and any
// continuous trend terms. Throws on non-convergence, reporting the last delta.
DesignMatrix demean(DesignMatrix design, const DemeanConfig& config = {});

struct RegressionFit {
  Eigen::VectorXd beta;                   // per kept column
  std::vector<std::string> col_labels;    // kept columns
  std::vector<std::string> dropped_columns;
  Eigen::VectorXd residuals;              // per row, demeaned scale
  Eigen::MatrixXd X;                      // demeaned kept columns
  Eigen::VectorXd w;
  std::vector<int> region_row;
  std::vector<int> week_row;
  std::vector<std::string> region_codes;
  Eigen::VectorXd lat, lon;
  long long n_rows = 0;
  long long effective_dof = 0;

  int col_index(const std::string& label) const;  // -1 if dropped/absent
};

// Weighted least squares on the demeaned design via Householder QR.
// Rank-deficient columns are dropped deterministically (leftmost kept) and
// reported. Throws on zero total weight or an undemeaned design.
RegressionFit wls_fit(const DesignMatrix& demeaned);

struct SubsampleFit {
  std::optional<RegressionFit> fit;
  std::string flag;  // empty when fitted; reason otherwise (e.g. singleton class)
};

// Independent fits per partition class. Classes with a single region (or a
// failed build) are flagged, not fitted.
std::map<std::string, SubsampleFit> fit_subsamples(
    const isolation::IsolationPanel& vi_panel, const climate::ExposurePanel& exposure,
    const FactorSpec& factors, const std::map<std::string, std::string>& partition,
    const DesignOptions& options = {}, const DemeanConfig& demean_config = {});

// Weighted median split: Above iff value strictly exceeds the weighted
// median, where the median is the smallest value whose cumulative weight
// exceeds half the total.
std::map<std::string, Side> median_split_indicator(const std::map<std::string, double>& values,
                                                   const std::map<std::string, double>& weights);
double weighted_median(const std::map<std::string, double>& values,
                       const std::map<std::string, double>& weights);

struct CoefficientRow {
  std::string spec_id;
  std::string column;
  double beta = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// coefficients.csv: spec_id,column,beta,se,ci_low,ci_high
void write_coefficients(const std::string& path, const std::vector<CoefficientRow>& rows);

}  // namespace heatseg::regress
