#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "heatseg/regress.hpp"

// Asymptotic covariance estimators for a fitted regression: HC0-style
// heteroskedasticity-robust, two-way clustered (inclusion-exclusion), and
// Conley spatial-temporal HAC with Bartlett kernels. No degrees-of-freedom
// corrections anywhere, so the estimators are directly comparable: when the
// kernels or clusters collapse to own-observation terms, every estimator
// reproduces the robust matrix bit for bit.

namespace heatseg::infer {

struct ConleySpec {
  double cutoff_km = 500.0;  // Bartlett spatial kernel reach
  int lag_weeks = 4;         // Bartlett temporal kernel, zero weight past the lag
};

enum class VcovKind { Robust, TwoWayCluster, Conley };

struct VcovSpec {
  VcovKind kind = VcovKind::Conley;
  ConleySpec conley;
};

struct CovarianceEstimate {
  Eigen::MatrixXd matrix;            // over kept columns, symmetrized
  std::vector<int> invalid_columns;  // negative diagonal (possible for two-way)
};

// Great-circle distance between two (lat, lon) points, kilometers.
double haversine_km(double lat1, double lon1, double lat2, double lon2);

// (X'WX)^{-1} (sum_i w_i^2 e_i^2 x_i x_i') (X'WX)^{-1}
CovarianceEstimate vcov_robust(const regress::RegressionFit& fit);

// V(c1) + V(c2) - V(c1 intersect c2). May be indefinite; negative-diagonal
// columns are flagged, never hidden. Throws when a dimension has one cluster.
CovarianceEstimate vcov_cluster_twoway(const regress::RegressionFit& fit,
                                       const std::vector<int>& cluster1,
                                       const std::vector<int>& cluster2);
// Default clustering: region and week.
CovarianceEstimate vcov_cluster_twoway(const regress::RegressionFit& fit);

// Bartlett spatial kernel max(0, 1 - d/cutoff) on region-centroid distances,
// Bartlett temporal kernel max(0, 1 - h/(lag+1)) on week-index gaps. Requires
// one row per (region, week).
CovarianceEstimate vcov_conley(const regress::RegressionFit& fit, const ConleySpec& spec);

CovarianceEstimate compute_vcov(const regress::RegressionFit& fit, const VcovSpec& spec);

struct ConfidenceInterval {
  std::string column;
  double beta = 0.0;
  double se = 0.0;
  double low = 0.0;
  double high = 0.0;
  bool valid = true;
};

// beta +/- z * sqrt(diag); z = 1.959964 at the default 95% level.
std::vector<ConfidenceInterval> confidence_intervals(const regress::RegressionFit& fit,
                                                     const CovarianceEstimate& vcov,
                                                     double level = 0.95);

double normal_quantile(double p);

}  // namespace heatseg::infer
