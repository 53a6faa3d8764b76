#include "heatseg/infer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <thread>
#include <unordered_map>

namespace heatseg::infer {

namespace {

constexpr double kEarthRadiusKm = 6371.0088;
constexpr double kZ975 = 1.959964;

Eigen::MatrixXd bread_inverse(const regress::RegressionFit& fit) {
  if (fit.X.cols() == 0)
    throw std::runtime_error("fit has no retained columns, nothing to estimate");
  const Eigen::MatrixXd xtwx =
      fit.X.transpose() * (fit.w.asDiagonal() * fit.X);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(xtwx);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw std::runtime_error("singular bread matrix X'WX");
  return ldlt.solve(Eigen::MatrixXd::Identity(xtwx.rows(), xtwx.cols()));
}

// Scores s_i = w_i e_i x_i, one row each.
Eigen::MatrixXd scores(const regress::RegressionFit& fit) {
  return fit.X.array().colwise() * (fit.w.array() * fit.residuals.array());
}

CovarianceEstimate sandwich(const regress::RegressionFit& fit, const Eigen::MatrixXd& meat) {
  const Eigen::MatrixXd bread = bread_inverse(fit);
  Eigen::MatrixXd v = bread * meat * bread;
  v = ((v + v.transpose()) * 0.5).eval();
  CovarianceEstimate est;
  est.matrix = std::move(v);
  for (int j = 0; j < est.matrix.rows(); ++j)
    if (est.matrix(j, j) < 0.0) est.invalid_columns.push_back(j);
  return est;
}

Eigen::MatrixXd robust_meat(const Eigen::MatrixXd& s) {
  const int k = static_cast<int>(s.cols());
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    meat.noalias() += s.row(i).transpose() * s.row(i);
  return meat;
}

// Dense ids in ascending value order.
std::vector<int> dense_ids(const std::vector<long long>& raw, int* n_out) {
  std::vector<long long> uniq = raw;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::unordered_map<long long, int> pos;
  for (std::size_t i = 0; i < uniq.size(); ++i) pos[uniq[i]] = static_cast<int>(i);
  std::vector<int> ids(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) ids[i] = pos[raw[i]];
  *n_out = static_cast<int>(uniq.size());
  return ids;
}

Eigen::MatrixXd cluster_meat(const Eigen::MatrixXd& s, const std::vector<int>& ids,
                             int n_clusters) {
  const int k = static_cast<int>(s.cols());
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_clusters, k);
  for (Eigen::Index i = 0; i < s.rows(); ++i) sums.row(ids[i]) += s.row(i);
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (int g = 0; g < n_clusters; ++g) meat.noalias() += sums.row(g).transpose() * sums.row(g);
  return meat;
}

}  // namespace

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  constexpr double deg = M_PI / 180.0;
  const double phi1 = lat1 * deg, phi2 = lat2 * deg;
  const double dphi = (lat2 - lat1) * deg;
  const double dlambda = (lon2 - lon1) * deg;
  const double a = std::sin(dphi / 2) * std::sin(dphi / 2) +
                   std::cos(phi1) * std::cos(phi2) * std::sin(dlambda / 2) * std::sin(dlambda / 2);
  return 2.0 * kEarthRadiusKm * std::atan2(std::sqrt(a), std::sqrt(std::max(0.0, 1.0 - a)));
}

CovarianceEstimate vcov_robust(const regress::RegressionFit& fit) {
  if (fit.residuals.size() != fit.X.rows())
    throw std::invalid_argument("fit lacks residuals or demeaned design");
  return sandwich(fit, robust_meat(scores(fit)));
}

CovarianceEstimate vcov_cluster_twoway(const regress::RegressionFit& fit,
                                       const std::vector<int>& cluster1,
                                       const std::vector<int>& cluster2) {
  const std::size_t n = static_cast<std::size_t>(fit.X.rows());
  if (cluster1.size() != n || cluster2.size() != n)
    throw std::invalid_argument("cluster id vectors must match the row count");
  const Eigen::MatrixXd s = scores(fit);

  std::vector<long long> raw1(n), raw2(n), raw12(n);
  for (std::size_t i = 0; i < n; ++i) {
    raw1[i] = cluster1[i];
    raw2[i] = cluster2[i];
    raw12[i] = static_cast<long long>(cluster1[i]) * 2000000011LL + cluster2[i];
  }
  int g1 = 0, g2 = 0, g12 = 0;
  const auto ids1 = dense_ids(raw1, &g1);
  const auto ids2 = dense_ids(raw2, &g2);
  const auto ids12 = dense_ids(raw12, &g12);
  if (g1 < 2) throw std::runtime_error("first cluster dimension has a single cluster");
  if (g2 < 2) throw std::runtime_error("second cluster dimension has a single cluster");

  const Eigen::MatrixXd meat = cluster_meat(s, ids1, g1) + cluster_meat(s, ids2, g2) -
                               cluster_meat(s, ids12, g12);
  return sandwich(fit, meat);
}

CovarianceEstimate vcov_cluster_twoway(const regress::RegressionFit& fit) {
  return vcov_cluster_twoway(fit, fit.region_row, fit.week_row);
}

CovarianceEstimate vcov_conley(const regress::RegressionFit& fit, const ConleySpec& spec) {
  if (spec.cutoff_km <= 0.0) throw std::invalid_argument("Conley cutoff must be positive");
  if (spec.lag_weeks < 0) throw std::invalid_argument("Conley lag must be non-negative");
  const int n = static_cast<int>(fit.X.rows());
  if (fit.lat.size() != n || fit.lon.size() != n)
    throw std::invalid_argument("fit rows lack coordinates");

  const int n_regions = static_cast<int>(fit.region_codes.size());

  // Region centroids: constant within a region by construction.
  std::vector<double> rlat(n_regions, 0.0), rlon(n_regions, 0.0);
  std::vector<bool> seen(n_regions, false);
  for (int i = 0; i < n; ++i) {
    const int r = fit.region_row[i];
    if (!seen[r]) {
      rlat[r] = fit.lat(i);
      rlon[r] = fit.lon(i);
      seen[r] = true;
    }
  }

  // Spatial neighbor lists with positive Bartlett weight, ascending region id.
  std::vector<std::vector<std::pair<int, double>>> neighbors(n_regions);
  for (int a = 0; a < n_regions; ++a) {
    if (!seen[a]) continue;
    for (int b = 0; b < n_regions; ++b) {
      if (!seen[b]) continue;
      const double d = a == b ? 0.0 : haversine_km(rlat[a], rlon[a], rlat[b], rlon[b]);
      const double ks = 1.0 - d / spec.cutoff_km;
      if (ks > 0.0) neighbors[a].emplace_back(b, ks);
    }
  }

  // Row lookup by (region, week index); the estimator needs panel structure.
  std::map<int, int> week_pos;
  for (int i = 0; i < n; ++i) week_pos.emplace(fit.week_row[i], 0);
  {
    int p = 0;
    for (auto& [week, pos] : week_pos) pos = p++;
  }
  const int n_weeks = static_cast<int>(week_pos.size());
  std::vector<int> grid(static_cast<std::size_t>(n_regions) * n_weeks, -1);
  for (int i = 0; i < n; ++i) {
    auto& slot = grid[static_cast<std::size_t>(fit.region_row[i]) * n_weeks +
                      week_pos[fit.week_row[i]]];
    if (slot != -1)
      throw std::runtime_error("duplicate (region, week) row; Conley needs panel structure");
    slot = i;
  }

  const Eigen::MatrixXd s = scores(fit);
  const int k = static_cast<int>(s.cols());

  // Kernel-weighted neighbor sums z_i = sum_j k_s k_t s_j are independent per
  // row, so workers fill them by row blocks; the rank-one reduction below
  // stays in ascending row order, making the result thread-count invariant.
  Eigen::MatrixXd z(n, k);
  auto fill_rows = [&](int row_begin, int row_end) {
    for (int i = row_begin; i < row_end; ++i) {
      const int r = fit.region_row[i];
      const int week = fit.week_row[i];
      z.row(i).setZero();
      for (int lag = -spec.lag_weeks; lag <= spec.lag_weeks; ++lag) {
        auto wit = week_pos.find(week + lag);
        if (wit == week_pos.end()) continue;
        const double kt = 1.0 - std::abs(lag) / (spec.lag_weeks + 1.0);
        if (!(kt > 0.0)) continue;
        const std::size_t base = static_cast<std::size_t>(wit->second);
        for (const auto& [r2, ks] : neighbors[r]) {
          const int j = grid[static_cast<std::size_t>(r2) * n_weeks + base];
          if (j < 0) continue;
          const double kernel = ks * kt;
          if (kernel == 1.0) {
            z.row(i) += s.row(j);
          } else {
            z.row(i) += kernel * s.row(j);
          }
        }
      }
    }
  };
  const int n_workers =
      std::max(1, std::min<int>(static_cast<int>(std::thread::hardware_concurrency()),
                                n / 1024 + 1));
  if (n_workers <= 1) {
    fill_rows(0, n);
  } else {
    std::vector<std::thread> workers;
    const int chunk = (n + n_workers - 1) / n_workers;
    for (int w = 0; w < n_workers; ++w)
      workers.emplace_back(fill_rows, w * chunk, std::min(n, (w + 1) * chunk));
    for (auto& worker : workers) worker.join();
  }

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < n; ++i) meat.noalias() += s.row(i).transpose() * z.row(i);
  return sandwich(fit, meat);
}

CovarianceEstimate compute_vcov(const regress::RegressionFit& fit, const VcovSpec& spec) {
  switch (spec.kind) {
    case VcovKind::Robust: return vcov_robust(fit);
    case VcovKind::TwoWayCluster: return vcov_cluster_twoway(fit);
    case VcovKind::Conley: return vcov_conley(fit, spec.conley);
  }
  throw std::logic_error("unknown vcov kind");
}

// Acklam's rational approximation, |relative error| < 1.15e-9.
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile level must be in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p > 1 - plow) {
    const double q = std::sqrt(-2 * std::log(1 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

std::vector<ConfidenceInterval> confidence_intervals(const regress::RegressionFit& fit,
                                                     const CovarianceEstimate& vcov,
                                                     double level) {
  if (vcov.matrix.rows() != fit.beta.size())
    throw std::invalid_argument("covariance size does not match coefficient count");
  const double z = level == 0.95 ? kZ975 : normal_quantile(0.5 + level / 2.0);
  std::vector<ConfidenceInterval> out;
  out.reserve(fit.col_labels.size());
  for (int j = 0; j < fit.beta.size(); ++j) {
    ConfidenceInterval ci;
    ci.column = fit.col_labels[j];
    ci.beta = fit.beta(j);
    const double var = vcov.matrix(j, j);
    if (var < 0.0) {
      ci.valid = false;
      ci.se = std::numeric_limits<double>::quiet_NaN();
      ci.low = ci.high = std::numeric_limits<double>::quiet_NaN();
    } else {
      ci.se = std::sqrt(var);
      ci.low = ci.beta - z * ci.se;
      ci.high = ci.beta + z * ci.se;
    }
    out.push_back(ci);
  }
  return out;
}

}  // namespace heatseg::infer
