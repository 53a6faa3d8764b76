#include "heatseg/regress.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "heatseg/csv.hpp"

namespace heatseg::regress {

FactorSpec FactorSpec::variant(const std::string& name) {
  FactorSpec spec;
  spec.factors = {Factor::Region, Factor::Week};
  if (name == "region_week") {
  } else if (name == "state_quarter") {
    spec.factors.push_back(Factor::StateByQuarter);
  } else if (name == "state_cal_month") {
    spec.factors.push_back(Factor::StateByCalendarMonth);
  } else if (name == "state_month") {
    spec.factors.push_back(Factor::StateByMonth);
  } else if (name == "state_cal_week") {
    spec.factors.push_back(Factor::StateByCalendarWeek);
  } else if (name == "state_trend") {
    spec.trends.push_back(Trend::StateLinearWeekly);
  } else {
    throw std::invalid_argument("unknown fixed-effects variant '" + name + "'");
  }
  return spec;
}

const std::vector<std::string>& FactorSpec::variant_names() {
  static const std::vector<std::string> names = {"region_week",   "state_quarter",
                                                 "state_cal_month", "state_month",
                                                 "state_cal_week",  "state_trend"};
  return names;
}

std::string FactorSpec::id() const {
  std::string out;
  for (Factor f : factors) {
    if (!out.empty()) out += "+";
    switch (f) {
      case Factor::Region: out += "region"; break;
      case Factor::Week: out += "week"; break;
      case Factor::StateByMonth: out += "state_month"; break;
      case Factor::StateByCalendarMonth: out += "state_cal_month"; break;
      case Factor::StateByQuarter: out += "state_quarter"; break;
      case Factor::StateByCalendarWeek: out += "state_cal_week"; break;
    }
  }
  for ([[maybe_unused]] Trend t : trends) {
    if (!out.empty()) out += "+";
    out += "state_trend";
  }
  return out.empty() ? "none" : out;
}

namespace {

// Raw (pre-densified) level key for one observation.
std::int64_t factor_key(Factor f, int region_ordinal, const WeekId& week, int state_ordinal) {
  const Date monday = week.monday;
  switch (f) {
    case Factor::Region:
      return region_ordinal;
    case Factor::Week:
      return week.index;
    case Factor::StateByMonth:
      return static_cast<std::int64_t>(state_ordinal) * 100000 + monday.year * 100 + monday.month;
    case Factor::StateByCalendarMonth:
      return static_cast<std::int64_t>(state_ordinal) * 100 + monday.month;
    case Factor::StateByQuarter:
      return static_cast<std::int64_t>(state_ordinal) * 10 + (monday.month - 1) / 3 + 1;
    case Factor::StateByCalendarWeek:
      return static_cast<std::int64_t>(state_ordinal) * 100 + week_of_year(monday);
  }
  return 0;
}

std::vector<int> densify(const std::vector<std::int64_t>& keys, int* n_levels) {
  std::vector<std::int64_t> uniq = keys;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::unordered_map<std::int64_t, int> pos;
  pos.reserve(uniq.size() * 2);
  for (std::size_t i = 0; i < uniq.size(); ++i) pos[uniq[i]] = static_cast<int>(i);
  std::vector<int> ids(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) ids[i] = pos[keys[i]];
  *n_levels = static_cast<int>(uniq.size());
  return ids;
}

}  // namespace

DesignMatrix build_design(const isolation::IsolationPanel& vi_panel,
                          const climate::ExposurePanel& exposure, const FactorSpec& factors,
                          const DesignOptions& options) {
  const climate::BinSpec& spec = exposure.spec;
  spec.validate();

  std::unordered_map<int, int> exposure_week_pos;
  for (std::size_t i = 0; i < exposure.weeks.size(); ++i)
    exposure_week_pos[exposure.weeks[i].index] = static_cast<int>(i);

  struct RowRef {
    int vi_region;
    int vi_week;
    int exp_row;
  };
  std::vector<RowRef> rows;
  std::vector<int> region_used(vi_panel.regions.size(), -1);
  for (std::size_t r = 0; r < vi_panel.regions.size(); ++r) {
    const RegionId& region = vi_panel.regions[r];
    if (options.region_subset && !options.region_subset->count(region.code)) continue;
    int er = exposure.region_index(region.code);
    if (er < 0) continue;
    for (std::size_t w = 0; w < vi_panel.weeks.size(); ++w) {
      if (vi_panel.missing(static_cast<int>(r), static_cast<int>(w))) continue;
      auto it = exposure_week_pos.find(vi_panel.weeks[w].index);
      if (it == exposure_week_pos.end()) continue;
      rows.push_back({static_cast<int>(r), static_cast<int>(w), exposure.row(er, it->second)});
      region_used[r] = 1;
    }
  }
  if (rows.empty())
    throw std::runtime_error("design is empty: no (region, week) pair with both VI and exposure");

  DesignMatrix design;
  design.factor_spec = factors;

  // Dense region ordinals over regions that actually contribute rows.
  std::vector<int> region_ordinal(vi_panel.regions.size(), -1);
  for (std::size_t r = 0; r < vi_panel.regions.size(); ++r) {
    if (region_used[r] == 1) {
      region_ordinal[r] = static_cast<int>(design.region_codes.size());
      design.region_codes.push_back(vi_panel.regions[r].code);
    }
  }

  std::vector<std::string> states;
  for (std::size_t r = 0; r < vi_panel.regions.size(); ++r)
    if (region_used[r] == 1) states.push_back(vi_panel.regions[r].state);
  std::sort(states.begin(), states.end());
  states.erase(std::unique(states.begin(), states.end()), states.end());
  auto state_ordinal = [&](const std::string& s) {
    return static_cast<int>(std::lower_bound(states.begin(), states.end(), s) - states.begin());
  };

  // Base weather columns: temperature bins then precipitation, references omitted.
  struct BaseCol {
    std::string label;
    bool is_temp;
    int bin;  // -1 for the continuous precipitation column
  };
  std::vector<BaseCol> base;
  for (int b = 0; b < spec.n_temp_bins(); ++b)
    if (b != spec.reference_temp_bin) base.push_back({spec.temp_label(b), true, b});
  if (options.continuous_precip) {
    base.push_back({"p_total_mm", false, -1});
  } else {
    for (int b = 0; b < spec.n_precip_bins(); ++b)
      if (b != spec.reference_precip_bin) base.push_back({spec.precip_label(b), false, b});
  }

  const int n = static_cast<int>(rows.size());
  const int k_base = static_cast<int>(base.size());
  const bool split = options.split.has_value();
  const int k = split ? 2 * k_base : k_base;

  design.X.setZero(n, k);
  design.y.resize(n);
  design.w.resize(n);
  design.lat.resize(n);
  design.lon.resize(n);
  design.region_row.resize(n);
  design.week_row.resize(n);

  std::vector<Side> row_side(n, Side::Above);
  for (int i = 0; i < n; ++i) {
    const RowRef& ref = rows[i];
    const RegionId& region = vi_panel.regions[ref.vi_region];
    design.y(i) = vi_panel.values(ref.vi_region, ref.vi_week);
    design.w(i) = static_cast<double>(region.population);
    design.lat(i) = region.latitude;
    design.lon(i) = region.longitude;
    design.region_row[i] = region_ordinal[ref.vi_region];
    design.week_row[i] = vi_panel.weeks[ref.vi_week].index;
    if (split) {
      auto it = options.split->find(region.code);
      if (it == options.split->end())
        throw std::runtime_error("split indicator missing region " + region.code);
      row_side[i] = it->second;
    }
    for (int c = 0; c < k_base; ++c) {
      double value;
      if (base[c].is_temp) {
        value = exposure.temp_days(ref.exp_row, base[c].bin);
      } else if (base[c].bin < 0) {
        value = exposure.precip_total(ref.exp_row);
      } else {
        value = exposure.precip_days(ref.exp_row, base[c].bin);
      }
      if (!split) {
        design.X(i, c) = value;
      } else {
        design.X(i, row_side[i] == Side::Above ? c : k_base + c) = value;
      }
    }
  }

  if (!split) {
    for (const auto& col : base) design.col_labels.push_back(col.label);
  } else {
    for (const auto& col : base) design.col_labels.push_back("above:" + col.label);
    for (const auto& col : base) design.col_labels.push_back("below:" + col.label);
  }

  for (int c = 0; c < k; ++c) {
    if (design.X.col(c).cwiseAbs().maxCoeff() == 0.0)
      design.warnings.push_back("column " + design.col_labels[c] +
                                " is all zero before demeaning");
  }

  // Factor level ids.
  for (Factor f : factors.factors) {
    std::vector<std::int64_t> keys(n);
    for (int i = 0; i < n; ++i) {
      const RowRef& ref = rows[i];
      const RegionId& region = vi_panel.regions[ref.vi_region];
      keys[i] = factor_key(f, design.region_row[i], vi_panel.weeks[ref.vi_week],
                           state_ordinal(region.state));
    }
    int n_levels = 0;
    design.factor_levels.push_back(densify(keys, &n_levels));
    design.factor_level_counts.push_back(n_levels);
  }

  for (Trend t : factors.trends) {
    (void)t;  // StateLinearWeekly is the only trend
    std::vector<std::int64_t> keys(n);
    Eigen::VectorXd values(n);
    double mean_week = 0.0;
    for (int i = 0; i < n; ++i) mean_week += design.week_row[i];
    mean_week /= n;
    for (int i = 0; i < n; ++i) {
      const RowRef& ref = rows[i];
      keys[i] = state_ordinal(vi_panel.regions[ref.vi_region].state);
      values(i) = design.week_row[i] - mean_week;
    }
    int n_groups = 0;
    design.trend_groups.push_back(densify(keys, &n_groups));
    design.trend_group_counts.push_back(n_groups);
    design.trend_values.push_back(std::move(values));
  }

  return design;
}

DesignMatrix demean(DesignMatrix design, const DemeanConfig& config) {
  const int n = static_cast<int>(design.rows());
  const int k = static_cast<int>(design.cols());
  const int n_factors = static_cast<int>(design.factor_levels.size());
  const int n_trends = static_cast<int>(design.trend_groups.size());

  if (n_factors == 0 && n_trends == 0) {
    design.demeaned = true;
    return design;
  }

  // Per-level weight sums are invariant across sweeps.
  std::vector<std::vector<double>> level_wsum(n_factors);
  for (int f = 0; f < n_factors; ++f) {
    level_wsum[f].assign(design.factor_level_counts[f], 0.0);
    for (int i = 0; i < n; ++i) level_wsum[f][design.factor_levels[f][i]] += design.w(i);
  }
  std::vector<std::vector<double>> trend_wcc(n_trends);   // sum w*c^2 per group
  std::vector<std::vector<double>> trend_cmax(n_trends);  // max |c| per group
  for (int t = 0; t < n_trends; ++t) {
    trend_wcc[t].assign(design.trend_group_counts[t], 0.0);
    trend_cmax[t].assign(design.trend_group_counts[t], 0.0);
    for (int i = 0; i < n; ++i) {
      const int g = design.trend_groups[t][i];
      const double c = design.trend_values[t](i);
      trend_wcc[t][g] += design.w(i) * c * c;
      trend_cmax[t][g] = std::max(trend_cmax[t][g], std::abs(c));
    }
  }

  Eigen::MatrixXd work(n, k + 1);
  work.col(0) = design.y;
  work.rightCols(k) = design.X;

  std::vector<double> acc;
  int sweeps = 0;
  double delta = std::numeric_limits<double>::infinity();
  while (delta >= config.tolerance) {
    if (sweeps >= config.max_sweeps)
      throw std::runtime_error("demeaning did not converge after " +
                               std::to_string(config.max_sweeps) +
                               " sweeps; final max change " + csv::format_double(delta));
    ++sweeps;
    delta = 0.0;
    for (int f = 0; f < n_factors; ++f) {
      const auto& ids = design.factor_levels[f];
      const auto& wsum = level_wsum[f];
      acc.assign(design.factor_level_counts[f], 0.0);
      for (int col = 0; col <= k; ++col) {
        double* v = work.col(col).data();
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int i = 0; i < n; ++i) acc[ids[i]] += design.w(i) * v[i];
        for (std::size_t g = 0; g < acc.size(); ++g) {
          acc[g] = wsum[g] > 0.0 ? acc[g] / wsum[g] : 0.0;
          delta = std::max(delta, std::abs(acc[g]));
        }
        for (int i = 0; i < n; ++i) v[i] -= acc[ids[i]];
      }
    }
    for (int t = 0; t < n_trends; ++t) {
      const auto& ids = design.trend_groups[t];
      const Eigen::VectorXd& c = design.trend_values[t];
      acc.assign(design.trend_group_counts[t], 0.0);
      for (int col = 0; col <= k; ++col) {
        double* v = work.col(col).data();
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int i = 0; i < n; ++i) acc[ids[i]] += design.w(i) * c(i) * v[i];
        for (std::size_t g = 0; g < acc.size(); ++g) {
          acc[g] = trend_wcc[t][g] > 0.0 ? acc[g] / trend_wcc[t][g] : 0.0;
          delta = std::max(delta, std::abs(acc[g]) * trend_cmax[t][g]);
        }
        for (int i = 0; i < n; ++i) v[i] -= acc[ids[i]] * c(i);
      }
    }
  }

  design.y = work.col(0);
  design.X = work.rightCols(k);
  design.demeaned = true;
  design.demean_sweeps = sweeps;
  design.demean_final_delta = delta;
  return design;
}

int RegressionFit::col_index(const std::string& label) const {
  for (std::size_t i = 0; i < col_labels.size(); ++i)
    if (col_labels[i] == label) return static_cast<int>(i);
  return -1;
}

RegressionFit wls_fit(const DesignMatrix& design) {
  if (!design.demeaned)
    throw std::logic_error("wls_fit requires a demeaned design; call demean() first");
  const int n = static_cast<int>(design.rows());
  const int k = static_cast<int>(design.cols());
  const double total_weight = design.w.sum();
  if (!(total_weight > 0.0)) throw std::runtime_error("zero total weight");

  const Eigen::VectorXd sqw = design.w.array().sqrt();
  Eigen::MatrixXd scaled = design.X.array().colwise() * sqw.array();
  const Eigen::VectorXd scaled_y = design.y.array() * sqw.array();

  // Greedy leftmost rank screen: drop a column when its scaled version lies
  // (numerically) in the span of the kept columns to its left.
  constexpr double kRankTol = 1e-9;
  Eigen::MatrixXd basis(n, k);
  std::vector<int> kept;
  RegressionFit fit;
  for (int j = 0; j < k; ++j) {
    Eigen::VectorXd v = scaled.col(j);
    const double norm0 = v.norm();
    if (norm0 == 0.0) {
      fit.dropped_columns.push_back(design.col_labels[j]);
      continue;
    }
    for (int pass = 0; pass < 2; ++pass)
      if (!kept.empty())
        v -= basis.leftCols(static_cast<int>(kept.size())) *
             (basis.leftCols(static_cast<int>(kept.size())).transpose() * v);
    if (v.norm() <= kRankTol * norm0) {
      fit.dropped_columns.push_back(design.col_labels[j]);
      continue;
    }
    basis.col(static_cast<int>(kept.size())) = v / v.norm();
    kept.push_back(j);
  }

  const int k_kept = static_cast<int>(kept.size());
  Eigen::MatrixXd x_kept(n, k_kept);
  Eigen::MatrixXd xs_kept(n, k_kept);
  for (int j = 0; j < k_kept; ++j) {
    x_kept.col(j) = design.X.col(kept[j]);
    xs_kept.col(j) = scaled.col(kept[j]);
    fit.col_labels.push_back(design.col_labels[kept[j]]);
  }

  if (k_kept > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs_kept);
    fit.beta = qr.solve(scaled_y);
    fit.residuals = design.y - x_kept * fit.beta;
  } else {
    fit.beta.resize(0);
    fit.residuals = design.y;
  }

  fit.X = std::move(x_kept);
  fit.w = design.w;
  fit.region_row = design.region_row;
  fit.week_row = design.week_row;
  fit.region_codes = design.region_codes;
  fit.lat = design.lat;
  fit.lon = design.lon;
  fit.n_rows = n;

  long long absorbed = 0;
  for (std::size_t f = 0; f < design.factor_level_counts.size(); ++f)
    absorbed += design.factor_level_counts[f];
  if (!design.factor_level_counts.empty())
    absorbed -= static_cast<long long>(design.factor_level_counts.size()) - 1;
  for (int g : design.trend_group_counts) absorbed += g;
  fit.effective_dof = std::max<long long>(0, n - k_kept - absorbed);
  return fit;
}

std::map<std::string, SubsampleFit> fit_subsamples(
    const isolation::IsolationPanel& vi_panel, const climate::ExposurePanel& exposure,
    const FactorSpec& factors, const std::map<std::string, std::string>& partition,
    const DesignOptions& options, const DemeanConfig& demean_config) {
  for (const auto& region : vi_panel.regions)
    if (!partition.count(region.code))
      throw std::invalid_argument("partition does not cover region " + region.code);

  std::map<std::string, std::set<std::string>> classes;
  for (const auto& [code, cls] : partition) classes[cls].insert(code);

  std::map<std::string, SubsampleFit> fits;
  for (const auto& [cls, codes] : classes) {
    SubsampleFit entry;
    int present = 0;
    for (const auto& region : vi_panel.regions)
      if (codes.count(region.code)) ++present;
    if (present < 2) {
      entry.flag = "fewer than two regions in class";
      fits.emplace(cls, std::move(entry));
      continue;
    }
    DesignOptions opt = options;
    opt.region_subset = codes;
    try {
      DesignMatrix dm = demean(build_design(vi_panel, exposure, factors, opt), demean_config);
      RegressionFit fit = wls_fit(dm);
      if (fit.col_labels.empty()) {
        entry.flag = "all columns dropped as rank deficient";
      } else {
        entry.fit = std::move(fit);
      }
    } catch (const std::exception& e) {
      entry.flag = e.what();
    }
    fits.emplace(cls, std::move(entry));
  }
  return fits;
}

double weighted_median(const std::map<std::string, double>& values,
                       const std::map<std::string, double>& weights) {
  if (values.empty()) throw std::invalid_argument("weighted_median of empty set");
  std::vector<std::pair<double, double>> items;  // (value, weight)
  double total = 0.0;
  for (const auto& [key, value] : values) {
    auto it = weights.find(key);
    const double w = it == weights.end() ? 1.0 : it->second;
    items.emplace_back(value, w);
    total += w;
  }
  std::sort(items.begin(), items.end());
  double cum = 0.0;
  for (const auto& [value, w] : items) {
    cum += w;
    if (cum > total / 2.0) return value;
  }
  return items.back().first;
}

std::map<std::string, Side> median_split_indicator(const std::map<std::string, double>& values,
                                                   const std::map<std::string, double>& weights) {
  const double median = weighted_median(values, weights);
  std::map<std::string, Side> sides;
  for (const auto& [key, value] : values)
    sides[key] = value > median ? Side::Above : Side::Below;
  return sides;
}

void write_coefficients(const std::string& path, const std::vector<CoefficientRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "#schema: spec_id,column,beta,se,ci_low,ci_high\n";
  out << "spec_id,column,beta,se,ci_low,ci_high\n";
  for (const auto& row : rows) {
    out << row.spec_id << ',' << row.column << ',' << csv::format_double(row.beta) << ','
        << csv::format_double(row.se) << ',' << csv::format_double(row.ci_low) << ','
        << csv::format_double(row.ci_high) << '\n';
  }
}

}  // namespace heatseg::regress
