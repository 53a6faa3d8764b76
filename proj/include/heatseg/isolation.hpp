#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "heatseg/core.hpp"
#include "heatseg/ingest.hpp"

// Visit-isolation estimation per region-week: group visit imputation from
// visitor counts (visits-per-visitor scaling), the exposure measure, the
// isolation index, and the sample-exclusion rule for regions lacking NonWhite
// visits in some week.

namespace heatseg::isolation {

// Estimated group visit counts for one POI-week. The "resident" variants sum
// only visitors whose home CBG lies in the POI's own region; the plain
// variants cover all classified visitors regardless of home region.
struct GroupVisitShares {
  double est_white_visits = 0.0;
  double est_nonwhite_visits = 0.0;
  double est_white_visits_resident = 0.0;
  double est_nonwhite_visits_resident = 0.0;
  std::int64_t total_visits = 0;
};

struct CbgContext {
  // CBGs absent from `labels` (unknown or zero-population) count toward the
  // visit totals but toward neither group.
  std::unordered_map<std::string, GroupLabel> labels;
  std::unordered_map<std::string, std::string> residency;  // cbg -> region code

  static CbgContext from_bundle(const ingest::DatasetBundle& bundle);
};

// Scales each group's visitor count by visits-per-visitor t^V/t^N. Returns
// false (and leaves `out` untouched) for the inconsistent t^N = 0, t^V > 0
// case, which callers must tally and exclude.
bool try_impute_group_visits(const WeeklyVisitRecord& record, const CbgContext& ctx,
                             const std::string& home_region, GroupVisitShares* out);

// Throwing wrapper.
GroupVisitShares impute_group_visits(const WeeklyVisitRecord& record, const CbgContext& ctx,
                                     const std::string& home_region);

// Exposure of group a to group b across the region's POIs:
//   sum_l (a_resident_l / |A|) * (b_l / t_l),  POIs with t_l = 0 skipped.
// Computed as a single final division by |A| so boundary cases are exact.
// Empty |A| leaves the measure undefined.
std::optional<double> exposure(const std::vector<GroupVisitShares>& shares, GroupLabel group_a,
                               GroupLabel group_b);

// White-to-White exposure minus NonWhite-to-White exposure; missing when
// either group's resident visit total is zero. Always within [-1, 1].
std::optional<double> visit_isolation(const std::vector<GroupVisitShares>& shares);

struct IsolationPanel {
  std::vector<RegionId> regions;  // retained regions, sorted by code
  std::vector<WeekId> weeks;      // weeks present in the data, ascending
  Eigen::MatrixXd values;         // regions x weeks
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing;
  std::vector<RegionId> excluded_regions;  // missing NonWhite visits in >= 1 week

  // Dataset anomalies tallied during the build.
  std::int64_t flagged_poi_weeks = 0;      // t^N = 0 with t^V > 0
  std::int64_t unresolved_visitors = 0;    // visitors with no usable group label

  int region_index(const std::string& code) const;  // -1 if absent
};

// Computes VI for every region over the weeks present in the data. A region
// with zero estimated NonWhite resident visits in any such week is excluded
// outright; retained regions keep explicit missing gaps.
IsolationPanel build_isolation_panel(const ingest::DatasetBundle& bundle);

// Restricts POIs (and their visit rows) to the given categories.
ingest::DatasetBundle filter_by_category(const ingest::DatasetBundle& bundle,
                                         const std::set<PoiCategory>& categories,
                                         const CategoryMap& category_map = CategoryMap::defaults());

// isolation_panel.csv: region_code,week_monday,vi,missing
void write_isolation_panel(const std::string& path, const IsolationPanel& panel);
IsolationPanel read_isolation_panel(const std::string& path,
                                    const std::vector<RegionId>& regions,
                                    const SampleWindow& window = {});

}  // namespace heatseg::isolation
