#include "heatseg/isolation.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include "heatseg/csv.hpp"

namespace heatseg::isolation {

CbgContext CbgContext::from_bundle(const ingest::DatasetBundle& bundle) {
  CbgContext ctx;
  ctx.labels.reserve(bundle.cbgs.size() * 2);
  for (const auto& profile : bundle.cbgs) {
    if (auto label = try_classify_cbg(profile)) ctx.labels.emplace(profile.cbg, *label);
    // Residency: explicit crosswalk entry wins, profile region is the fallback.
    auto it = bundle.cbg_to_region.find(profile.cbg);
    if (it != bundle.cbg_to_region.end()) {
      ctx.residency.emplace(profile.cbg, it->second);
    } else if (!profile.region_code.empty()) {
      ctx.residency.emplace(profile.cbg, profile.region_code);
    }
  }
  for (const auto& [cbg, region] : bundle.cbg_to_region)
    ctx.residency.emplace(cbg, region);
  return ctx;
}

bool try_impute_group_visits(const WeeklyVisitRecord& record, const CbgContext& ctx,
                             const std::string& home_region, GroupVisitShares* out) {
  if (record.total_visitors == 0) {
    if (record.total_visits > 0) return false;  // inconsistent upstream aggregation
    *out = GroupVisitShares{};
    return true;
  }
  std::int64_t white = 0, nonwhite = 0, white_res = 0, nonwhite_res = 0;
  for (const auto& [cbg, count] : record.visitors_by_cbg) {
    auto lab = ctx.labels.find(cbg);
    if (lab == ctx.labels.end()) continue;  // unclassifiable: counts stay in totals only
    bool resident = false;
    auto res = ctx.residency.find(cbg);
    if (res != ctx.residency.end() && res->second == home_region) resident = true;
    if (lab->second == GroupLabel::White) {
      white += count;
      if (resident) white_res += count;
    } else {
      nonwhite += count;
      if (resident) nonwhite_res += count;
    }
  }
  // visitors * t^V / t^N, product first so exact ratios stay exact.
  const double tv = static_cast<double>(record.total_visits);
  const double tn = static_cast<double>(record.total_visitors);
  GroupVisitShares shares;
  shares.est_white_visits = static_cast<double>(white) * tv / tn;
  shares.est_nonwhite_visits = static_cast<double>(nonwhite) * tv / tn;
  shares.est_white_visits_resident = static_cast<double>(white_res) * tv / tn;
  shares.est_nonwhite_visits_resident = static_cast<double>(nonwhite_res) * tv / tn;
  shares.total_visits = record.total_visits;
  *out = shares;
  return true;
}

GroupVisitShares impute_group_visits(const WeeklyVisitRecord& record, const CbgContext& ctx,
                                     const std::string& home_region) {
  GroupVisitShares shares;
  if (!try_impute_group_visits(record, ctx, home_region, &shares))
    throw std::domain_error("POI-week " + record.poi_id + " has visits but zero visitors");
  return shares;
}

std::optional<double> exposure(const std::vector<GroupVisitShares>& shares, GroupLabel group_a,
                               GroupLabel group_b) {
  double total_a = 0.0;
  double weighted_share_sum = 0.0;
  for (const auto& s : shares) {
    const double a_resident = group_a == GroupLabel::White ? s.est_white_visits_resident
                                                           : s.est_nonwhite_visits_resident;
    total_a += a_resident;
    if (s.total_visits <= 0) continue;
    const double b_all =
        group_b == GroupLabel::White ? s.est_white_visits : s.est_nonwhite_visits;
    weighted_share_sum += a_resident * (b_all / static_cast<double>(s.total_visits));
  }
  if (total_a <= 0.0) return std::nullopt;
  return weighted_share_sum / total_a;
}

std::optional<double> visit_isolation(const std::vector<GroupVisitShares>& shares) {
  auto white_to_white = exposure(shares, GroupLabel::White, GroupLabel::White);
  auto nonwhite_to_white = exposure(shares, GroupLabel::NonWhite, GroupLabel::White);
  if (!white_to_white || !nonwhite_to_white) return std::nullopt;
  return *white_to_white - *nonwhite_to_white;
}

int IsolationPanel::region_index(const std::string& code) const {
  for (std::size_t i = 0; i < regions.size(); ++i)
    if (regions[i].code == code) return static_cast<int>(i);
  return -1;
}

IsolationPanel build_isolation_panel(const ingest::DatasetBundle& bundle) {
  const CbgContext ctx = CbgContext::from_bundle(bundle);

  std::vector<RegionId> all_regions = bundle.regions;
  std::sort(all_regions.begin(), all_regions.end(),
            [](const RegionId& a, const RegionId& b) { return a.code < b.code; });
  std::unordered_map<std::string, int> region_pos;
  for (std::size_t i = 0; i < all_regions.size(); ++i)
    region_pos[all_regions[i].code] = static_cast<int>(i);

  std::map<int, WeekId> week_by_index;
  for (const auto& rec : bundle.visits) week_by_index.emplace(rec.week.index, rec.week);
  std::vector<WeekId> weeks;
  weeks.reserve(week_by_index.size());
  std::unordered_map<int, int> week_pos;
  for (const auto& [idx, wk] : week_by_index) {
    week_pos[idx] = static_cast<int>(weeks.size());
    weeks.push_back(wk);
  }

  const int n_regions = static_cast<int>(all_regions.size());
  const int n_weeks = static_cast<int>(weeks.size());

  IsolationPanel panel;
  // Bucket imputed shares per region-week, preserving input record order so
  // the reduction order is fixed.
  std::vector<std::vector<GroupVisitShares>> cells(
      static_cast<std::size_t>(n_regions) * std::max(n_weeks, 1));
  for (const auto& rec : bundle.visits) {
    const PoiRecord* poi = bundle.find_poi(rec.poi_id);
    if (!poi) continue;  // orphan rows are a validation issue, not panel input
    auto rit = region_pos.find(poi->region_code);
    if (rit == region_pos.end()) continue;
    GroupVisitShares shares;
    if (!try_impute_group_visits(rec, ctx, poi->region_code, &shares)) {
      ++panel.flagged_poi_weeks;
      continue;
    }
    std::int64_t classified = 0;
    for (const auto& [cbg, count] : rec.visitors_by_cbg)
      if (ctx.labels.count(cbg)) classified += count;
    panel.unresolved_visitors += rec.total_visitors - classified;
    cells[static_cast<std::size_t>(rit->second) * n_weeks + week_pos[rec.week.index]]
        .push_back(shares);
  }

  Eigen::MatrixXd values(n_regions, n_weeks);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing(n_regions, n_weeks);
  std::vector<bool> excluded(n_regions, false);
  for (int r = 0; r < n_regions; ++r) {
    for (int w = 0; w < n_weeks; ++w) {
      const auto& shares = cells[static_cast<std::size_t>(r) * n_weeks + w];
      double nonwhite_resident_total = 0.0;
      for (const auto& s : shares) nonwhite_resident_total += s.est_nonwhite_visits_resident;
      if (nonwhite_resident_total <= 0.0) excluded[r] = true;
      auto vi = visit_isolation(shares);
      if (vi) {
        values(r, w) = *vi;
        missing(r, w) = false;
      } else {
        values(r, w) = std::numeric_limits<double>::quiet_NaN();
        missing(r, w) = true;
      }
    }
    if (n_weeks == 0) excluded[r] = true;
  }

  int n_retained = 0;
  for (int r = 0; r < n_regions; ++r)
    if (!excluded[r]) ++n_retained;
  panel.weeks = weeks;
  panel.values.resize(n_retained, n_weeks);
  panel.missing.resize(n_retained, n_weeks);
  int out_row = 0;
  for (int r = 0; r < n_regions; ++r) {
    if (excluded[r]) {
      panel.excluded_regions.push_back(all_regions[r]);
      continue;
    }
    panel.regions.push_back(all_regions[r]);
    panel.values.row(out_row) = values.row(r);
    panel.missing.row(out_row) = missing.row(r);
    ++out_row;
  }
  return panel;
}

ingest::DatasetBundle filter_by_category(const ingest::DatasetBundle& bundle,
                                         const std::set<PoiCategory>& categories,
                                         const CategoryMap& category_map) {
  if (categories.empty()) throw std::invalid_argument("category filter must be nonempty");
  ingest::DatasetBundle out;
  std::unordered_map<std::string, bool> keep;
  keep.reserve(bundle.pois.size() * 2);
  for (const auto& poi : bundle.pois) {
    bool kept = categories.count(category_map.category_of(poi.naics)) > 0;
    keep[poi.poi_id] = kept;
    if (kept) out.pois.push_back(poi);
  }
  for (const auto& rec : bundle.visits) {
    auto it = keep.find(rec.poi_id);
    if (it != keep.end() && it->second) out.visits.push_back(rec);
  }
  out.cbgs = bundle.cbgs;
  out.regions = bundle.regions;
  out.grid_to_region = bundle.grid_to_region;
  out.cbg_to_region = bundle.cbg_to_region;
  out.rebuild_index();
  return out;
}

void write_isolation_panel(const std::string& path, const IsolationPanel& panel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "#schema: region_code,week_monday,vi,missing\n";
  out << "region_code,week_monday,vi,missing\n";
  for (std::size_t r = 0; r < panel.regions.size(); ++r) {
    for (std::size_t w = 0; w < panel.weeks.size(); ++w) {
      const bool miss = panel.missing(static_cast<int>(r), static_cast<int>(w));
      out << panel.regions[r].code << ',' << format_date(panel.weeks[w].monday) << ','
          << (miss ? "" : csv::format_double(panel.values(static_cast<int>(r),
                                                          static_cast<int>(w))))
          << ',' << (miss ? '1' : '0') << '\n';
    }
  }
}

IsolationPanel read_isolation_panel(const std::string& path,
                                    const std::vector<RegionId>& regions,
                                    const SampleWindow& window) {
  auto table = csv::read_file(path);
  csv::require_header(table, {"region_code", "week_monday", "vi", "missing"}, path);

  std::unordered_map<std::string, const RegionId*> region_by_code;
  for (const auto& r : regions) region_by_code[r.code] = &r;

  std::map<std::string, std::map<int, std::pair<double, bool>>> by_region;
  std::map<int, WeekId> week_by_index;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != 4)
      throw std::runtime_error(path + ":" + std::to_string(table.row_numbers[r]) + ": bad row");
    Date monday = parse_date(row[1]);
    WeekId week = week_of(monday, window);
    week_by_index.emplace(week.index, week);
    bool miss = row[3] == "1";
    double value = miss ? std::numeric_limits<double>::quiet_NaN() : csv::parse_double(row[2]);
    by_region[row[0]][week.index] = {value, miss};
  }

  IsolationPanel panel;
  std::unordered_map<int, int> week_pos;
  for (const auto& [idx, wk] : week_by_index) {
    week_pos[idx] = static_cast<int>(panel.weeks.size());
    panel.weeks.push_back(wk);
  }
  panel.values.resize(static_cast<int>(by_region.size()), static_cast<int>(panel.weeks.size()));
  panel.missing.setConstant(static_cast<int>(by_region.size()),
                            static_cast<int>(panel.weeks.size()), true);
  panel.values.setConstant(std::numeric_limits<double>::quiet_NaN());
  int row = 0;
  for (const auto& [code, cells] : by_region) {
    auto it = region_by_code.find(code);
    if (it == region_by_code.end())
      throw std::runtime_error(path + ": region " + code + " not in regions list");
    panel.regions.push_back(*it->second);
    for (const auto& [widx, cell] : cells) {
      panel.values(row, week_pos[widx]) = cell.first;
      panel.missing(row, week_pos[widx]) = cell.second;
    }
    ++row;
  }
  return panel;
}

}  // namespace heatseg::isolation
