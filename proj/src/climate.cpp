#include "heatseg/climate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "heatseg/csv.hpp"

namespace heatseg::climate {

namespace {

std::string fmt_edge(double e) {
  std::string s = csv::format_double(e);
  for (char& c : s) {
    if (c == '-') c = 'm';
    if (c == '.') c = 'p';
  }
  return s;
}

}  // namespace

int BinSpec::temp_bin(double tmax_c) const {
  int bin = 0;
  while (bin < static_cast<int>(temp_edges.size()) && tmax_c >= temp_edges[bin]) ++bin;
  return bin;
}

int BinSpec::precip_bin(double precip_mm) const {
  if (precip_mm <= 0.0) return 0;
  int bin = 1;
  while (bin - 1 < static_cast<int>(precip_edges.size()) && precip_mm >= precip_edges[bin - 1])
    ++bin;
  return bin;
}

std::string BinSpec::temp_label(int bin) const {
  if (bin == 0) return "t_lt_" + fmt_edge(temp_edges.front());
  if (bin == n_temp_bins() - 1) return "t_ge_" + fmt_edge(temp_edges.back());
  return "t_" + fmt_edge(temp_edges[bin - 1]) + "_" + fmt_edge(temp_edges[bin]);
}

std::string BinSpec::precip_label(int bin) const {
  if (bin == 0) return "p_dry";
  if (bin == 1) return "p_0_" + fmt_edge(precip_edges.front());
  if (bin == n_precip_bins() - 1) return "p_ge_" + fmt_edge(precip_edges.back());
  return "p_" + fmt_edge(precip_edges[bin - 2]) + "_" + fmt_edge(precip_edges[bin - 1]);
}

void BinSpec::validate() const {
  if (temp_edges.size() < 2) throw std::invalid_argument("need at least two temperature edges");
  for (std::size_t i = 1; i < temp_edges.size(); ++i)
    if (!(temp_edges[i] > temp_edges[i - 1]))
      throw std::invalid_argument("temperature edges must be strictly ascending");
  if (precip_edges.empty()) throw std::invalid_argument("need at least one precipitation edge");
  for (std::size_t i = 1; i < precip_edges.size(); ++i)
    if (!(precip_edges[i] > precip_edges[i - 1]))
      throw std::invalid_argument("precipitation edges must be strictly ascending");
  if (precip_edges.front() <= 0.0)
    throw std::invalid_argument("first precipitation edge must be positive");
  if (reference_temp_bin < 0 || reference_temp_bin >= n_temp_bins())
    throw std::invalid_argument("reference temperature bin out of range");
  if (reference_precip_bin < 0 || reference_precip_bin >= n_precip_bins())
    throw std::invalid_argument("reference precipitation bin out of range");
}

std::vector<RegionDayWeather> aggregate_to_region(
    std::vector<GridCellDay> cells,
    const std::unordered_map<std::string, std::string>& cell_to_region) {
  struct Key {
    std::string region;
    std::int64_t day;
    std::string cell;
    bool operator<(const Key& o) const {
      if (region != o.region) return region < o.region;
      if (day != o.day) return day < o.day;
      return cell < o.cell;
    }
  };
  std::vector<std::pair<Key, const GridCellDay*>> mapped;
  mapped.reserve(cells.size());
  for (const auto& cell : cells) {
    auto it = cell_to_region.find(cell.cell_id);
    if (it == cell_to_region.end()) continue;
    mapped.push_back({Key{it->second, serial_day(cell.date), cell.cell_id}, &cell});
  }
  std::sort(mapped.begin(), mapped.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<RegionDayWeather> out;
  std::size_t i = 0;
  while (i < mapped.size()) {
    std::size_t j = i;
    double wsum = 0.0, tsum = 0.0, psum = 0.0;
    while (j < mapped.size() && mapped[j].first.region == mapped[i].first.region &&
           mapped[j].first.day == mapped[i].first.day) {
      const GridCellDay& c = *mapped[j].second;
      wsum += c.population;
      tsum += c.population * c.tmax_c;
      psum += c.population * c.precip_mm;
      ++j;
    }
    if (wsum <= 0.0)
      throw std::runtime_error("region " + mapped[i].first.region +
                               " has zero population weight on " +
                               format_date(mapped[i].second->date));
    out.push_back({mapped[i].first.region, mapped[i].second->date, tsum / wsum, psum / wsum});
    i = j;
  }
  return out;
}

WeekBins bin_week(const std::vector<RegionDayWeather>& days, const BinSpec& spec) {
  if (days.size() != 7) throw std::invalid_argument("incomplete week: expected 7 days, got " +
                                                    std::to_string(days.size()));
  if (weekday(days.front().date) != 0)
    throw std::invalid_argument("week must start on a Monday, got " +
                                format_date(days.front().date));
  for (std::size_t i = 1; i < days.size(); ++i)
    if (serial_day(days[i].date) != serial_day(days[i - 1].date) + 1)
      throw std::invalid_argument("incomplete week: gap after " + format_date(days[i - 1].date));
  WeekBins bins;
  bins.temp_days.assign(spec.n_temp_bins(), 0);
  bins.precip_days.assign(spec.n_precip_bins(), 0);
  for (const auto& day : days) {
    ++bins.temp_days[spec.temp_bin(day.tmax_c)];
    ++bins.precip_days[spec.precip_bin(day.precip_mm)];
    bins.precip_total_mm += day.precip_mm;
  }
  return bins;
}

int ExposurePanel::region_index(const std::string& code) const {
  auto it = std::lower_bound(region_codes.begin(), region_codes.end(), code);
  if (it == region_codes.end() || *it != code) return -1;
  return static_cast<int>(it - region_codes.begin());
}

ExposurePanel build_exposure_panel(const std::vector<RegionDayWeather>& daily,
                                   const BinSpec& spec, const SampleWindow& window) {
  spec.validate();
  // region -> serial day -> value
  std::map<std::string, std::map<std::int64_t, RegionDayWeather>> series;
  const std::int64_t start = serial_day(window.start_monday);
  const std::int64_t end = start + static_cast<std::int64_t>(window.n_weeks) * 7;
  std::set<int> weeks_touched;
  for (const auto& day : daily) {
    std::int64_t s = serial_day(day.date);
    if (s < start || s >= end) continue;
    series[day.region_code][s] = day;
    weeks_touched.insert(static_cast<int>((s - start) / 7) + 1);
  }
  if (series.empty()) throw std::runtime_error("no daily weather inside the sample window");

  ExposurePanel panel;
  panel.spec = spec;
  for (const auto& [code, _] : series) panel.region_codes.push_back(code);
  for (int w : weeks_touched) panel.weeks.push_back(week_by_index(w, window));

  const int n_regions = static_cast<int>(panel.region_codes.size());
  const int n_weeks = static_cast<int>(panel.weeks.size());
  panel.temp_days.setZero(n_regions * n_weeks, spec.n_temp_bins());
  panel.precip_days.setZero(n_regions * n_weeks, spec.n_precip_bins());
  panel.precip_total.setZero(n_regions * n_weeks);

  for (int r = 0; r < n_regions; ++r) {
    const auto& days = series[panel.region_codes[r]];
    for (int w = 0; w < n_weeks; ++w) {
      const std::int64_t monday = serial_day(panel.weeks[w].monday);
      std::vector<RegionDayWeather> week;
      week.reserve(7);
      for (int d = 0; d < 7; ++d) {
        auto it = days.find(monday + d);
        if (it == days.end())
          throw std::runtime_error("incomplete week: region " + panel.region_codes[r] +
                                   " missing " + format_date(date_from_serial(monday + d)));
        week.push_back(it->second);
      }
      WeekBins bins = bin_week(week, spec);
      for (int b = 0; b < spec.n_temp_bins(); ++b)
        panel.temp_days(panel.row(r, w), b) = bins.temp_days[b];
      for (int b = 0; b < spec.n_precip_bins(); ++b)
        panel.precip_days(panel.row(r, w), b) = bins.precip_days[b];
      panel.precip_total(panel.row(r, w)) = bins.precip_total_mm;
    }
  }
  return panel;
}

namespace {

// Per-region weekly bin counts for days 1..364 of one year. Throws listing
// missing dates.
void bin_year(const std::map<std::int64_t, RegionDayWeather>& days, int year,
              const std::string& region, const BinSpec& spec, Eigen::MatrixXd& temp_acc,
              Eigen::MatrixXd& precip_acc, int region_row_base) {
  const std::int64_t jan1 = serial_day(Date{year, 1, 1});
  std::vector<std::string> missing;
  for (int w = 0; w < kWeeksPerYear; ++w) {
    std::vector<RegionDayWeather> week;
    week.reserve(7);
    for (int d = 0; d < 7; ++d) {
      auto it = days.find(jan1 + w * 7 + d);
      if (it == days.end()) {
        if (missing.size() < 10)
          missing.push_back(format_date(date_from_serial(jan1 + w * 7 + d)));
        continue;
      }
      week.push_back(it->second);
    }
    if (week.size() != 7) continue;  // reported below via `missing`
    for (const auto& day : week) {
      temp_acc(region_row_base + w, spec.temp_bin(day.tmax_c)) += 1.0;
      precip_acc(region_row_base + w, spec.precip_bin(day.precip_mm)) += 1.0;
    }
  }
  if (!missing.empty()) {
    std::string msg = "region " + region + " year " + std::to_string(year) + " missing dates:";
    for (const auto& m : missing) msg += " " + m;
    throw std::runtime_error(msg);
  }
}

}  // namespace

Climatology climatology(const std::vector<RegionDayWeather>& daily, int first_year,
                        int last_year, const BinSpec& spec) {
  spec.validate();
  if (last_year < first_year) throw std::invalid_argument("reference year range is empty");
  std::map<std::string, std::map<std::int64_t, RegionDayWeather>> series;
  for (const auto& day : daily) series[day.region_code][serial_day(day.date)] = day;
  if (series.empty()) throw std::runtime_error("empty reference daily series");

  Climatology clim;
  clim.spec = spec;
  clim.n_years = last_year - first_year + 1;
  for (const auto& [code, _] : series) clim.region_codes.push_back(code);
  const int n_regions = static_cast<int>(clim.region_codes.size());
  clim.temp_mean.setZero(n_regions * kWeeksPerYear, spec.n_temp_bins());
  clim.precip_mean.setZero(n_regions * kWeeksPerYear, spec.n_precip_bins());

  for (int r = 0; r < n_regions; ++r) {
    const auto& days = series[clim.region_codes[r]];
    for (int year = first_year; year <= last_year; ++year)
      bin_year(days, year, clim.region_codes[r], spec, clim.temp_mean, clim.precip_mean,
               r * kWeeksPerYear);
  }
  clim.temp_mean /= static_cast<double>(clim.n_years);
  clim.precip_mean /= static_cast<double>(clim.n_years);
  return clim;
}

ScenarioDelta scenario_delta(const std::vector<RegionDayWeather>& scenario_daily,
                             int scenario_year, const Climatology& reference,
                             const BinSpec& spec, const std::string& label) {
  if (!(spec == reference.spec))
    throw std::invalid_argument("scenario bin spec differs from the climatology bin spec");
  Climatology scen = climatology(scenario_daily, scenario_year, scenario_year, spec);
  if (scen.region_codes != reference.region_codes)
    throw std::invalid_argument("scenario regions differ from climatology regions");

  ScenarioDelta delta;
  delta.spec = spec;
  delta.scenario = label;
  delta.region_codes = reference.region_codes;
  const int n_regions = static_cast<int>(delta.region_codes.size());
  delta.temp_delta.setZero(n_regions, spec.n_temp_bins());
  delta.precip_delta.setZero(n_regions, spec.n_precip_bins());
  for (int r = 0; r < n_regions; ++r) {
    for (int w = 0; w < kWeeksPerYear; ++w) {
      delta.temp_delta.row(r) += scen.temp_mean.row(scen.row(r, w)) -
                                 reference.temp_mean.row(reference.row(r, w));
      delta.precip_delta.row(r) += scen.precip_mean.row(scen.row(r, w)) -
                                   reference.precip_mean.row(reference.row(r, w));
    }
    delta.temp_delta.row(r) /= static_cast<double>(kWeeksPerYear);
    delta.precip_delta.row(r) /= static_cast<double>(kWeeksPerYear);
  }
  return delta;
}

std::map<std::string, double> mean_tmax_by_region(const std::vector<RegionDayWeather>& daily) {
  std::map<std::string, std::pair<double, std::int64_t>> acc;
  for (const auto& day : daily) {
    auto& [sum, n] = acc[day.region_code];
    sum += day.tmax_c;
    ++n;
  }
  std::map<std::string, double> out;
  for (const auto& [code, sn] : acc) out[code] = sn.first / static_cast<double>(sn.second);
  return out;
}

std::vector<GridCellDay> parse_grid_daily(const std::string& path) {
  auto table = csv::read_file(path);
  csv::require_header(table, {"cell_id", "date", "tmax_c", "precip_mm", "population"}, path);
  std::vector<GridCellDay> cells;
  cells.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto where = [&] { return path + ":" + std::to_string(table.row_numbers[r]); };
    if (row.size() != 5) throw std::runtime_error(where() + ": expected 5 fields");
    GridCellDay cell;
    cell.cell_id = row[0];
    cell.date = parse_date(row[1]);
    cell.tmax_c = csv::parse_double(row[2]);
    cell.precip_mm = csv::parse_double(row[3]);
    cell.population = csv::parse_double(row[4]);
    if (!std::isfinite(cell.tmax_c)) throw std::runtime_error(where() + ": non-finite tmax");
    if (cell.precip_mm < 0.0) throw std::runtime_error(where() + ": negative precipitation");
    if (cell.population < 0.0) throw std::runtime_error(where() + ": negative population");
    cells.push_back(std::move(cell));
  }
  return cells;
}

void write_grid_daily(const std::string& path, const std::vector<GridCellDay>& cells) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "#schema: cell_id,date,tmax_c,precip_mm,population\n";
  out << "cell_id,date,tmax_c,precip_mm,population\n";
  for (const auto& cell : cells) {
    out << cell.cell_id << ',' << format_date(cell.date) << ',' << csv::format_double(cell.tmax_c)
        << ',' << csv::format_double(cell.precip_mm) << ','
        << csv::format_double(cell.population) << '\n';
  }
}

void write_exposure_panel(const std::string& path, const ExposurePanel& panel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "#schema: region_code,week_monday,bin_label,days\n";
  out << "region_code,week_monday,bin_label,days\n";
  for (std::size_t r = 0; r < panel.region_codes.size(); ++r) {
    for (std::size_t w = 0; w < panel.weeks.size(); ++w) {
      const int row = panel.row(static_cast<int>(r), static_cast<int>(w));
      const std::string prefix =
          panel.region_codes[r] + "," + format_date(panel.weeks[w].monday) + ",";
      for (int b = 0; b < panel.spec.n_temp_bins(); ++b)
        out << prefix << panel.spec.temp_label(b) << ',' << panel.temp_days(row, b) << '\n';
      for (int b = 0; b < panel.spec.n_precip_bins(); ++b)
        out << prefix << panel.spec.precip_label(b) << ',' << panel.precip_days(row, b) << '\n';
      out << prefix << "p_total_mm," << csv::format_double(panel.precip_total(row)) << '\n';
    }
  }
}

ExposurePanel read_exposure_panel(const std::string& path, const BinSpec& spec,
                                  const SampleWindow& window) {
  spec.validate();
  auto table = csv::read_file(path);
  csv::require_header(table, {"region_code", "week_monday", "bin_label", "days"}, path);

  std::unordered_map<std::string, int> temp_bins, precip_bins;
  for (int b = 0; b < spec.n_temp_bins(); ++b) temp_bins[spec.temp_label(b)] = b;
  for (int b = 0; b < spec.n_precip_bins(); ++b) precip_bins[spec.precip_label(b)] = b;

  std::set<std::string> codes;
  std::set<int> week_idx;
  for (const auto& row : table.rows) {
    if (row.size() != 4) throw std::runtime_error(path + ": bad row");
    codes.insert(row[0]);
    week_idx.insert(week_of(parse_date(row[1]), window).index);
  }
  ExposurePanel panel;
  panel.spec = spec;
  panel.region_codes.assign(codes.begin(), codes.end());
  for (int w : week_idx) panel.weeks.push_back(week_by_index(w, window));
  const int n_regions = static_cast<int>(panel.region_codes.size());
  const int n_weeks = static_cast<int>(panel.weeks.size());
  panel.temp_days.setZero(n_regions * n_weeks, spec.n_temp_bins());
  panel.precip_days.setZero(n_regions * n_weeks, spec.n_precip_bins());
  panel.precip_total.setZero(n_regions * n_weeks);

  std::unordered_map<std::string, int> region_pos;
  for (int i = 0; i < n_regions; ++i) region_pos[panel.region_codes[i]] = i;
  std::unordered_map<int, int> week_pos;
  for (int i = 0; i < n_weeks; ++i) week_pos[panel.weeks[i].index] = i;

  for (const auto& row : table.rows) {
    const int r = region_pos[row[0]];
    const int w = week_pos[week_of(parse_date(row[1]), window).index];
    const int idx = panel.row(r, w);
    if (row[2] == "p_total_mm") {
      panel.precip_total(idx) = csv::parse_double(row[3]);
    } else if (auto it = temp_bins.find(row[2]); it != temp_bins.end()) {
      panel.temp_days(idx, it->second) = static_cast<int>(csv::parse_int64(row[3]));
    } else if (auto pit = precip_bins.find(row[2]); pit != precip_bins.end()) {
      panel.precip_days(idx, pit->second) = static_cast<int>(csv::parse_int64(row[3]));
    } else {
      throw std::runtime_error(path + ": bin label '" + row[2] +
                               "' does not match the configured bin spec");
    }
  }
  return panel;
}

void write_scenario_deltas(const std::string& path, const std::vector<ScenarioDelta>& deltas) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "#schema: region_code,bin_label,delta_days_per_week,scenario\n";
  out << "region_code,bin_label,delta_days_per_week,scenario\n";
  for (const auto& delta : deltas) {
    for (std::size_t r = 0; r < delta.region_codes.size(); ++r) {
      for (int b = 0; b < delta.spec.n_temp_bins(); ++b)
        out << delta.region_codes[r] << ',' << delta.spec.temp_label(b) << ','
            << csv::format_double(delta.temp_delta(static_cast<int>(r), b)) << ','
            << delta.scenario << '\n';
      for (int b = 0; b < delta.spec.n_precip_bins(); ++b)
        out << delta.region_codes[r] << ',' << delta.spec.precip_label(b) << ','
            << csv::format_double(delta.precip_delta(static_cast<int>(r), b)) << ','
            << delta.scenario << '\n';
    }
  }
}

}  // namespace heatseg::climate
