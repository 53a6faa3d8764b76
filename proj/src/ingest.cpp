#include "heatseg/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "heatseg/csv.hpp"

namespace heatseg::ingest {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace

std::vector<std::pair<std::string, std::int64_t>> decode_visitor_map(const std::string& text) {
  std::vector<std::pair<std::string, std::int64_t>> entries;
  std::size_t i = 0;
  auto skip_ws = [&] {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
  };
  skip_ws();
  if (i >= text.size() || text[i] != '{') throw std::invalid_argument("visitor map must start with '{'");
  ++i;
  skip_ws();
  if (i < text.size() && text[i] == '}') {
    ++i;
    skip_ws();
    if (i != text.size()) throw std::invalid_argument("trailing characters after visitor map");
    return entries;
  }
  while (true) {
    skip_ws();
    if (i >= text.size() || text[i] != '"') throw std::invalid_argument("expected quoted CBG key");
    ++i;
    std::string key;
    while (i < text.size() && text[i] != '"') key.push_back(text[i++]);
    if (i >= text.size()) throw std::invalid_argument("unterminated CBG key");
    ++i;
    skip_ws();
    if (i >= text.size() || text[i] != ':') throw std::invalid_argument("expected ':' after CBG key");
    ++i;
    skip_ws();
    std::size_t start = i;
    if (i < text.size() && text[i] == '-') ++i;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') ++i;
    if (i == start) throw std::invalid_argument("expected count after ':'");
    std::int64_t count = csv::parse_int64(std::string_view(text).substr(start, i - start));
    entries.emplace_back(std::move(key), count);
    skip_ws();
    if (i < text.size() && text[i] == ',') {
      ++i;
      continue;
    }
    if (i < text.size() && text[i] == '}') {
      ++i;
      break;
    }
    throw std::invalid_argument("expected ',' or '}' in visitor map");
  }
  skip_ws();
  if (i != text.size()) throw std::invalid_argument("trailing characters after visitor map");
  std::sort(entries.begin(), entries.end());
  for (std::size_t k = 1; k < entries.size(); ++k)
    if (entries[k].first == entries[k - 1].first)
      throw std::invalid_argument("duplicate CBG key " + entries[k].first);
  return entries;
}

std::string encode_visitor_map(const std::vector<std::pair<std::string, std::int64_t>>& entries) {
  std::string out = "{";
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i) out.push_back(',');
    out.push_back('"');
    out += entries[i].first;
    out += "\":";
    out += csv::format_int(entries[i].second);
  }
  out.push_back('}');
  return out;
}

ParseResult<WeeklyVisitRecord> parse_visits(const std::string& path, const SampleWindow& window) {
  auto table = csv::read_file(path);
  csv::require_header(table, {"poi_id", "week_monday", "total_visits", "total_visitors",
                              "visitors_by_cbg"},
                      path);
  ParseResult<WeeklyVisitRecord> result;
  std::unordered_set<std::string> seen;
  seen.reserve(table.rows.size() * 2);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto rowerr = [&](const std::string& msg) {
      result.errors.push_back({path, table.row_numbers[r], msg});
    };
    if (row.size() != 5) {
      rowerr("expected 5 fields, found " + std::to_string(row.size()));
      continue;
    }
    try {
      WeeklyVisitRecord rec;
      rec.poi_id = row[0];
      Date monday = parse_date(row[1]);
      rec.week = week_of(monday, window);
      if (rec.week.monday != monday) throw std::invalid_argument("week_monday is not a Monday");
      rec.total_visits = csv::parse_int64(row[2]);
      rec.total_visitors = csv::parse_int64(row[3]);
      rec.visitors_by_cbg = decode_visitor_map(row[4]);
      std::string why;
      if (!is_valid_visit_record(rec, &why)) throw std::invalid_argument(why);
      std::string key = rec.poi_id + "|" + std::to_string(rec.week.index);
      if (!seen.insert(key).second)
        throw std::invalid_argument("duplicate (poi_id, week): " + rec.poi_id + ", " + row[1]);
      result.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      rowerr(e.what());
    }
  }
  return result;
}

ParseResult<PoiRecord> parse_pois(const std::string& path) {
  auto table = csv::read_file(path);
  csv::require_header(table, {"poi_id", "region_code", "naics", "lat", "lon"}, path);
  ParseResult<PoiRecord> result;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    try {
      if (row.size() != 5) throw std::invalid_argument("expected 5 fields");
      PoiRecord rec;
      rec.poi_id = row[0];
      rec.region_code = row[1];
      std::int64_t naics = csv::parse_int64(row[2]);
      if (naics < 100000 || naics > 999999) throw std::invalid_argument("naics must be 6 digits");
      rec.naics = static_cast<int>(naics);
      rec.latitude = csv::parse_double(row[3]);
      rec.longitude = csv::parse_double(row[4]);
      if (!seen.insert(rec.poi_id).second)
        throw std::invalid_argument("duplicate poi_id " + rec.poi_id);
      result.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      result.errors.push_back({path, table.row_numbers[r], e.what()});
    }
  }
  return result;
}

ParseResult<CbgProfile> parse_cbgs(const std::string& path) {
  auto table = csv::read_file(path);
  csv::require_header(table, {"cbg", "total_pop", "white_pop", "region_code"}, path);
  ParseResult<CbgProfile> result;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    try {
      if (row.size() != 4) throw std::invalid_argument("expected 4 fields");
      CbgProfile rec;
      rec.cbg = row[0];
      if (!is_valid_cbg(rec.cbg)) throw std::invalid_argument("invalid CBG id '" + rec.cbg + "'");
      rec.total_pop = csv::parse_int64(row[1]);
      rec.white_pop = csv::parse_int64(row[2]);
      rec.region_code = row[3];
      if (rec.total_pop < 0 || rec.white_pop < 0) throw std::invalid_argument("negative population");
      if (rec.white_pop > rec.total_pop)
        throw std::invalid_argument("white_pop exceeds total_pop");
      if (!seen.insert(rec.cbg).second) throw std::invalid_argument("duplicate CBG " + rec.cbg);
      result.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      result.errors.push_back({path, table.row_numbers[r], e.what()});
    }
  }
  return result;
}

ParseResult<RegionId> parse_regions(const std::string& path) {
  auto table = csv::read_file(path);
  csv::require_header(table, {"region_code", "name", "state", "population", "lat", "lon"}, path);
  ParseResult<RegionId> result;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    try {
      if (row.size() != 6) throw std::invalid_argument("expected 6 fields");
      RegionId rec;
      rec.code = row[0];
      rec.name = row[1];
      rec.state = row[2];
      rec.population = csv::parse_int64(row[3]);
      rec.latitude = csv::parse_double(row[4]);
      rec.longitude = csv::parse_double(row[5]);
      std::string why;
      if (!is_valid_region(rec, &why)) throw std::invalid_argument(why);
      if (!seen.insert(rec.code).second)
        throw std::invalid_argument("duplicate region code " + rec.code);
      result.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      result.errors.push_back({path, table.row_numbers[r], e.what()});
    }
  }
  return result;
}

ParseResult<std::pair<std::string, std::string>> parse_crosswalk(const std::string& path,
                                                                 const std::string& key_column) {
  auto table = csv::read_file(path);
  csv::require_header(table, {key_column, "region_code"}, path);
  ParseResult<std::pair<std::string, std::string>> result;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    try {
      if (row.size() != 2) throw std::invalid_argument("expected 2 fields");
      if (row[0].empty() || row[1].empty()) throw std::invalid_argument("empty key or region");
      if (!seen.insert(row[0]).second)
        throw std::invalid_argument("duplicate " + key_column + " " + row[0]);
      result.records.emplace_back(row[0], row[1]);
    } catch (const std::exception& e) {
      result.errors.push_back({path, table.row_numbers[r], e.what()});
    }
  }
  return result;
}

const PoiRecord* DatasetBundle::find_poi(const std::string& poi_id) const {
  auto it = poi_index_.find(poi_id);
  return it == poi_index_.end() ? nullptr : &pois[it->second];
}

const RegionId* DatasetBundle::find_region(const std::string& code) const {
  auto it = region_index_.find(code);
  return it == region_index_.end() ? nullptr : &regions[it->second];
}

const CbgProfile* DatasetBundle::find_cbg(const std::string& cbg) const {
  auto it = cbg_index_.find(cbg);
  return it == cbg_index_.end() ? nullptr : &cbgs[it->second];
}

void DatasetBundle::rebuild_index() {
  poi_index_.clear();
  region_index_.clear();
  cbg_index_.clear();
  poi_index_.reserve(pois.size() * 2);
  for (std::size_t i = 0; i < pois.size(); ++i) poi_index_[pois[i].poi_id] = i;
  for (std::size_t i = 0; i < regions.size(); ++i) region_index_[regions[i].code] = i;
  cbg_index_.reserve(cbgs.size() * 2);
  for (std::size_t i = 0; i < cbgs.size(); ++i) cbg_index_[cbgs[i].cbg] = i;
}

LoadResult load_bundle(const BundlePaths& paths, const SampleWindow& window) {
  LoadResult out;
  auto take = [&out](auto parsed, auto& dst) {
    dst = std::move(parsed.records);
    out.errors.insert(out.errors.end(), parsed.errors.begin(), parsed.errors.end());
  };
  take(parse_pois(paths.pois), out.bundle.pois);
  take(parse_visits(paths.visits, window), out.bundle.visits);
  take(parse_cbgs(paths.cbgs), out.bundle.cbgs);
  take(parse_regions(paths.regions), out.bundle.regions);
  if (!paths.grid_to_region.empty()) {
    auto parsed = parse_crosswalk(paths.grid_to_region, "cell_id");
    for (auto& [k, v] : parsed.records) out.bundle.grid_to_region[k] = v;
    out.errors.insert(out.errors.end(), parsed.errors.begin(), parsed.errors.end());
  }
  if (!paths.cbg_to_region.empty()) {
    auto parsed = parse_crosswalk(paths.cbg_to_region, "cbg");
    for (auto& [k, v] : parsed.records) out.bundle.cbg_to_region[k] = v;
    out.errors.insert(out.errors.end(), parsed.errors.begin(), parsed.errors.end());
  }
  out.bundle.rebuild_index();
  return out;
}

ValidationReport validate_bundle(const DatasetBundle& bundle) {
  ValidationReport report;

  std::unordered_set<std::string> orphan_pois;
  std::set<int> weeks_present;
  // region -> weeks with at least one visit row
  std::unordered_map<std::string, std::set<int>> region_weeks;
  for (const auto& region : bundle.regions) region_weeks[region.code];

  std::unordered_set<std::string> unknown_cbgs;
  for (const auto& rec : bundle.visits) {
    weeks_present.insert(rec.week.index);
    const PoiRecord* poi = bundle.find_poi(rec.poi_id);
    if (!poi) {
      ++report.orphan_poi_rows;
      if (orphan_pois.insert(rec.poi_id).second)
        report.issues.push_back({IssueKind::OrphanPoi,
                                 "visit row references absent poi_id " + rec.poi_id});
    } else {
      auto it = region_weeks.find(poi->region_code);
      if (it != region_weeks.end()) it->second.insert(rec.week.index);
    }
    report.total_visitors += rec.total_visitors;
    for (const auto& [cbg, count] : rec.visitors_by_cbg) {
      if (bundle.find_cbg(cbg)) {
        report.resolved_visitors += count;
      } else {
        report.unknown_cbg_visitors += count;
        if (unknown_cbgs.insert(cbg).second) {
          ++report.unknown_cbg_keys;
          report.issues.push_back({IssueKind::UnknownCbg, "unknown CBG " + cbg});
        }
      }
    }
  }

  for (const auto& poi : bundle.pois) {
    const RegionId* region = bundle.find_region(poi.region_code);
    if (!region) {
      report.issues.push_back({IssueKind::BadReference, "POI " + poi.poi_id +
                                                            " references absent region " +
                                                            poi.region_code});
      continue;
    }
    // location plausibility: within ~3 degrees of the region centroid
    if (std::abs(poi.latitude - region->latitude) > 3.0 ||
        std::abs(poi.longitude - region->longitude) > 3.0)
      report.issues.push_back({IssueKind::SuspectLocation,
                               "POI " + poi.poi_id + " lies far from region " +
                                   poi.region_code + " centroid"});
  }

  std::vector<std::string> codes;
  codes.reserve(region_weeks.size());
  for (const auto& [code, weeks] : region_weeks) codes.push_back(code);
  std::sort(codes.begin(), codes.end());
  for (const auto& code : codes) {
    const auto& have = region_weeks[code];
    for (int w : weeks_present) {
      if (!have.count(w)) {
        report.coverage_gaps.emplace_back(code, w);
        report.issues.push_back({IssueKind::CoverageGap, "region " + code +
                                                             " has no visit rows in week " +
                                                             std::to_string(w)});
      }
    }
  }

  report.resolved_fraction =
      report.total_visitors > 0
          ? static_cast<double>(report.resolved_visitors) / static_cast<double>(report.total_visitors)
          : 1.0;
  return report;
}

std::string ValidationReport::summary() const {
  std::string s;
  s += "issues: " + std::to_string(issues.size());
  s += ", orphan poi rows: " + std::to_string(orphan_poi_rows);
  s += ", unknown CBGs: " + std::to_string(unknown_cbg_keys);
  s += ", coverage gaps: " + std::to_string(coverage_gaps.size());
  s += ", visitor resolution: " + csv::format_double(resolved_fraction);
  return s;
}

void write_visits(const std::string& path, std::vector<WeeklyVisitRecord> records) {
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    if (a.poi_id != b.poi_id) return a.poi_id < b.poi_id;
    return a.week.index < b.week.index;
  });
  auto out = open_out(path);
  out << "#schema: poi_id,week_monday,total_visits,total_visitors,visitors_by_cbg\n";
  out << "poi_id,week_monday,total_visits,total_visitors,visitors_by_cbg\n";
  for (auto& rec : records) {
    std::sort(rec.visitors_by_cbg.begin(), rec.visitors_by_cbg.end());
    out << csv::join_fields({rec.poi_id, format_date(rec.week.monday),
                             csv::format_int(rec.total_visits),
                             csv::format_int(rec.total_visitors),
                             encode_visitor_map(rec.visitors_by_cbg)})
        << '\n';
  }
}

void write_pois(const std::string& path, std::vector<PoiRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.poi_id < b.poi_id; });
  auto out = open_out(path);
  out << "#schema: poi_id,region_code,naics,lat,lon\n";
  out << "poi_id,region_code,naics,lat,lon\n";
  for (const auto& rec : records) {
    out << csv::join_fields({rec.poi_id, rec.region_code, csv::format_int(rec.naics),
                             csv::format_double(rec.latitude), csv::format_double(rec.longitude)})
        << '\n';
  }
}

void write_cbgs(const std::string& path, std::vector<CbgProfile> records) {
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.cbg < b.cbg; });
  auto out = open_out(path);
  out << "#schema: cbg,total_pop,white_pop,region_code\n";
  out << "cbg,total_pop,white_pop,region_code\n";
  for (const auto& rec : records) {
    out << csv::join_fields({rec.cbg, csv::format_int(rec.total_pop),
                             csv::format_int(rec.white_pop), rec.region_code})
        << '\n';
  }
}

void write_regions(const std::string& path, std::vector<RegionId> records) {
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.code < b.code; });
  auto out = open_out(path);
  out << "#schema: region_code,name,state,population,lat,lon\n";
  out << "region_code,name,state,population,lat,lon\n";
  for (const auto& rec : records) {
    out << csv::join_fields({rec.code, rec.name, rec.state, csv::format_int(rec.population),
                             csv::format_double(rec.latitude), csv::format_double(rec.longitude)})
        << '\n';
  }
}

void write_crosswalk(const std::string& path, const std::string& key_column,
                     std::vector<std::pair<std::string, std::string>> rows) {
  std::sort(rows.begin(), rows.end());
  auto out = open_out(path);
  out << "#schema: " << key_column << ",region_code\n";
  out << key_column << ",region_code\n";
  for (const auto& [key, region] : rows)
    out << csv::join_fields({key, region}) << '\n';
}

}  // namespace heatseg::ingest
