#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "heatseg/core.hpp"

// Flat-CSV readers and writers for every pipeline input, with hard schema
// checks, per-row error collection (malformed rows are reported, never
// silently dropped), and a dataset-level consistency report.
//
// File contracts:
//   visits.csv          poi_id,week_monday,total_visits,total_visitors,visitors_by_cbg
//                       (last column: JSON-style object literal of CBG -> count)
//   pois.csv            poi_id,region_code,naics,lat,lon
//   cbgs.csv            cbg,total_pop,white_pop,region_code   (region_code may be empty)
//   regions.csv         region_code,name,state,population,lat,lon
//   grid_to_region.csv  cell_id,region_code
//   cbg_to_region.csv   cbg,region_code

namespace heatseg::ingest {

struct RowError {
  std::string file;
  std::size_t line = 0;
  std::string message;
};

template <typename T>
struct ParseResult {
  std::vector<T> records;
  std::vector<RowError> errors;
};

ParseResult<WeeklyVisitRecord> parse_visits(const std::string& path,
                                            const SampleWindow& window = {});
ParseResult<PoiRecord> parse_pois(const std::string& path);
ParseResult<CbgProfile> parse_cbgs(const std::string& path);
ParseResult<RegionId> parse_regions(const std::string& path);

// Two-column crosswalks (cell_id/cbg -> region_code).
ParseResult<std::pair<std::string, std::string>> parse_crosswalk(
    const std::string& path, const std::string& key_column);

// Decodes the inline visitor map literal, e.g. {"360470001001":4,"360470002001":6}.
std::vector<std::pair<std::string, std::int64_t>> decode_visitor_map(const std::string& text);
std::string encode_visitor_map(const std::vector<std::pair<std::string, std::int64_t>>& entries);

struct DatasetBundle {
  std::vector<PoiRecord> pois;
  std::vector<WeeklyVisitRecord> visits;
  std::vector<CbgProfile> cbgs;
  std::vector<RegionId> regions;
  std::unordered_map<std::string, std::string> grid_to_region;
  std::unordered_map<std::string, std::string> cbg_to_region;

  const PoiRecord* find_poi(const std::string& poi_id) const;
  const RegionId* find_region(const std::string& code) const;
  const CbgProfile* find_cbg(const std::string& cbg) const;

  // Must be called after mutating the record vectors.
  void rebuild_index();

 private:
  std::unordered_map<std::string, std::size_t> poi_index_;
  std::unordered_map<std::string, std::size_t> region_index_;
  std::unordered_map<std::string, std::size_t> cbg_index_;
};

struct BundlePaths {
  std::string visits;
  std::string pois;
  std::string cbgs;
  std::string regions;
  std::string grid_to_region;  // optional, may be empty
  std::string cbg_to_region;
};

struct LoadResult {
  DatasetBundle bundle;
  std::vector<RowError> errors;
};

LoadResult load_bundle(const BundlePaths& paths, const SampleWindow& window = {});

enum class IssueKind {
  OrphanPoi,
  UnknownCbg,
  CoverageGap,
  DuplicateKey,
  BadReference,
  SuspectLocation,  // POI far from its region centroid; warning only
};

struct ValidationIssue {
  IssueKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  std::vector<std::pair<std::string, int>> coverage_gaps;  // (region_code, week index)
  std::int64_t orphan_poi_rows = 0;
  std::int64_t unknown_cbg_keys = 0;
  std::int64_t unknown_cbg_visitors = 0;
  std::int64_t total_visitors = 0;
  std::int64_t resolved_visitors = 0;
  double resolved_fraction = 0.0;

  bool clean() const { return issues.empty(); }
  std::string summary() const;
};

// Pure reporting; never mutates the bundle.
ValidationReport validate_bundle(const DatasetBundle& bundle);

// Canonical writers: rows sorted on their natural keys, visitor maps sorted by
// CBG, one '#schema:' comment line, LF endings. parse(write(x)) round-trips
// byte-identically.
void write_visits(const std::string& path, std::vector<WeeklyVisitRecord> records);
void write_pois(const std::string& path, std::vector<PoiRecord> records);
void write_cbgs(const std::string& path, std::vector<CbgProfile> records);
void write_regions(const std::string& path, std::vector<RegionId> records);
void write_crosswalk(const std::string& path, const std::string& key_column,
                     std::vector<std::pair<std::string, std::string>> rows);

}  // namespace heatseg::ingest
