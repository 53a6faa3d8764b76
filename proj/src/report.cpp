#include "heatseg/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "heatseg/csv.hpp"
#include "heatseg/ingest.hpp"
#include "heatseg/project.hpp"
#include "heatseg/regress.hpp"

namespace heatseg::report {

namespace fs = std::filesystem;

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<double> parse_edge_list(const std::string& value) {
  std::vector<double> edges;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) edges.push_back(csv::parse_double(trim(item)));
  return edges;
}

}  // namespace

PipelineConfig PipelineConfig::load(
    const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PipelineError("config", "cannot open config file " + path, 2);
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string raw = buffer.str();

  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::istringstream lines(raw);
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw PipelineError("config", path + ":" + std::to_string(lineno) +
                                        ": expected key = value");
    entries.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  std::string hashed = raw;
  for (const auto& [k, v] : overrides) {
    entries.emplace_back(k, v);
    hashed += "\n" + k + "=" + v;
  }

  PipelineConfig config;
  config.config_hash = fnv1a_hex(hashed);
  const fs::path base = fs::absolute(fs::path(path)).parent_path();
  auto resolve = [&](const std::string& value) {
    fs::path p(value);
    return (p.is_absolute() ? p : base / p).lexically_normal().string();
  };

  std::vector<std::string> path_keys_seen;
  for (const auto& [key, value] : entries) {
    if (key == "visits") config.visits = resolve(value);
    else if (key == "pois") config.pois = resolve(value);
    else if (key == "cbgs") config.cbgs = resolve(value);
    else if (key == "regions") config.regions = resolve(value);
    else if (key == "cbg_to_region") config.cbg_to_region = resolve(value);
    else if (key == "grid_to_region") config.grid_to_region = resolve(value);
    else if (key == "grid_daily") config.grid_daily = resolve(value);
    else if (key == "reference_grid") config.reference_grid = resolve(value);
    else if (key == "devices") config.devices = resolve(value);
    else if (key == "region_income") config.region_income = resolve(value);
    else if (key == "representativeness") config.representativeness_input = resolve(value);
    else if (key.rfind("scenario.", 0) == 0) config.scenario_grids[key.substr(9)] = resolve(value);
    else if (key == "reference_first_year") config.reference_first_year = static_cast<int>(csv::parse_int64(value));
    else if (key == "reference_last_year") config.reference_last_year = static_cast<int>(csv::parse_int64(value));
    else if (key == "scenario_year") config.scenario_year = static_cast<int>(csv::parse_int64(value));
    else if (key == "output_dir") config.output_dir = resolve(value);
    else if (key == "factors") config.factors = value;
    else if (key == "vcov") {
      if (value == "robust") config.vcov.kind = infer::VcovKind::Robust;
      else if (value == "twoway") config.vcov.kind = infer::VcovKind::TwoWayCluster;
      else if (value == "conley") config.vcov.kind = infer::VcovKind::Conley;
      else throw PipelineError("config", "unknown vcov '" + value + "'");
    } else if (key == "conley_cutoff_km") config.vcov.conley.cutoff_km = csv::parse_double(value);
    else if (key == "conley_lag_weeks") config.vcov.conley.lag_weeks = static_cast<int>(csv::parse_int64(value));
    else if (key == "split") config.split = value;
    else if (key == "categories") {
      config.categories.clear();
      if (value != "all") {
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) {
          auto cat = category_from_string(trim(item));
          if (!cat) throw PipelineError("config", "unknown category '" + trim(item) + "'");
          config.categories.insert(*cat);
        }
      }
    } else if (key == "precip") {
      if (value == "bins") config.continuous_precip = false;
      else if (value == "continuous") config.continuous_precip = true;
      else throw PipelineError("config", "precip must be 'bins' or 'continuous'");
    } else if (key == "projection_visits") {
      if (value != "total" && value != "nonwhite")
        throw PipelineError("config", "projection_visits must be 'total' or 'nonwhite'");
      config.projection_visits = value;
    } else if (key == "temp_edges") config.bins.temp_edges = parse_edge_list(value);
    else if (key == "reference_temp_bin") config.bins.reference_temp_bin = static_cast<int>(csv::parse_int64(value));
    else if (key == "precip_edges") config.bins.precip_edges = parse_edge_list(value);
    else if (key == "reference_precip_bin") config.bins.reference_precip_bin = static_cast<int>(csv::parse_int64(value));
    else if (key == "sample_start") config.window.start_monday = parse_date(value);
    else if (key == "sample_weeks") config.window.n_weeks = static_cast<int>(csv::parse_int64(value));
    else throw PipelineError("config", "unknown key '" + key + "' in " + path);
  }

  if (weekday(config.window.start_monday) != 0)
    throw PipelineError("config", "sample_start must be a Monday");
  if (config.window.n_weeks < 1) throw PipelineError("config", "sample_weeks must be positive");
  try {
    config.bins.validate();
    regress::FactorSpec::variant(config.factors);
  } catch (const std::exception& e) {
    throw PipelineError("config", e.what());
  }
  if (config.split != "none" && config.split != "climate_normal" && config.split != "income" &&
      config.split != "population_quartiles")
    throw PipelineError("config", "unknown split '" + config.split + "'");

  for (const std::string& p :
       {config.visits, config.pois, config.cbgs, config.regions, config.cbg_to_region,
        config.grid_to_region, config.grid_daily, config.reference_grid, config.devices,
        config.region_income, config.representativeness_input}) {
    if (!p.empty() && !fs::exists(p))
      throw PipelineError("config", "missing input file: " + p, 2);
  }
  for (const auto& [label, p] : config.scenario_grids)
    if (!fs::exists(p)) throw PipelineError("config", "missing input file: " + p, 2);
  return config;
}

std::vector<double> loess_trend(const std::vector<double>& x, const std::vector<double>& y,
                                double span, int degree) {
  const int n = static_cast<int>(x.size());
  if (static_cast<int>(y.size()) != n) throw std::invalid_argument("x and y sizes differ");
  if (!(span > 0.0 && span <= 1.0)) throw std::invalid_argument("span must be in (0, 1]");
  if (degree < 0 || degree > 2) throw std::invalid_argument("degree must be 0, 1 or 2");
  if (n < degree + 2)
    throw std::invalid_argument("need at least degree+2 points, got " + std::to_string(n));
  for (int i = 1; i < n; ++i)
    if (!(x[i] > x[i - 1])) throw std::invalid_argument("x must be strictly increasing");

  const int q = std::min(n, std::max(static_cast<int>(std::ceil(span * n)), degree + 3));
  std::vector<double> fitted(n);
  for (int i = 0; i < n; ++i) {
    // Consecutive window of q points containing i with the smallest maximum
    // distance; ties resolve to the leftmost window.
    int best_lo = std::max(0, std::min(i, n - q));
    double best_d = std::numeric_limits<double>::infinity();
    for (int lo = std::max(0, i - q + 1); lo <= std::min(i, n - q); ++lo) {
      const double d = std::max(x[i] - x[lo], x[lo + q - 1] - x[i]);
      if (d < best_d) {
        best_d = d;
        best_lo = lo;
      }
    }
    const int lo = best_lo;
    const double dmax = std::max(x[i] - x[lo], x[lo + q - 1] - x[i]);

    Eigen::MatrixXd design(q, degree + 1);
    Eigen::VectorXd target(q), sqw(q);
    for (int j = 0; j < q; ++j) {
      const double u = x[lo + j] - x[i];
      double weight = 1.0;
      if (dmax > 0.0) {
        const double t = std::abs(u) / dmax;
        const double c = 1.0 - t * t * t;
        weight = c * c * c;
      }
      sqw(j) = std::sqrt(std::max(weight, 0.0));
      design(j, 0) = 1.0;
      if (degree >= 1) design(j, 1) = u;
      if (degree >= 2) design(j, 2) = u * u;
      target(j) = y[lo + j];
    }
    const Eigen::MatrixXd xs = design.array().colwise() * sqw.array();
    const Eigen::VectorXd ys = target.array() * sqw.array();
    const Eigen::VectorXd coef = xs.householderQr().solve(ys);
    fitted[i] = coef(0);
  }
  return fitted;
}

std::vector<BucketPair> representativeness(const std::map<std::string, double>& device_counts,
                                           const std::map<std::string, double>& census_var,
                                           const std::map<std::string, std::string>& bucketing) {
  std::map<std::string, BucketPair> buckets;
  for (const auto& [cbg, bucket] : bucketing) {
    auto& pair = buckets[bucket];
    pair.bucket = bucket;
    if (auto it = device_counts.find(cbg); it != device_counts.end()) pair.devices += it->second;
    if (auto it = census_var.find(cbg); it != census_var.end()) pair.census += it->second;
  }
  std::vector<BucketPair> out;
  out.reserve(buckets.size());
  for (auto& [name, pair] : buckets) out.push_back(pair);
  return out;
}

std::vector<RegionSummary> summarize_panel(const isolation::IsolationPanel& panel) {
  std::vector<RegionSummary> rows;
  for (std::size_t r = 0; r < panel.regions.size(); ++r) {
    RegionSummary s;
    s.region_code = panel.regions[r].code;
    double sum = 0.0;
    for (std::size_t w = 0; w < panel.weeks.size(); ++w) {
      if (panel.missing(static_cast<int>(r), static_cast<int>(w))) continue;
      sum += panel.values(static_cast<int>(r), static_cast<int>(w));
      ++s.weeks_observed;
    }
    s.mean_vi = s.weeks_observed > 0 ? sum / s.weeks_observed
                                     : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(std::move(s));
  }
  for (const auto& region : panel.excluded_regions) {
    RegionSummary s;
    s.region_code = region.code;
    s.mean_vi = std::numeric_limits<double>::quiet_NaN();
    s.excluded = true;
    rows.push_back(std::move(s));
  }
  std::sort(rows.begin(), rows.end(),
            [](const RegionSummary& a, const RegionSummary& b) {
              return a.region_code < b.region_code;
            });
  return rows;
}

namespace {

struct StageRunner {
  const PipelineConfig& config;
  unsigned stages;
  PipelineResult result;
  std::vector<std::string> notes;

  // Lazily built intermediates.
  std::optional<ingest::DatasetBundle> bundle;
  std::optional<ingest::ValidationReport> validation;
  std::optional<isolation::IsolationPanel> panel;
  std::optional<climate::ExposurePanel> exposure;
  std::optional<regress::RegressionFit> plain_fit;  // unsplit, for projection

  std::string outpath(const std::string& name) {
    return (fs::path(config.output_dir) / name).string();
  }
  void wrote(const std::string& name) { result.outputs.push_back(name); }

  void require(const std::string& stage, const std::string& key, const std::string& value) {
    if (value.empty())
      throw PipelineError(stage, "config key '" + key + "' is required for this stage");
  }

  const ingest::DatasetBundle& get_bundle() {
    if (bundle) return *bundle;
    require("ingest", "visits", config.visits);
    require("ingest", "pois", config.pois);
    require("ingest", "cbgs", config.cbgs);
    require("ingest", "regions", config.regions);
    ingest::BundlePaths paths{config.visits, config.pois,          config.cbgs,
                              config.regions, config.grid_to_region, config.cbg_to_region};
    ingest::LoadResult loaded = ingest::load_bundle(paths, config.window);
    if (!loaded.errors.empty()) {
      std::string msg = std::to_string(loaded.errors.size()) + " malformed input row(s); first: ";
      const auto& e = loaded.errors.front();
      msg += e.file + ":" + std::to_string(e.line) + ": " + e.message;
      throw PipelineError("ingest", msg);
    }
    validation = ingest::validate_bundle(loaded.bundle);
    if (!config.categories.empty())
      loaded.bundle = isolation::filter_by_category(loaded.bundle, config.categories);
    bundle = std::move(loaded.bundle);
    return *bundle;
  }

  const isolation::IsolationPanel& get_panel() {
    if (!panel) panel = isolation::build_isolation_panel(get_bundle());
    return *panel;
  }

  const climate::ExposurePanel& get_exposure() {
    if (exposure) return *exposure;
    require("exposure", "grid_daily", config.grid_daily);
    require("exposure", "grid_to_region", config.grid_to_region);
    auto cells = climate::parse_grid_daily(config.grid_daily);
    ingest::ParseResult<std::pair<std::string, std::string>> xwalk =
        ingest::parse_crosswalk(config.grid_to_region, "cell_id");
    std::unordered_map<std::string, std::string> mapping(xwalk.records.begin(),
                                                         xwalk.records.end());
    auto daily = climate::aggregate_to_region(std::move(cells), mapping);
    exposure = climate::build_exposure_panel(daily, config.bins, config.window);
    return *exposure;
  }

  std::map<std::string, double> region_population_weights() {
    std::map<std::string, double> weights;
    for (const auto& region : get_panel().regions)
      weights[region.code] = static_cast<double>(region.population);
    return weights;
  }

  std::map<std::string, regress::Side> build_split(const std::string& stage) {
    std::map<std::string, double> values;
    if (config.split == "climate_normal") {
      require(stage, "reference_grid", config.reference_grid);
      require(stage, "grid_to_region", config.grid_to_region);
      auto cells = climate::parse_grid_daily(config.reference_grid);
      auto xwalk = ingest::parse_crosswalk(config.grid_to_region, "cell_id");
      std::unordered_map<std::string, std::string> mapping(xwalk.records.begin(),
                                                           xwalk.records.end());
      auto normals = climate::mean_tmax_by_region(
          climate::aggregate_to_region(std::move(cells), mapping));
      for (const auto& region : get_panel().regions) {
        auto it = normals.find(region.code);
        if (it == normals.end())
          throw PipelineError(stage, "no reference weather for region " + region.code);
        values[region.code] = it->second;
      }
    } else if (config.split == "income") {
      require(stage, "region_income", config.region_income);
      auto table = csv::read_file(config.region_income);
      csv::require_header(table, {"region_code", "income_per_capita"}, config.region_income);
      std::map<std::string, double> income;
      for (const auto& row : table.rows) income[row[0]] = csv::parse_double(row[1]);
      for (const auto& region : get_panel().regions) {
        auto it = income.find(region.code);
        if (it == income.end())
          throw PipelineError(stage, "no income for region " + region.code);
        values[region.code] = it->second;
      }
    }
    return regress::median_split_indicator(values, region_population_weights());
  }

  regress::RegressionFit fit_once(const regress::DesignOptions& options) {
    regress::FactorSpec factors = regress::FactorSpec::variant(config.factors);
    regress::DesignMatrix design = regress::build_design(get_panel(), get_exposure(), factors,
                                                         options);
    for (const auto& w : design.warnings) notes.push_back(w);
    return regress::wls_fit(regress::demean(std::move(design)));
  }

  std::vector<regress::CoefficientRow> ci_rows(const std::string& spec_id,
                                               const regress::RegressionFit& fit) {
    infer::CovarianceEstimate vcov = infer::compute_vcov(fit, config.vcov);
    auto intervals = infer::confidence_intervals(fit, vcov);
    std::vector<regress::CoefficientRow> rows;
    for (const auto& ci : intervals)
      rows.push_back({spec_id, ci.column, ci.beta, ci.se, ci.low, ci.high});
    for (const auto& dropped : fit.dropped_columns)
      notes.push_back(spec_id + ": dropped rank-deficient column " + dropped);
    return rows;
  }

  const regress::RegressionFit& get_plain_fit() {
    if (!plain_fit) {
      regress::DesignOptions options;
      options.continuous_precip = config.continuous_precip;
      plain_fit = fit_once(options);
    }
    return *plain_fit;
  }

  void run_isolation() {
    isolation::write_isolation_panel(outpath("isolation_panel.csv"), get_panel());
    wrote("isolation_panel.csv");
  }

  void run_exposure() {
    climate::write_exposure_panel(outpath("exposure_panel.csv"), get_exposure());
    wrote("exposure_panel.csv");
  }

  void run_fit() {
    std::vector<regress::CoefficientRow> rows;
    const std::string base_id = config.factors;
    if (config.split == "none") {
      rows = ci_rows(base_id, get_plain_fit());
    } else if (config.split == "population_quartiles") {
      std::map<std::string, std::string> partition;
      std::vector<std::pair<double, std::string>> pops;
      for (const auto& region : get_panel().regions)
        pops.emplace_back(static_cast<double>(region.population), region.code);
      std::sort(pops.begin(), pops.end());
      const std::size_t n = pops.size();
      for (std::size_t i = 0; i < n; ++i) {
        const int quartile = std::min<int>(3, static_cast<int>(4 * i / std::max<std::size_t>(n, 1)));
        partition[pops[i].second] = "q" + std::to_string(quartile + 1);
      }
      regress::DesignOptions options;
      options.continuous_precip = config.continuous_precip;
      auto fits = regress::fit_subsamples(get_panel(), get_exposure(),
                                          regress::FactorSpec::variant(config.factors),
                                          partition, options);
      for (const auto& [cls, sub] : fits) {
        if (!sub.fit) {
          notes.push_back(base_id + ":" + cls + " not fitted: " + sub.flag);
          continue;
        }
        auto sub_rows = ci_rows(base_id + ":" + cls, *sub.fit);
        rows.insert(rows.end(), sub_rows.begin(), sub_rows.end());
      }
    } else {
      regress::DesignOptions options;
      options.continuous_precip = config.continuous_precip;
      options.split = build_split("fit");
      rows = ci_rows(base_id + ":" + config.split, fit_once(options));
    }
    regress::write_coefficients(outpath("coefficients.csv"), rows);
    wrote("coefficients.csv");
  }

  void run_project() {
    require("project", "reference_grid", config.reference_grid);
    require("project", "grid_to_region", config.grid_to_region);
    require("project", "devices", config.devices);
    if (config.scenario_grids.empty())
      throw PipelineError("project", "at least one scenario.<label> grid is required");
    if (config.reference_first_year == 0 || config.reference_last_year == 0)
      throw PipelineError("project", "reference_first_year/reference_last_year are required");

    auto xwalk = ingest::parse_crosswalk(config.grid_to_region, "cell_id");
    std::unordered_map<std::string, std::string> mapping(xwalk.records.begin(),
                                                         xwalk.records.end());
    auto reference_daily = climate::aggregate_to_region(
        climate::parse_grid_daily(config.reference_grid), mapping);
    climate::Climatology reference = climate::climatology(
        reference_daily, config.reference_first_year, config.reference_last_year, config.bins);

    std::vector<climate::ScenarioDelta> deltas;
    for (const auto& [label, grid_path] : config.scenario_grids) {
      auto scenario_daily =
          climate::aggregate_to_region(climate::parse_grid_daily(grid_path), mapping);
      deltas.push_back(climate::scenario_delta(scenario_daily, config.scenario_year, reference,
                                               config.bins, label));
    }
    climate::write_scenario_deltas(outpath("scenario_delta.csv"), deltas);
    wrote("scenario_delta.csv");

    // Activity: sample-mean weekly visit volume from the bundle (total, or
    // estimated NonWhite visits when configured), devices from file.
    const auto& bundle_ref = get_bundle();
    const bool nonwhite_volume = config.projection_visits == "nonwhite";
    const isolation::CbgContext ctx =
        nonwhite_volume ? isolation::CbgContext::from_bundle(bundle_ref)
                        : isolation::CbgContext{};
    std::map<std::string, double> visit_sums;
    std::set<int> weeks_present;
    for (const auto& rec : bundle_ref.visits) {
      const PoiRecord* poi = bundle_ref.find_poi(rec.poi_id);
      if (!poi) continue;
      if (nonwhite_volume) {
        isolation::GroupVisitShares shares;
        if (isolation::try_impute_group_visits(rec, ctx, poi->region_code, &shares))
          visit_sums[poi->region_code] += shares.est_nonwhite_visits;
      } else {
        visit_sums[poi->region_code] += static_cast<double>(rec.total_visits);
      }
      weeks_present.insert(rec.week.index);
    }
    auto devices_table = csv::read_file(config.devices);
    csv::require_header(devices_table, {"region_code", "devices"}, config.devices);
    std::map<std::string, double> devices;
    for (const auto& row : devices_table.rows) devices[row[0]] = csv::parse_double(row[1]);

    std::map<std::string, project::RegionActivity> activity;
    const double n_weeks = static_cast<double>(std::max<std::size_t>(1, weeks_present.size()));
    for (const auto& region : get_panel().regions) {
      auto vit = visit_sums.find(region.code);
      auto dit = devices.find(region.code);
      if (vit == visit_sums.end() || dit == devices.end()) continue;
      project::RegionActivity a;
      a.region_code = region.code;
      a.mean_weekly_visits = vit->second / n_weeks;
      a.devices = dit->second;
      a.population = region.population;
      if (a.devices > static_cast<double>(a.population))
        notes.push_back("region " + region.code + ": device count exceeds population");
      activity[region.code] = a;
    }

    std::map<std::string, double> beta;
    const regress::RegressionFit& fit = get_plain_fit();
    for (std::size_t j = 0; j < fit.col_labels.size(); ++j)
      if (fit.col_labels[j].rfind("t_", 0) == 0) beta[fit.col_labels[j]] = fit.beta(j);
    // bins with no within-sample variation were dropped: no estimated
    // response, so they project as zero
    for (const auto& dropped : fit.dropped_columns) {
      if (dropped.rfind("t_", 0) == 0) {
        beta[dropped] = 0.0;
        notes.push_back("projection: bin " + dropped + " had no estimate, coefficient 0");
      }
    }

    std::vector<project::ProjectionEntry> entries;
    for (const auto& delta : deltas) {
      auto projection = project::project_all(beta, delta, activity);
      entries.insert(entries.end(), projection.entries.begin(), projection.entries.end());
    }
    project::write_projection(outpath("projection.csv"), entries);
    wrote("projection.csv");
  }

  void run_report() {
    {
      std::ofstream out(outpath("vi_summary.csv"), std::ios::binary);
      out << "#schema: region_code,mean_vi,weeks_observed,excluded\n";
      out << "region_code,mean_vi,weeks_observed,excluded\n";
      for (const auto& row : summarize_panel(get_panel())) {
        out << row.region_code << ','
            << (std::isnan(row.mean_vi) ? "" : csv::format_double(row.mean_vi)) << ','
            << row.weeks_observed << ',' << (row.excluded ? '1' : '0') << '\n';
      }
      wrote("vi_summary.csv");
    }
    {
      // LOESS trends for the three most populous retained regions.
      const auto& p = get_panel();
      std::vector<std::size_t> order(p.regions.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (p.regions[a].population != p.regions[b].population)
          return p.regions[a].population > p.regions[b].population;
        return p.regions[a].code < p.regions[b].code;
      });
      std::ofstream out(outpath("loess_trend.csv"), std::ios::binary);
      out << "#schema: region_code,week_monday,vi,trend\n";
      out << "region_code,week_monday,vi,trend\n";
      for (std::size_t k = 0; k < std::min<std::size_t>(3, order.size()); ++k) {
        const std::size_t r = order[k];
        std::vector<double> x, y;
        std::vector<std::size_t> week_pos;
        for (std::size_t w = 0; w < p.weeks.size(); ++w) {
          if (p.missing(static_cast<int>(r), static_cast<int>(w))) continue;
          x.push_back(static_cast<double>(p.weeks[w].index));
          y.push_back(p.values(static_cast<int>(r), static_cast<int>(w)));
          week_pos.push_back(w);
        }
        if (static_cast<int>(x.size()) < 4) continue;
        auto trend = loess_trend(x, y, 0.6, 2);
        for (std::size_t j = 0; j < x.size(); ++j) {
          out << p.regions[r].code << ',' << format_date(p.weeks[week_pos[j]].monday) << ','
              << csv::format_double(y[j]) << ',' << csv::format_double(trend[j]) << '\n';
        }
      }
      wrote("loess_trend.csv");
    }
    if (!config.representativeness_input.empty()) {
      auto table = csv::read_file(config.representativeness_input);
      csv::require_header(table, {"cbg", "bucket", "devices", "census"},
                          config.representativeness_input);
      std::map<std::string, double> devices, census;
      std::map<std::string, std::string> bucketing;
      for (const auto& row : table.rows) {
        bucketing[row[0]] = row[1];
        devices[row[0]] = csv::parse_double(row[2]);
        census[row[0]] = csv::parse_double(row[3]);
      }
      std::ofstream out(outpath("representativeness.csv"), std::ios::binary);
      out << "#schema: bucket,devices,census\n";
      out << "bucket,devices,census\n";
      for (const auto& pair : representativeness(devices, census, bucketing))
        out << pair.bucket << ',' << csv::format_double(pair.devices) << ','
            << csv::format_double(pair.census) << '\n';
      wrote("representativeness.csv");
    }
    if (validation) {
      std::ofstream out(outpath("validation.txt"), std::ios::binary);
      out << validation->summary() << '\n';
      std::size_t shown = 0;
      for (const auto& issue : validation->issues) {
        if (++shown > 200) {
          out << "... " << validation->issues.size() - 200 << " more issue(s)\n";
          break;
        }
        out << issue.message << '\n';
      }
      wrote("validation.txt");
    }
  }
};

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config, unsigned stages) {
  fs::create_directories(config.output_dir);
  StageRunner runner{config, stages, {}, {}, {}, {}, {}, {}, {}};

  auto guarded = [&](const char* stage, auto&& fn) {
    try {
      fn();
    } catch (const PipelineError&) {
      throw;
    } catch (const std::exception& e) {
      throw PipelineError(stage, e.what());
    }
  };

  if (stages & kStageIsolation) guarded("isolation", [&] { runner.run_isolation(); });
  if (stages & kStageExposure) guarded("exposure", [&] { runner.run_exposure(); });
  if (stages & kStageFit) guarded("fit", [&] { runner.run_fit(); });
  if (stages & kStageProject) guarded("project", [&] { runner.run_project(); });
  if (stages & kStageReport) guarded("report", [&] { runner.run_report(); });

  if (stages == kStageAll) {
    std::ofstream out(runner.outpath("manifest.txt"), std::ios::binary);
    out << "tool: heatseg " << kToolVersion << '\n';
    out << "config_hash: fnv1a64:" << config.config_hash << '\n';
    std::vector<std::string> files = runner.result.outputs;
    std::sort(files.begin(), files.end());
    out << "outputs:\n";
    for (const auto& f : files) out << "  " << f << '\n';
    if (!runner.notes.empty()) {
      out << "notes:\n";
      for (const auto& n : runner.notes) out << "  " << n << '\n';
    }
    runner.result.outputs.push_back("manifest.txt");
  }
  return runner.result;
}

}  // namespace heatseg::report
