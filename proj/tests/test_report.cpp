#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "heatseg/report.hpp"
#include "heatseg/synth.hpp"

using namespace heatseg;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Pointwise local-WLS oracle: same pinned window rule, normal-equations solve.
double loess_oracle_at(const std::vector<double>& x, const std::vector<double>& y, int i,
                       double span, int degree) {
  const int n = static_cast<int>(x.size());
  const int q = std::min(n, std::max(static_cast<int>(std::ceil(span * n)), degree + 3));
  int best_lo = std::max(0, std::min(i, n - q));
  double best_d = std::numeric_limits<double>::infinity();
  for (int lo = std::max(0, i - q + 1); lo <= std::min(i, n - q); ++lo) {
    double d = std::max(x[i] - x[lo], x[lo + q - 1] - x[i]);
    if (d < best_d) {
      best_d = d;
      best_lo = lo;
    }
  }
  const double dmax = best_d;
  // weighted normal equations sum_j w u^(r+c), solved by Gaussian elimination
  const int m = degree + 1;
  std::vector<std::vector<double>> a(m, std::vector<double>(m + 1, 0.0));
  for (int j = best_lo; j < best_lo + q; ++j) {
    const double u = x[j] - x[i];
    double w = 1.0;
    if (dmax > 0.0) {
      const double t = std::abs(u) / dmax;
      const double c = 1.0 - t * t * t;
      w = c * c * c;
    }
    std::vector<double> upow(2 * m - 1, 1.0);
    for (std::size_t r = 1; r < upow.size(); ++r) upow[r] = upow[r - 1] * u;
    for (int r = 0; r < m; ++r) {
      for (int c = 0; c < m; ++c) a[r][c] += w * upow[r + c];
      a[r][m] += w * upow[r] * y[j];
    }
  }
  // partial-pivot elimination
  for (int col = 0; col < m; ++col) {
    int piv = col;
    for (int r = col + 1; r < m; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    for (int r = 0; r < m; ++r) {
      if (r == col || a[col][col] == 0.0) continue;
      const double f = a[r][col] / a[col][col];
      for (int c = col; c <= m; ++c) a[r][c] -= f * a[col][c];
    }
  }
  return a[0][m] / a[0][0];
}

}  // namespace

TEST_CASE("loess reproduces an exact quadratic") {
  std::vector<double> x, y;
  for (int i = 0; i < 40; ++i) {
    x.push_back(i + 1.0);
    double u = x.back();
    y.push_back(0.3 + 0.02 * u - 0.001 * u * u);
  }
  auto fit = report::loess_trend(x, y, 0.6, 2);
  for (int i = 0; i < 40; ++i) CHECK(std::abs(fit[i] - y[i]) <= 1e-8);

  // constant series -> constant fit
  std::vector<double> flat(40, 0.25);
  auto flat_fit = report::loess_trend(x, flat, 0.6, 2);
  for (double v : flat_fit) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("loess matches the pointwise local-WLS oracle") {
  synth::CounterRng rng(33);
  std::vector<double> x, y;
  for (int i = 0; i < 60; ++i) {
    x.push_back(i + 1.0);
    y.push_back(std::sin(i / 7.0) + rng.next_normal(0.3));
  }
  for (double span : {0.3, 0.6, 1.0}) {
    auto fit = report::loess_trend(x, y, span, 2);
    for (int i = 0; i < 60; ++i) {
      double oracle = loess_oracle_at(x, y, i, span, 2);
      CHECK(std::abs(fit[i] - oracle) <= 1e-10 * std::max(1.0, std::abs(oracle)));
    }
  }
}

TEST_CASE("loess input validation") {
  std::vector<double> x{1, 2, 3}, y{1, 2, 3};
  CHECK_THROWS(report::loess_trend(x, y, 0.6, 2));  // too few points
  std::vector<double> x4{1, 2, 2, 4}, y4{1, 2, 3, 4};
  CHECK_THROWS(report::loess_trend(x4, y4, 0.6, 2));  // not strictly increasing
  std::vector<double> x5{1, 2, 3, 4}, y5{1, 2, 3, 4};
  CHECK_THROWS(report::loess_trend(x5, y5, 0.0, 2));
  CHECK_THROWS(report::loess_trend(x5, y5, 1.5, 2));
}

TEST_CASE("representativeness pairs bucket totals") {
  std::map<std::string, std::string> bucketing{
      {"c1", "young"}, {"c2", "young"}, {"c3", "old"}, {"c4", "empty"}};
  std::map<std::string, double> census{{"c1", 100}, {"c2", 200}, {"c3", 400}};
  std::map<std::string, double> devices{{"c1", 10}, {"c2", 20}, {"c3", 40}};

  auto pairs = report::representativeness(devices, census, bucketing);
  REQUIRE(pairs.size() == 3);  // sorted: empty, old, young
  CHECK(pairs[0].bucket == "empty");
  CHECK(pairs[0].devices == 0.0);
  CHECK(pairs[0].census == 0.0);
  CHECK(pairs[1].bucket == "old");
  CHECK(pairs[1].devices == 40.0);
  CHECK(pairs[2].bucket == "young");
  CHECK(pairs[2].devices == 30.0);
  CHECK(pairs[2].census == 300.0);

  // exactly proportional -> collinear through the origin
  for (const auto& p : pairs) {
    if (p.census > 0) CHECK(p.devices / p.census == doctest::Approx(0.1).epsilon(1e-12));
  }

  // over-sample one bucket by 2x
  auto devices2 = devices;
  devices2["c3"] *= 2.0;
  auto pairs2 = report::representativeness(devices2, census, bucketing);
  CHECK(pairs2[1].devices / pairs2[1].census == doctest::Approx(0.2).epsilon(1e-12));

  // random group-by oracle
  synth::CounterRng rng(21);
  std::map<std::string, std::string> buckets;
  std::map<std::string, double> dev, cen;
  std::map<std::string, std::pair<double, double>> expected;
  for (int i = 0; i < 100; ++i) {
    std::string cbg = "c" + std::to_string(i);
    std::string bucket = "b" + std::to_string(rng.next_int(0, 4));
    buckets[cbg] = bucket;
    dev[cbg] = std::floor(rng.next_unit() * 50);
    cen[cbg] = std::floor(rng.next_unit() * 500);
    expected[bucket].first += dev[cbg];
    expected[bucket].second += cen[cbg];
  }
  for (const auto& p : report::representativeness(dev, cen, buckets)) {
    CHECK(p.devices == expected[p.bucket].first);
    CHECK(p.census == expected[p.bucket].second);
  }
}

TEST_CASE("summarize_panel means and sentinels") {
  synth::CityParams params;
  params.n_weeks = 4;
  params.seed = 13;
  auto bundle = synth::generate_city(params);
  auto panel = isolation::build_isolation_panel(bundle);
  auto rows = report::summarize_panel(panel);
  REQUIRE(rows.size() == 1);
  double mean = 0;
  for (int w = 0; w < 4; ++w) mean += panel.values(0, w);
  mean /= 4;
  CHECK(rows[0].mean_vi == doctest::Approx(mean).epsilon(1e-12));
  CHECK(rows[0].weeks_observed == 4);
  CHECK(!rows[0].excluded);

  // a constant panel summarizes to the constant
  isolation::IsolationPanel constant = panel;
  constant.values.setConstant(0.123);
  auto const_rows = report::summarize_panel(constant);
  CHECK(const_rows[0].mean_vi == doctest::Approx(0.123));

  // excluded regions appear as sentinel rows
  isolation::IsolationPanel with_excluded = panel;
  RegionId gone{"M0999", "Gone, ZZ", "ZZ", 1234, 30.0, -90.0};
  with_excluded.excluded_regions.push_back(gone);
  auto sentinel_rows = report::summarize_panel(with_excluded);
  REQUIRE(sentinel_rows.size() == 2);
  CHECK(sentinel_rows[1].region_code == "M0999");
  CHECK(sentinel_rows[1].excluded);
  CHECK(std::isnan(sentinel_rows[1].mean_vi));
}

TEST_CASE("a New York-like calibration averages near 0.40") {
  // Two-POI city where Whites favor one POI with probability p; the expected
  // index is (2p-1)^2, so p = (1+sqrt(0.4))/2 targets 0.40.
  const double p = (1.0 + std::sqrt(0.4)) / 2.0;
  const std::int64_t per_group = 100000;
  const auto favored = static_cast<std::int64_t>(std::llround(p * per_group));
  isolation::IsolationPanel panel;
  RegionId ny{"35620", "New York, NY", "NY", 19000000, 40.7, -74.0};
  panel.regions = {ny};
  ingest::DatasetBundle bundle;
  bundle.regions = {ny};
  bundle.cbgs = {{"360000000001", "35620", 1000, 900}, {"360000000002", "35620", 1000, 100}};
  bundle.cbg_to_region["360000000001"] = "35620";
  bundle.cbg_to_region["360000000002"] = "35620";
  bundle.pois = {{"pA", "35620", 712190, 40.7, -74.0}, {"pB", "35620", 722511, 40.7, -74.0}};
  for (int week = 1; week <= 8; ++week) {
    WeeklyVisitRecord a, b;
    a.poi_id = "pA";
    a.week = week_by_index(week);
    a.visitors_by_cbg = {{"360000000001", favored}, {"360000000002", per_group - favored}};
    a.total_visitors = per_group;
    a.total_visits = per_group;
    b.poi_id = "pB";
    b.week = a.week;
    b.visitors_by_cbg = {{"360000000001", per_group - favored}, {"360000000002", favored}};
    b.total_visitors = per_group;
    b.total_visits = per_group;
    bundle.visits.push_back(a);
    bundle.visits.push_back(b);
  }
  bundle.rebuild_index();
  auto built = isolation::build_isolation_panel(bundle);
  auto rows = report::summarize_panel(built);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].mean_vi == doctest::Approx(0.40).epsilon(1e-3));
}

TEST_CASE("pipeline config is strict") {
  auto dir = fs::temp_directory_path() / "heatseg_cfg";
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "bad.cfg");
    out << "unknown_key = 1\n";
  }
  CHECK_THROWS_AS(report::PipelineConfig::load((dir / "bad.cfg").string()),
                  report::PipelineError);

  {
    std::ofstream out(dir / "missing.cfg");
    out << "visits = does_not_exist.csv\n";
  }
  try {
    report::PipelineConfig::load((dir / "missing.cfg").string());
    FAIL("expected PipelineError");
  } catch (const report::PipelineError& e) {
    CHECK(e.exit_code() == 2);
    CHECK(std::string(e.what()).find("does_not_exist.csv") != std::string::npos);
  }

  {
    std::ofstream out(dir / "badweek.cfg");
    out << "sample_start = 2018-01-02\n";
  }
  CHECK_THROWS(report::PipelineConfig::load((dir / "badweek.cfg").string()));

  {
    std::ofstream out(dir / "ok.cfg");
    out << "# comment\nfactors = state_month\nvcov = robust\nsample_weeks = 10\n";
  }
  auto config = report::PipelineConfig::load((dir / "ok.cfg").string());
  CHECK(config.window.n_weeks == 10);
  CHECK(config.vcov.kind == infer::VcovKind::Robust);

  // overrides are applied and change the hash
  auto with_override =
      report::PipelineConfig::load((dir / "ok.cfg").string(), {{"sample_weeks", "12"}});
  CHECK(with_override.window.n_weeks == 12);
  CHECK(with_override.config_hash != config.config_hash);
}

TEST_CASE("run_pipeline end to end on a small synthetic dataset") {
  synth::SynthDatasetConfig cfg;
  cfg.n_regions = 5;
  cfg.n_weeks = 10;
  cfg.pois_per_region = 6;
  cfg.cbgs_per_region = 4;
  cfg.seed = 5;
  auto dir = fs::temp_directory_path() / "heatseg_pipe";
  fs::remove_all(dir);
  synth::write_synth_dataset(cfg, dir.string());

  auto config = report::PipelineConfig::load((dir / "pipeline.cfg").string(),
                                             {{"vcov", "robust"}});
  const auto t0 = std::chrono::steady_clock::now();
  auto result = report::run_pipeline(config);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(elapsed < 60.0);
  for (const char* name : {"isolation_panel.csv", "exposure_panel.csv", "coefficients.csv",
                           "scenario_delta.csv", "projection.csv", "vi_summary.csv",
                           "loess_trend.csv", "representativeness.csv", "validation.txt",
                           "manifest.txt"}) {
    CHECK(fs::exists(dir / "out" / name));
  }
  CHECK(result.outputs.size() >= 9);

  // identical rerun is byte-identical
  auto first = std::map<std::string, std::string>{};
  for (const auto& name : result.outputs) first[name] = slurp(dir / "out" / name);
  report::run_pipeline(config);
  for (const auto& [name, bytes] : first) CHECK(slurp(dir / "out" / name) == bytes);

  // estimated columns only; the references never appear
  auto coef = slurp(dir / "out" / "coefficients.csv");
  std::size_t temp_cols = 0;
  for (std::size_t pos = coef.find(",t_"); pos != std::string::npos;
       pos = coef.find(",t_", pos + 1))
    ++temp_cols;
  CHECK(temp_cols >= 3);
  CHECK(coef.find("t_20_25") == std::string::npos);  // reference bin absorbed
  CHECK(coef.find("p_dry") == std::string::npos);    // reference precip bin absorbed
}

TEST_CASE("pipeline split variants run") {
  synth::SynthDatasetConfig cfg;
  cfg.n_regions = 8;
  cfg.n_weeks = 8;
  cfg.pois_per_region = 5;
  cfg.cbgs_per_region = 4;
  cfg.seed = 6;
  auto dir = fs::temp_directory_path() / "heatseg_pipe_split";
  fs::remove_all(dir);
  synth::write_synth_dataset(cfg, dir.string());

  for (const std::string split : {"income", "climate_normal", "population_quartiles"}) {
    auto config = report::PipelineConfig::load(
        (dir / "pipeline.cfg").string(),
        {{"vcov", "robust"}, {"split", split}, {"output_dir", "out_" + split}});
    report::run_pipeline(config, report::kStageFit);
    CHECK(fs::exists(dir / ("out_" + split) / "coefficients.csv"));
  }
  auto income = slurp(dir / "out_income" / "coefficients.csv");
  CHECK(income.find("above:") != std::string::npos);
  CHECK(income.find("below:") != std::string::npos);
}

TEST_CASE("projection can scale by NonWhite visit volume instead of totals") {
  synth::SynthDatasetConfig cfg;
  cfg.n_regions = 4;
  cfg.n_weeks = 8;
  cfg.pois_per_region = 5;
  cfg.cbgs_per_region = 4;
  cfg.seed = 17;
  auto dir = fs::temp_directory_path() / "heatseg_pipe_nwvol";
  fs::remove_all(dir);
  synth::write_synth_dataset(cfg, dir.string());

  auto run_with = [&](const std::string& mode, const std::string& out) {
    auto config = report::PipelineConfig::load(
        (dir / "pipeline.cfg").string(),
        {{"vcov", "robust"}, {"projection_visits", mode}, {"output_dir", out}});
    report::run_pipeline(config, report::kStageProject);
    return slurp(dir / out / "projection.csv");
  };
  auto total = run_with("total", "out_total");
  auto nonwhite = run_with("nonwhite", "out_nonwhite");
  CHECK(!total.empty());
  CHECK(!nonwhite.empty());
  CHECK(total != nonwhite);  // the volume switch changes the scaling

  CHECK_THROWS(report::PipelineConfig::load((dir / "pipeline.cfg").string(),
                                            {{"projection_visits", "bogus"}}));
}
