#include "heatseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "heatseg/csv.hpp"

namespace heatseg::synth {

namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

std::uint64_t splitmix_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

std::string pad_int(std::int64_t v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

// Valid two-digit state FIPS codes for synthetic CBG ids.
const std::vector<std::string>& fips_codes() {
  static const std::vector<std::string> codes = {
      "01", "04", "05", "06", "08", "09", "10", "12", "13", "16", "17", "18",
      "19", "20", "21", "22", "23", "24", "25", "26", "27", "28", "29", "30",
      "31", "32", "33", "34", "35", "36", "37", "38", "39", "40", "41", "42",
      "44", "45", "46", "47", "48", "49", "50", "51", "53", "54", "55", "56"};
  return codes;
}

const std::vector<int>& naics_cycle() {
  static const std::vector<int> codes = {712190, 713940, 445110, 722511,
                                         713110, 531120, 713990, 722410};
  return codes;
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) {
  base_ = splitmix_finalize(seed + kGamma) ^ splitmix_finalize(stream * 0xd1342543de82ef95ULL + 1);
}

std::uint64_t CounterRng::next_u64() {
  ++counter_;
  return splitmix_finalize(base_ + counter_ * kGamma);
}

double CounterRng::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::next_normal(double sd) {
  double s = 0.0;
  for (int i = 0; i < 12; ++i) s += next_unit();
  return (s - 6.0) * sd;
}

std::int64_t CounterRng::next_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw std::invalid_argument("next_int: empty range");
  const double span = static_cast<double>(hi - lo) + 1.0;
  std::int64_t v = lo + static_cast<std::int64_t>(next_unit() * span);
  return std::min(v, hi);
}

namespace {

// Shared machinery for single- and multi-region city generation.
struct CityLayout {
  std::vector<CbgProfile> cbgs;           // residents first, then outside
  int n_resident = 0;
  std::vector<int> cbg_group;             // 0 = White, 1 = NonWhite
  std::vector<PoiRecord> pois;
  std::vector<int> poi_set;               // 0 = White-preferred, 1 = NonWhite-preferred
};

CityLayout make_city_layout(const std::string& region_code, const std::string& fips,
                            int region_ordinal, int n_pois, int n_cbgs, double white_share,
                            double outside_rate, double center_lat, double center_lon) {
  if (n_pois < 2) throw std::invalid_argument("need at least 2 POIs");
  if (n_cbgs < 2) throw std::invalid_argument("need at least 2 CBGs");
  const int n_white = static_cast<int>(std::lround(white_share * n_cbgs));
  if (n_white < 1 || n_white >= n_cbgs)
    throw std::invalid_argument("white_share leaves a group without CBGs");

  CityLayout layout;
  for (int c = 0; c < n_cbgs; ++c) {
    CbgProfile profile;
    profile.cbg = fips + pad_int(region_ordinal, 4) + pad_int(c + 1, 6);
    profile.region_code = region_code;
    profile.total_pop = 1000;
    profile.white_pop = c < n_white ? 800 : 200;
    layout.cbg_group.push_back(c < n_white ? 0 : 1);
    layout.cbgs.push_back(std::move(profile));
  }
  layout.n_resident = n_cbgs;
  if (outside_rate > 0.0) {
    for (int g = 0; g < 2; ++g) {
      CbgProfile profile;
      profile.cbg = "02" + pad_int(region_ordinal, 4) + pad_int(900000 + g, 6);
      profile.region_code = "";
      profile.total_pop = 1000;
      profile.white_pop = g == 0 ? 800 : 200;
      layout.cbg_group.push_back(g);
      layout.cbgs.push_back(std::move(profile));
    }
  }
  for (int p = 0; p < n_pois; ++p) {
    PoiRecord poi;
    poi.poi_id = region_code + "_P" + pad_int(p + 1, 3);
    poi.region_code = region_code;
    poi.naics = naics_cycle()[p % naics_cycle().size()];
    poi.latitude = center_lat + 0.01 * (p % 10);
    poi.longitude = center_lon + 0.01 * (p / 10);
    layout.poi_set.push_back(p < n_pois / 2 ? 0 : 1);
    layout.pois.push_back(std::move(poi));
  }
  return layout;
}

// Weekly visit records for one region-week. Visitor draws follow the group's
// POI choice distribution: weight (1 - dial) everywhere plus 2*dial on the
// group's own POI set.
std::vector<WeeklyVisitRecord> draw_week_visits(const CityLayout& layout, const WeekId& week,
                                                double dial, double visits_scale,
                                                double outside_rate, CounterRng& rng) {
  const int n_pois = static_cast<int>(layout.pois.size());
  const int n_cbgs = static_cast<int>(layout.cbgs.size());

  std::vector<double> cdf_white(n_pois), cdf_nonwhite(n_pois);
  double acc_w = 0.0, acc_nw = 0.0;
  for (int p = 0; p < n_pois; ++p) {
    const double own_w = layout.poi_set[p] == 0 ? 2.0 * dial : 0.0;
    const double own_nw = layout.poi_set[p] == 1 ? 2.0 * dial : 0.0;
    acc_w += (1.0 - dial) + own_w;
    acc_nw += (1.0 - dial) + own_nw;
    cdf_white[p] = acc_w;
    cdf_nonwhite[p] = acc_nw;
  }
  auto draw_poi = [&](int group) {
    const auto& cdf = group == 0 ? cdf_white : cdf_nonwhite;
    const double u = rng.next_unit() * cdf.back();
    return static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
  };

  // visitor counts per (poi, cbg) and visit totals per poi
  std::vector<std::vector<std::int64_t>> visitors(n_pois,
                                                  std::vector<std::int64_t>(n_cbgs, 0));
  std::vector<std::int64_t> visits(n_pois, 0);
  const std::int64_t per_cbg =
      std::max<std::int64_t>(1, std::llround(visits_scale / layout.n_resident));
  std::int64_t resident_total = 0;
  for (int c = 0; c < layout.n_resident; ++c) {
    for (std::int64_t v = 0; v < per_cbg; ++v) {
      const int p = draw_poi(layout.cbg_group[c]);
      ++visitors[p][c];
      visits[p] += 1 + rng.next_int(0, 2);
      ++resident_total;
    }
  }
  if (outside_rate > 0.0 && n_cbgs > layout.n_resident) {
    const std::int64_t n_out = std::llround(outside_rate * static_cast<double>(resident_total));
    for (std::int64_t v = 0; v < n_out; ++v) {
      const int c = layout.n_resident + static_cast<int>(v % 2);
      const int p = draw_poi(layout.cbg_group[c]);
      ++visitors[p][c];
      visits[p] += 1 + rng.next_int(0, 2);
    }
  }

  std::vector<WeeklyVisitRecord> records;
  for (int p = 0; p < n_pois; ++p) {
    std::int64_t total_visitors = 0;
    WeeklyVisitRecord rec;
    for (int c = 0; c < n_cbgs; ++c) {
      if (visitors[p][c] > 0) {
        rec.visitors_by_cbg.emplace_back(layout.cbgs[c].cbg, visitors[p][c]);
        total_visitors += visitors[p][c];
      }
    }
    if (total_visitors == 0) continue;
    std::sort(rec.visitors_by_cbg.begin(), rec.visitors_by_cbg.end());
    rec.poi_id = layout.pois[p].poi_id;
    rec.week = week;
    rec.total_visitors = total_visitors;
    rec.total_visits = visits[p];
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

ingest::DatasetBundle generate_city(const CityParams& params) {
  if (params.n_weeks < 1) throw std::invalid_argument("n_weeks must be positive");
  const std::string code = "M0001";
  CityLayout layout =
      make_city_layout(code, "01", 1, params.n_pois, params.n_cbgs, params.white_share,
                       params.outside_visitor_rate, 39.5, -98.35);

  ingest::DatasetBundle bundle;
  RegionId region;
  region.code = code;
  region.name = "Synthville, AA";
  region.state = "AA";
  region.latitude = 39.5;
  region.longitude = -98.35;
  for (int c = 0; c < layout.n_resident; ++c) region.population += layout.cbgs[c].total_pop;
  bundle.regions.push_back(region);
  bundle.pois = layout.pois;
  bundle.cbgs = layout.cbgs;
  for (int c = 0; c < layout.n_resident; ++c) bundle.cbg_to_region[layout.cbgs[c].cbg] = code;

  for (int w = 1; w <= params.n_weeks; ++w) {
    CounterRng rng(params.seed, static_cast<std::uint64_t>(w));
    auto records = draw_week_visits(layout, week_by_index(w), params.segregation_dial,
                                    params.visits_scale, params.outside_visitor_rate, rng);
    for (auto& rec : records) bundle.visits.push_back(std::move(rec));
  }
  bundle.rebuild_index();
  return bundle;
}

double oracle_vi(const ingest::DatasetBundle& bundle, const std::string& region_code,
                 int week_index, std::int64_t max_expanded) {
  const isolation::CbgContext ctx = isolation::CbgContext::from_bundle(bundle);

  KahanSum num_w, den_w, num_nw, den_nw;
  std::int64_t expanded = 0;
  for (const auto& rec : bundle.visits) {
    if (rec.week.index != week_index) continue;
    const PoiRecord* poi = bundle.find_poi(rec.poi_id);
    if (!poi || poi->region_code != region_code) continue;
    if (rec.total_visitors == 0) continue;  // flagged upstream when t^V > 0

    std::int64_t white_all = 0, nonwhite_all = 0;
    for (const auto& [cbg, count] : rec.visitors_by_cbg) {
      auto lab = ctx.labels.find(cbg);
      if (lab == ctx.labels.end()) continue;
      (lab->second == GroupLabel::White ? white_all : nonwhite_all) += count;
    }
    const double est_white =
        static_cast<double>(white_all) * static_cast<double>(rec.total_visits) /
        static_cast<double>(rec.total_visitors);
    const double white_share = est_white / static_cast<double>(rec.total_visits);

    const std::int64_t whole = rec.total_visits / rec.total_visitors;
    const std::int64_t rem = rec.total_visits % rec.total_visitors;
    const double frac = static_cast<double>(rem) / static_cast<double>(rec.total_visitors);

    for (const auto& [cbg, count] : rec.visitors_by_cbg) {
      auto lab = ctx.labels.find(cbg);
      if (lab == ctx.labels.end()) continue;
      auto res = ctx.residency.find(cbg);
      if (res == ctx.residency.end() || res->second != region_code) continue;
      KahanSum& num = lab->second == GroupLabel::White ? num_w : num_nw;
      KahanSum& den = lab->second == GroupLabel::White ? den_w : den_nw;
      expanded += count * (whole + (rem > 0 ? 1 : 0));
      if (expanded > max_expanded)
        throw std::runtime_error("oracle_vi: enumeration exceeds " +
                                 std::to_string(max_expanded) + " unit visits");
      // Every visitor becomes `whole` unit visits plus one fractional visit.
      for (std::int64_t v = 0; v < count; ++v) {
        for (std::int64_t u = 0; u < whole; ++u) {
          num.add(white_share);
          den.add(1.0);
        }
        if (rem > 0) {
          num.add(frac * white_share);
          den.add(frac);
        }
      }
    }
  }
  if (!(den_w.sum > 0.0) || !(den_nw.sum > 0.0))
    throw std::runtime_error("oracle_vi: a group has no resident visits in region " +
                             region_code + " week " + std::to_string(week_index));
  return num_w.sum / den_w.sum - num_nw.sum / den_nw.sum;
}

DenseOlsResult oracle_ols_dense(const regress::DesignMatrix& design) {
  if (design.demeaned)
    throw std::logic_error("oracle_ols_dense expects the undemeaned design");
  const int n = static_cast<int>(design.rows());
  if (n > 5000)
    throw std::runtime_error("oracle_ols_dense refuses designs beyond 5000 rows");
  const int k = static_cast<int>(design.cols());

  // Dummy block: intercept plus each factor's levels 1..L-1, plus trend
  // columns per group. No intercept when there are no factors (plain WLS).
  const bool any_factor = !design.factor_levels.empty();
  int n_dummies = any_factor ? 1 : 0;
  for (int L : design.factor_level_counts) n_dummies += std::max(0, L - 1);
  for (int g : design.trend_group_counts) n_dummies += g;

  Eigen::MatrixXd dummies = Eigen::MatrixXd::Zero(n, n_dummies);
  int col = 0;
  if (any_factor) {
    dummies.col(col).setOnes();
    ++col;
  }
  for (std::size_t f = 0; f < design.factor_levels.size(); ++f) {
    for (int i = 0; i < n; ++i) {
      const int level = design.factor_levels[f][i];
      if (level > 0) dummies(i, col + level - 1) = 1.0;
    }
    col += std::max(0, design.factor_level_counts[f] - 1);
  }
  for (std::size_t t = 0; t < design.trend_groups.size(); ++t) {
    for (int i = 0; i < n; ++i)
      dummies(i, col + design.trend_groups[t][i]) = design.trend_values[t](i);
    col += design.trend_group_counts[t];
  }

  const Eigen::VectorXd sqw = design.w.array().sqrt();
  Eigen::MatrixXd dummies_s = dummies.array().colwise() * sqw.array();
  Eigen::MatrixXd xs = design.X.array().colwise() * sqw.array();
  const Eigen::VectorXd ys = design.y.array() * sqw.array();

  // Orthonormal basis of the dummy block, then the same greedy leftmost
  // screen over the weather columns as the main path.
  Eigen::MatrixXd basis(n, n_dummies + k);
  int basis_cols = 0;
  auto project_out = [&](Eigen::VectorXd& v) {
    for (int pass = 0; pass < 2; ++pass)
      if (basis_cols > 0)
        v -= basis.leftCols(basis_cols) * (basis.leftCols(basis_cols).transpose() * v);
  };
  for (int j = 0; j < n_dummies; ++j) {
    Eigen::VectorXd v = dummies_s.col(j);
    const double norm0 = v.norm();
    if (norm0 == 0.0) continue;
    project_out(v);
    if (v.norm() > 1e-9 * norm0) {
      basis.col(basis_cols) = v / v.norm();
      ++basis_cols;
    }
  }
  DenseOlsResult result;
  std::vector<int> kept;
  for (int j = 0; j < k; ++j) {
    Eigen::VectorXd v = xs.col(j);
    const double norm0 = v.norm();
    if (norm0 == 0.0) {
      result.dropped_columns.push_back(design.col_labels[j]);
      continue;
    }
    project_out(v);
    if (v.norm() <= 1e-9 * norm0) {
      result.dropped_columns.push_back(design.col_labels[j]);
      continue;
    }
    basis.col(basis_cols) = v / v.norm();
    ++basis_cols;
    kept.push_back(j);
    result.col_labels.push_back(design.col_labels[j]);
  }

  const int k_kept = static_cast<int>(kept.size());
  Eigen::MatrixXd full(n, k_kept + n_dummies);
  for (int j = 0; j < k_kept; ++j) full.col(j) = xs.col(kept[j]);
  full.rightCols(n_dummies) = dummies_s;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(full);
  const Eigen::VectorXd solution = qr.solve(ys);
  result.beta = solution.head(k_kept);
  return result;
}

DgpData generate_dgp(const DgpParams& params) {
  params.bins.validate();
  const int n_temp = params.bins.n_temp_bins();
  const int n_precip = params.bins.n_precip_bins();

  std::vector<double> beta = params.beta_true;
  if (beta.empty()) beta.assign(n_temp - 1, 0.0);
  if (static_cast<int>(beta.size()) != n_temp - 1)
    throw std::invalid_argument("beta_true must have one entry per non-reference temperature bin");
  std::vector<double> rho = params.rho_true;
  if (rho.empty()) rho.assign(n_precip - 1, 0.0);
  if (static_cast<int>(rho.size()) != n_precip - 1)
    throw std::invalid_argument("rho_true must have one entry per non-reference precipitation bin");
  if (params.noise_sd < 0) throw std::invalid_argument("noise_sd must be non-negative");

  DgpData data;
  data.beta_true = beta;
  data.rho_true = rho;
  for (int b = 0; b < n_temp; ++b)
    if (b != params.bins.reference_temp_bin) data.temp_labels.push_back(params.bins.temp_label(b));
  for (int b = 0; b < n_precip; ++b)
    if (b != params.bins.reference_precip_bin)
      data.precip_labels.push_back(params.bins.precip_label(b));

  // Regions: codes ascending, states round-robin, random size and location.
  CounterRng region_rng(params.seed, 17);
  std::vector<RegionId> regions;
  for (int r = 0; r < params.n_regions; ++r) {
    RegionId region;
    region.code = "R" + pad_int(r + 1, 4);
    region.state = "S" + pad_int(r % std::max(1, params.n_states), 2);
    region.name = region.code + ", " + region.state;
    region.population = 100000 + region_rng.next_int(0, 2900000);
    region.latitude = 29.0 + region_rng.next_unit() * 18.0;
    region.longitude = -122.0 + region_rng.next_unit() * 48.0;
    regions.push_back(std::move(region));
  }

  data.exposure.spec = params.bins;
  for (const auto& region : regions) data.exposure.region_codes.push_back(region.code);
  for (int w = 1; w <= params.n_weeks; ++w)
    data.exposure.weeks.push_back(week_by_index(w, params.window));
  data.exposure.temp_days.setZero(params.n_regions * params.n_weeks, n_temp);
  data.exposure.precip_days.setZero(params.n_regions * params.n_weeks, n_precip);
  data.exposure.precip_total.setZero(params.n_regions * params.n_weeks);

  data.vi_panel.regions = regions;
  data.vi_panel.weeks = data.exposure.weeks;
  data.vi_panel.values.resize(params.n_regions, params.n_weeks);
  data.vi_panel.missing.setConstant(params.n_regions, params.n_weeks, false);

  auto fe_draw = [&](std::uint64_t stream, double scale) {
    CounterRng rng(params.seed, stream);
    return rng.next_normal(scale);
  };

  for (int r = 0; r < params.n_regions; ++r) {
    CounterRng weather_rng(params.seed, 1000 + static_cast<std::uint64_t>(r));
    const double base = 6.0 + weather_rng.next_unit() * 18.0;
    const double mu_region = fe_draw(5000 + r, params.fe_scale_region);
    const int state_ord = r % std::max(1, params.n_states);
    for (int w = 0; w < params.n_weeks; ++w) {
      const int row = data.exposure.row(r, w);
      const WeekId& week = data.exposure.weeks[w];
      for (int d = 0; d < 7; ++d) {
        const Date day = date_from_serial(serial_day(week.monday) + d);
        const double seasonal =
            10.0 * std::sin(2.0 * M_PI * (day_of_year(day) - 110.0) / 365.0);
        const double tmax = base + seasonal + weather_rng.next_normal(4.0);
        const double u = weather_rng.next_unit();
        const double precip = u < 0.45 ? 0.0 : 25.0 * u * u;
        data.exposure.temp_days(row, params.bins.temp_bin(tmax)) += 1;
        data.exposure.precip_days(row, params.bins.precip_bin(precip)) += 1;
        data.exposure.precip_total(row) += precip;
      }

      double y = mu_region;
      y += fe_draw(6000 + week.index, params.fe_scale_week);
      const std::uint64_t sm_key = 7000 +
                                   static_cast<std::uint64_t>(state_ord) * 4096 +
                                   static_cast<std::uint64_t>(week.monday.year) * 16 +
                                   static_cast<std::uint64_t>(week.monday.month);
      y += fe_draw(sm_key, params.fe_scale_state_month);
      int bi = 0;
      for (int b = 0; b < n_temp; ++b) {
        if (b == params.bins.reference_temp_bin) continue;
        y += beta[bi++] * data.exposure.temp_days(row, b);
      }
      int pi = 0;
      for (int b = 0; b < n_precip; ++b) {
        if (b == params.bins.reference_precip_bin) continue;
        y += rho[pi++] * data.exposure.precip_days(row, b);
      }
      CounterRng noise_rng(params.seed,
                           9000000ULL + static_cast<std::uint64_t>(r) * 100000ULL + w);
      y += noise_rng.next_normal(params.noise_sd);
      data.vi_panel.values(r, w) = y;
    }
  }
  return data;
}

namespace {

struct GridWriter {
  std::ofstream out;
  explicit GridWriter(const std::string& path) : out(path, std::ios::binary) {
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "#schema: cell_id,date,tmax_c,precip_mm,population\n";
    out << "cell_id,date,tmax_c,precip_mm,population\n";
  }
  void row(const std::string& cell, const Date& date, double tmax, double precip, double pop) {
    out << cell << ',' << format_date(date) << ',' << csv::format_double(tmax) << ','
        << csv::format_double(precip) << ',' << csv::format_double(pop) << '\n';
  }
};

double synthetic_tmax(double base, const Date& day, CounterRng& rng) {
  const double seasonal = 11.0 * std::sin(2.0 * M_PI * (day_of_year(day) - 110.0) / 365.0);
  return base + seasonal + rng.next_normal(3.5);
}

double synthetic_precip(CounterRng& rng) {
  const double u = rng.next_unit();
  return u < 0.45 ? 0.0 : 25.0 * u * u;
}

}  // namespace

void write_synth_dataset(const SynthDatasetConfig& config, const std::string& out_dir) {
  namespace fs = std::filesystem;
  if (weekday(config.window.start_monday) != 0)
    throw std::invalid_argument("sample start " + format_date(config.window.start_monday) +
                                " is not a Monday");
  fs::create_directories(out_dir);
  auto path = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };

  SampleWindow window = config.window;
  window.n_weeks = config.n_weeks;

  const int n_states = std::max(2, std::min(48, config.n_regions / 6 + 2));

  std::vector<RegionId> regions;
  std::vector<CityLayout> layouts;
  std::vector<CbgProfile> all_cbgs;
  std::vector<PoiRecord> all_pois;
  std::vector<std::pair<std::string, std::string>> cbg_xwalk, grid_xwalk;

  CounterRng meta_rng(config.seed, 3);
  for (int r = 0; r < config.n_regions; ++r) {
    RegionId region;
    region.code = "M" + pad_int(r + 1, 4);
    const int state_ord = r % n_states;
    region.state = "S" + pad_int(state_ord, 2);
    region.name = "Synth " + region.code + ", " + region.state;
    region.latitude = 28.0 + meta_rng.next_unit() * 19.0;
    region.longitude = -122.0 + meta_rng.next_unit() * 50.0;

    CityLayout layout = make_city_layout(
        region.code, fips_codes()[state_ord % fips_codes().size()], r + 1,
        config.pois_per_region, config.cbgs_per_region, config.white_share,
        config.outside_visitor_rate, region.latitude, region.longitude);
    for (int c = 0; c < layout.n_resident; ++c) {
      region.population += layout.cbgs[c].total_pop;
      cbg_xwalk.emplace_back(layout.cbgs[c].cbg, region.code);
    }
    // Spread the population across grid cells.
    for (int cell = 0; cell < config.cells_per_region; ++cell)
      grid_xwalk.emplace_back(region.code + "_C" + pad_int(cell + 1, 2), region.code);
    all_cbgs.insert(all_cbgs.end(), layout.cbgs.begin(), layout.cbgs.end());
    all_pois.insert(all_pois.end(), layout.pois.begin(), layout.pois.end());
    layouts.push_back(std::move(layout));
    regions.push_back(std::move(region));
  }

  // Visits: regions ascending, POIs ascending, weeks ascending matches the
  // canonical (poi_id, week) sort order, so rows stream straight to disk.
  std::map<std::string, double> mean_weekly_visits;
  {
    std::ofstream out(path("visits.csv"), std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path("visits.csv"));
    out << "#schema: poi_id,week_monday,total_visits,total_visitors,visitors_by_cbg\n";
    out << "poi_id,week_monday,total_visits,total_visitors,visitors_by_cbg\n";
    for (int r = 0; r < config.n_regions; ++r) {
      // records per poi across weeks, buffered per region
      std::map<std::string, std::vector<WeeklyVisitRecord>> by_poi;
      double visit_total = 0.0;
      for (int w = 1; w <= config.n_weeks; ++w) {
        CounterRng rng(config.seed, 100000ULL + static_cast<std::uint64_t>(r) * 1000ULL + w);
        auto records = draw_week_visits(layouts[r], week_by_index(w, window),
                                        config.segregation_dial, config.visits_scale,
                                        config.outside_visitor_rate, rng);
        for (auto& rec : records) {
          visit_total += static_cast<double>(rec.total_visits);
          by_poi[rec.poi_id].push_back(std::move(rec));
        }
      }
      mean_weekly_visits[regions[r].code] = visit_total / config.n_weeks;
      for (const auto& [poi_id, records] : by_poi) {
        for (const auto& rec : records) {
          out << csv::join_fields({rec.poi_id, format_date(rec.week.monday),
                                   csv::format_int(rec.total_visits),
                                   csv::format_int(rec.total_visitors),
                                   ingest::encode_visitor_map(rec.visitors_by_cbg)})
              << '\n';
        }
      }
    }
  }

  ingest::write_regions(path("regions.csv"), regions);
  ingest::write_pois(path("pois.csv"), all_pois);
  ingest::write_cbgs(path("cbgs.csv"), all_cbgs);
  ingest::write_crosswalk(path("cbg_to_region.csv"), "cbg", cbg_xwalk);
  ingest::write_crosswalk(path("grid_to_region.csv"), "cell_id", grid_xwalk);

  // Weather grids: the sample window, the reference years before the sample,
  // and two scenario years with different warming.
  const int ref_last = window.start_monday.year - 1;
  const int ref_first = ref_last - config.reference_years + 1;
  {
    GridWriter sample(path("grid_daily.csv"));
    GridWriter reference(path("reference_grid.csv"));
    GridWriter ssp1(path("ssp1_grid.csv"));
    GridWriter ssp5(path("ssp5_grid.csv"));
    for (int r = 0; r < config.n_regions; ++r) {
      CounterRng base_rng(config.seed, 200000ULL + r);
      const double base = 6.0 + base_rng.next_unit() * 18.0;
      for (int cell = 0; cell < config.cells_per_region; ++cell) {
        const std::string cell_id = regions[r].code + "_C" + pad_int(cell + 1, 2);
        const double pop =
            static_cast<double>(regions[r].population) / config.cells_per_region;
        const double cell_offset = 0.3 * cell;

        CounterRng rng_sample(config.seed, 300000ULL + static_cast<std::uint64_t>(r) * 100 + cell);
        const std::int64_t start = serial_day(window.start_monday);
        for (int d = 0; d < window.n_weeks * 7; ++d) {
          const Date day = date_from_serial(start + d);
          sample.row(cell_id, day, synthetic_tmax(base + cell_offset, day, rng_sample),
                     synthetic_precip(rng_sample), pop);
        }
        CounterRng rng_ref(config.seed, 400000ULL + static_cast<std::uint64_t>(r) * 100 + cell);
        for (int year = ref_first; year <= ref_last; ++year) {
          const std::int64_t jan1 = serial_day(Date{year, 1, 1});
          for (int d = 0; d < 364; ++d) {
            const Date day = date_from_serial(jan1 + d);
            reference.row(cell_id, day, synthetic_tmax(base + cell_offset, day, rng_ref),
                          synthetic_precip(rng_ref), pop);
          }
        }
        CounterRng rng_s1(config.seed, 500000ULL + static_cast<std::uint64_t>(r) * 100 + cell);
        CounterRng rng_s5(config.seed, 600000ULL + static_cast<std::uint64_t>(r) * 100 + cell);
        const std::int64_t jan1 = serial_day(Date{config.scenario_year, 1, 1});
        for (int d = 0; d < 364; ++d) {
          const Date day = date_from_serial(jan1 + d);
          const double summer =
              std::max(0.0, std::sin(2.0 * M_PI * (day_of_year(day) - 110.0) / 365.0));
          ssp1.row(cell_id, day,
                   synthetic_tmax(base + cell_offset, day, rng_s1) + 1.2 + 0.3 * summer,
                   synthetic_precip(rng_s1), pop);
          ssp5.row(cell_id, day,
                   synthetic_tmax(base + cell_offset, day, rng_s5) + 3.0 + 1.5 * summer,
                   synthetic_precip(rng_s5), pop);
        }
      }
    }
  }

  {
    std::ofstream out(path("devices.csv"), std::ios::binary);
    out << "#schema: region_code,devices\n";
    out << "region_code,devices\n";
    for (const auto& region : regions)
      out << region.code << ','
          << csv::format_int(std::llround(config.device_rate *
                                          static_cast<double>(region.population)))
          << '\n';
  }
  {
    CounterRng rng(config.seed, 11);
    std::ofstream out(path("region_income.csv"), std::ios::binary);
    out << "#schema: region_code,income_per_capita\n";
    out << "region_code,income_per_capita\n";
    for (const auto& region : regions)
      out << region.code << ',' << csv::format_int(40000 + rng.next_int(0, 60000)) << '\n';
  }
  {
    CounterRng rng(config.seed, 13);
    std::ofstream out(path("representativeness_input.csv"), std::ios::binary);
    out << "#schema: cbg,bucket,devices,census\n";
    out << "cbg,bucket,devices,census\n";
    for (const auto& profile : all_cbgs) {
      const std::string bucket = 2 * profile.white_pop > profile.total_pop ? "white" : "nonwhite";
      const double devices = config.device_rate * static_cast<double>(profile.total_pop) *
                             (0.8 + 0.4 * rng.next_unit());
      out << profile.cbg << ',' << bucket << ',' << csv::format_int(std::llround(devices)) << ','
          << csv::format_int(profile.total_pop) << '\n';
    }
  }

  {
    std::ofstream out(path("pipeline.cfg"), std::ios::binary);
    out << "# synthetic dataset configuration\n";
    out << "visits = visits.csv\n";
    out << "pois = pois.csv\n";
    out << "cbgs = cbgs.csv\n";
    out << "regions = regions.csv\n";
    out << "cbg_to_region = cbg_to_region.csv\n";
    out << "grid_to_region = grid_to_region.csv\n";
    out << "grid_daily = grid_daily.csv\n";
    out << "reference_grid = reference_grid.csv\n";
    out << "reference_first_year = " << ref_first << "\n";
    out << "reference_last_year = " << ref_last << "\n";
    out << "scenario_year = " << config.scenario_year << "\n";
    out << "scenario.ssp1 = ssp1_grid.csv\n";
    out << "scenario.ssp5 = ssp5_grid.csv\n";
    out << "devices = devices.csv\n";
    out << "region_income = region_income.csv\n";
    out << "representativeness = representativeness_input.csv\n";
    out << "output_dir = out\n";
    out << "factors = state_month\n";
    out << "vcov = conley\n";
    out << "conley_cutoff_km = 500\n";
    out << "conley_lag_weeks = 4\n";
    out << "split = none\n";
    out << "categories = all\n";
    out << "sample_start = " << format_date(window.start_monday) << "\n";
    out << "sample_weeks = " << window.n_weeks << "\n";
  }
}

}  // namespace heatseg::synth
