#include "heatseg/project.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "heatseg/csv.hpp"

namespace heatseg::project {

double project_vi_shift(const std::map<std::string, double>& beta_by_label,
                        const climate::ScenarioDelta& delta, const std::string& region_code) {
  auto it = std::find(delta.region_codes.begin(), delta.region_codes.end(), region_code);
  if (it == delta.region_codes.end())
    throw std::invalid_argument("scenario delta has no region " + region_code);
  const int r = static_cast<int>(it - delta.region_codes.begin());

  double shift = 0.0;
  for (int b = 0; b < delta.spec.n_temp_bins(); ++b) {
    const std::string label = delta.spec.temp_label(b);
    auto bit = beta_by_label.find(label);
    if (bit == beta_by_label.end()) {
      if (b == delta.spec.reference_temp_bin) continue;  // implicit zero coefficient
      throw std::invalid_argument("no coefficient for temperature bin " + label);
    }
    shift += bit->second * delta.temp_delta(r, b);
  }
  return shift;
}

ProjectionEntry encounters_change(double vi_shift_weekly, const RegionActivity& activity,
                                  const std::string& scenario, double weeks_per_year) {
  if (!(activity.devices > 0.0))
    throw std::invalid_argument("region " + activity.region_code + " has no device count");
  if (!(activity.mean_weekly_visits > 0.0))
    throw std::invalid_argument("region " + activity.region_code + " has no visit volume");
  if (activity.population <= 0)
    throw std::invalid_argument("region " + activity.region_code + " has no population");

  ProjectionEntry entry;
  entry.region_code = activity.region_code;
  entry.scenario = scenario;
  entry.delta_vi_weekly = vi_shift_weekly;
  entry.per_capita_change_yr =
      -vi_shift_weekly * activity.mean_weekly_visits * weeks_per_year / activity.devices;
  entry.total_change_yr = entry.per_capita_change_yr * static_cast<double>(activity.population);
  return entry;
}

EncounterProjection project_all(const std::map<std::string, double>& beta_by_label,
                                const climate::ScenarioDelta& delta,
                                const std::map<std::string, RegionActivity>& activity,
                                double weeks_per_year) {
  EncounterProjection projection;
  for (const auto& code : delta.region_codes) {
    auto it = activity.find(code);
    if (it == activity.end()) continue;
    const double shift = project_vi_shift(beta_by_label, delta, code);
    projection.entries.push_back(encounters_change(shift, it->second, delta.scenario,
                                                   weeks_per_year));
  }
  return projection;
}

void write_projection(const std::string& path, const std::vector<ProjectionEntry>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "#schema: region_code,scenario,delta_vi_weekly,per_capita_change_yr,total_change_yr,"
         "per_capita_decrease_yr,total_decrease_yr\n";
  out << "region_code,scenario,delta_vi_weekly,per_capita_change_yr,total_change_yr,"
         "per_capita_decrease_yr,total_decrease_yr\n";
  for (const auto& e : entries) {
    out << e.region_code << ',' << e.scenario << ',' << csv::format_double(e.delta_vi_weekly)
        << ',' << csv::format_double(e.per_capita_change_yr) << ','
        << csv::format_double(e.total_change_yr) << ','
        << csv::format_double(std::abs(e.per_capita_change_yr)) << ','
        << csv::format_double(std::abs(e.total_change_yr)) << '\n';
  }
}

}  // namespace heatseg::project
