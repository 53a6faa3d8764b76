#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "heatseg/ingest.hpp"
#include "heatseg/report.hpp"
#include "heatseg/synth.hpp"

namespace {

using heatseg::report::PipelineConfig;
using heatseg::report::PipelineError;

std::vector<std::pair<std::string, std::string>> parse_overrides(
    const std::vector<std::string>& sets) {
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const auto& s : sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw PipelineError("config", "--set expects key=value, got '" + s + "'");
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return overrides;
}

struct StageCommand {
  std::string config_path;
  std::vector<std::string> sets;
  unsigned stages;
};

int run_stages(const StageCommand& cmd) {
  PipelineConfig config = PipelineConfig::load(cmd.config_path, parse_overrides(cmd.sets));
  auto result = heatseg::report::run_pipeline(config, cmd.stages);
  for (const auto& name : result.outputs) std::cout << "wrote " << name << '\n';
  return 0;
}

int run_ingest_check(const StageCommand& cmd) {
  PipelineConfig config = PipelineConfig::load(cmd.config_path, parse_overrides(cmd.sets));
  heatseg::ingest::BundlePaths paths{config.visits,  config.pois,
                                     config.cbgs,    config.regions,
                                     config.grid_to_region, config.cbg_to_region};
  auto loaded = heatseg::ingest::load_bundle(paths, config.window);
  for (const auto& err : loaded.errors)
    std::cerr << err.file << ":" << err.line << ": " << err.message << '\n';
  auto report = heatseg::ingest::validate_bundle(loaded.bundle);
  std::cout << report.summary() << '\n';
  std::size_t shown = 0;
  for (const auto& issue : report.issues) {
    if (++shown > 50) {
      std::cout << "... " << report.issues.size() - 50 << " more issue(s)\n";
      break;
    }
    std::cout << issue.message << '\n';
  }
  return loaded.errors.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heatseg: visit-isolation indices, weather-exposure regressions, and "
               "climate-scenario encounter projections from foot-traffic CSVs"};
  app.require_subcommand(1);

  StageCommand stage_cmd;
  auto add_stage_subcommand = [&](const std::string& name, const std::string& help,
                                  unsigned stages) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", stage_cmd.config_path, "pipeline config file")->required();
    sub->add_option("--set", stage_cmd.sets, "override a config key (key=value), repeatable");
    auto mirror = [&stage_cmd, sub](const std::string& flag, const std::string& key) {
      sub->add_option_function<std::string>(
          flag,
          [&stage_cmd, key](const std::string& value) {
            stage_cmd.sets.push_back(key + "=" + value);
          },
          "override config key '" + key + "'");
    };
    mirror("--output-dir", "output_dir");
    mirror("--factors", "factors");
    mirror("--vcov", "vcov");
    mirror("--split", "split");
    mirror("--categories", "categories");
    sub->callback([&stage_cmd, stages] {
      stage_cmd.stages = stages;
    });
    return sub;
  };

  using heatseg::report::kStageAll;
  using heatseg::report::kStageExposure;
  using heatseg::report::kStageFit;
  using heatseg::report::kStageIsolation;
  using heatseg::report::kStageProject;
  using heatseg::report::kStageReport;

  CLI::App* ingest_check =
      add_stage_subcommand("ingest-check", "parse and validate all inputs", 0);
  add_stage_subcommand("isolation", "build and emit the isolation panel", kStageIsolation);
  add_stage_subcommand("exposure", "build and emit the weather exposure panel", kStageExposure);
  add_stage_subcommand("fit", "fit the fixed-effects regression and emit coefficients",
                       kStageFit);
  add_stage_subcommand("project", "emit scenario deltas and encounter projections",
                       kStageProject);
  add_stage_subcommand("report", "emit summary tables, LOESS trends and diagnostics",
                       kStageReport);
  add_stage_subcommand("run-all", "run every stage and write the run manifest", kStageAll);

  heatseg::synth::SynthDatasetConfig synth_config;
  std::string synth_out;
  std::string synth_start = "2018-01-01";
  CLI::App* synth = app.add_subcommand("synth", "generate a seeded synthetic dataset");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_config.seed, "random seed");
  synth->add_option("--regions", synth_config.n_regions, "number of regions");
  synth->add_option("--weeks", synth_config.n_weeks, "number of sample weeks");
  synth->add_option("--pois", synth_config.pois_per_region, "POIs per region");
  synth->add_option("--cbgs", synth_config.cbgs_per_region, "CBGs per region");
  synth->add_option("--visits-scale", synth_config.visits_scale,
                    "expected resident visitors per region-week");
  synth->add_option("--dial", synth_config.segregation_dial, "segregation dial in [0,1]");
  synth->add_option("--outside-rate", synth_config.outside_visitor_rate,
                    "outside-visitor share");
  synth->add_option("--reference-years", synth_config.reference_years,
                    "climatology years before the sample window");
  synth->add_option("--sample-start", synth_start, "first Monday of the sample window");

  try {
    app.parse(argc, argv);
    if (synth->parsed()) {
      synth_config.window.start_monday = heatseg::parse_date(synth_start);
      heatseg::synth::write_synth_dataset(synth_config, synth_out);
      std::cout << "wrote synthetic dataset to " << synth_out << '\n';
      return 0;
    }
    if (ingest_check->parsed()) return run_ingest_check(stage_cmd);
    return run_stages(stage_cmd);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const PipelineError& e) {
    std::cerr << "error " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
