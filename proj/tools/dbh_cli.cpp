// dbh: tree diameter at breast height from point clouds and trunk masks.

#include "dbh/app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <map>

namespace {

/// Registers --config, --seed, --min-label-count and one --<key> flag per
/// pipeline setting; values are collected into `overrides`.
void add_config_flags(CLI::App* cmd, dbh::ConfigSource& source, std::map<std::string, std::string>& overrides) {
  cmd->add_option("--config", source.file, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", source.seed, "random seed (overrides the config)");
  cmd->add_option("--min-label-count", source.min_label_count, "minimum mask votes for a trunk candidate");
  for (const auto& [key, value] : dbh::PipelineConfig{}.to_key_values()) {
    if (key == "seed" || key == "min_label_count") continue;
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    cmd->add_option_function<std::string>(
           flag, [&overrides, key = key](const std::string& v) { overrides[key] = v; },
           "config override (default " + value + ")")
        ->group("Pipeline settings");
  }
}

void apply_overrides(dbh::ConfigSource& source, const std::map<std::string, std::string>& overrides) {
  source.overrides.assign(overrides.begin(), overrides.end());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Estimate tree diameter at breast height from a point cloud, camera poses and trunk masks"};
  app.set_version_flag("--version", DBH_VERSION);
  app.require_subcommand(1);

  dbh::EstimateOptions est;
  std::map<std::string, std::string> est_overrides;
  auto* estimate = app.add_subcommand("estimate", "segment trunks and fit DBH with all three methods");
  estimate->add_option("--cloud", est.cloud, "point cloud (.ply or .xyz)")->required()->check(CLI::ExistingFile);
  estimate->add_option("--poses", est.poses, "pose file")->required();
  estimate->add_option("--masks", est.masks, "directory of <frame_id>.pgm masks")->required();
  estimate->add_option("-o,--output", est.output, "output directory")->required();
  estimate->add_option("--workers", est.workers, "worker threads (0 = all cores)")->capture_default_str();
  add_config_flags(estimate, est.config, est_overrides);

  dbh::TransferOptions tr;
  std::map<std::string, std::string> tr_overrides;
  auto* transfer = app.add_subcommand("transfer", "carry segments to a second cloud and refit");
  transfer->add_option("--segments", tr.segments, "segments.json from estimate")->required();
  transfer->add_option("--source-cloud", tr.source_cloud, "cloud the segments index")->required();
  transfer->add_option("--source-traj", tr.source_trajectory, "sensor trajectory in the source frame")->required();
  transfer->add_option("--target-traj", tr.target_trajectory, "sensor trajectory in the target frame")->required();
  transfer->add_option("--target-cloud", tr.target_cloud, "cloud receiving the labels")->required();
  transfer->add_option("-o,--output", tr.output, "output directory")->required();
  transfer->add_option("--workers", tr.workers, "worker threads (0 = all cores)")->capture_default_str();
  add_config_flags(transfer, tr.config, tr_overrides);

  dbh::SynthOptions syn;
  auto* synth = app.add_subcommand("synth", "write a synthetic scene with known ground truth");
  auto* preset = synth->add_option("--preset", syn.preset, "two-trunks | partial-180 | five-trunks");
  synth->add_option("--spec", syn.spec, "JSON scene description")->excludes(preset);
  synth->add_option("--seed", syn.seed, "random seed");
  synth->add_option("-o,--output", syn.output, "output directory")->required();

  dbh::EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "compare a report with reference DBH values");
  eval->add_option("--report", ev.report, "report.json")->required();
  eval->add_option("--references", ev.references, "CSV id,dbh_cm[,x,y,z]")->required();
  eval->add_option("--match-radius", ev.match_radius, "join by position within this radius (m) instead of id");
  eval->add_option("-o,--output", ev.output, "write joined records and metrics as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dbh::kExitInputError;
  }

  if (estimate->parsed()) {
    apply_overrides(est.config, est_overrides);
    return dbh::cmd_estimate(est, std::cout, std::cerr);
  }
  if (transfer->parsed()) {
    apply_overrides(tr.config, tr_overrides);
    return dbh::cmd_transfer(tr, std::cout, std::cerr);
  }
  if (synth->parsed()) return dbh::cmd_synth(syn, std::cout, std::cerr);
  return dbh::cmd_eval(ev, std::cout, std::cerr);
}
