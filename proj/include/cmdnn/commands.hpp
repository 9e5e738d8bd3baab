#pragma once

#include <optional>
#include <ostream>
#include <vector>

#include "cmdnn/config.hpp"
#include "cmdnn/dataset.hpp"

namespace cmdnn {

struct LoadedData {
  RawSeriesTable table;
  // Ground-truth type per day, when known.
  std::optional<std::vector<std::size_t>> labels;
};

// The configured CSV (plus optional labels file), or the synthetic spec.
LoadedData load_data(const RunConfig& cfg);

// Each command writes into cfg.output_dir and logs progress lines to `log`.
void cmd_synth(const RunConfig& cfg, std::ostream& log);
void cmd_cluster(const RunConfig& cfg, std::ostream& log);
void cmd_run(const RunConfig& cfg, std::ostream& log);
// Rebuilds report.csv/report.json from raw_runs.csv in the output directory.
void cmd_report(const RunConfig& cfg, std::ostream& log);

// Entry point of the command-line tool. Returns 0 on success, 1 on a
// configuration or usage error, 2 on a runtime error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cmdnn
