#include "cmdnn/commands.hpp"

#include <CLI11.hpp>

#include <map>
#include <sstream>

#include "cmdnn/clustering.hpp"
#include "cmdnn/harness.hpp"
#include "cmdnn/io.hpp"

namespace cmdnn {

namespace {

std::vector<std::size_t> load_labels(const std::filesystem::path& path, const RawSeriesTable& table) {
  std::istringstream in(io::read_file(path));
  std::string line;
  std::getline(in, line);  // header
  std::map<std::string, std::size_t> by_day;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = io::split_csv_line(line);
    double v = 0.0;
    if (f.size() < 2 || !io::parse_double(f[1], v) || v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) + ": expected day_id,label");
    }
    by_day[f[0]] = static_cast<std::size_t>(v);
  }
  std::vector<std::size_t> labels;
  for (const auto& id : table.day_ids) {
    const auto it = by_day.find(id);
    if (it == by_day.end()) throw std::runtime_error(path.string() + ": no label for day " + id);
    labels.push_back(it->second);
  }
  return labels;
}

std::string assignments_csv(const std::vector<std::string>& day_ids, const ClusterModel& model,
                            const std::vector<std::string>& names) {
  std::string out = "day_id,cluster,name\n";
  for (std::size_t d = 0; d < day_ids.size(); ++d) {
    const auto c = model.assignments[d];
    out += day_ids[d] + "," + std::to_string(c) + "," + names[c] + "\n";
  }
  return out;
}

std::string centers_csv(const std::vector<std::string>& slot_labels, const ClusterModel& model,
                        const std::vector<std::string>& names) {
  std::string out = "cluster";
  for (const auto& s : slot_labels) out += "," + s;
  out += "\n";
  for (std::size_t j = 0; j < model.clusters(); ++j) {
    out += names[j];
    for (double v : model.centers.row(j)) out += "," + io::format_double(v);
    out += "\n";
  }
  return out;
}

void write_clustering(const std::filesystem::path& dir, const RawSeriesTable& table, const ClusterModel& model,
                      const std::vector<std::string>& names) {
  io::write_file_atomic(dir / "assignments.csv", assignments_csv(table.day_ids, model, names));
  io::write_file_atomic(dir / "centers.csv", centers_csv(table.slot_labels, model, names));
}

void report_agreement(const LoadedData& data, const ClusterModel& model, std::size_t n, std::ostream& log) {
  if (!data.labels) return;
  std::size_t types = 0;
  for (auto l : *data.labels) types = std::max(types, l + 1);
  if (types != n || n > 9) return;
  log << "agreement with known labels: " << permutation_agreement(model.assignments, *data.labels, n) << "\n";
}

}  // namespace

LoadedData load_data(const RunConfig& cfg) {
  LoadedData out;
  if (cfg.data_csv) {
    out.table = load_csv(*cfg.data_csv);
    if (cfg.labels_csv) out.labels = load_labels(*cfg.labels_csv, out.table);
  } else {
    auto synth = generate_synthetic(cfg.synthetic, cfg.seed);
    out.table = std::move(synth.table);
    out.labels = std::move(synth.labels);
  }
  return out;
}

void cmd_synth(const RunConfig& cfg, std::ostream& log) {
  const auto data = generate_synthetic(cfg.synthetic, cfg.seed);
  std::filesystem::create_directories(cfg.output_dir);
  write_csv(data.table, cfg.output_dir / "synthetic.csv");
  std::string labels = "day_id,label,name\n";
  for (std::size_t d = 0; d < data.labels.size(); ++d) {
    labels += data.table.day_ids[d] + "," + std::to_string(data.labels[d]) + "," +
              cfg.synthetic.clusters[data.labels[d]].name + "\n";
  }
  io::write_file_atomic(cfg.output_dir / "labels.csv", labels);
  log << "wrote " << data.table.days() << " days x " << data.table.slots() << " slots:";
  for (const auto& c : cfg.synthetic.clusters) log << " " << c.name << "=" << c.days;
  log << "\n";
}

void cmd_cluster(const RunConfig& cfg, std::ostream& log) {
  const auto data = load_data(cfg);
  const auto& k = cfg.experiment.clustering;
  if (data.table.days() < k.clusters) {
    throw std::runtime_error("cannot form " + std::to_string(k.clusters) + " clusters from " +
                             std::to_string(data.table.days()) + " days");
  }
  const auto model = order_by_peak(kmeans_fit(data.table.values, k, cfg.seed));
  const auto names = cluster_names(k.clusters);
  std::filesystem::create_directories(cfg.output_dir);
  write_clustering(cfg.output_dir, data.table, model, names);
  log << "clustered " << data.table.days() << " days in " << model.iterations_run << " iterations"
      << (model.converged ? "" : " (not converged)") << ":";
  for (std::size_t j = 0; j < model.clusters(); ++j) log << " " << names[j] << "=" << model.counts[j];
  log << "\n";
  report_agreement(data, model, k.clusters, log);
}

void cmd_run(const RunConfig& cfg, std::ostream& log) {
  const auto data = load_data(cfg);
  const auto result = run_experiment(data.table, cfg.experiment, [&](const std::string& line) {
    log << line << "\n";
    log.flush();
  });
  std::filesystem::create_directories(cfg.output_dir);
  write_experiment(result, cfg.output_dir);
  write_clustering(cfg.output_dir, data.table, result.clustering, result.cluster_names);
  io::write_file_atomic(cfg.output_dir / "config.json", config_to_json(cfg));
  for (const auto& r : result.report) {
    if (r.split != "test") continue;
    log << r.model << " " << r.cluster << " test RMSE " << r.mean_rmse << " +- " << r.std_rmse
        << (r.best ? " *" : "") << "\n";
  }
  log << "wrote " << cfg.output_dir.string() << "\n";
}

void cmd_report(const RunConfig& cfg, std::ostream& log) {
  const auto path = cfg.output_dir / "raw_runs.csv";
  if (!std::filesystem::exists(path)) throw std::runtime_error(path.string() + " does not exist; run first");
  const auto report = aggregate(parse_raw_runs_csv(io::read_file(path)));
  write_report(report, cfg.output_dir);
  log << "rebuilt report from " << path.string() << " (" << report.size() << " rows)\n";
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Clustering-based multitask forecasting with PSO parameter blending"};
  app.name("cmdnn");
  app.require_subcommand(1);

  std::string config_path, out_dir, models;
  std::uint64_t seed = 0;
  std::size_t seeds = 0, mgen = 0, threads = 0;
  bool quick = false;

  std::vector<CLI::App*> subs;
  auto add = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "Top-level seed (overrides seed)");
    sub->add_flag("--quick", quick, "Shrink days, iterations and PSO generations by 10x");
    subs.push_back(sub);
    return sub;
  };
  add("synth", "Write a synthetic dataset and its labels");
  add("cluster", "Cluster the days and write assignments and centers");
  auto* run = add("run", "Run the baseline vs CM comparison and write reports");
  add("report", "Rebuild report files from raw_runs.csv");
  run->add_option("--models", models, "Comma-separated cell kinds, e.g. lstm,gru");
  run->add_option("--seeds", seeds, "Number of run seeds (seed, seed+1, ...)");
  run->add_option("--mgen", mgen, "PSO generations");
  run->add_option("--threads", threads, "Worker threads (0 = all cores)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  CLI::App* chosen = app.get_subcommands().front();
  RunConfig cfg;
  try {
    cfg = config_path.empty() ? parse_config("{}") : load_config(config_path);
    if (quick) apply_quick(cfg);
    if (chosen->count("--out")) cfg.output_dir = out_dir;
    if (chosen->count("--seed")) cfg.seed = seed;
    if (chosen == run) {
      if (run->count("--models")) cfg.experiment.kinds = parse_model_list(models);
      if (run->count("--seeds")) {
        cfg.runs = seeds;
        cfg.explicit_seeds = false;
      }
      if (run->count("--mgen")) cfg.experiment.pso.generations = mgen;
      if (run->count("--threads")) cfg.experiment.threads = threads;
    }
    cfg.sync_seeds();
    cfg.validate();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    const std::string name = chosen->get_name();
    if (name == "synth") cmd_synth(cfg, out);
    else if (name == "cluster") cmd_cluster(cfg, out);
    else if (name == "run") cmd_run(cfg, out);
    else cmd_report(cfg, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace cmdnn
