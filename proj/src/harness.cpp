#include "cmdnn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace cmdnn {

void ExperimentConfig::validate() const {
  if (kinds.empty()) throw std::invalid_argument("at least one cell kind is required");
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (std::find(seeds.begin(), seeds.begin() + i, seeds[i]) != seeds.begin() + i) {
      throw std::invalid_argument("seeds must be distinct");
    }
  }
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    if (std::find(kinds.begin(), kinds.begin() + i, kinds[i]) != kinds.begin() + i) {
      throw std::invalid_argument("cell kinds must be distinct");
    }
  }
  if (clustering.clusters == 0) throw std::invalid_argument("clusters must be at least 1");
  if (clustering.max_iterations == 0) throw std::invalid_argument("clustering max_iterations must be at least 1");
  if (clustering.restarts == 0) throw std::invalid_argument("clustering restarts must be at least 1");
  if (clustering.clusters > 9) throw std::invalid_argument("at most 9 clusters are supported");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must lie strictly between 0 and 1");
  }
  if (input.size() == 0 || target.size() == 0 || input.end > target.begin || input.begin > input.end ||
      target.begin > target.end) {
    throw std::invalid_argument("window ranges must be non-empty and ordered");
  }
  if (input.end != target.begin) throw std::invalid_argument("input and output windows must be contiguous");
  baseline_train.validate();
  cm_train.validate();
  pso.validate();
}

std::vector<std::string> cluster_names(std::size_t n) {
  if (n == 4) return {"residential", "agricultural", "industrial", "commercial"};
  std::vector<std::string> names;
  for (std::size_t k = 0; k < n; ++k) names.push_back("cluster" + std::to_string(k));
  return names;
}

namespace {

SupervisedDataset apply_scaler(const SupervisedDataset& raw, const Scaler& scaler) {
  SupervisedDataset out = raw;
  out.inputs = scaler.scale(raw.inputs, 0);
  out.targets = scaler.scale(raw.targets, raw.input_steps());
  out.scaler = scaler;
  return out;
}

}  // namespace

PreparedData prepare_data(const RawSeriesTable& table, const ExperimentConfig& cfg) {
  cfg.validate();
  table.validate();
  const std::size_t n = cfg.clustering.clusters;
  if (table.days() < n) {
    throw std::invalid_argument("cannot form " + std::to_string(n) + " clusters from " +
                                std::to_string(table.days()) + " days");
  }
  const SupervisedDataset windows = make_windows(table, cfg.input, cfg.target);

  PreparedData out;
  out.clustering = order_by_peak(kmeans_fit(table.values, cfg.clustering, cfg.data_seed));
  const auto names = cluster_names(n);

  std::vector<SupervisedDataset> raw_train(n), raw_test(n);
  SupervisedDataset merged_raw;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<std::size_t> days;
    for (std::size_t d = 0; d < table.days(); ++d) {
      if (out.clustering.assignments[d] == j) days.push_back(d);
    }
    if (days.size() < 2) {
      throw std::runtime_error("cluster " + names[j] + " has " + std::to_string(days.size()) +
                               " days; at least 2 are needed to split");
    }
    const auto parts = split(windows.subset(days), cfg.train_fraction, mix_seed(cfg.data_seed, 100 + j));
    if (parts.train.size() == 0 || parts.test.size() == 0) {
      throw std::runtime_error("cluster " + names[j] + " is too small for a train/test split");
    }
    ClusterTask task;
    task.name = names[j];
    for (auto r : parts.train_rows) task.train_days.push_back(days[r]);
    for (auto r : parts.test_rows) task.test_days.push_back(days[r]);
    const auto scaled = fit_apply_scaler(parts.train, parts.test, cfg.scale_mode);
    task.train = scaled.train;
    task.test = scaled.test;
    raw_train[j] = parts.train;
    raw_test[j] = parts.test;
    merged_raw = merged_raw.concat(parts.train);
    out.clusters.push_back(std::move(task));
  }

  const auto merged = fit_apply_scaler(merged_raw, merged_raw, cfg.scale_mode);
  out.merged_train = merged.train;
  out.merged_scaler = merged.scaler;
  for (std::size_t j = 0; j < n; ++j) {
    out.clusters[j].baseline_train = apply_scaler(raw_train[j], merged.scaler);
    out.clusters[j].baseline_test = apply_scaler(raw_test[j], merged.scaler);
  }
  return out;
}

namespace {

PredictionRecord make_predictions(const std::string& model, const std::string& cluster,
                                  const SupervisedDataset& data, const TaskEvaluator& evaluator,
                                  const ParameterSet& params) {
  PredictionRecord rec;
  rec.model = model;
  rec.cluster = cluster;
  rec.day_ids = data.day_ids;
  rec.slot_labels = data.target_labels;
  rec.y_kw = data.targets_kw();
  rec.y_hat_kw = evaluator.predict_kw(params);
  return rec;
}

std::string model_name(CellKind kind, const char* prefix = "", const char* suffix = "") {
  return std::string(prefix) + std::string(to_string(kind)) + suffix;
}

}  // namespace

BaselineOutcome run_baseline(CellKind kind, const PreparedData& data, const ExperimentConfig& cfg,
                             std::uint64_t seed) {
  TrainConfig tc = cfg.baseline_train;
  tc.seed = seed;
  BaselineOutcome out;
  try {
    out.params = train(kind, data.merged_train, tc).params;
  } catch (const DivergenceError& e) {
    throw DivergenceError(model_name(kind) + " baseline, seed " + std::to_string(seed) + ": " + e.what());
  }
  const std::string model = model_name(kind);
  for (const auto& task : data.clusters) {
    const TaskEvaluator train_eval(task.baseline_train);
    const TaskEvaluator test_eval(task.baseline_test);
    out.rows.push_back({model, kind, task.name, seed, train_eval.rmse_kw(out.params), test_eval.rmse_kw(out.params)});
    out.predictions.push_back(make_predictions(model, task.name, task.baseline_test, test_eval, out.params));
  }
  return out;
}

CmOutcome run_cmdnn(CellKind kind, const PreparedData& data, const ExperimentConfig& cfg,
                    std::uint64_t seed) {
  const std::size_t n = data.clusters.size();
  const std::string intra = model_name(kind, "CM-", "-intra");
  const std::string final_model = model_name(kind, "CM-");
  CmOutcome out;

  for (std::size_t j = 0; j < n; ++j) {
    const auto& task = data.clusters[j];
    TrainConfig tc = cfg.cm_train;
    tc.seed = mix_seed(seed, j);
    try {
      out.trained.push_back(train(kind, task.train, tc).params);
    } catch (const DivergenceError& e) {
      throw DivergenceError(intra + " " + task.name + ", seed " + std::to_string(seed) + ": " + e.what());
    }
    const TaskEvaluator train_eval(task.train);
    const TaskEvaluator test_eval(task.test);
    out.intra_rows.push_back(
        {intra, kind, task.name, seed, train_eval.rmse_kw(out.trained[j]), test_eval.rmse_kw(out.trained[j])});
    out.predictions.push_back(make_predictions(intra, task.name, task.test, test_eval, out.trained[j]));
  }

  for (std::size_t j = 0; j < n; ++j) {
    const auto& task = data.clusters[j];
    PsoConfig pc = cfg.pso;
    pc.seed = mix_seed(seed, 1000 + j);
    auto result = run_transfer(j, out.trained, task.train, pc);
    const TaskEvaluator test_eval(task.test);
    out.transfer_rows.push_back(
        {final_model, kind, task.name, seed, result.final_rmse, test_eval.rmse_kw(result.params)});
    out.predictions.push_back(make_predictions(final_model, task.name, task.test, test_eval, result.params));
    out.transfers.push_back({kind, task.name, seed, std::move(result)});
  }
  return out;
}

std::vector<ReportRow> aggregate(const std::vector<RunRow>& rows) {
  struct Group {
    std::string model, cluster;
    std::vector<double> train, test;
  };
  std::vector<Group> groups;
  for (const auto& r : rows) {
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const Group& g) { return g.model == r.model && g.cluster == r.cluster; });
    if (it == groups.end()) {
      groups.push_back({r.model, r.cluster, {}, {}});
      it = groups.end() - 1;
    }
    it->train.push_back(r.train_rmse);
    it->test.push_back(r.test_rmse);
  }

  auto stats = [](const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::pair{mean, std::sqrt(ss / static_cast<double>(v.size()))};
  };

  std::vector<ReportRow> out;
  for (const auto& g : groups) {
    for (const char* split_name : {"train", "test"}) {
      const auto& values = std::string(split_name) == "train" ? g.train : g.test;
      const auto [mean, sd] = stats(values);
      out.push_back({g.model, g.cluster, split_name, mean, sd, values.size(), false});
    }
  }

  auto is_final = [](const ReportRow& r) {
    return !(r.model.size() >= 6 && r.model.compare(r.model.size() - 6, 6, "-intra") == 0);
  };
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].split != "test" || !is_final(out[i])) continue;
    bool lowest = true;
    for (std::size_t k = 0; k < out.size(); ++k) {
      const auto& o = out[k];
      if (o.split == "test" && is_final(o) && o.cluster == out[i].cluster) {
        // Earlier rows win ties.
        if (o.mean_rmse < out[i].mean_rmse || (o.mean_rmse == out[i].mean_rmse && k < i)) lowest = false;
      }
    }
    out[i].best = lowest;
  }
  return out;
}

ExperimentResult run_experiment(const RawSeriesTable& table, const ExperimentConfig& cfg, const Logger& log) {
  std::mutex log_mutex;
  auto say = [&](const std::string& line) {
    if (!log) return;
    std::lock_guard lock(log_mutex);
    log(line);
  };

  const PreparedData data = prepare_data(table, cfg);
  {
    std::string sizes;
    for (const auto& c : data.clusters) {
      sizes += " " + c.name + "=" + std::to_string(c.train_days.size()) + "/" + std::to_string(c.test_days.size());
    }
    say("clusters (train/test):" + sizes);
  }

  struct Job {
    CellKind kind;
    std::uint64_t seed;
    BaselineOutcome baseline;
    CmOutcome cm;
    double seconds = 0.0;
    std::exception_ptr error;
  };
  std::vector<Job> jobs;
  for (auto kind : cfg.kinds) {
    for (auto seed : cfg.seeds) jobs.push_back({kind, seed, {}, {}, 0.0, nullptr});
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      auto& job = jobs[i];
      const auto start = std::chrono::steady_clock::now();
      try {
        job.baseline = run_baseline(job.kind, data, cfg, job.seed);
        job.cm = run_cmdnn(job.kind, data, cfg, job.seed);
      } catch (...) {
        job.error = std::current_exception();
      }
      job.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      say(std::string(to_string(job.kind)) + " seed " + std::to_string(job.seed) +
          (job.error ? " failed" : " done") + " in " + std::to_string(job.seconds) + " s");
    }
  };
  std::size_t threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, jobs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  ExperimentResult result;
  result.clustering = data.clustering;
  for (const auto& c : data.clusters) result.cluster_names.push_back(c.name);
  for (auto& job : jobs) {
    if (job.error) std::rethrow_exception(job.error);
    auto append = [&](const std::vector<RunRow>& rows) { result.rows.insert(result.rows.end(), rows.begin(), rows.end()); };
    append(job.baseline.rows);
    append(job.cm.intra_rows);
    append(job.cm.transfer_rows);
    for (auto& t : job.cm.transfers) result.transfers.push_back(std::move(t));
    if (job.seed == cfg.seeds.front()) {
      for (auto& p : job.baseline.predictions) result.predictions.push_back(std::move(p));
      for (auto& p : job.cm.predictions) result.predictions.push_back(std::move(p));
    }
    result.timings.emplace_back(std::string(to_string(job.kind)) + "/seed" + std::to_string(job.seed), job.seconds);
  }
  result.report = aggregate(result.rows);
  return result;
}

}  // namespace cmdnn
