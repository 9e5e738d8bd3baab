#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cmdnn/clustering.hpp"
#include "cmdnn/dataset.hpp"
#include "cmdnn/predictor.hpp"
#include "cmdnn/transfer.hpp"

namespace cmdnn {

struct ExperimentConfig {
  std::vector<CellKind> kinds{CellKind::LSTM};
  KMeansConfig clustering;
  // Run seeds: model initialization, batch order and PSO streams.
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  // Drives clustering and the train/test split, shared by every run seed.
  std::uint64_t data_seed = 1;
  SlotRange input{0, 14};
  SlotRange target{14, 24};
  double train_fraction = 0.8;
  ScaleMode scale_mode = ScaleMode::Global;
  TrainConfig baseline_train{.max_iterations = 4500};
  TrainConfig cm_train{.max_iterations = 3000};
  PsoConfig pso;
  // 0 picks the hardware concurrency.
  std::size_t threads = 0;

  void validate() const;
};

struct ClusterTask {
  std::string name;
  std::vector<std::size_t> train_days;  // rows of the raw table
  std::vector<std::size_t> test_days;
  // Scaled with this cluster's own scaler.
  SupervisedDataset train;
  SupervisedDataset test;
  // The same rows scaled with the merged baseline's scaler.
  SupervisedDataset baseline_train;
  SupervisedDataset baseline_test;
};

struct PreparedData {
  ClusterModel clustering;  // ordered by ascending center peak
  std::vector<ClusterTask> clusters;
  SupervisedDataset merged_train;  // all clusters' train rows, merged scaler
  Scaler merged_scaler;
};

// Clusters the days, splits each cluster, and fits the per-cluster and merged
// scalers on training rows only.
PreparedData prepare_data(const RawSeriesTable& table, const ExperimentConfig& cfg);

// Heuristic names for clusters ordered by ascending peak: the four customer
// types when n = 4, otherwise "cluster<k>".
std::vector<std::string> cluster_names(std::size_t n);

struct RunRow {
  std::string model;  // "LSTM", "CM-LSTM-intra", "CM-LSTM"
  CellKind kind = CellKind::LSTM;
  std::string cluster;
  std::uint64_t seed = 0;
  double train_rmse = 0.0;  // kW
  double test_rmse = 0.0;   // kW

  bool operator==(const RunRow&) const = default;
};

struct PredictionRecord {
  std::string model;
  std::string cluster;
  std::vector<std::string> day_ids;
  std::vector<std::string> slot_labels;
  Matrix y_kw;
  Matrix y_hat_kw;
};

struct TransferRecord {
  CellKind kind = CellKind::LSTM;
  std::string cluster;
  std::uint64_t seed = 0;
  TransferResult result;
};

struct BaselineOutcome {
  std::vector<RunRow> rows;  // one per cluster
  ParameterSet params{CellKind::LSTM, 1};
  std::vector<PredictionRecord> predictions;
};

struct CmOutcome {
  std::vector<RunRow> intra_rows;
  std::vector<RunRow> transfer_rows;
  std::vector<ParameterSet> trained;
  std::vector<TransferRecord> transfers;
  std::vector<PredictionRecord> predictions;  // post-transfer
};

// One predictor on the merged training data, scored per cluster.
BaselineOutcome run_baseline(CellKind kind, const PreparedData& data, const ExperimentConfig& cfg,
                             std::uint64_t seed);

// Per-cluster intra-model training followed by transfer for every target.
CmOutcome run_cmdnn(CellKind kind, const PreparedData& data, const ExperimentConfig& cfg,
                    std::uint64_t seed);

struct ReportRow {
  std::string model;
  std::string cluster;
  std::string split;  // "train" or "test"
  double mean_rmse = 0.0;
  double std_rmse = 0.0;  // population
  std::size_t runs = 0;
  bool best = false;  // lowest test mean for the cluster among final models
};

// Mean and population std per (model, cluster, split), rows ordered by first
// appearance. "-intra" rows are reported but never marked best.
std::vector<ReportRow> aggregate(const std::vector<RunRow>& rows);

struct ExperimentResult {
  ClusterModel clustering;
  std::vector<std::string> cluster_names;
  std::vector<RunRow> rows;
  std::vector<ReportRow> report;
  std::vector<PredictionRecord> predictions;  // first seed only
  std::vector<TransferRecord> transfers;
  std::vector<std::pair<std::string, double>> timings;  // job, seconds
};

using Logger = std::function<void(const std::string&)>;

// Every (kind, seed) job runs baseline and CM; jobs may run on several
// threads, results are collected in kind-major, seed-minor order.
ExperimentResult run_experiment(const RawSeriesTable& table, const ExperimentConfig& cfg,
                                const Logger& log = {});

// CSV/JSON writers. All files are written atomically.
std::string raw_runs_csv(const std::vector<RunRow>& rows);
std::vector<RunRow> parse_raw_runs_csv(const std::string& text);
std::string report_csv(const std::vector<ReportRow>& rows);
std::string report_json(const std::vector<ReportRow>& rows);
std::string predictions_csv(const PredictionRecord& record);
std::string transfer_log_csv(const TransferResult& result);
std::string transfer_solution_json(const TransferResult& result);

void write_experiment(const ExperimentResult& result, const std::filesystem::path& dir);
void write_report(const std::vector<ReportRow>& report, const std::filesystem::path& dir);

}  // namespace cmdnn
