#include <json.hpp>

#include <cctype>
#include <charconv>
#include <sstream>
#include <stdexcept>

#include "cmdnn/harness.hpp"
#include "cmdnn/io.hpp"

namespace cmdnn {

namespace {

using io::format_double;

std::string file_safe(std::string s) {
  for (char& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) c = '_';
  }
  return s;
}

}  // namespace

std::string raw_runs_csv(const std::vector<RunRow>& rows) {
  std::string out = "model,kind,cluster,seed,train_rmse,test_rmse\n";
  for (const auto& r : rows) {
    out += r.model + "," + std::string(to_string(r.kind)) + "," + r.cluster + "," + std::to_string(r.seed) + "," +
           format_double(r.train_rmse) + "," + format_double(r.test_rmse) + "\n";
  }
  return out;
}

std::vector<RunRow> parse_raw_runs_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || io::split_csv_line(line) !=
                                     std::vector<std::string>{"model", "kind", "cluster", "seed", "train_rmse",
                                                              "test_rmse"}) {
    throw std::runtime_error("raw runs: unexpected header");
  }
  std::vector<RunRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = io::split_csv_line(line);
    const std::string where = "raw runs line " + std::to_string(line_no);
    if (f.size() != 6) throw std::runtime_error(where + ": expected 6 fields");
    RunRow r;
    r.model = f[0];
    try {
      r.kind = parse_cell_kind(f[1]);
    } catch (const std::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
    r.cluster = f[2];
    const auto [end, ec] = std::from_chars(f[3].data(), f[3].data() + f[3].size(), r.seed);
    if (ec != std::errc{} || end != f[3].data() + f[3].size()) throw std::runtime_error(where + ": bad seed");
    if (!io::parse_double(f[4], r.train_rmse) || !io::parse_double(f[5], r.test_rmse)) {
      throw std::runtime_error(where + ": bad RMSE value");
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw std::runtime_error("raw runs: no rows");
  return rows;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::string out = "model,cluster,split,mean_rmse,std_rmse,n_runs,best\n";
  for (const auto& r : rows) {
    out += r.model + "," + r.cluster + "," + r.split + "," + format_double(r.mean_rmse) + "," +
           format_double(r.std_rmse) + "," + std::to_string(r.runs) + "," + (r.best ? "1" : "0") + "\n";
  }
  return out;
}

std::string report_json(const std::vector<ReportRow>& rows) {
  nlohmann::ordered_json j;
  j["units"] = "kW";
  j["std"] = "population";
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"model", r.model},
                         {"cluster", r.cluster},
                         {"split", r.split},
                         {"mean_rmse", r.mean_rmse},
                         {"std_rmse", r.std_rmse},
                         {"n_runs", r.runs},
                         {"best", r.best}});
  }
  return j.dump(2) + "\n";
}

std::string predictions_csv(const PredictionRecord& rec) {
  std::string out = "day_id,slot,y,y_hat\n";
  for (std::size_t s = 0; s < rec.y_kw.rows(); ++s) {
    for (std::size_t t = 0; t < rec.y_kw.cols(); ++t) {
      const std::string slot = t < rec.slot_labels.size() ? rec.slot_labels[t] : std::to_string(t);
      out += rec.day_ids[s] + "," + slot + "," + format_double(rec.y_kw(s, t)) + "," +
             format_double(rec.y_hat_kw(s, t)) + "\n";
    }
  }
  return out;
}

std::string transfer_log_csv(const TransferResult& result) {
  std::string out = "generation,gbestval\n";
  for (std::size_t g = 0; g < result.trace.size(); ++g) {
    out += std::to_string(g) + "," + format_double(result.trace[g]) + "\n";
  }
  return out;
}

std::string transfer_solution_json(const TransferResult& result) {
  nlohmann::ordered_json j;
  j["mask"] = nlohmann::ordered_json::array();
  for (bool b : result.solution.mask) j["mask"].push_back(b ? 1 : 0);
  j["coefficients"] = result.solution.coefficients;
  j["improved"] = result.improved;
  j["initial_rmse"] = result.initial_rmse;
  j["final_rmse"] = result.final_rmse;
  return j.dump(2) + "\n";
}

void write_report(const std::vector<ReportRow>& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::write_file_atomic(dir / "report.csv", report_csv(report));
  io::write_file_atomic(dir / "report.json", report_json(report));
}

void write_experiment(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "transfer");
  io::write_file_atomic(dir / "raw_runs.csv", raw_runs_csv(result.rows));
  write_report(result.report, dir);

  std::string timings = "job,seconds\n";
  for (const auto& [job, seconds] : result.timings) timings += job + "," + format_double(seconds) + "\n";
  io::write_file_atomic(dir / "timings.csv", timings);

  for (const auto& p : result.predictions) {
    io::write_file_atomic(dir / ("predictions_" + file_safe(p.model) + "_" + file_safe(p.cluster) + ".csv"),
                          predictions_csv(p));
  }
  for (const auto& t : result.transfers) {
    const std::string stem = "transfer_" + std::string(to_string(t.kind)) + "_" + file_safe(t.cluster) + "_seed" +
                             std::to_string(t.seed);
    io::write_file_atomic(dir / "transfer" / (stem + ".csv"), transfer_log_csv(t.result));
    io::write_file_atomic(dir / "transfer" / (stem + ".json"), transfer_solution_json(t.result));
  }
}

}  // namespace cmdnn
