#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "cmdnn/clustering.hpp"
#include "cmdnn/commands.hpp"
#include "cmdnn/io.hpp"
#include "test_util.hpp"

using namespace cmdnn;
namespace fs = std::filesystem;

namespace {

// Small, fast experiment: ~1/100 of the benchmark day counts, tiny networks.
const char* kSmallConfig = R"({
  "seed": 5,
  "synthetic": {"clusters": [
    {"name": "residential", "amplitude_kw": 3, "peak_slot": 10.5, "width_slots": 3.6, "noise": 0.02, "days": 40},
    {"name": "agricultural", "amplitude_kw": 9, "peak_slot": 10.0, "width_slots": 4.2, "noise": 0.02, "days": 20},
    {"name": "industrial", "amplitude_kw": 28, "peak_slot": 11.0, "width_slots": 3.2, "noise": 0.02, "days": 12},
    {"name": "commercial", "amplitude_kw": 85, "peak_slot": 11.5, "width_slots": 2.8, "noise": 0.02, "days": 8}
  ]},
  "runs": 2,
  "baseline_train": {"hidden_units": 3, "max_iterations": 40, "eval_every": 20},
  "cm_train": {"hidden_units": 3, "max_iterations": 30, "eval_every": 10},
  "pso": {"particles": 4, "generations": 3},
  "threads": 1
})";

struct Cli {
  int code;
  std::string out, err;
};

Cli cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path write_config(const std::string& name, const std::string& text) {
  const auto path = test_util::scratch_dir("cli") / name;
  io::write_file_atomic(path, text);
  return path;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = test_util::scratch_dir("cli") / name;
  fs::remove_all(dir);
  return dir;
}

std::vector<std::vector<std::string>> read_rows(const fs::path& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) rows.push_back(io::split_csv_line(line));
  return rows;
}

}  // namespace

TEST_CASE("config parsing rejects unknown keys at every level") {
  CHECK_NOTHROW(parse_config("{}"));
  CHECK_THROWS_AS(parse_config(R"({"sed": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"pso": {"particle": 3}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"synthetic": {"clusters": [{"amp": 1}]}})"), ConfigError);
  try {
    parse_config(R"({"cm_train": {"hidden": 3}})");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cm_train.hidden") != std::string::npos);
  }
}

TEST_CASE("config parsing range-checks values") {
  CHECK_THROWS_AS(parse_config(R"({"split": {"train_fraction": 1.5}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"split": {"train_fraction": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"pso": {"particles": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"pso": {"v_max": -1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"cm_train": {"learning_rate": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"cm_train": {"batch_size": -3}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"models": ["lstm", "cnn"]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"models": []})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"seeds": [1, 2], "runs": 2})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"window": {"input_end": 12}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"window": {"output_end": 30}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"data": {"csv": "/definitely/not/here.csv"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"clustering": {"init": "random"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
}

TEST_CASE("config defaults follow the experimental protocol") {
  const auto cfg = parse_config("{}");
  CHECK(cfg.experiment.seeds.size() == 10);
  CHECK(cfg.experiment.baseline_train.max_iterations == 4500);
  CHECK(cfg.experiment.cm_train.max_iterations == 3000);
  CHECK(cfg.experiment.cm_train.hidden_units == 10);
  CHECK(cfg.experiment.pso.particles == 15);
  CHECK(cfg.experiment.pso.generations == 100);
  CHECK(cfg.experiment.clustering.clusters == 4);
  CHECK(cfg.experiment.train_fraction == 0.8);
}

TEST_CASE("effective config JSON parses back to the same configuration") {
  const auto cfg = parse_config(kSmallConfig);
  const auto text = config_to_json(cfg);
  CHECK(config_to_json(parse_config(text)) == text);
}

TEST_CASE("quick preset shrinks budgets by ten") {
  auto cfg = parse_config("{}");
  apply_quick(cfg);
  CHECK(cfg.experiment.baseline_train.max_iterations == 450);
  CHECK(cfg.experiment.cm_train.max_iterations == 300);
  CHECK(cfg.experiment.pso.generations == 10);
  CHECK(cfg.synthetic.clusters[0].days == 182);
}

TEST_CASE("cli exit codes") {
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"run", "--config", "/no/such/config.json"}).code == 1);
  const auto bad = write_config("bad.json", R"({"split": {"train_fraction": 2}})");
  const auto r = cli({"run", "--config", bad.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("train_fraction") != std::string::npos);
  CHECK(cli({"run", "--config", bad.string(), "--models", "cnn"}).code == 1);
  CHECK(cli({"report", "--out", fresh_dir("empty_report").string()}).code == 2);

  // Fewer days than clusters is a runtime error.
  const auto dir = fresh_dir("tiny_data");
  fs::create_directories(dir);
  io::write_file_atomic(dir / "tiny.csv", "day,a,b\nd1,1,2\nd2,3,4\n");
  const auto tiny = write_config("tiny.json", R"({"data": {"csv": ")" + (dir / "tiny.csv").string() + R"("}, "window": {"input_begin": 0, "input_end": 1, "output_begin": 1, "output_end": 2}})");
  CHECK(cli({"cluster", "--config", tiny.string()}).code == 2);
}

TEST_CASE("synth is deterministic and matches the configured counts") {
  const auto config = write_config("small.json", kSmallConfig);
  const auto a = fresh_dir("synth_a"), b = fresh_dir("synth_b");
  REQUIRE(cli({"synth", "--config", config.string(), "--out", a.string()}).code == 0);
  REQUIRE(cli({"synth", "--config", config.string(), "--out", b.string()}).code == 0);
  CHECK(io::read_file(a / "synthetic.csv") == io::read_file(b / "synthetic.csv"));
  CHECK(io::read_file(a / "labels.csv") == io::read_file(b / "labels.csv"));

  const auto labels = read_rows(a / "labels.csv");
  std::map<std::string, int> counts;
  for (const auto& r : labels) ++counts[r[2]];
  CHECK(counts["residential"] == 40);
  CHECK(counts["agricultural"] == 20);
  CHECK(counts["industrial"] == 12);
  CHECK(counts["commercial"] == 8);

  const auto cfg = parse_config(kSmallConfig);
  const auto expected = generate_synthetic(cfg.synthetic, cfg.seed).table;
  const auto loaded = load_csv(a / "synthetic.csv");
  CHECK(loaded.values == expected.values);
  CHECK(loaded.day_ids == expected.day_ids);
  CHECK(loaded.slot_labels == expected.slot_labels);
}

TEST_CASE("cluster recovers the synthetic types from files") {
  const auto config = write_config("small.json", kSmallConfig);
  const auto dir = fresh_dir("cluster");
  REQUIRE(cli({"synth", "--config", config.string(), "--out", dir.string()}).code == 0);
  const auto from_files = write_config(
      "from_files.json", R"({"data": {"csv": ")" + (dir / "synthetic.csv").string() + R"(", "labels": ")" +
                             (dir / "labels.csv").string() + R"("}})");
  const auto r = cli({"cluster", "--config", from_files.string(), "--out", dir.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("agreement with known labels: 1\n") != std::string::npos);

  const auto assignments = read_rows(dir / "assignments.csv");
  const auto labels = read_rows(dir / "labels.csv");
  REQUIRE(assignments.size() == 80);
  std::vector<std::size_t> got, truth;
  for (std::size_t i = 0; i < 80; ++i) {
    CHECK(assignments[i][0] == labels[i][0]);
    got.push_back(std::stoul(assignments[i][1]));
    truth.push_back(std::stoul(labels[i][1]));
  }
  CHECK(permutation_agreement(got, truth, 4) == 1.0);
  CHECK(read_rows(dir / "centers.csv").size() == 4);

  const auto one = write_config("one.json", R"({"clustering": {"clusters": 1}, "synthetic": {"clusters": [{"days": 7}]}})");
  const auto one_dir = fresh_dir("cluster_one");
  REQUIRE(cli({"cluster", "--config", one.string(), "--out", one_dir.string()}).code == 0);
  const auto single = read_rows(one_dir / "assignments.csv");
  CHECK(single.size() == 7);
  for (const auto& r : single) CHECK(r[1] == "0");
}

TEST_CASE("run writes one raw row per model and cluster for one seed, and report rebuilds it") {
  const auto config = write_config("small.json", kSmallConfig);
  const auto dir = fresh_dir("run_one_seed");
  const auto r = cli({"run", "--config", config.string(), "--out", dir.string(), "--seeds", "1", "--models", "gru"});
  REQUIRE(r.code == 0);
  const auto rows = read_rows(dir / "raw_runs.csv");
  CHECK(rows.size() == 3 * 4);
  std::map<std::string, int> per_key;
  for (const auto& row : rows) {
    ++per_key[row[0] + "/" + row[2]];
    CHECK(row[3] == "5");
  }
  for (const auto& [key, n] : per_key) CHECK_MESSAGE(n == 1, key);
  CHECK(per_key.count("CM-GRU/commercial") == 1);

  const auto saved = parse_config(io::read_file(dir / "config.json"));
  CHECK(saved.experiment.seeds == std::vector<std::uint64_t>{5});

  const auto report = io::read_file(dir / "report.csv");
  fs::remove(dir / "report.csv");
  fs::remove(dir / "report.json");
  REQUIRE(cli({"report", "--out", dir.string()}).code == 0);
  CHECK(io::read_file(dir / "report.csv") == report);
}

TEST_CASE("run with --mgen 0 reports CM equal to the intra-model stage") {
  const auto config = write_config("small.json", kSmallConfig);
  const auto dir = fresh_dir("run_mgen0");
  REQUIRE(cli({"run", "--config", config.string(), "--out", dir.string(), "--models", "lstm", "--mgen", "0"}).code == 0);
  std::map<std::string, std::vector<std::string>> by_key;
  for (const auto& row : read_rows(dir / "report.csv")) by_key[row[0] + "/" + row[1] + "/" + row[2]] = row;
  std::size_t compared = 0;
  for (const auto& [key, row] : by_key) {
    if (row[0] != "CM-LSTM") continue;
    const auto& intra = by_key.at("CM-LSTM-intra/" + row[1] + "/" + row[2]);
    CHECK(row[3] == intra[3]);
    CHECK(row[4] == intra[4]);
    ++compared;
  }
  CHECK(compared == 8);
}

TEST_CASE("run is idempotent with respect to its output directory") {
  const auto config = write_config("small.json", kSmallConfig);
  const auto dir = fresh_dir("run_twice");
  REQUIRE(cli({"run", "--config", config.string(), "--out", dir.string(), "--models", "rnn"}).code == 0);
  const auto first = io::read_file(dir / "raw_runs.csv");
  const auto first_report = io::read_file(dir / "report.csv");
  const auto first_pred = io::read_file(dir / "predictions_CM-RNN_industrial.csv");
  REQUIRE(cli({"run", "--config", config.string(), "--out", dir.string(), "--models", "rnn"}).code == 0);
  CHECK(io::read_file(dir / "raw_runs.csv") == first);
  CHECK(io::read_file(dir / "report.csv") == first_report);
  CHECK(io::read_file(dir / "predictions_CM-RNN_industrial.csv") == first_pred);
}
