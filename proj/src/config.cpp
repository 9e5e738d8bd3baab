#include "cmdnn/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "cmdnn/io.hpp"

namespace cmdnn {

namespace {

using nlohmann::json;

// Reads the keys of one JSON object and rejects anything left unread.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(label() + " must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& at(const std::string& key) { return j_.at(key); }

  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    if (!at(key).is_number()) throw ConfigError(path(key) + " must be a number");
    out = at(key).get<double>();
    if (!std::isfinite(out)) throw ConfigError(path(key) + " must be finite");
  }

  template <class Int>
  void integer(const std::string& key, Int& out) {
    if (!has(key)) return;
    const auto& v = at(key);
    if (v.is_number_unsigned()) {
      const auto u = v.get<std::uint64_t>();
      if (u > std::numeric_limits<Int>::max()) throw ConfigError(path(key) + " is out of range");
      out = static_cast<Int>(u);
      return;
    }
    if (v.is_number_integer()) {
      const auto s = v.get<std::int64_t>();
      if constexpr (std::is_unsigned_v<Int>) {
        if (s < 0) throw ConfigError(path(key) + " must be non-negative");
      }
      out = static_cast<Int>(s);
      return;
    }
    throw ConfigError(path(key) + " must be an integer");
  }

  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    if (!at(key).is_boolean()) throw ConfigError(path(key) + " must be true or false");
    out = at(key).get<bool>();
  }

  void string(const std::string& key, std::string& out) {
    if (!has(key)) return;
    if (!at(key).is_string()) throw ConfigError(path(key) + " must be a string");
    out = at(key).get<std::string>();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + path(key) + "'");
    }
  }

 private:
  std::string label() const { return where_.empty() ? "config" : where_; }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void read_train(ObjectReader& parent, const std::string& key, TrainConfig& tc) {
  if (!parent.has(key)) return;
  ObjectReader r(parent.at(key), parent.path(key));
  r.integer("hidden_units", tc.hidden_units);
  r.integer("max_iterations", tc.max_iterations);
  r.number("learning_rate", tc.learning_rate);
  r.integer("batch_size", tc.batch_size);
  r.integer("eval_every", tc.eval_every);
  r.boolean("teacher_forcing", tc.teacher_forcing);
  r.finish();
}

void read_synthetic(ObjectReader& parent, SyntheticSpec& spec) {
  if (!parent.has("synthetic")) return;
  ObjectReader r(parent.at("synthetic"), "synthetic");
  r.integer("slots", spec.slots);
  r.integer("first_slot_minute", spec.first_slot_minute);
  r.number("day_jitter", spec.day_jitter);
  if (r.has("clusters")) {
    const auto& arr = r.at("clusters");
    if (!arr.is_array()) throw ConfigError("synthetic.clusters must be an array");
    spec.clusters.clear();
    for (std::size_t k = 0; k < arr.size(); ++k) {
      ObjectReader c(arr[k], "synthetic.clusters[" + std::to_string(k) + "]");
      ClusterProfile p;
      p.name = "type" + std::to_string(k);
      c.string("name", p.name);
      c.number("amplitude_kw", p.amplitude_kw);
      c.number("peak_slot", p.peak_slot);
      c.number("width_slots", p.width_slots);
      c.number("noise", p.noise);
      c.integer("days", p.days);
      c.finish();
      spec.clusters.push_back(p);
    }
  }
  r.finish();
}

void read_window(ObjectReader& parent, ExperimentConfig& e) {
  if (!parent.has("window")) return;
  ObjectReader r(parent.at("window"), "window");
  r.integer("input_begin", e.input.begin);
  r.integer("input_end", e.input.end);
  r.integer("output_begin", e.target.begin);
  r.integer("output_end", e.target.end);
  if (r.has("scaling")) {
    std::string mode;
    r.string("scaling", mode);
    if (mode == "global") e.scale_mode = ScaleMode::Global;
    else if (mode == "per_slot") e.scale_mode = ScaleMode::PerSlot;
    else throw ConfigError("window.scaling must be \"global\" or \"per_slot\"");
  }
  r.finish();
}

void read_clustering(ObjectReader& parent, KMeansConfig& k) {
  if (!parent.has("clustering")) return;
  ObjectReader r(parent.at("clustering"), "clustering");
  r.integer("clusters", k.clusters);
  r.integer("max_iterations", k.max_iterations);
  r.integer("restarts", k.restarts);
  if (r.has("init")) {
    std::string init;
    r.string("init", init);
    if (init == "uniform") k.init = CenterInit::Uniform;
    else if (init == "kmeans++") k.init = CenterInit::KMeansPlusPlus;
    else throw ConfigError("clustering.init must be \"uniform\" or \"kmeans++\"");
  }
  r.finish();
}

void read_pso(ObjectReader& parent, PsoConfig& p) {
  if (!parent.has("pso")) return;
  ObjectReader r(parent.at("pso"), "pso");
  r.integer("particles", p.particles);
  r.integer("generations", p.generations);
  r.number("inertia", p.inertia);
  r.number("c1", p.c1);
  r.number("c2", p.c2);
  r.number("v_max", p.v_max);
  r.number("u_max", p.u_max);
  r.finish();
}

}  // namespace

RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  ObjectReader r(j, "");
  r.integer("seed", cfg.seed);
  if (r.has("output_dir")) {
    std::string out;
    r.string("output_dir", out);
    cfg.output_dir = resolve(base_dir, out);
  }
  if (r.has("data")) {
    ObjectReader d(r.at("data"), "data");
    std::string path;
    if (d.has("csv")) {
      d.string("csv", path);
      cfg.data_csv = resolve(base_dir, path);
    }
    if (d.has("labels")) {
      d.string("labels", path);
      cfg.labels_csv = resolve(base_dir, path);
    }
    d.finish();
  }
  read_synthetic(r, cfg.synthetic);
  read_window(r, cfg.experiment);
  if (r.has("split")) {
    ObjectReader s(r.at("split"), "split");
    s.number("train_fraction", cfg.experiment.train_fraction);
    s.finish();
  }
  read_clustering(r, cfg.experiment.clustering);
  if (r.has("models")) {
    const auto& arr = r.at("models");
    if (!arr.is_array()) throw ConfigError("models must be an array of strings");
    cfg.experiment.kinds.clear();
    for (const auto& m : arr) {
      if (!m.is_string()) throw ConfigError("models must be an array of strings");
      try {
        cfg.experiment.kinds.push_back(parse_cell_kind(m.get<std::string>()));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("models: ") + e.what());
      }
    }
  }
  bool explicit_seeds = false;
  if (r.has("seeds")) {
    const auto& arr = r.at("seeds");
    if (!arr.is_array()) throw ConfigError("seeds must be an array of non-negative integers");
    cfg.experiment.seeds.clear();
    for (const auto& s : arr) {
      if (!s.is_number_unsigned()) throw ConfigError("seeds must be an array of non-negative integers");
      cfg.experiment.seeds.push_back(s.get<std::uint64_t>());
    }
    explicit_seeds = true;
  }
  r.integer("runs", cfg.runs);
  if (explicit_seeds && j.contains("runs")) throw ConfigError("give either seeds or runs, not both");
  cfg.explicit_seeds = explicit_seeds;
  read_train(r, "baseline_train", cfg.experiment.baseline_train);
  read_train(r, "cm_train", cfg.experiment.cm_train);
  read_pso(r, cfg.experiment.pso);
  r.integer("threads", cfg.experiment.threads);
  r.finish();

  cfg.sync_seeds();
  cfg.validate();
  return cfg;
}

void RunConfig::sync_seeds() {
  experiment.data_seed = seed;
  if (!explicit_seeds) {
    experiment.seeds.clear();
    for (std::size_t i = 0; i < runs; ++i) experiment.seeds.push_back(seed + i);
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.parent_path());
}

void RunConfig::validate() const {
  try {
    experiment.validate();
    if (!data_csv) {
      synthetic.validate();
      if (experiment.target.end > synthetic.slots) {
        throw std::invalid_argument("output window ends after the last synthetic slot");
      }
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (data_csv && !std::filesystem::exists(*data_csv)) {
    throw ConfigError("data file " + data_csv->string() + " does not exist");
  }
  if (labels_csv && !std::filesystem::exists(*labels_csv)) {
    throw ConfigError("labels file " + labels_csv->string() + " does not exist");
  }
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

std::string config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir.string();
  if (cfg.data_csv || cfg.labels_csv) {
    j["data"] = nlohmann::ordered_json::object();
    if (cfg.data_csv) j["data"]["csv"] = cfg.data_csv->string();
    if (cfg.labels_csv) j["data"]["labels"] = cfg.labels_csv->string();
  }
  auto& s = j["synthetic"];
  s["slots"] = cfg.synthetic.slots;
  s["first_slot_minute"] = cfg.synthetic.first_slot_minute;
  s["day_jitter"] = cfg.synthetic.day_jitter;
  s["clusters"] = nlohmann::ordered_json::array();
  for (const auto& c : cfg.synthetic.clusters) {
    s["clusters"].push_back({{"name", c.name},
                             {"amplitude_kw", c.amplitude_kw},
                             {"peak_slot", c.peak_slot},
                             {"width_slots", c.width_slots},
                             {"noise", c.noise},
                             {"days", c.days}});
  }
  const auto& e = cfg.experiment;
  j["window"] = {{"input_begin", e.input.begin},
                 {"input_end", e.input.end},
                 {"output_begin", e.target.begin},
                 {"output_end", e.target.end},
                 {"scaling", e.scale_mode == ScaleMode::Global ? "global" : "per_slot"}};
  j["split"] = {{"train_fraction", e.train_fraction}};
  j["clustering"] = {{"clusters", e.clustering.clusters},
                     {"max_iterations", e.clustering.max_iterations},
                     {"init", e.clustering.init == CenterInit::Uniform ? "uniform" : "kmeans++"},
                     {"restarts", e.clustering.restarts}};
  j["models"] = nlohmann::ordered_json::array();
  for (auto k : e.kinds) j["models"].push_back(std::string(to_string(k)));
  j["seeds"] = e.seeds;
  auto train_json = [](const TrainConfig& t) {
    return nlohmann::ordered_json{{"hidden_units", t.hidden_units},     {"max_iterations", t.max_iterations},
                                  {"learning_rate", t.learning_rate},   {"batch_size", t.batch_size},
                                  {"eval_every", t.eval_every},         {"teacher_forcing", t.teacher_forcing}};
  };
  j["baseline_train"] = train_json(e.baseline_train);
  j["cm_train"] = train_json(e.cm_train);
  j["pso"] = {{"particles", e.pso.particles}, {"generations", e.pso.generations},
              {"inertia", e.pso.inertia},     {"c1", e.pso.c1},
              {"c2", e.pso.c2},               {"v_max", e.pso.v_max},
              {"u_max", e.pso.u_max}};
  j["threads"] = e.threads;
  return j.dump(2) + "\n";
}

void apply_quick(RunConfig& cfg) {
  auto shrink = [](std::size_t v) { return std::max<std::size_t>(1, (v + 5) / 10); };
  for (auto& c : cfg.synthetic.clusters) c.days = std::max<std::size_t>(5, shrink(c.days));
  auto& e = cfg.experiment;
  e.baseline_train.max_iterations = shrink(e.baseline_train.max_iterations);
  e.cm_train.max_iterations = shrink(e.cm_train.max_iterations);
  e.pso.generations = shrink(e.pso.generations);
}

std::vector<CellKind> parse_model_list(const std::string& text) {
  std::vector<CellKind> kinds;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    try {
      kinds.push_back(parse_cell_kind(item));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("--models: ") + e.what());
    }
  }
  if (kinds.empty()) throw ConfigError("--models needs at least one model");
  return kinds;
}

}  // namespace cmdnn
