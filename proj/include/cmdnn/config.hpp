#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "cmdnn/dataset.hpp"
#include "cmdnn/harness.hpp"

namespace cmdnn {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // Seeds the synthetic generator, clustering and splits; run seeds default
  // to seed, seed + 1, ...
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "out";
  // When unset, data comes from `synthetic`.
  std::optional<std::filesystem::path> data_csv;
  // Optional ground-truth labels (CSV: day_id,label) used only for reporting
  // clustering agreement.
  std::optional<std::filesystem::path> labels_csv;
  SyntheticSpec synthetic = SyntheticSpec::customer_types();
  ExperimentConfig experiment;
  // Run count used when no explicit seed list was given.
  std::size_t runs = 10;
  bool explicit_seeds = false;

  // Propagates `seed` into the experiment (data seed, derived run seeds).
  void sync_seeds();

  // Range checks and path existence; throws ConfigError.
  void validate() const;
};

// Every key is optional; unknown keys anywhere are rejected. Relative paths
// resolve against `base_dir`.
RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

// Effective configuration with every field spelled out; parse_config of the
// result gives back the same configuration.
std::string config_to_json(const RunConfig& cfg);

// Shrinks day counts, training iterations and PSO generations by 10x.
void apply_quick(RunConfig& cfg);

// "lstm,gru" style list.
std::vector<CellKind> parse_model_list(const std::string& text);

}  // namespace cmdnn
