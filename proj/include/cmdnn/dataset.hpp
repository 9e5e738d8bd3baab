#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmdnn/matrix.hpp"

namespace cmdnn {

// N days x M half-hour slots of PV generation in kW.
struct RawSeriesTable {
  Matrix values;
  std::vector<std::string> slot_labels;
  std::vector<std::string> day_ids;

  std::size_t days() const { return values.rows(); }
  std::size_t slots() const { return values.cols(); }

  // Throws std::invalid_argument on shape mismatch, M < 2 or non-finite values.
  void validate() const;

  RawSeriesTable select_days(std::span<const std::size_t> rows) const;
};

// Half-open slot interval [begin, end).
struct SlotRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
};

enum class ScaleMode { Global, PerSlot };

// Min-max map to [0, 1]. Columns index the concatenation [inputs | targets],
// which matters only in PerSlot mode. A flat statistic (max == min) maps
// every value to 0.5 and inverts back to min.
class Scaler {
 public:
  Scaler() = default;
  Scaler(ScaleMode mode, std::vector<double> minimum, std::vector<double> maximum);

  ScaleMode mode() const { return mode_; }
  const std::vector<double>& minimum() const { return min_; }
  const std::vector<double>& maximum() const { return max_; }

  double scale(double value, std::size_t column = 0) const;
  double unscale(double value, std::size_t column = 0) const;

  // `column_offset` is 0 for inputs and T_in for targets.
  Matrix scale(const Matrix& m, std::size_t column_offset) const;
  Matrix unscale(const Matrix& m, std::size_t column_offset) const;

  bool operator==(const Scaler&) const = default;

 private:
  std::size_t stat_index(std::size_t column) const;

  ScaleMode mode_ = ScaleMode::Global;
  std::vector<double> min_{0.0};
  std::vector<double> max_{1.0};
};

// One (input window, target window) pair per day.
struct SupervisedDataset {
  Matrix inputs;
  Matrix targets;
  std::vector<std::string> day_ids;
  std::vector<std::string> target_labels;
  std::optional<Scaler> scaler;

  std::size_t size() const { return inputs.rows(); }
  std::size_t input_steps() const { return inputs.cols(); }
  std::size_t output_steps() const { return targets.cols(); }

  SupervisedDataset subset(std::span<const std::size_t> rows) const;

  // Rows of `other` appended after this dataset's rows; scalers are dropped.
  SupervisedDataset concat(const SupervisedDataset& other) const;

  // Targets mapped back to kW through the attached scaler (identity if none).
  Matrix targets_kw() const;
};

struct ClusterProfile {
  std::string name;
  double amplitude_kw = 1.0;
  double peak_slot = 11.5;
  double width_slots = 3.5;
  // Per-slot Gaussian noise standard deviation as a fraction of amplitude.
  double noise = 0.0;
  std::size_t days = 1;
};

struct SyntheticSpec {
  std::vector<ClusterProfile> clusters;
  std::size_t slots = 24;
  int first_slot_minute = 7 * 60;
  // Each day's amplitude is multiplied by a factor drawn uniformly from
  // [1 - day_jitter, 1 + day_jitter] (cloud cover).
  double day_jitter = 0.0;

  // Four customer types (residential, agricultural, industrial, commercial)
  // with day counts proportional to the 14529/4513/1967/485 training split,
  // multiplied by `scale`. scale = 1/8 gives ~1/10 of the full 26,870 days.
  static SyntheticSpec customer_types(double scale = 0.125);

  void validate() const;
};

struct SyntheticData {
  RawSeriesTable table;
  std::vector<std::size_t> labels;
};

struct SplitResult {
  SupervisedDataset train;
  SupervisedDataset test;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

struct ScaledSplit {
  SupervisedDataset train;
  SupervisedDataset test;
  Scaler scaler;
};

// "HH:MM" labels every 30 minutes starting at `first_minute` past midnight.
std::vector<std::string> half_hour_labels(std::size_t count, int first_minute);

RawSeriesTable load_csv(const std::filesystem::path& path);
void write_csv(const RawSeriesTable& table, const std::filesystem::path& path);

// Input and target ranges must be non-empty, in range and contiguous
// (input.end == target.begin) so every pair is a contiguous sub-row.
SupervisedDataset make_windows(const RawSeriesTable& table, SlotRange input, SlotRange target);

ScaledSplit fit_apply_scaler(const SupervisedDataset& train, const SupervisedDataset& test,
                             ScaleMode mode = ScaleMode::Global);

// Seeded shuffle, then the first floor(S * fraction) rows go to train. Row
// order inside each part follows the original dataset.
SplitResult split(const SupervisedDataset& dataset, double train_fraction, std::uint64_t seed);

// Bell-shaped diurnal profile value for one cluster at one slot, noise free.
double bell_profile(const ClusterProfile& profile, double slot);

SyntheticData generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace cmdnn
