#include "cmdnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cmdnn/io.hpp"
#include "cmdnn/random.hpp"

namespace cmdnn {

void RawSeriesTable::validate() const {
  if (slots() < 2) throw std::invalid_argument("table needs at least 2 slots");
  if (slot_labels.size() != slots()) {
    throw std::invalid_argument("slot label count does not match column count");
  }
  if (day_ids.size() != days()) throw std::invalid_argument("day id count does not match row count");
  for (std::size_t r = 0; r < days(); ++r) {
    for (std::size_t c = 0; c < slots(); ++c) {
      if (!std::isfinite(values(r, c))) {
        throw std::invalid_argument("non-finite value at day " + day_ids[r] + ", slot " +
                                    slot_labels[c]);
      }
    }
  }
}

RawSeriesTable RawSeriesTable::select_days(std::span<const std::size_t> rows) const {
  RawSeriesTable out;
  out.values = values.select_rows(rows);
  out.slot_labels = slot_labels;
  out.day_ids.reserve(rows.size());
  for (auto r : rows) out.day_ids.push_back(day_ids[r]);
  return out;
}

// ---------------------------------------------------------------------------
// Scaler

Scaler::Scaler(ScaleMode mode, std::vector<double> minimum, std::vector<double> maximum)
    : mode_(mode), min_(std::move(minimum)), max_(std::move(maximum)) {
  if (min_.empty() || min_.size() != max_.size()) {
    throw std::invalid_argument("scaler statistics must be non-empty and paired");
  }
  if (mode_ == ScaleMode::Global && min_.size() != 1) {
    throw std::invalid_argument("global scaler holds exactly one statistic");
  }
  for (std::size_t i = 0; i < min_.size(); ++i) {
    if (!(max_[i] >= min_[i])) throw std::invalid_argument("scaler max below min");
  }
}

std::size_t Scaler::stat_index(std::size_t column) const {
  if (mode_ == ScaleMode::Global) return 0;
  if (column >= min_.size()) throw std::out_of_range("scaler column out of range");
  return column;
}

double Scaler::scale(double value, std::size_t column) const {
  const auto i = stat_index(column);
  const double range = max_[i] - min_[i];
  if (range == 0.0) return 0.5;
  return (value - min_[i]) / range;
}

double Scaler::unscale(double value, std::size_t column) const {
  const auto i = stat_index(column);
  return min_[i] + value * (max_[i] - min_[i]);
}

Matrix Scaler::scale(const Matrix& m, std::size_t column_offset) const {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = scale(m(r, c), column_offset + c);
  }
  return out;
}

Matrix Scaler::unscale(const Matrix& m, std::size_t column_offset) const {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = unscale(m(r, c), column_offset + c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// SupervisedDataset

SupervisedDataset SupervisedDataset::subset(std::span<const std::size_t> rows) const {
  SupervisedDataset out;
  out.inputs = inputs.select_rows(rows);
  out.targets = targets.select_rows(rows);
  out.day_ids.reserve(rows.size());
  for (auto r : rows) out.day_ids.push_back(day_ids[r]);
  out.target_labels = target_labels;
  out.scaler = scaler;
  return out;
}

SupervisedDataset SupervisedDataset::concat(const SupervisedDataset& other) const {
  if (size() == 0) {
    SupervisedDataset out = other;
    out.scaler.reset();
    return out;
  }
  if (other.input_steps() != input_steps() || other.output_steps() != output_steps()) {
    throw std::invalid_argument("cannot concatenate datasets with different window sizes");
  }
  SupervisedDataset out;
  auto stack = [](const Matrix& a, const Matrix& b) {
    std::vector<double> data = a.data();
    data.insert(data.end(), b.data().begin(), b.data().end());
    return Matrix(a.rows() + b.rows(), a.cols(), std::move(data));
  };
  out.inputs = stack(inputs, other.inputs);
  out.targets = stack(targets, other.targets);
  out.day_ids = day_ids;
  out.day_ids.insert(out.day_ids.end(), other.day_ids.begin(), other.day_ids.end());
  out.target_labels = target_labels;
  return out;
}

Matrix SupervisedDataset::targets_kw() const {
  if (!scaler) return targets;
  return scaler->unscale(targets, input_steps());
}

// ---------------------------------------------------------------------------
// CSV

std::vector<std::string> half_hour_labels(std::size_t count, int first_minute) {
  std::vector<std::string> labels;
  labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int minute = (first_minute + 30 * static_cast<int>(i)) % (24 * 60);
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%02d:%02d", minute / 60, minute % 60);
    labels.emplace_back(buf);
  }
  return labels;
}

RawSeriesTable load_csv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("missing file: " + path.string());
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty table");

  RawSeriesTable table;
  auto header = io::split_csv_line(line);
  if (header.size() < 2) throw std::runtime_error(path.string() + ": header has no slot columns");
  table.slot_labels.assign(header.begin() + 1, header.end());
  const std::size_t m = table.slot_labels.size();

  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = io::split_csv_line(line);
    if (fields.size() != m + 1) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(line_no) + " has " +
                               std::to_string(fields.size()) + " columns, expected " +
                               std::to_string(m + 1));
    }
    table.day_ids.push_back(fields[0]);
    for (std::size_t c = 0; c < m; ++c) {
      double v = 0.0;
      if (!io::parse_double(fields[c + 1], v) || !std::isfinite(v)) {
        throw std::runtime_error(path.string() + ": row " + std::to_string(line_no) +
                                 ", column " + std::to_string(c + 2) + ": non-numeric value '" +
                                 fields[c + 1] + "'");
      }
      values.push_back(v);
    }
  }
  if (table.day_ids.empty()) throw std::runtime_error(path.string() + ": empty table");
  table.values = Matrix(table.day_ids.size(), m, std::move(values));
  table.validate();
  return table;
}

void write_csv(const RawSeriesTable& table, const std::filesystem::path& path) {
  std::string out = "day_id";
  for (const auto& label : table.slot_labels) out += "," + label;
  out += "\n";
  for (std::size_t r = 0; r < table.days(); ++r) {
    out += table.day_ids[r];
    for (double v : table.values.row(r)) out += "," + io::format_double(v);
    out += "\n";
  }
  io::write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Windowing, scaling, splitting

SupervisedDataset make_windows(const RawSeriesTable& table, SlotRange input, SlotRange target) {
  if (input.begin >= input.end || target.begin >= target.end) {
    throw std::invalid_argument("slot ranges must be non-empty");
  }
  if (input.end > table.slots() || target.end > table.slots()) {
    throw std::invalid_argument("slot range exceeds the " + std::to_string(table.slots()) +
                                " slots of the table");
  }
  if (target.begin < input.end) throw std::invalid_argument("input and target slot ranges overlap");
  if (target.begin != input.end) {
    throw std::invalid_argument("target slot range must start where the input range ends");
  }
  SupervisedDataset ds;
  const std::size_t n = table.days();
  ds.inputs = Matrix(n, input.size());
  ds.targets = Matrix(n, target.size());
  for (std::size_t r = 0; r < n; ++r) {
    const auto day = table.values.row(r);
    std::copy_n(day.begin() + input.begin, input.size(), ds.inputs.row(r).begin());
    std::copy_n(day.begin() + target.begin, target.size(), ds.targets.row(r).begin());
  }
  ds.day_ids = table.day_ids;
  ds.target_labels.assign(table.slot_labels.begin() + target.begin,
                          table.slot_labels.begin() + target.end);
  return ds;
}

ScaledSplit fit_apply_scaler(const SupervisedDataset& train, const SupervisedDataset& test,
                             ScaleMode mode) {
  if (train.size() == 0) throw std::invalid_argument("cannot fit a scaler on an empty training set");
  const std::size_t t_in = train.input_steps();
  const std::size_t width = t_in + train.output_steps();
  const std::size_t stats = mode == ScaleMode::Global ? 1 : width;
  std::vector<double> lo(stats, std::numeric_limits<double>::infinity());
  std::vector<double> hi(stats, -std::numeric_limits<double>::infinity());
  auto track = [&](std::size_t column, double v) {
    const std::size_t i = mode == ScaleMode::Global ? 0 : column;
    lo[i] = std::min(lo[i], v);
    hi[i] = std::max(hi[i], v);
  };
  for (std::size_t r = 0; r < train.size(); ++r) {
    for (std::size_t c = 0; c < t_in; ++c) track(c, train.inputs(r, c));
    for (std::size_t c = 0; c < train.output_steps(); ++c) track(t_in + c, train.targets(r, c));
  }

  ScaledSplit out{train, test, Scaler(mode, lo, hi)};
  for (auto* ds : {&out.train, &out.test}) {
    ds->inputs = out.scaler.scale(ds->inputs, 0);
    ds->targets = out.scaler.scale(ds->targets, t_in);
    ds->scaler = out.scaler;
  }
  return out;
}

SplitResult split(const SupervisedDataset& dataset, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train fraction must lie strictly between 0 and 1");
  }
  const std::size_t s = dataset.size();
  if (s < 2) throw std::invalid_argument("need at least 2 samples to split");

  std::vector<std::size_t> order(s);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = s - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(s) * train_fraction));
  SplitResult out;
  out.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(out.train_rows.begin(), out.train_rows.end());
  std::sort(out.test_rows.begin(), out.test_rows.end());
  out.train = dataset.subset(out.train_rows);
  out.test = dataset.subset(out.test_rows);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator

SyntheticSpec SyntheticSpec::customer_types(double scale) {
  auto days = [scale](double full) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(full * scale)));
  };
  SyntheticSpec spec;
  spec.slots = 24;
  spec.first_slot_minute = 7 * 60;
  spec.day_jitter = 0.25;
  spec.clusters = {
      {"residential", 3.0, 10.5, 3.6, 0.06, days(14529)},
      {"agricultural", 9.0, 10.0, 4.2, 0.06, days(4513)},
      {"industrial", 28.0, 11.0, 3.2, 0.05, days(1967)},
      {"commercial", 85.0, 11.5, 2.8, 0.05, days(485)},
  };
  return spec;
}

void SyntheticSpec::validate() const {
  if (clusters.empty()) throw std::invalid_argument("synthetic spec needs at least one cluster");
  if (slots < 2) throw std::invalid_argument("synthetic spec needs at least 2 slots");
  if (!(day_jitter >= 0.0 && day_jitter < 1.0)) {
    throw std::invalid_argument("day_jitter must lie in [0, 1)");
  }
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    const auto& c = clusters[k];
    if (c.days == 0) throw std::invalid_argument("cluster " + c.name + " has no days");
    if (!(c.amplitude_kw > 0.0)) throw std::invalid_argument("cluster amplitude must be positive");
    if (!(c.width_slots > 0.0)) throw std::invalid_argument("cluster width must be positive");
    if (!(c.noise >= 0.0)) throw std::invalid_argument("cluster noise must be non-negative");
    if (k > 0 && !(c.amplitude_kw > clusters[k - 1].amplitude_kw)) {
      throw std::invalid_argument("cluster amplitudes must be strictly increasing");
    }
  }
}

double bell_profile(const ClusterProfile& profile, double slot) {
  const double z = (slot - profile.peak_slot) / profile.width_slots;
  return profile.amplitude_kw * std::exp(-0.5 * z * z);
}

SyntheticData generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<std::size_t> labels;
  for (std::size_t k = 0; k < spec.clusters.size(); ++k) {
    labels.insert(labels.end(), spec.clusters[k].days, k);
  }
  const std::size_t n = labels.size();

  // Interleave customer types so the day order carries no label information.
  Rng order_rng(mix_seed(seed, 0));
  for (std::size_t i = n - 1; i > 0; --i) std::swap(labels[i], labels[order_rng.below(i + 1)]);

  SyntheticData out;
  out.labels = labels;
  auto& table = out.table;
  table.slot_labels = half_hour_labels(spec.slots, spec.first_slot_minute);
  table.values = Matrix(n, spec.slots);
  table.day_ids.reserve(n);
  Rng rng(mix_seed(seed, 1));
  for (std::size_t d = 0; d < n; ++d) {
    char id[32];
    std::snprintf(id, sizeof(id), "day%05zu", d);
    table.day_ids.emplace_back(id);
    const auto& profile = spec.clusters[labels[d]];
    const double factor = spec.day_jitter > 0.0 ? rng.uniform(1.0 - spec.day_jitter, 1.0 + spec.day_jitter)
                                                : 1.0;
    for (std::size_t m = 0; m < spec.slots; ++m) {
      double v = factor * bell_profile(profile, static_cast<double>(m));
      if (profile.noise > 0.0) v += profile.noise * profile.amplitude_kw * rng.normal();
      table.values(d, m) = std::max(0.0, v);
    }
  }
  return out;
}

}  // namespace cmdnn
