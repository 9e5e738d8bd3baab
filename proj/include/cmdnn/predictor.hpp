#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cmdnn/dataset.hpp"
#include "cmdnn/matrix.hpp"

namespace cmdnn {

enum class CellKind { RNN, LSTM, GRU };

std::string_view to_string(CellKind kind);
// Accepts "rnn", "lstm", "gru" in any case.
CellKind parse_cell_kind(std::string_view text);

// Raised when a forward pass, loss or gradient stops being finite.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TensorSpec {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;  // into the flat parameter vector

  std::size_t size() const { return rows * cols; }
};

// Tensor order of the flat vector. Gate weights are H x (H + 1) and act on
// the concatenation [h_{t-1}, x_t]; the output head W_y is 1 x H.
//   RNN : W_h, W_y, b_h, b_y
//   LSTM: W_f, W_i, W_C, W_o, W_y, b_f, b_i, b_C, b_o, b_y
//   GRU : W_z, W_r, W_n, W_y, b_z, b_r, b_n, b_y
std::vector<TensorSpec> parameter_layout(CellKind kind, std::size_t hidden);

// All weights and biases of one predictor, stored as one flat vector with a
// named row-major view per tensor.
class ParameterSet {
 public:
  ParameterSet(CellKind kind, std::size_t hidden);
  ParameterSet(CellKind kind, std::size_t hidden, std::vector<double> flat);

  CellKind kind() const { return kind_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t size() const { return values_.size(); }
  const std::vector<TensorSpec>& layout() const { return layout_; }

  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }

  const TensorSpec& spec(std::string_view name) const;
  std::span<double> tensor(std::string_view name);
  std::span<const double> tensor(std::string_view name) const;

  bool same_shape(const ParameterSet& other) const {
    return kind_ == other.kind_ && hidden_ == other.hidden_;
  }
  bool all_finite() const;

  bool operator==(const ParameterSet& other) const {
    return kind_ == other.kind_ && hidden_ == other.hidden_ && values_ == other.values_;
  }

 private:
  CellKind kind_;
  std::size_t hidden_;
  std::vector<TensorSpec> layout_;
  std::vector<double> values_;
};

// Text checkpoint: header, then one "tensor <name> <rows> <cols>" line per
// tensor followed by its rows. Values use shortest round-trip formatting, so
// save/load is bit-exact.
std::string to_checkpoint(const ParameterSet& params);
ParameterSet from_checkpoint(std::string_view text);
void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path);
ParameterSet load_checkpoint(const std::filesystem::path& path);

// Weights ~ U[-r, r] with r = sqrt(6 / (fan_in + fan_out)) per tensor,
// biases zero.
ParameterSet init_params(CellKind kind, std::size_t hidden, std::uint64_t seed);

// Encodes `input` one step at a time from zero states, emits the first
// prediction from the last encoder state, then feeds each prediction back as
// the next input until `output_steps` values exist. Outputs lie in (0, 1).
std::vector<double> forward(const ParameterSet& params, std::span<const double> input,
                            std::size_t output_steps);

Matrix predict(const ParameterSet& params, const Matrix& inputs, std::size_t output_steps);

double rmse(const Matrix& y, const Matrix& y_hat);

struct LossGradient {
  double loss = 0.0;  // mean squared error over the batch
  std::vector<double> grad;
};

// Exact gradient of the batch-mean squared error by backpropagation through
// time, including the path through fed-back predictions. With
// `teacher_forcing` the decoder consumes ground truth instead, and that path
// vanishes.
LossGradient gradient(const ParameterSet& params, const Matrix& inputs, const Matrix& targets,
                      std::span<const std::size_t> rows, bool teacher_forcing = false);
LossGradient gradient(const ParameterSet& params, const SupervisedDataset& batch,
                      bool teacher_forcing = false);

// Batch-mean squared error under the same decoding mode used by gradient().
double mse_loss(const ParameterSet& params, const Matrix& inputs, const Matrix& targets,
                std::span<const std::size_t> rows, bool teacher_forcing = false);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t size, double lr = 1e-2) : m(size, 0.0), v(size, 0.0), learning_rate(lr) {}
};

// Bias-corrected Adam update, in place.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

struct TrainConfig {
  std::size_t hidden_units = 10;
  // Mini-batch steps.
  std::size_t max_iterations = 3000;
  double learning_rate = 1e-2;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  // Full-training-set RMSE is evaluated every `eval_every` steps and after
  // the last step.
  std::size_t eval_every = 50;
  bool teacher_forcing = false;

  void validate() const;
};

struct TrainResult {
  ParameterSet params;          // best evaluated iterate
  std::vector<double> trace;    // training RMSE per evaluation, in data units
  std::size_t best_iteration = 0;
  double best_rmse = 0.0;
};

TrainResult train(CellKind kind, const SupervisedDataset& data, const TrainConfig& cfg);

}  // namespace cmdnn
