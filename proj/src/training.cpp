#include <cmath>
#include <numeric>

#include "cmdnn/predictor.hpp"
#include "cmdnn/random.hpp"

namespace cmdnn {

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw std::invalid_argument("adam: parameter, gradient and moment sizes differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    params[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

void TrainConfig::validate() const {
  if (hidden_units == 0) throw std::invalid_argument("hidden_units must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (eval_every == 0) throw std::invalid_argument("eval_every must be positive");
}

TrainResult train(CellKind kind, const SupervisedDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.size() == 0) throw std::invalid_argument("cannot train on an empty dataset");

  ParameterSet params = init_params(kind, cfg.hidden_units, cfg.seed);
  AdamState adam(params.size(), cfg.learning_rate);

  auto training_rmse = [&](const ParameterSet& p) {
    const double r = rmse(data.targets, predict(p, data.inputs, data.output_steps()));
    if (!std::isfinite(r)) throw DivergenceError("training RMSE is not finite");
    return r;
  };

  TrainResult result{params, {}, 0, training_rmse(params)};
  result.trace.push_back(result.best_rmse);

  const std::size_t s = data.size();
  const std::size_t batch = std::min(cfg.batch_size, s);
  std::vector<std::size_t> order(s);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(cfg.seed, 1));
  std::size_t cursor = s;  // forces a shuffle before the first batch

  for (std::size_t it = 1; it <= cfg.max_iterations; ++it) {
    if (cursor + batch > s) {
      for (std::size_t i = s - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
      cursor = 0;
    }
    const std::span<const std::size_t> rows(order.data() + cursor, batch);
    cursor += batch;

    LossGradient lg;
    try {
      lg = gradient(params, data.inputs, data.targets, rows, cfg.teacher_forcing);
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string(to_string(kind)) + " training diverged at iteration " +
                            std::to_string(it) + ": " + e.what());
    }
    adam_step(adam, params.flat(), lg.grad);

    if (it % cfg.eval_every == 0 || it == cfg.max_iterations) {
      const double r = training_rmse(params);
      result.trace.push_back(r);
      if (r < result.best_rmse) {
        result.best_rmse = r;
        result.best_iteration = it;
        result.params = params;
      }
    }
  }
  return result;
}

}  // namespace cmdnn
