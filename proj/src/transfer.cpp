#include "cmdnn/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cmdnn {

TransferSolution decode(std::span<const double> position, std::size_t target, std::size_t tasks) {
  if (target >= tasks) throw std::invalid_argument("target task out of range");
  const std::size_t others = tasks - 1;
  if (position.size() != 2 * others) {
    throw std::invalid_argument("position has " + std::to_string(position.size()) +
                                " coordinates, expected " + std::to_string(2 * others));
  }
  TransferSolution sol = identity_solution(target, tasks);
  std::size_t slot = 0;
  for (std::size_t k = 0; k < tasks; ++k) {
    if (k == target) continue;
    sol.mask[k] = position[slot] > 0.0;
    sol.coefficients[k] = position[others + slot];
    ++slot;
  }
  return sol;
}

TransferSolution identity_solution(std::size_t target, std::size_t tasks) {
  if (target >= tasks) throw std::invalid_argument("target task out of range");
  TransferSolution sol{std::vector<bool>(tasks, false), std::vector<double>(tasks, 0.0)};
  sol.mask[target] = true;
  sol.coefficients[target] = 1.0;
  return sol;
}

ParameterSet blend(std::span<const ParameterSet> trained, const TransferSolution& solution) {
  if (trained.empty()) throw std::invalid_argument("blend needs at least one parameter set");
  if (solution.mask.size() != trained.size() || solution.coefficients.size() != trained.size()) {
    throw std::invalid_argument("transfer solution does not match the number of tasks");
  }
  ParameterSet out(trained[0].kind(), trained[0].hidden());
  for (const auto& p : trained) {
    if (!p.same_shape(out)) throw std::invalid_argument("blend of parameter sets with different shapes");
  }
  auto dst = out.flat();
  for (std::size_t k = 0; k < trained.size(); ++k) {
    if (!solution.mask[k]) continue;
    const double a = solution.coefficients[k];
    const auto src = trained[k].flat();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += a * src[i];
  }
  return out;
}

TaskEvaluator::TaskEvaluator(const SupervisedDataset& data)
    : data_(data), targets_kw_(data.targets_kw()) {
  if (data.size() == 0) throw std::invalid_argument("cannot evaluate on an empty dataset");
}

Matrix TaskEvaluator::predict_kw(const ParameterSet& params) const {
  Matrix pred = predict(params, data_.inputs, data_.output_steps());
  if (data_.scaler) pred = data_.scaler->unscale(pred, data_.input_steps());
  return pred;
}

double TaskEvaluator::rmse_kw(const ParameterSet& params) const {
  return rmse(targets_kw_, predict_kw(params));
}

double evaluate_particle(std::span<const double> position, std::size_t target,
                         std::span<const ParameterSet> trained, const TaskEvaluator& evaluator) {
  const auto params = blend(trained, decode(position, target, trained.size()));
  try {
    const double loss = evaluator.rmse_kw(params);
    return std::isfinite(loss) ? loss : std::numeric_limits<double>::infinity();
  } catch (const DivergenceError&) {
    return std::numeric_limits<double>::infinity();
  }
}

double evaluate_particle(std::span<const double> position, std::size_t target,
                         std::span<const ParameterSet> trained, const SupervisedDataset& data) {
  return evaluate_particle(position, target, trained, TaskEvaluator(data));
}

TransferResult run_transfer(std::size_t target, std::span<const ParameterSet> trained,
                            const SupervisedDataset& train_data, const PsoConfig& cfg) {
  cfg.validate();
  const std::size_t tasks = trained.size();
  if (target >= tasks) throw std::invalid_argument("target task out of range");
  const TaskEvaluator evaluator(train_data);

  TransferResult result{trained[target], identity_solution(target, tasks), false, 0.0, 0.0, {}, {}};
  result.initial_rmse = evaluator.rmse_kw(trained[target]);
  result.final_rmse = result.initial_rmse;
  result.trace.push_back(result.initial_rmse);

  if (cfg.generations > 0) {
    const Objective objective = [&](std::span<const double> u) {
      return evaluate_particle(u, target, trained, evaluator);
    };
    Swarm swarm(search_dimension(tasks), cfg);
    swarm.initialize(objective, result.initial_rmse);
    result.trace.push_back(swarm.gbest_value);
    while (swarm.generation < cfg.generations) {
      swarm.step(objective);
      result.trace.push_back(swarm.gbest_value);
    }
    if (swarm.gbest_value < result.initial_rmse) {
      result.solution = decode(swarm.gbest, target, tasks);
      result.params = blend(trained, result.solution);
      result.final_rmse = swarm.gbest_value;
      result.improved = true;
    }
  }
  result.predictions_kw = evaluator.predict_kw(result.params);
  return result;
}

}  // namespace cmdnn
