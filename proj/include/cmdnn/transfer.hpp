#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "cmdnn/dataset.hpp"
#include "cmdnn/predictor.hpp"
#include "cmdnn/random.hpp"

namespace cmdnn {

// Source-task selection and blend coefficients for one target task. The
// target's own entry is always selected with coefficient 1; coefficients of
// unselected tasks are carried but never used.
struct TransferSolution {
  std::vector<bool> mask;
  std::vector<double> coefficients;

  bool operator==(const TransferSolution&) const = default;
};

// Search-space size for n tasks: one mask coordinate and one coefficient
// coordinate per non-target task.
inline std::size_t search_dimension(std::size_t tasks) { return tasks == 0 ? 0 : 2 * (tasks - 1); }

// Position layout: [mask coords of non-target tasks in ascending task order,
// then their coefficients in the same order]. A mask coordinate > 0 selects
// the task; 0 or below does not.
TransferSolution decode(std::span<const double> position, std::size_t target, std::size_t tasks);

TransferSolution identity_solution(std::size_t target, std::size_t tasks);

// Coordinate-wise sum over selected tasks of coefficient * parameters.
ParameterSet blend(std::span<const ParameterSet> trained, const TransferSolution& solution);

// Training-set RMSE of a task in kW: predictions and targets are mapped back
// through the dataset's scaler before comparison. Targets are cached.
class TaskEvaluator {
 public:
  explicit TaskEvaluator(const SupervisedDataset& data);

  Matrix predict_kw(const ParameterSet& params) const;
  double rmse_kw(const ParameterSet& params) const;

 private:
  const SupervisedDataset& data_;
  Matrix targets_kw_;
};

// Fitness of a particle: rmse_kw of blend(decode(position)). Any non-finite
// outcome scores +infinity.
double evaluate_particle(std::span<const double> position, std::size_t target,
                         std::span<const ParameterSet> trained, const TaskEvaluator& evaluator);
double evaluate_particle(std::span<const double> position, std::size_t target,
                         std::span<const ParameterSet> trained, const SupervisedDataset& data);

struct PsoConfig {
  std::size_t particles = 15;
  // Total generations, the initial evaluation counting as the first.
  std::size_t generations = 100;
  double inertia = 0.729;
  double c1 = 1.49445;
  double c2 = 1.49445;
  double v_max = 0.4;
  double u_max = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Particle {
  std::vector<double> position;
  std::vector<double> velocity;
  std::vector<double> pbest;
  double value = std::numeric_limits<double>::infinity();
  double pbest_value = std::numeric_limits<double>::infinity();
  Rng rng{0};
};

using Objective = std::function<double(std::span<const double>)>;

// Global-best PSO with velocity and position clamping. Every particle draws
// from its own seeded stream. Within a generation all particles move against
// the gbest of the previous generation, and pbest/gbest bookkeeping happens
// afterwards in particle order.
struct Swarm {
  PsoConfig config;
  std::size_t dimension = 0;
  std::vector<Particle> particles;
  std::vector<double> gbest;
  double gbest_value = std::numeric_limits<double>::infinity();
  std::size_t generation = 0;

  Swarm(std::size_t dimension, const PsoConfig& config);

  // Random positions in [-u_max, u_max], velocities in [-v_max, v_max], one
  // evaluation each. gbest starts at `start` (zeros if empty) with value
  // `start_value` and only moves on strict improvement.
  void initialize(const Objective& objective,
                  double start_value = std::numeric_limits<double>::infinity(),
                  std::vector<double> start = {});

  // One generation: velocity/position update with clamping, evaluation, then
  // pbest/gbest bookkeeping.
  void step(const Objective& objective);
};

struct TransferResult {
  ParameterSet params;
  TransferSolution solution;
  bool improved = false;
  double initial_rmse = 0.0;  // the target's intra-model training RMSE
  double final_rmse = 0.0;
  std::vector<double> trace;  // gbest value before the search, then per generation
  Matrix predictions_kw;      // on the target's training inputs
};

// Blends the frozen trained parameter sets into a better target predictor.
// If the search never beats the target's own training RMSE the original
// parameters come back unchanged.
TransferResult run_transfer(std::size_t target, std::span<const ParameterSet> trained,
                            const SupervisedDataset& train_data, const PsoConfig& cfg);

}  // namespace cmdnn
