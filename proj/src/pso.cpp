#include <algorithm>
#include <cmath>

#include "cmdnn/transfer.hpp"

namespace cmdnn {

void PsoConfig::validate() const {
  if (particles == 0) throw std::invalid_argument("PSO needs at least one particle");
  if (!(v_max > 0.0) || !(u_max > 0.0)) throw std::invalid_argument("PSO bounds must be positive");
  if (!(inertia >= 0.0) || !(c1 >= 0.0) || !(c2 >= 0.0)) {
    throw std::invalid_argument("PSO coefficients must be non-negative");
  }
}

namespace {

double score(const Objective& objective, std::span<const double> u) {
  const double v = objective(u);
  return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
}

}  // namespace

Swarm::Swarm(std::size_t dim, const PsoConfig& cfg) : config(cfg), dimension(dim) {
  config.validate();
  particles.resize(config.particles);
  for (std::size_t p = 0; p < particles.size(); ++p) {
    particles[p].rng = Rng(mix_seed(config.seed, p));
  }
  gbest.assign(dimension, 0.0);
}

void Swarm::initialize(const Objective& objective, double start_value, std::vector<double> start) {
  if (start.empty()) start.assign(dimension, 0.0);
  if (start.size() != dimension) throw std::invalid_argument("gbest start has the wrong dimension");
  gbest = std::move(start);
  gbest_value = start_value;
  for (auto& p : particles) {
    p.position.resize(dimension);
    p.velocity.resize(dimension);
    for (std::size_t d = 0; d < dimension; ++d) {
      p.position[d] = p.rng.uniform(-config.u_max, config.u_max);
      p.velocity[d] = p.rng.uniform(-config.v_max, config.v_max);
    }
  }
  for (auto& p : particles) p.value = score(objective, p.position);
  for (auto& p : particles) {
    p.pbest = p.position;
    p.pbest_value = p.value;
    if (p.pbest_value < gbest_value) {
      gbest_value = p.pbest_value;
      gbest = p.pbest;
    }
  }
  generation = 1;
}

void Swarm::step(const Objective& objective) {
  for (auto& p : particles) {
    for (std::size_t d = 0; d < dimension; ++d) {
      const double r1 = p.rng.uniform();
      const double r2 = p.rng.uniform();
      double v = config.inertia * p.velocity[d] + config.c1 * r1 * (p.pbest[d] - p.position[d]) +
                 config.c2 * r2 * (gbest[d] - p.position[d]);
      v = std::clamp(v, -config.v_max, config.v_max);
      p.velocity[d] = v;
      p.position[d] = std::clamp(p.position[d] + v, -config.u_max, config.u_max);
    }
  }
  // Evaluations are independent; bookkeeping below runs in particle order.
  for (auto& p : particles) p.value = score(objective, p.position);
  for (auto& p : particles) {
    if (p.value < p.pbest_value) {
      p.pbest = p.position;
      p.pbest_value = p.value;
    }
    if (p.pbest_value < gbest_value) {
      gbest = p.pbest;
      gbest_value = p.pbest_value;
    }
  }
  ++generation;
}

}  // namespace cmdnn
