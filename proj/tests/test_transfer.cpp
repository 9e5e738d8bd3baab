#include <doctest.h>

#include <cmath>

#include "cmdnn/transfer.hpp"
#include "oracles.hpp"

using namespace cmdnn;

namespace {

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

std::vector<ParameterSet> random_sets(CellKind kind, std::size_t hidden, std::size_t n, Rng& rng) {
  std::vector<ParameterSet> sets;
  for (std::size_t k = 0; k < n; ++k) {
    ParameterSet p(kind, hidden);
    for (double& v : p.flat()) v = rng.uniform(-1.0, 1.0);
    sets.push_back(std::move(p));
  }
  return sets;
}

SupervisedDataset random_task(Rng& rng, std::size_t rows, std::size_t t_in, std::size_t t_out) {
  SupervisedDataset ds;
  ds.inputs = oracle::random_matrix(rng, rows, t_in, 0.0, 1.0);
  ds.targets = oracle::random_matrix(rng, rows, t_out, 0.0, 1.0);
  return ds;
}

}  // namespace

TEST_CASE("decode follows the mask-then-coefficient layout") {
  // Four tasks, target 1: coordinates refer to tasks 0, 2, 3.
  const std::vector<double> u{0.3, -0.1, 0.0, 0.5, -0.7, 0.9};
  const auto sol = decode(u, 1, 4);
  CHECK(sol.mask == std::vector<bool>{true, true, false, false});
  CHECK(sol.coefficients == std::vector<double>{0.5, 1.0, -0.7, 0.9});
  CHECK_THROWS_AS(decode(u, 4, 4), std::invalid_argument);
  CHECK_THROWS_AS(decode(std::vector<double>(5), 0, 4), std::invalid_argument);
}

TEST_CASE("decode agrees with a sign-rule oracle") {
  Rng rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(5);
    const std::size_t target = rng.below(n);
    std::vector<double> u(search_dimension(n));
    for (auto& v : u) v = rng.uniform(-1.0, 1.0);
    if (trial % 10 == 0) u[0] = 0.0;
    const auto sol = decode(u, target, n);
    CHECK(sol.mask == oracle::decode_mask(u, target, n));
    CHECK(sol.coefficients[target] == 1.0);

    // Only the sign of a mask coordinate matters.
    auto scaled = u;
    for (std::size_t d = 0; d < n - 1; ++d) scaled[d] *= 0.25;
    CHECK(decode(scaled, target, n).mask == sol.mask);
  }
}

TEST_CASE("the zero position decodes to the identity blend") {
  for (std::size_t n = 1; n <= 5; ++n) {
    for (std::size_t target = 0; target < n; ++target) {
      CHECK(decode(std::vector<double>(search_dimension(n), 0.0), target, n) == identity_solution(target, n));
    }
  }
}

TEST_CASE("blend examples") {
  ParameterSet a(CellKind::RNN, 1, {2.0, 2.0, 2.0, 2.0, 2.0});
  ParameterSet b(CellKind::RNN, 1, {4.0, 4.0, 4.0, 4.0, 4.0});
  const std::vector<ParameterSet> sets{a, b};
  const auto mid = blend(sets, TransferSolution{{true, true}, {0.5, 0.5}});
  for (double v : mid.flat()) CHECK(v == 3.0);
  CHECK(blend(sets, identity_solution(1, 2)) == b);
  CHECK(blend(sets, TransferSolution{{true, false}, {1.0, 123.0}}) == a);
  CHECK_THROWS_AS(blend(sets, identity_solution(0, 3)), std::invalid_argument);
  const std::vector<ParameterSet> mixed{a, ParameterSet(CellKind::RNN, 2)};
  CHECK_THROWS_AS(blend(mixed, identity_solution(0, 2)), std::invalid_argument);
}

TEST_CASE("blend matches a weighted-sum oracle") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto sets = random_sets(CellKind::GRU, 2, 3, rng);
    TransferSolution sol{std::vector<bool>(3), std::vector<double>(3)};
    for (std::size_t k = 0; k < 3; ++k) {
      sol.mask[k] = rng.uniform() < 0.6;
      sol.coefficients[k] = rng.uniform(-1.0, 1.0);
    }
    std::vector<std::vector<double>> flats;
    for (const auto& s : sets) flats.push_back(to_vec(s.flat()));
    const auto expected = oracle::blend(flats, sol.mask, sol.coefficients);
    const auto got = blend(sets, sol);
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(std::abs(got.flat()[i] - expected[i]) <= 1e-12);
  }
}

TEST_CASE("blend is linear in the coefficients") {
  Rng rng(6);
  const auto sets = random_sets(CellKind::LSTM, 2, 3, rng);
  const TransferSolution s1{{true, true, false}, {0.3, -0.2, 0.0}};
  const TransferSolution s2{{true, true, false}, {0.1, 0.7, 0.0}};
  const TransferSolution sum{{true, true, false}, {0.4, 0.5, 0.0}};
  const auto a = blend(sets, s1), b = blend(sets, s2), c = blend(sets, sum);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(c.flat()[i] - a.flat()[i] - b.flat()[i]) <= 1e-12);
}

TEST_CASE("evaluate_particle at the zero position reproduces the target's own RMSE") {
  Rng rng(9);
  for (auto kind : {CellKind::RNN, CellKind::LSTM, CellKind::GRU}) {
    const auto sets = random_sets(kind, 3, 4, rng);
    const auto task = random_task(rng, 12, 5, 3);
    for (std::size_t target = 0; target < 4; ++target) {
      const double own = rmse(task.targets, predict(sets[target], task.inputs, 3));
      const double value = evaluate_particle(std::vector<double>(6, 0.0), target, sets, task);
      CHECK(std::abs(value - own) <= 1e-12);
    }
  }
}

TEST_CASE("evaluate_particle composes decode, blend and rmse") {
  Rng rng(10);
  const auto sets = random_sets(CellKind::LSTM, 2, 3, rng);
  const auto task = random_task(rng, 8, 4, 2);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> u(4);
    for (auto& v : u) v = rng.uniform(-1.0, 1.0);
    std::vector<std::vector<double>> flats;
    for (const auto& s : sets) flats.push_back(to_vec(s.flat()));
    const auto mask = oracle::decode_mask(u, 2, 3);
    const std::vector<double> alpha{u[2], u[3], 1.0};
    const ParameterSet blended(CellKind::LSTM, 2, oracle::blend(flats, mask, alpha));
    const double expected = oracle::rmse(task.targets, predict(blended, task.inputs, 2));
    const double value = evaluate_particle(u, 2, sets, task);
    CHECK(value >= 0.0);
    CHECK(std::abs(value - expected) <= 1e-12);
  }
}

TEST_CASE("evaluate_particle reports kW when the task carries a scaler") {
  Rng rng(12);
  const auto sets = random_sets(CellKind::RNN, 2, 2, rng);
  auto task = random_task(rng, 6, 3, 2);
  Matrix raw_inputs = task.inputs, raw_targets = task.targets;
  for (double& v : raw_inputs.data()) v *= 40.0;
  for (double& v : raw_targets.data()) v *= 40.0;
  raw_inputs(0, 0) = 0.0;
  raw_targets(0, 0) = 40.0;
  SupervisedDataset raw;
  raw.inputs = raw_inputs;
  raw.targets = raw_targets;
  const auto scaled = fit_apply_scaler(raw, raw, ScaleMode::Global);
  const double scaled_rmse = rmse(scaled.train.targets, predict(sets[0], scaled.train.inputs, 2));
  const double value = evaluate_particle(std::vector<double>(2, 0.0), 0, sets, scaled.train);
  CHECK(value == doctest::Approx(40.0 * scaled_rmse).epsilon(1e-12));
}

TEST_CASE("evaluate_particle scores diverged blends as infinity") {
  ParameterSet huge(CellKind::RNN, 1, {1e308, 1e308, 1e308, 1e308, 1e308});
  const std::vector<ParameterSet> sets{huge, huge};
  SupervisedDataset task;
  task.inputs = Matrix(1, 2, 1.0);
  task.targets = Matrix(1, 1, 0.5);
  const double value = evaluate_particle(std::vector<double>{1.0, 1.0}, 0, sets, task);
  CHECK(std::isinf(value));
}

TEST_CASE("swarm holds still when every particle sits at gbest with zero velocity") {
  PsoConfig cfg;
  cfg.particles = 4;
  Swarm swarm(3, cfg);
  const Objective sphere = [](std::span<const double> u) {
    double s = 0.0;
    for (double v : u) s += v * v;
    return s;
  };
  swarm.initialize(sphere);
  const std::vector<double> point{0.2, -0.4, 0.1};
  for (auto& p : swarm.particles) {
    p.position = p.pbest = point;
    p.velocity.assign(3, 0.0);
    p.value = p.pbest_value = sphere(point);
  }
  swarm.gbest = point;
  swarm.gbest_value = sphere(point);
  swarm.step(sphere);
  for (const auto& p : swarm.particles) {
    CHECK(p.position == point);
    for (double v : p.velocity) CHECK(v == 0.0);
  }
}

TEST_CASE("swarm clamps velocity and position") {
  PsoConfig cfg;
  cfg.particles = 6;
  cfg.inertia = 5.0;
  cfg.c1 = cfg.c2 = 10.0;
  const Objective flat = [](std::span<const double>) { return 1.0; };
  Swarm swarm(4, cfg);
  swarm.initialize(flat, 1.0, {0.9, -0.9, 0.9, -0.9});
  for (int g = 0; g < 20; ++g) {
    swarm.step(flat);
    for (const auto& p : swarm.particles) {
      for (double v : p.velocity) CHECK(std::abs(v) <= cfg.v_max);
      for (double u : p.position) CHECK(std::abs(u) <= cfg.u_max);
    }
  }
}

TEST_CASE("swarm gbest never gets worse and is reproducible") {
  PsoConfig cfg;
  cfg.seed = 7;
  const Objective rastrigin = [](std::span<const double> u) {
    double s = 10.0 * u.size();
    for (double v : u) s += v * v - 10.0 * std::cos(2.0 * M_PI * v);
    return s;
  };
  Swarm a(5, cfg), b(5, cfg);
  a.initialize(rastrigin);
  b.initialize(rastrigin);
  double last = a.gbest_value;
  for (int g = 0; g < 40; ++g) {
    a.step(rastrigin);
    b.step(rastrigin);
    CHECK(a.gbest_value <= last);
    CHECK(rastrigin(a.gbest) == a.gbest_value);
    last = a.gbest_value;
  }
  CHECK(a.gbest == b.gbest);
  CHECK(a.generation == 41);
}

TEST_CASE("swarm treats NaN fitness as infinitely bad") {
  PsoConfig cfg;
  cfg.particles = 3;
  Swarm swarm(2, cfg);
  swarm.initialize([](std::span<const double>) { return std::nan(""); }, 5.0);
  CHECK(swarm.gbest_value == 5.0);
  for (const auto& p : swarm.particles) CHECK(std::isinf(p.value));
}

TEST_CASE("run_transfer with zero generations keeps the trained parameters") {
  Rng rng(13);
  const auto sets = random_sets(CellKind::LSTM, 2, 3, rng);
  const auto task = random_task(rng, 10, 4, 2);
  PsoConfig cfg;
  cfg.generations = 0;
  const auto r = run_transfer(1, sets, task, cfg);
  CHECK(r.params == sets[1]);
  CHECK_FALSE(r.improved);
  CHECK(r.solution == identity_solution(1, 3));
  CHECK(r.trace == std::vector<double>{r.initial_rmse});
  CHECK(r.final_rmse == r.initial_rmse);
}

TEST_CASE("run_transfer never returns a worse predictor") {
  Rng rng(14);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto sets = random_sets(CellKind::GRU, 2, 4, rng);
    const auto task = random_task(rng, 10, 4, 2);
    PsoConfig cfg;
    cfg.generations = 15;
    cfg.particles = 6;
    cfg.seed = seed;
    const auto r = run_transfer(seed % 4, sets, task, cfg);
    CHECK(r.trace.size() == cfg.generations + 1);
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1]);
    CHECK(r.final_rmse <= r.initial_rmse);
    CHECK(r.final_rmse == r.trace.back());
    CHECK(oracle::rmse(task.targets, predict(r.params, task.inputs, 2)) == doctest::Approx(r.final_rmse).epsilon(1e-12));
    CHECK(r.improved == (r.final_rmse < r.initial_rmse));
    if (!r.improved) CHECK(r.params == sets[seed % 4]);

    const auto again = run_transfer(seed % 4, sets, task, cfg);
    CHECK(again.trace == r.trace);
    CHECK(again.params == r.params);
  }
}

TEST_CASE("run_transfer with a single task is a no-op search") {
  Rng rng(15);
  const auto sets = random_sets(CellKind::RNN, 2, 1, rng);
  const auto task = random_task(rng, 5, 3, 2);
  PsoConfig cfg;
  cfg.generations = 3;
  const auto r = run_transfer(0, sets, task, cfg);
  CHECK(r.params == sets[0]);
  CHECK_FALSE(r.improved);
}
