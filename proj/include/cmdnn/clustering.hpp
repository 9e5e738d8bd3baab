#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cmdnn/matrix.hpp"

namespace cmdnn {

enum class CenterInit {
  Uniform,         // n distinct rows drawn uniformly
  KMeansPlusPlus,  // D^2-weighted seeding
};

struct KMeansConfig {
  std::size_t clusters = 4;
  std::size_t max_iterations = 100;
  CenterInit init = CenterInit::Uniform;
  // Independent seeded runs; the one with the lowest within-cluster sum of
  // squares wins (earliest on ties).
  std::size_t restarts = 10;
};

struct ClusterModel {
  Matrix centers;                        // n x M
  std::vector<std::size_t> assignments;  // length N, values in [0, n)
  std::vector<std::size_t> counts;       // per-cluster sizes, sum N
  std::size_t iterations_run = 0;
  bool converged = false;
  // Within-cluster sum of squares after every assign step.
  std::vector<double> inertia_trace;

  std::size_t clusters() const { return centers.rows(); }
  double inertia() const { return inertia_trace.empty() ? 0.0 : inertia_trace.back(); }
};

// Throws std::invalid_argument on length mismatch.
double euclidean_distance(std::span<const double> x, std::span<const double> c);

// Index of the nearest center; ties go to the lowest index.
std::size_t assign(std::span<const double> x, const Matrix& centers);

// Center j becomes the mean of the rows assigned to j. An empty cluster is
// re-seeded at the row farthest from its own (freshly averaged) center; rows
// already used for a repair are not reused.
Matrix update_centers(const Matrix& x, std::span<const std::size_t> assignments, std::size_t n);

double within_cluster_ss(const Matrix& x, const Matrix& centers,
                         std::span<const std::size_t> assignments);

// Single Lloyd run: seeded init, then assign/update until assignments stop
// changing or `max_iterations` assign steps have run.
ClusterModel kmeans_fit(const Matrix& x, std::size_t n, std::uint64_t seed,
                        std::size_t max_iterations, CenterInit init = CenterInit::Uniform);

// Best of `cfg.restarts` runs.
ClusterModel kmeans_fit(const Matrix& x, const KMeansConfig& cfg, std::uint64_t seed);

// Relabels clusters so index order follows ascending center peak value.
ClusterModel order_by_peak(const ClusterModel& model);

// Fraction of rows on which two labelings agree under the best relabeling of
// `b`. Exhaustive over permutations, so n is capped at 9.
double permutation_agreement(std::span<const std::size_t> a, std::span<const std::size_t> b,
                             std::size_t n);

}  // namespace cmdnn
