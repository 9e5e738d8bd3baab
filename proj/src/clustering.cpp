#include "cmdnn/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "cmdnn/random.hpp"

namespace cmdnn {

namespace {

double squared_distance(std::span<const double> x, std::span<const double> c) {
  double sum = 0.0;
  for (std::size_t m = 0; m < x.size(); ++m) {
    const double d = x[m] - c[m];
    sum += d * d;
  }
  return sum;
}

Matrix init_uniform(const Matrix& x, std::size_t n, Rng& rng) {
  // Partial Fisher-Yates over row indices yields n distinct rows.
  std::vector<std::size_t> idx(x.rows());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.below(x.rows() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return x.select_rows(idx);
}

Matrix init_plus_plus(const Matrix& x, std::size_t n, Rng& rng) {
  std::vector<std::size_t> chosen{static_cast<std::size_t>(rng.below(x.rows()))};
  std::vector<double> d2(x.rows(), std::numeric_limits<double>::infinity());
  while (chosen.size() < n) {
    const auto last = x.row(chosen.back());
    double total = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      d2[r] = std::min(d2[r], squared_distance(x.row(r), last));
      total += d2[r];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (pick = 0; pick + 1 < x.rows(); ++pick) {
        target -= d2[pick];
        if (target < 0.0 && d2[pick] > 0.0) break;
      }
    } else {
      // All remaining rows coincide with a center: take the first unused one.
      while (std::find(chosen.begin(), chosen.end(), pick) != chosen.end()) ++pick;
    }
    chosen.push_back(pick);
  }
  return x.select_rows(chosen);
}

}  // namespace

double euclidean_distance(std::span<const double> x, std::span<const double> c) {
  if (x.size() != c.size()) {
    throw std::invalid_argument("distance between vectors of length " + std::to_string(x.size()) +
                                " and " + std::to_string(c.size()));
  }
  return std::sqrt(squared_distance(x, c));
}

std::size_t assign(std::span<const double> x, const Matrix& centers) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centers.rows(); ++j) {
    const double d = euclidean_distance(x, centers.row(j));
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

Matrix update_centers(const Matrix& x, std::span<const std::size_t> assignments, std::size_t n) {
  const std::size_t m = x.cols();
  Matrix centers(n, m);
  std::vector<std::size_t> counts(n, 0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto j = assignments[r];
    ++counts[j];
    auto c = centers.row(j);
    const auto row = x.row(r);
    for (std::size_t k = 0; k < m; ++k) c[k] += row[k];
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (counts[j] == 0) continue;
    for (double& v : centers.row(j)) v /= static_cast<double>(counts[j]);
  }

  std::vector<bool> used(x.rows(), false);
  for (std::size_t j = 0; j < n; ++j) {
    if (counts[j] != 0) continue;
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      if (used[r] || counts[assignments[r]] == 0) continue;
      const double d = squared_distance(x.row(r), centers.row(assignments[r]));
      if (d > far_d) {
        far_d = d;
        far = r;
      }
    }
    used[far] = true;
    std::copy(x.row(far).begin(), x.row(far).end(), centers.row(j).begin());
  }
  return centers;
}

double within_cluster_ss(const Matrix& x, const Matrix& centers,
                         std::span<const std::size_t> assignments) {
  double sum = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    sum += squared_distance(x.row(r), centers.row(assignments[r]));
  }
  return sum;
}

ClusterModel kmeans_fit(const Matrix& x, std::size_t n, std::uint64_t seed,
                        std::size_t max_iterations, CenterInit init) {
  if (n == 0) throw std::invalid_argument("k-means needs at least one cluster");
  if (x.rows() < n) {
    throw std::invalid_argument("k-means with " + std::to_string(n) + " clusters needs at least " +
                                std::to_string(n) + " rows, got " + std::to_string(x.rows()));
  }
  Rng rng(seed);
  ClusterModel model;
  model.centers = init == CenterInit::Uniform ? init_uniform(x, n, rng) : init_plus_plus(x, n, rng);
  model.assignments.assign(x.rows(), n);  // sentinel: nothing assigned yet

  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const auto j = assign(x.row(r), model.centers);
      if (j != model.assignments[r]) {
        model.assignments[r] = j;
        changed = true;
      }
    }
    ++model.iterations_run;
    model.inertia_trace.push_back(within_cluster_ss(x, model.centers, model.assignments));
    if (!changed) {
      model.converged = true;
      break;
    }
    model.centers = update_centers(x, model.assignments, n);
  }
  if (max_iterations == 0) {
    for (std::size_t r = 0; r < x.rows(); ++r) model.assignments[r] = assign(x.row(r), model.centers);
    model.inertia_trace.push_back(within_cluster_ss(x, model.centers, model.assignments));
  }

  model.counts.assign(n, 0);
  for (auto j : model.assignments) ++model.counts[j];
  return model;
}

ClusterModel kmeans_fit(const Matrix& x, const KMeansConfig& cfg, std::uint64_t seed) {
  if (cfg.restarts == 0) throw std::invalid_argument("k-means needs at least one restart");
  ClusterModel best;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    auto model = kmeans_fit(x, cfg.clusters, mix_seed(seed, r), cfg.max_iterations, cfg.init);
    if (r == 0 || model.inertia() < best.inertia()) best = std::move(model);
  }
  return best;
}

ClusterModel order_by_peak(const ClusterModel& model) {
  const std::size_t n = model.clusters();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto peak = [&](std::size_t j) {
    const auto row = model.centers.row(j);
    return *std::max_element(row.begin(), row.end());
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return peak(a) < peak(b); });
  std::vector<std::size_t> new_label(n);
  for (std::size_t k = 0; k < n; ++k) new_label[order[k]] = k;

  ClusterModel out = model;
  out.centers = model.centers.select_rows(order);
  for (auto& a : out.assignments) a = new_label[a];
  for (std::size_t k = 0; k < n; ++k) out.counts[k] = model.counts[order[k]];
  return out;
}

double permutation_agreement(std::span<const std::size_t> a, std::span<const std::size_t> b,
                             std::size_t n) {
  if (a.size() != b.size()) throw std::invalid_argument("labelings differ in length");
  if (n == 0 || n > 9) throw std::invalid_argument("permutation agreement supports 1..9 labels");
  if (a.empty()) return 1.0;
  // confusion[i][j]: rows labeled i in a and j in b.
  std::vector<std::size_t> confusion(n * n, 0);
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (a[r] >= n || b[r] >= n) throw std::invalid_argument("label out of range");
    ++confusion[a[r] * n + b[r]];
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += confusion[i * n + perm[i]];
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(a.size());
}

}  // namespace cmdnn
