#pragma once

// Independent reference computations used only by tests. None of these call
// into the library code paths they are compared against.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "cmdnn/matrix.hpp"
#include "cmdnn/predictor.hpp"
#include "cmdnn/random.hpp"

namespace oracle {

inline double rmse(const cmdnn::Matrix& y, const cmdnn::Matrix& y_hat) {
  long double total = 0.0L;
  for (std::size_t s = 0; s < y.rows(); ++s) {
    for (std::size_t t = 0; t < y.cols(); ++t) {
      total += std::pow(static_cast<long double>(y(s, t)) - y_hat(s, t), 2);
    }
  }
  return static_cast<double>(std::sqrt(total / (y.rows() * y.cols())));
}

inline double distance(const std::vector<double>& x, const std::vector<double>& c) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) total += std::pow(static_cast<long double>(x[i]) - c[i], 2);
  return static_cast<double>(std::sqrt(total));
}

inline std::size_t argmin_center(const std::vector<double>& x, const std::vector<std::vector<double>>& centers) {
  std::vector<double> d;
  for (const auto& c : centers) d.push_back(distance(x, c));
  return static_cast<std::size_t>(std::min_element(d.begin(), d.end()) - d.begin());
}

// Column-by-column mean of the rows carrying each label.
inline std::vector<std::vector<double>> cluster_means(const cmdnn::Matrix& x,
                                                      const std::vector<std::size_t>& labels,
                                                      std::size_t n) {
  std::vector<std::vector<double>> means(n, std::vector<double>(x.cols(), 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      long double sum = 0.0L;
      std::size_t count = 0;
      for (std::size_t r = 0; r < x.rows(); ++r) {
        if (labels[r] == j) {
          sum += x(r, c);
          ++count;
        }
      }
      means[j][c] = count ? static_cast<double>(sum / count) : 0.0;
    }
  }
  return means;
}

inline std::vector<bool> decode_mask(const std::vector<double>& position, std::size_t target,
                                     std::size_t n) {
  std::vector<bool> mask(n);
  std::size_t coord = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k == target) {
      mask[k] = true;
    } else {
      mask[k] = !std::signbit(position[coord]) && position[coord] != 0.0;
      ++coord;
    }
  }
  return mask;
}

inline std::vector<double> blend(const std::vector<std::vector<double>>& sets,
                                 const std::vector<bool>& mask, const std::vector<double>& alpha) {
  std::vector<double> out(sets[0].size(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < sets.size(); ++k) {
      if (mask[k]) out[i] += alpha[k] * sets[k][i];
    }
  }
  return out;
}

// Central finite differences of `f` around `x`.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double step) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f(x);
    x[i] = saved - step;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

// |a - b| / max(|a|, |b|, 1e-6): relative error with an absolute floor so
// coordinates whose true gradient is ~0 are not judged on round-off.
inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

inline double mean(const std::vector<double>& v) {
  long double s = 0.0L;
  for (double x : v) s += x;
  return static_cast<double>(s / v.size());
}

inline double population_std(const std::vector<double>& v) {
  const double m = mean(v);
  long double s = 0.0L;
  for (double x : v) s += (x - m) * (x - m);
  return static_cast<double>(std::sqrt(s / v.size()));
}

inline cmdnn::Matrix random_matrix(cmdnn::Rng& rng, std::size_t rows, std::size_t cols,
                                   double lo = -1.0, double hi = 1.0) {
  cmdnn::Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

}  // namespace oracle
