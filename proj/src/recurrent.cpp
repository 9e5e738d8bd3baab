#include <algorithm>
#include <cmath>
#include <numeric>

#include "cmdnn/predictor.hpp"

namespace cmdnn {

namespace {

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

// out = W z + b, W is rows x cols row-major.
inline void affine(const double* w, const double* b, const double* z, std::size_t rows,
                   std::size_t cols, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w + r * cols;
    double acc = b[r];
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * z[c];
    out[r] = acc;
  }
}

// dW += da z^T, db += da, dz += W^T da.
inline void affine_backward(const double* w, const double* z, const double* da, std::size_t rows,
                            std::size_t cols, double* dw, double* db, double* dz) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double g = da[r];
    db[r] += g;
    const double* wr = w + r * cols;
    double* dwr = dw + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      dwr[c] += g * z[c];
      dz[c] += wr[c] * g;
    }
  }
}

// Each cell works on raw offsets into the flat parameter (and gradient)
// vector. A step cache holds everything the backward pass needs, including
// the hidden state after the step (last H entries).

class RnnCell {
 public:
  explicit RnnCell(const ParameterSet& p)
      : h_(p.hidden()), w_(p.spec("W_h").offset), b_(p.spec("b_h").offset) {}

  std::size_t hidden() const { return h_; }
  std::size_t stride() const { return 2 * h_ + 1; }
  static constexpr bool kHasCellState = false;

  void step(const double* p, const double* h_prev, const double*, double x, double* cache,
            double* c_out) const {
    double* z = cache;
    double* h = cache + h_ + 1;
    std::copy_n(h_prev, h_, z);
    z[h_] = x;
    affine(p + w_, p + b_, z, h_, h_ + 1, h);
    for (std::size_t j = 0; j < h_; ++j) h[j] = std::tanh(h[j]);
    (void)c_out;
  }

  // Returns dL/dx for the step; writes dL/dh_{t-1} into dh_prev.
  double backward(const double* p, const double* cache, const double* dh, const double*,
                  double* dh_prev, double*, double* g, double* scratch) const {
    const double* z = cache;
    const double* h = cache + h_ + 1;
    double* da = scratch;
    double* dz = scratch + h_;
    for (std::size_t j = 0; j < h_; ++j) da[j] = dh[j] * (1.0 - h[j] * h[j]);
    std::fill_n(dz, h_ + 1, 0.0);
    affine_backward(p + w_, z, da, h_, h_ + 1, g + w_, g + b_, dz);
    std::copy_n(dz, h_, dh_prev);
    return dz[h_];
  }

 private:
  std::size_t h_, w_, b_;
};

class LstmCell {
 public:
  explicit LstmCell(const ParameterSet& p) : h_(p.hidden()) {
    const char* gates[] = {"f", "i", "C", "o"};
    for (int k = 0; k < 4; ++k) {
      w_[k] = p.spec(std::string("W_") + gates[k]).offset;
      b_[k] = p.spec(std::string("b_") + gates[k]).offset;
    }
  }

  std::size_t hidden() const { return h_; }
  // z(H+1) c_prev f i g o c tanh(c) h
  std::size_t stride() const { return (h_ + 1) + 8 * h_; }
  static constexpr bool kHasCellState = true;

  void step(const double* p, const double* h_prev, const double* c_prev, double x, double* cache,
            double* c_out) const {
    const std::size_t h = h_;
    double* z = cache;
    double* cp = z + h + 1;
    double* f = cp + h;
    double* i = f + h;
    double* g = i + h;
    double* o = g + h;
    double* c = o + h;
    double* tc = c + h;
    double* hs = tc + h;
    std::copy_n(h_prev, h, z);
    z[h] = x;
    std::copy_n(c_prev, h, cp);
    affine(p + w_[0], p + b_[0], z, h, h + 1, f);
    affine(p + w_[1], p + b_[1], z, h, h + 1, i);
    affine(p + w_[2], p + b_[2], z, h, h + 1, g);
    affine(p + w_[3], p + b_[3], z, h, h + 1, o);
    for (std::size_t j = 0; j < h; ++j) {
      f[j] = sigmoid(f[j]);
      i[j] = sigmoid(i[j]);
      g[j] = std::tanh(g[j]);
      o[j] = sigmoid(o[j]);
      c[j] = f[j] * cp[j] + i[j] * g[j];
      tc[j] = std::tanh(c[j]);
      hs[j] = o[j] * tc[j];
    }
    std::copy_n(c, h, c_out);
  }

  double backward(const double* p, const double* cache, const double* dh, const double* dc,
                  double* dh_prev, double* dc_prev, double* grad, double* scratch) const {
    const std::size_t h = h_;
    const double* z = cache;
    const double* cp = z + h + 1;
    const double* f = cp + h;
    const double* i = f + h;
    const double* g = i + h;
    const double* o = g + h;
    const double* tc = o + 2 * h;
    double* da_f = scratch;
    double* da_i = da_f + h;
    double* da_g = da_i + h;
    double* da_o = da_g + h;
    double* dz = da_o + h;
    for (std::size_t j = 0; j < h; ++j) {
      const double d_o = dh[j] * tc[j];
      const double dct = dc[j] + dh[j] * o[j] * (1.0 - tc[j] * tc[j]);
      da_f[j] = dct * cp[j] * f[j] * (1.0 - f[j]);
      da_i[j] = dct * g[j] * i[j] * (1.0 - i[j]);
      da_g[j] = dct * i[j] * (1.0 - g[j] * g[j]);
      da_o[j] = d_o * o[j] * (1.0 - o[j]);
      dc_prev[j] = dct * f[j];
    }
    std::fill_n(dz, h + 1, 0.0);
    const double* da[] = {da_f, da_i, da_g, da_o};
    for (int k = 0; k < 4; ++k) {
      affine_backward(p + w_[k], z, da[k], h, h + 1, grad + w_[k], grad + b_[k], dz);
    }
    std::copy_n(dz, h, dh_prev);
    return dz[h];
  }

 private:
  std::size_t h_;
  std::size_t w_[4];
  std::size_t b_[4];
};

// h_t = (1 - u) * n + u * h_{t-1}, n = tanh(W_n [r * h_{t-1}, x] + b_n).
class GruCell {
 public:
  explicit GruCell(const ParameterSet& p)
      : h_(p.hidden()),
        wz_(p.spec("W_z").offset),
        wr_(p.spec("W_r").offset),
        wn_(p.spec("W_n").offset),
        bz_(p.spec("b_z").offset),
        br_(p.spec("b_r").offset),
        bn_(p.spec("b_n").offset) {}

  std::size_t hidden() const { return h_; }
  // z(H+1) u r n q(H+1) h
  std::size_t stride() const { return 2 * (h_ + 1) + 4 * h_; }
  static constexpr bool kHasCellState = false;

  void step(const double* p, const double* h_prev, const double*, double x, double* cache,
            double*) const {
    const std::size_t h = h_;
    double* z = cache;
    double* u = z + h + 1;
    double* r = u + h;
    double* n = r + h;
    double* q = n + h;
    double* hs = q + h + 1;
    std::copy_n(h_prev, h, z);
    z[h] = x;
    affine(p + wz_, p + bz_, z, h, h + 1, u);
    affine(p + wr_, p + br_, z, h, h + 1, r);
    for (std::size_t j = 0; j < h; ++j) {
      u[j] = sigmoid(u[j]);
      r[j] = sigmoid(r[j]);
      q[j] = r[j] * z[j];
    }
    q[h] = x;
    affine(p + wn_, p + bn_, q, h, h + 1, n);
    for (std::size_t j = 0; j < h; ++j) {
      n[j] = std::tanh(n[j]);
      hs[j] = (1.0 - u[j]) * n[j] + u[j] * z[j];
    }
  }

  double backward(const double* p, const double* cache, const double* dh, const double*,
                  double* dh_prev, double*, double* grad, double* scratch) const {
    const std::size_t h = h_;
    const double* z = cache;
    const double* u = z + h + 1;
    const double* r = u + h;
    const double* n = r + h;
    const double* q = n + h;
    double* da_n = scratch;
    double* da_u = da_n + h;
    double* da_r = da_u + h;
    double* dq = da_r + h;
    double* dz = dq + h + 1;
    for (std::size_t j = 0; j < h; ++j) {
      da_n[j] = dh[j] * (1.0 - u[j]) * (1.0 - n[j] * n[j]);
      da_u[j] = dh[j] * (z[j] - n[j]) * u[j] * (1.0 - u[j]);
    }
    std::fill_n(dq, h + 1, 0.0);
    affine_backward(p + wn_, q, da_n, h, h + 1, grad + wn_, grad + bn_, dq);
    for (std::size_t j = 0; j < h; ++j) da_r[j] = dq[j] * z[j] * r[j] * (1.0 - r[j]);
    std::fill_n(dz, h + 1, 0.0);
    affine_backward(p + wz_, z, da_u, h, h + 1, grad + wz_, grad + bz_, dz);
    affine_backward(p + wr_, z, da_r, h, h + 1, grad + wr_, grad + br_, dz);
    for (std::size_t j = 0; j < h; ++j) dh_prev[j] = dz[j] + dq[j] * r[j] + dh[j] * u[j];
    return dz[h] + dq[h];
  }

 private:
  std::size_t h_, wz_, wr_, wn_, bz_, br_, bn_;
};

// Encoder-then-autoregressive-decoder unrolling shared by all cells.
template <class Cell>
class Unroller {
 public:
  explicit Unroller(const ParameterSet& params)
      : params_(params),
        cell_(params),
        h_(params.hidden()),
        wy_(params.spec("W_y").offset),
        by_(params.spec("b_y").offset) {}

  // Runs one sequence. With `keep_cache` every step's cache is retained for
  // backward(); otherwise a single slot is reused. `teacher` (optional) holds
  // ground-truth targets to feed the decoder instead of predictions.
  void run(std::span<const double> input, std::size_t t_out, const double* teacher, double* y_hat,
           bool keep_cache) {
    const std::size_t t_in = input.size();
    const std::size_t steps = t_in + t_out - 1;
    const std::size_t stride = cell_.stride();
    cache_.resize((keep_cache ? steps : 1) * stride);
    h_state_.assign(h_, 0.0);
    c_state_.assign(h_, 0.0);
    c_next_.assign(h_, 0.0);
    const double* p = params_.flat().data();
    for (std::size_t s = 0; s < steps; ++s) {
      double x;
      if (s < t_in) {
        x = input[s];
      } else {
        x = teacher ? teacher[s - t_in] : y_hat[s - t_in];
      }
      double* cache = cache_.data() + (keep_cache ? s : 0) * stride;
      cell_.step(p, h_state_.data(), c_state_.data(), x, cache, c_next_.data());
      const double* h = cache + stride - h_;
      std::copy_n(h, h_, h_state_.data());
      if constexpr (Cell::kHasCellState) std::swap(c_state_, c_next_);
      if (s + 1 >= t_in) {
        double a = p[by_];
        for (std::size_t j = 0; j < h_; ++j) a += p[wy_ + j] * h[j];
        const double y = sigmoid(a);
        if (!std::isfinite(y)) throw DivergenceError("non-finite prediction in forward pass");
        y_hat[s + 1 - t_in] = y;
      }
    }
  }

  // Accumulates into `grad` the gradient of sum_k coef * (y_hat_k - y_k)^2
  // for the sequence last passed to run(..., keep_cache = true).
  void backward(std::size_t t_in, std::size_t t_out, const double* y, const double* y_hat,
                double coef, bool teacher, double* grad) {
    const std::size_t steps = t_in + t_out - 1;
    const std::size_t stride = cell_.stride();
    const double* p = params_.flat().data();
    std::vector<double> dh(h_, 0.0), dc(h_, 0.0), dh_prev(h_, 0.0), dc_prev(h_, 0.0);
    scratch_.assign(6 * h_ + 4, 0.0);
    double dx_next = 0.0;
    for (std::size_t s = steps; s-- > 0;) {
      const double* cache = cache_.data() + s * stride;
      const double* h = cache + stride - h_;
      if (s + 1 >= t_in) {
        const std::size_t k = s + 1 - t_in;
        double dy = coef * 2.0 * (y_hat[k] - y[k]);
        // Step s + 1 consumed y_hat[k] as its input.
        if (!teacher && s + 1 < steps) dy += dx_next;
        const double da = dy * y_hat[k] * (1.0 - y_hat[k]);
        grad[by_] += da;
        for (std::size_t j = 0; j < h_; ++j) {
          grad[wy_ + j] += da * h[j];
          dh[j] += p[wy_ + j] * da;
        }
      }
      dx_next = cell_.backward(p, cache, dh.data(), dc.data(), dh_prev.data(), dc_prev.data(),
                               grad, scratch_.data());
      std::swap(dh, dh_prev);
      if constexpr (Cell::kHasCellState) std::swap(dc, dc_prev);
    }
  }

 private:
  const ParameterSet& params_;
  Cell cell_;
  std::size_t h_, wy_, by_;
  std::vector<double> cache_, h_state_, c_state_, c_next_, scratch_;
};

template <class Fn>
decltype(auto) with_unroller(const ParameterSet& params, Fn&& fn) {
  switch (params.kind()) {
    case CellKind::RNN: {
      Unroller<RnnCell> u(params);
      return fn(u);
    }
    case CellKind::LSTM: {
      Unroller<LstmCell> u(params);
      return fn(u);
    }
    case CellKind::GRU: {
      Unroller<GruCell> u(params);
      return fn(u);
    }
  }
  throw std::logic_error("unknown cell kind");
}

void check_window(std::size_t t_in, std::size_t t_out) {
  if (t_in == 0 || t_out == 0) throw std::invalid_argument("input and output windows must be non-empty");
}

}  // namespace

std::vector<double> forward(const ParameterSet& params, std::span<const double> input,
                            std::size_t output_steps) {
  check_window(input.size(), output_steps);
  std::vector<double> y_hat(output_steps);
  with_unroller(params, [&](auto& u) { u.run(input, output_steps, nullptr, y_hat.data(), false); });
  return y_hat;
}

Matrix predict(const ParameterSet& params, const Matrix& inputs, std::size_t output_steps) {
  check_window(inputs.cols(), output_steps);
  Matrix out(inputs.rows(), output_steps);
  with_unroller(params, [&](auto& u) {
    for (std::size_t r = 0; r < inputs.rows(); ++r) {
      u.run(inputs.row(r), output_steps, nullptr, out.row(r).data(), false);
    }
  });
  return out;
}

double rmse(const Matrix& y, const Matrix& y_hat) {
  if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols()) {
    throw std::invalid_argument("rmse of matrices with different shapes");
  }
  if (y.empty()) throw std::invalid_argument("rmse of empty matrices");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.data().size(); ++i) {
    const double d = y.data()[i] - y_hat.data()[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(y.data().size()));
}

LossGradient gradient(const ParameterSet& params, const Matrix& inputs, const Matrix& targets,
                      std::span<const std::size_t> rows, bool teacher_forcing) {
  if (rows.empty()) throw std::invalid_argument("gradient of an empty batch");
  if (inputs.rows() != targets.rows()) throw std::invalid_argument("inputs and targets differ in rows");
  const std::size_t t_in = inputs.cols();
  const std::size_t t_out = targets.cols();
  check_window(t_in, t_out);

  LossGradient out;
  out.grad.assign(params.size(), 0.0);
  const double coef = 1.0 / static_cast<double>(rows.size() * t_out);
  std::vector<double> y_hat(t_out);
  with_unroller(params, [&](auto& u) {
    for (auto r : rows) {
      const double* y = targets.row(r).data();
      u.run(inputs.row(r), t_out, teacher_forcing ? y : nullptr, y_hat.data(), true);
      for (std::size_t k = 0; k < t_out; ++k) {
        const double d = y_hat[k] - y[k];
        out.loss += coef * d * d;
      }
      u.backward(t_in, t_out, y, y_hat.data(), coef, teacher_forcing, out.grad.data());
    }
  });
  if (!std::isfinite(out.loss) ||
      !std::all_of(out.grad.begin(), out.grad.end(), [](double g) { return std::isfinite(g); })) {
    throw DivergenceError("non-finite loss or gradient");
  }
  return out;
}

LossGradient gradient(const ParameterSet& params, const SupervisedDataset& batch,
                      bool teacher_forcing) {
  std::vector<std::size_t> rows(batch.size());
  std::iota(rows.begin(), rows.end(), 0);
  return gradient(params, batch.inputs, batch.targets, rows, teacher_forcing);
}

double mse_loss(const ParameterSet& params, const Matrix& inputs, const Matrix& targets,
                std::span<const std::size_t> rows, bool teacher_forcing) {
  const std::size_t t_out = targets.cols();
  check_window(inputs.cols(), t_out);
  double loss = 0.0;
  const double coef = 1.0 / static_cast<double>(rows.size() * t_out);
  std::vector<double> y_hat(t_out);
  with_unroller(params, [&](auto& u) {
    for (auto r : rows) {
      const double* y = targets.row(r).data();
      u.run(inputs.row(r), t_out, teacher_forcing ? y : nullptr, y_hat.data(), false);
      for (std::size_t k = 0; k < t_out; ++k) {
        const double d = y_hat[k] - y[k];
        loss += coef * d * d;
      }
    }
  });
  return loss;
}

}  // namespace cmdnn
