#include "serb/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace serb::nn {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_rank3(const Tensor& x, std::size_t features, const char* who) {
  if (x.rank() != 3 || x.dim(2) != features) {
    throw std::invalid_argument(std::string(who) + ": expected (batch, frames, " +
                                std::to_string(features) + "), got " + x.shape_string());
  }
}

void add_row_bias(double* rows, std::size_t n_rows, std::size_t width, const double* bias) {
  for (std::size_t r = 0; r < n_rows; ++r) {
    double* row = rows + r * width;
    for (std::size_t j = 0; j < width; ++j) row[j] += bias[j];
  }
}

void accumulate_column_sums(const double* rows, std::size_t n_rows, std::size_t width,
                            double* out) {
  for (std::size_t r = 0; r < n_rows; ++r) {
    const double* row = rows + r * width;
    for (std::size_t j = 0; j < width; ++j) out[j] += row[j];
  }
}

}  // namespace

void glorot_uniform(Param& p, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : p.value) v = rng.uniform(-limit, limit);
}

// ---------------------------------------------------------------- Dense

Dense::Dense(std::size_t in, std::size_t out, Activation act)
    : in_(in), out_(out), act_(act), weight_("kernel", {in, out}), bias_("bias", {out}) {}

void Dense::initialize(Rng& rng) {
  glorot_uniform(weight_, in_, out_, rng);
  std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
}

Tensor Dense::forward(const Tensor& x, Mode, Rng&) {
  require_rank3(x, in_, "dense");
  input_ = x;
  const std::size_t rows = x.dim(0) * x.dim(1);
  Tensor y({x.dim(0), x.dim(1), out_});
  gemm(false, false, rows, out_, in_, 1.0, x.ptr(), in_, weight_.value.data(), out_, 0.0, y.ptr(),
       out_);
  add_row_bias(y.ptr(), rows, out_, bias_.value.data());
  if (act_ == Activation::kRelu) {
    for (auto& v : y.data) v = std::max(v, 0.0);
  }
  output_ = y;
  return y;
}

Tensor Dense::backward(const Tensor& grad_out) {
  const std::size_t rows = input_.dim(0) * input_.dim(1);
  if (grad_out.size() != rows * out_) throw std::invalid_argument("dense: gradient shape mismatch");
  Tensor dz = grad_out;
  if (act_ == Activation::kRelu) {
    for (std::size_t i = 0; i < dz.size(); ++i) {
      if (output_.data[i] <= 0.0) dz.data[i] = 0.0;
    }
  }
  gemm(true, false, in_, out_, rows, 1.0, input_.ptr(), in_, dz.ptr(), out_, 1.0,
       weight_.grad.data(), out_);
  accumulate_column_sums(dz.ptr(), rows, out_, bias_.grad.data());
  Tensor dx(input_.shape);
  gemm(false, true, rows, in_, out_, 1.0, dz.ptr(), out_, weight_.value.data(), out_, 0.0,
       dx.ptr(), in_);
  return dx;
}

// ---------------------------------------------------------------- LSTM

Lstm::Lstm(std::size_t in, std::size_t hidden, bool return_sequences)
    : in_(in),
      hidden_(hidden),
      return_sequences_(return_sequences),
      kernel_("kernel", {in, 4 * hidden}),
      recurrent_("recurrent", {hidden, 4 * hidden}),
      bias_("bias", {4 * hidden}) {}

void Lstm::initialize(Rng& rng) {
  glorot_uniform(kernel_, in_, 4 * hidden_, rng);
  glorot_uniform(recurrent_, hidden_, 4 * hidden_, rng);
  std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
  std::fill(bias_.value.begin() + static_cast<std::ptrdiff_t>(hidden_),
            bias_.value.begin() + static_cast<std::ptrdiff_t>(2 * hidden_), 1.0);
}

Tensor Lstm::forward(const Tensor& x, Mode, Rng&) {
  require_rank3(x, in_, "lstm");
  input_ = x;
  batch_ = x.dim(0);
  steps_ = x.dim(1);
  const std::size_t h4 = 4 * hidden_;
  const std::size_t H = hidden_;

  std::vector<double> xw(batch_ * steps_ * h4);
  gemm(false, false, batch_ * steps_, h4, in_, 1.0, x.ptr(), in_, kernel_.value.data(), h4, 0.0,
       xw.data(), h4);

  gates_.assign(steps_ * batch_ * h4, 0.0);
  cells_.assign(steps_ * batch_ * H, 0.0);
  hiddens_.assign(steps_ * batch_ * H, 0.0);
  std::vector<double> z(batch_ * h4);
  std::vector<double> h_prev(batch_ * H, 0.0);
  std::vector<double> c_prev(batch_ * H, 0.0);

  for (std::size_t t = 0; t < steps_; ++t) {
    for (std::size_t b = 0; b < batch_; ++b) {
      const double* src = xw.data() + (b * steps_ + t) * h4;
      std::copy(src, src + h4, z.data() + b * h4);
    }
    add_row_bias(z.data(), batch_, h4, bias_.value.data());
    gemm(false, false, batch_, h4, H, 1.0, h_prev.data(), H, recurrent_.value.data(), h4, 1.0,
         z.data(), h4);

    double* g_t = gates_.data() + t * batch_ * h4;
    double* c_t = cells_.data() + t * batch_ * H;
    double* h_t = hiddens_.data() + t * batch_ * H;
    for (std::size_t b = 0; b < batch_; ++b) {
      const double* zb = z.data() + b * h4;
      double* gb = g_t + b * h4;
      for (std::size_t j = 0; j < H; ++j) {
        const double i_gate = sigmoid(zb[j]);
        const double f_gate = sigmoid(zb[H + j]);
        const double cand = std::tanh(zb[2 * H + j]);
        const double o_gate = sigmoid(zb[3 * H + j]);
        gb[j] = i_gate;
        gb[H + j] = f_gate;
        gb[2 * H + j] = cand;
        gb[3 * H + j] = o_gate;
        const double c = f_gate * c_prev[b * H + j] + i_gate * cand;
        c_t[b * H + j] = c;
        h_t[b * H + j] = o_gate * std::tanh(c);
      }
    }
    std::copy(c_t, c_t + batch_ * H, c_prev.begin());
    std::copy(h_t, h_t + batch_ * H, h_prev.begin());
  }

  if (!return_sequences_) {
    Tensor y({batch_, 1, H});
    const double* last = hiddens_.data() + (steps_ - 1) * batch_ * H;
    std::copy(last, last + batch_ * H, y.data.begin());
    return y;
  }
  Tensor y({batch_, steps_, H});
  for (std::size_t t = 0; t < steps_; ++t) {
    for (std::size_t b = 0; b < batch_; ++b) {
      const double* src = hiddens_.data() + (t * batch_ + b) * H;
      std::copy(src, src + H, y.ptr() + (b * steps_ + t) * H);
    }
  }
  return y;
}

Tensor Lstm::backward(const Tensor& grad_out) {
  const std::size_t H = hidden_;
  const std::size_t h4 = 4 * H;
  const std::size_t out_steps = return_sequences_ ? steps_ : 1;
  if (grad_out.size() != batch_ * out_steps * H) {
    throw std::invalid_argument("lstm: gradient shape mismatch");
  }

  std::vector<double> dz_all(batch_ * steps_ * h4, 0.0);
  std::vector<double> dz(batch_ * h4);
  std::vector<double> dh(batch_ * H);
  std::vector<double> dh_next(batch_ * H, 0.0);
  std::vector<double> dc_next(batch_ * H, 0.0);
  const std::vector<double> zeros(batch_ * H, 0.0);

  for (std::size_t t = steps_; t-- > 0;) {
    for (std::size_t b = 0; b < batch_; ++b) {
      for (std::size_t j = 0; j < H; ++j) {
        double g = 0.0;
        if (return_sequences_) {
          g = grad_out.data[(b * steps_ + t) * H + j];
        } else if (t == steps_ - 1) {
          g = grad_out.data[b * H + j];
        }
        dh[b * H + j] = g + dh_next[b * H + j];
      }
    }
    const double* g_t = gates_.data() + t * batch_ * h4;
    const double* c_t = cells_.data() + t * batch_ * H;
    const double* c_prev = t > 0 ? cells_.data() + (t - 1) * batch_ * H : zeros.data();
    const double* h_prev = t > 0 ? hiddens_.data() + (t - 1) * batch_ * H : zeros.data();

    for (std::size_t b = 0; b < batch_; ++b) {
      const double* gb = g_t + b * h4;
      double* dzb = dz.data() + b * h4;
      for (std::size_t j = 0; j < H; ++j) {
        const double i_gate = gb[j];
        const double f_gate = gb[H + j];
        const double cand = gb[2 * H + j];
        const double o_gate = gb[3 * H + j];
        const double tc = std::tanh(c_t[b * H + j]);
        const double dhv = dh[b * H + j];
        const double d_o = dhv * tc;
        const double dc = dhv * o_gate * (1.0 - tc * tc) + dc_next[b * H + j];
        const double d_i = dc * cand;
        const double d_g = dc * i_gate;
        const double d_f = dc * c_prev[b * H + j];
        dc_next[b * H + j] = dc * f_gate;
        dzb[j] = d_i * i_gate * (1.0 - i_gate);
        dzb[H + j] = d_f * f_gate * (1.0 - f_gate);
        dzb[2 * H + j] = d_g * (1.0 - cand * cand);
        dzb[3 * H + j] = d_o * o_gate * (1.0 - o_gate);
      }
      std::copy(dzb, dzb + h4, dz_all.data() + (b * steps_ + t) * h4);
    }
    gemm(true, false, H, h4, batch_, 1.0, h_prev, H, dz.data(), h4, 1.0, recurrent_.grad.data(),
         h4);
    gemm(false, true, batch_, H, h4, 1.0, dz.data(), h4, recurrent_.value.data(), h4, 0.0,
         dh_next.data(), H);
  }

  const std::size_t rows = batch_ * steps_;
  gemm(true, false, in_, h4, rows, 1.0, input_.ptr(), in_, dz_all.data(), h4, 1.0,
       kernel_.grad.data(), h4);
  accumulate_column_sums(dz_all.data(), rows, h4, bias_.grad.data());
  Tensor dx(input_.shape);
  gemm(false, true, rows, in_, h4, 1.0, dz_all.data(), h4, kernel_.value.data(), h4, 0.0,
       dx.ptr(), in_);
  return dx;
}

// ---------------------------------------------------------------- GRU

Gru::Gru(std::size_t in, std::size_t hidden, bool return_sequences)
    : in_(in),
      hidden_(hidden),
      return_sequences_(return_sequences),
      kernel_("kernel", {in, 3 * hidden}),
      recurrent_("recurrent", {hidden, 3 * hidden}),
      bias_("bias", {3 * hidden}) {}

void Gru::initialize(Rng& rng) {
  glorot_uniform(kernel_, in_, 3 * hidden_, rng);
  glorot_uniform(recurrent_, hidden_, 3 * hidden_, rng);
  std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
}

Tensor Gru::forward(const Tensor& x, Mode, Rng&) {
  require_rank3(x, in_, "gru");
  input_ = x;
  batch_ = x.dim(0);
  steps_ = x.dim(1);
  const std::size_t H = hidden_;
  const std::size_t h3 = 3 * H;

  std::vector<double> xw(batch_ * steps_ * h3);
  gemm(false, false, batch_ * steps_, h3, in_, 1.0, x.ptr(), in_, kernel_.value.data(), h3, 0.0,
       xw.data(), h3);

  gates_.assign(steps_ * batch_ * h3, 0.0);
  reset_h_.assign(steps_ * batch_ * H, 0.0);
  hiddens_.assign(steps_ * batch_ * H, 0.0);
  std::vector<double> h_prev(batch_ * H, 0.0);
  std::vector<double> hu(batch_ * 2 * H);
  std::vector<double> rh_u(batch_ * H);

  for (std::size_t t = 0; t < steps_; ++t) {
    gemm(false, false, batch_, 2 * H, H, 1.0, h_prev.data(), H, recurrent_.value.data(), h3, 0.0,
         hu.data(), 2 * H);
    double* g_t = gates_.data() + t * batch_ * h3;
    double* rh_t = reset_h_.data() + t * batch_ * H;
    for (std::size_t b = 0; b < batch_; ++b) {
      const double* xb = xw.data() + (b * steps_ + t) * h3;
      double* gb = g_t + b * h3;
      for (std::size_t j = 0; j < H; ++j) {
        const double z = sigmoid(xb[j] + bias_.value[j] + hu[b * 2 * H + j]);
        const double r = sigmoid(xb[H + j] + bias_.value[H + j] + hu[b * 2 * H + H + j]);
        gb[j] = z;
        gb[H + j] = r;
        rh_t[b * H + j] = r * h_prev[b * H + j];
      }
    }
    gemm(false, false, batch_, H, H, 1.0, rh_t, H, recurrent_.value.data() + 2 * H, h3, 0.0,
         rh_u.data(), H);
    double* h_t = hiddens_.data() + t * batch_ * H;
    for (std::size_t b = 0; b < batch_; ++b) {
      const double* xb = xw.data() + (b * steps_ + t) * h3;
      double* gb = g_t + b * h3;
      for (std::size_t j = 0; j < H; ++j) {
        const double n = std::tanh(xb[2 * H + j] + bias_.value[2 * H + j] + rh_u[b * H + j]);
        gb[2 * H + j] = n;
        const double z = gb[j];
        h_t[b * H + j] = (1.0 - z) * h_prev[b * H + j] + z * n;
      }
    }
    std::copy(h_t, h_t + batch_ * H, h_prev.begin());
  }

  if (!return_sequences_) {
    Tensor y({batch_, 1, H});
    const double* last = hiddens_.data() + (steps_ - 1) * batch_ * H;
    std::copy(last, last + batch_ * H, y.data.begin());
    return y;
  }
  Tensor y({batch_, steps_, H});
  for (std::size_t t = 0; t < steps_; ++t) {
    for (std::size_t b = 0; b < batch_; ++b) {
      const double* src = hiddens_.data() + (t * batch_ + b) * H;
      std::copy(src, src + H, y.ptr() + (b * steps_ + t) * H);
    }
  }
  return y;
}

Tensor Gru::backward(const Tensor& grad_out) {
  const std::size_t H = hidden_;
  const std::size_t h3 = 3 * H;
  const std::size_t out_steps = return_sequences_ ? steps_ : 1;
  if (grad_out.size() != batch_ * out_steps * H) {
    throw std::invalid_argument("gru: gradient shape mismatch");
  }

  std::vector<double> dz_all(batch_ * steps_ * h3, 0.0);
  std::vector<double> dzr(batch_ * 2 * H);
  std::vector<double> dn(batch_ * H);
  std::vector<double> d_rh(batch_ * H);
  std::vector<double> dh(batch_ * H);
  std::vector<double> dh_next(batch_ * H, 0.0);
  const std::vector<double> zeros(batch_ * H, 0.0);
  double* du = recurrent_.grad.data();

  for (std::size_t t = steps_; t-- > 0;) {
    for (std::size_t b = 0; b < batch_; ++b) {
      for (std::size_t j = 0; j < H; ++j) {
        double g = 0.0;
        if (return_sequences_) {
          g = grad_out.data[(b * steps_ + t) * H + j];
        } else if (t == steps_ - 1) {
          g = grad_out.data[b * H + j];
        }
        dh[b * H + j] = g + dh_next[b * H + j];
      }
    }
    const double* g_t = gates_.data() + t * batch_ * h3;
    const double* rh_t = reset_h_.data() + t * batch_ * H;
    const double* h_prev = t > 0 ? hiddens_.data() + (t - 1) * batch_ * H : zeros.data();

    // Candidate path.
    for (std::size_t b = 0; b < batch_; ++b) {
      const double* gb = g_t + b * h3;
      for (std::size_t j = 0; j < H; ++j) {
        const double z = gb[j];
        const double n = gb[2 * H + j];
        dn[b * H + j] = dh[b * H + j] * z * (1.0 - n * n);
      }
    }
    gemm(false, true, batch_, H, H, 1.0, dn.data(), H, recurrent_.value.data() + 2 * H, h3, 0.0,
         d_rh.data(), H);
    gemm(true, false, H, H, batch_, 1.0, rh_t, H, dn.data(), H, 1.0, du + 2 * H, h3);

    for (std::size_t b = 0; b < batch_; ++b) {
      const double* gb = g_t + b * h3;
      for (std::size_t j = 0; j < H; ++j) {
        const double z = gb[j];
        const double r = gb[H + j];
        const double n = gb[2 * H + j];
        const double hp = h_prev[b * H + j];
        const double dz = dh[b * H + j] * (n - hp);
        const double dr = d_rh[b * H + j] * hp;
        dzr[b * 2 * H + j] = dz * z * (1.0 - z);
        dzr[b * 2 * H + H + j] = dr * r * (1.0 - r);
        dh_next[b * H + j] = dh[b * H + j] * (1.0 - z) + d_rh[b * H + j] * r;
      }
      double* row = dz_all.data() + (b * steps_ + t) * h3;
      std::copy(dzr.data() + b * 2 * H, dzr.data() + (b + 1) * 2 * H, row);
      std::copy(dn.data() + b * H, dn.data() + (b + 1) * H, row + 2 * H);
    }
    gemm(true, false, H, 2 * H, batch_, 1.0, h_prev, H, dzr.data(), 2 * H, 1.0, du, h3);
    gemm(false, true, batch_, H, 2 * H, 1.0, dzr.data(), 2 * H, recurrent_.value.data(), h3, 1.0,
         dh_next.data(), H);
  }

  const std::size_t rows = batch_ * steps_;
  gemm(true, false, in_, h3, rows, 1.0, input_.ptr(), in_, dz_all.data(), h3, 1.0,
       kernel_.grad.data(), h3);
  accumulate_column_sums(dz_all.data(), rows, h3, bias_.grad.data());
  Tensor dx(input_.shape);
  gemm(false, true, rows, in_, h3, 1.0, dz_all.data(), h3, kernel_.value.data(), h3, 0.0,
       dx.ptr(), in_);
  return dx;
}

// ---------------------------------------------------------------- Conv1d

Conv1d::Conv1d(std::size_t in, std::size_t out, std::size_t kernel_len, std::size_t stride,
               Activation act)
    : in_(in),
      out_(out),
      kernel_len_(kernel_len),
      stride_(stride),
      act_(act),
      kernel_("kernel", {kernel_len, in, out}),
      bias_("bias", {out}) {
  if (kernel_len == 0 || stride == 0) {
    throw std::invalid_argument("conv1d: kernel length and stride must be positive");
  }
}

std::size_t Conv1d::output_frames(std::size_t frames, std::size_t kernel_len, std::size_t stride) {
  if (frames < kernel_len) return 0;
  return (frames - kernel_len) / stride + 1;
}

void Conv1d::initialize(Rng& rng) {
  glorot_uniform(kernel_, kernel_len_ * in_, kernel_len_ * out_, rng);
  std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
}

Tensor Conv1d::forward(const Tensor& x, Mode, Rng&) {
  require_rank3(x, in_, "conv1d");
  const std::size_t batch = x.dim(0);
  const std::size_t frames = x.dim(1);
  if (frames < kernel_len_) {
    throw std::invalid_argument("conv1d: sequence of " + std::to_string(frames) +
                                " frames is shorter than kernel " + std::to_string(kernel_len_));
  }
  input_ = x;
  const std::size_t t_out = output_frames(frames, kernel_len_, stride_);
  const std::size_t patch = kernel_len_ * in_;
  Tensor y({batch, t_out, out_});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = x.ptr() + b * frames * in_;
    double* yb = y.ptr() + b * t_out * out_;
    gemm(false, false, t_out, out_, patch, 1.0, xb, stride_ * in_, kernel_.value.data(), out_,
         0.0, yb, out_);
  }
  add_row_bias(y.ptr(), batch * t_out, out_, bias_.value.data());
  if (act_ == Activation::kRelu) {
    for (auto& v : y.data) v = std::max(v, 0.0);
  }
  output_ = y;
  return y;
}

Tensor Conv1d::backward(const Tensor& grad_out) {
  const std::size_t batch = input_.dim(0);
  const std::size_t frames = input_.dim(1);
  const std::size_t t_out = output_.dim(1);
  const std::size_t patch = kernel_len_ * in_;
  if (grad_out.size() != output_.size()) throw std::invalid_argument("conv1d: gradient mismatch");

  Tensor dz = grad_out;
  if (act_ == Activation::kRelu) {
    for (std::size_t i = 0; i < dz.size(); ++i) {
      if (output_.data[i] <= 0.0) dz.data[i] = 0.0;
    }
  }
  accumulate_column_sums(dz.ptr(), batch * t_out, out_, bias_.grad.data());

  Tensor dx(input_.shape);
  std::vector<double> dpatch(t_out * patch);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = input_.ptr() + b * frames * in_;
    const double* dzb = dz.ptr() + b * t_out * out_;
    gemm(true, false, patch, out_, t_out, 1.0, xb, stride_ * in_, dzb, out_, 1.0,
         kernel_.grad.data(), out_);
    gemm(false, true, t_out, patch, out_, 1.0, dzb, out_, kernel_.value.data(), out_, 0.0,
         dpatch.data(), patch);
    double* dxb = dx.ptr() + b * frames * in_;
    for (std::size_t t = 0; t < t_out; ++t) {
      double* dst = dxb + t * stride_ * in_;
      const double* src = dpatch.data() + t * patch;
      for (std::size_t p = 0; p < patch; ++p) dst[p] += src[p];
    }
  }
  return dx;
}

// ---------------------------------------------------------------- Flatten / Dropout

Tensor Flatten::forward(const Tensor& x, Mode, Rng&) {
  if (x.rank() != 3) throw std::invalid_argument("flatten: expected rank-3 input");
  in_shape_ = x.shape;
  Tensor y = x;
  y.shape = {x.dim(0), 1, x.dim(1) * x.dim(2)};
  return y;
}

Tensor Flatten::backward(const Tensor& grad_out) {
  Tensor dx = grad_out;
  dx.shape = in_shape_;
  return dx;
}

Dropout::Dropout(double p) : p_(p) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: p must be in [0, 1)");
}

Tensor Dropout::forward(const Tensor& x, Mode mode, Rng& rng) {
  last_training_ = mode == Mode::kTrain && p_ > 0.0;
  if (!last_training_) return x;
  const double keep = 1.0 - p_;
  const double scale = 1.0 / keep;
  mask_.resize(x.size());
  Tensor y = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_[i] = rng.bernoulli(keep) ? scale : 0.0;
    y.data[i] *= mask_[i];
  }
  return y;
}

Tensor Dropout::backward(const Tensor& grad_out) {
  if (!last_training_) return grad_out;
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= mask_[i];
  return dx;
}

// ---------------------------------------------------------------- loss

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

LossAndGrad softmax_xent(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) throw std::invalid_argument("softmax_xent: label out of range");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double log_z = mx + std::log(sum);
  LossAndGrad out;
  out.loss = log_z - logits[label];
  out.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out.grad[i] = std::exp(logits[i] - log_z);
  out.grad[label] -= 1.0;
  return out;
}

double softmax_xent_batch(const Tensor& logits, std::span<const int> labels, Tensor& grad) {
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.size() / batch;
  if (labels.size() != batch) throw std::invalid_argument("softmax_xent_batch: label count");
  grad = Tensor(logits.shape);
  double total = 0.0;
  const double inv = 1.0 / static_cast<double>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::span<const double> row(logits.ptr() + b * classes, classes);
    const auto lg = softmax_xent(row, static_cast<std::size_t>(labels[b]));
    total += lg.loss;
    for (std::size_t c = 0; c < classes; ++c) grad.data[b * classes + c] = lg.grad[c] * inv;
  }
  return total * inv;
}

}  // namespace serb::nn
