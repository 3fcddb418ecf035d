#ifndef PARTPREDICT_LAYERS_HPP
#define PARTPREDICT_LAYERS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "partpredict/tensor.hpp"

namespace partpredict {

// A named trainable tensor with its gradient accumulator.
template <typename T>
struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<T> w;
  std::vector<T> g;

  void resize(std::vector<int> dims) {
    shape = std::move(dims);
    std::size_t total = 1;
    for (int d : shape) total *= static_cast<std::size_t>(d);
    w.assign(total, T(0));
    g.assign(total, T(0));
  }
  std::int64_t count() const { return static_cast<std::int64_t>(w.size()); }
  void zero_grad() { std::fill(g.begin(), g.end(), T(0)); }
};

template <typename T>
class Conv2d {
 public:
  Conv2d(std::string name, int cin, int cout, int k, int stride, int pad)
      : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad) {
    weight.name = name + ".weight";
    weight.resize({cout, cin, k, k});
    bias.name = name + ".bias";
    bias.resize({cout});
  }

  int in_channels() const { return cin_; }
  int out_channels() const { return cout_; }
  int fan_in() const { return cin_ * k_ * k_; }
  int out_dim(int in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    if (x.c != cin_) throw ShapeMismatchError(weight.name + ": channel mismatch");
    const int oh = out_dim(x.h), ow = out_dim(x.w);
    if (oh <= 0 || ow <= 0) throw ShapeMismatchError(weight.name + ": output collapses");
    Tensor<T> y(x.n, cout_, oh, ow);
    const bool fast3x3 = k_ == 3 && stride_ == 1 && pad_ == 1 && x.w >= 2;
    const bool fast4x4 = k_ == 4 && stride_ == 4 && pad_ == 0;
    for (int in = 0; in < x.n; ++in) {
      for (int co = 0; co < cout_; ++co) {
        T* out_plane = y.plane(in, co);
        std::fill(out_plane, out_plane + y.plane_size(), bias.w[co]);
        for (int ci = 0; ci < cin_; ++ci) {
          const T* in_plane = x.plane(in, ci);
          const T* wk = weight.w.data() + (static_cast<std::size_t>(co) * cin_ + ci) * k_ * k_;
          if (fast3x3) {
            stencil3x3(in_plane, x.h, x.w, out_plane, wk);
            continue;
          }
          if (fast4x4) {
            tile4x4(in_plane, x.w, out_plane, oh, ow, wk);
            continue;
          }
          for (int ky = 0; ky < k_; ++ky) {
            for (int kx = 0; kx < k_; ++kx) {
              accumulate_shifted(in_plane, x.h, x.w, out_plane, oh, ow, wk[ky * k_ + kx],
                                 ky, kx);
            }
          }
        }
      }
    }
    if (train) x_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const Tensor<T>& x = x_;
    if (x.size() == 0) throw ShapeMismatchError(weight.name + ": backward without forward");
    const int oh = dy.h, ow = dy.w;
    Tensor<T> dx(x.n, x.c, x.h, x.w);
    const bool fast3x3 = k_ == 3 && stride_ == 1 && pad_ == 1 && ow >= 2;
    const bool fast4x4 = k_ == 4 && stride_ == 4 && pad_ == 0;

    for (int in = 0; in < x.n; ++in) {
      for (int co = 0; co < cout_; ++co) {
        const T* dy_plane = dy.plane(in, co);
        T bsum = 0;
        for (std::size_t i = 0; i < dy.plane_size(); ++i) bsum += dy_plane[i];
        bias.g[co] += bsum;
        for (int ci = 0; ci < cin_; ++ci) {
          const T* in_plane = x.plane(in, ci);
          T* dx_plane = dx.plane(in, ci);
          T* gk = weight.g.data() + (static_cast<std::size_t>(co) * cin_ + ci) * k_ * k_;
          const T* wk = weight.w.data() + (static_cast<std::size_t>(co) * cin_ + ci) * k_ * k_;
          if (fast4x4) {
            tile4x4_grads(in_plane, x.w, dx_plane, dy_plane, oh, ow, wk, gk);
            continue;
          }
          for (int ky = 0; ky < k_; ++ky) {
            for (int kx = 0; kx < k_; ++kx) {
              gk[ky * k_ + kx] +=
                  correlate_shifted(in_plane, x.h, x.w, dy_plane, oh, ow, ky, kx);
            }
          }
          if (fast3x3) {
            // dx is the 3x3 correlation of dy with the 180-degree-flipped
            // kernel; the forward stencil applies after reversing the taps.
            const T flipped[9] = {wk[8], wk[7], wk[6], wk[5], wk[4],
                                  wk[3], wk[2], wk[1], wk[0]};
            stencil3x3(dy_plane, oh, ow, dx_plane, flipped);
            continue;
          }
          for (int ky = 0; ky < k_; ++ky) {
            for (int kx = 0; kx < k_; ++kx) {
              spread_shifted(dx_plane, x.h, x.w, dy_plane, oh, ow, wk[ky * k_ + kx], ky, kx);
            }
          }
        }
      }
    }
    return dx;
  }

  ParamTensor<T> weight, bias;

 private:
  // One-pass 3x3/stride-1/pad-1 stencil: out[oy][ox] += sum of the weighted
  // neighborhood. Out-of-range rows read a zero buffer, edge columns drop
  // their out-of-range taps.
  void stencil3x3(const T* in, int h, int w, T* out, const T* wk) const {
    static thread_local std::vector<T> zero;
    if (static_cast<int>(zero.size()) < w) zero.assign(static_cast<std::size_t>(w), T(0));
    const T w00 = wk[0], w01 = wk[1], w02 = wk[2];
    const T w10 = wk[3], w11 = wk[4], w12 = wk[5];
    const T w20 = wk[6], w21 = wk[7], w22 = wk[8];
    for (int oy = 0; oy < h; ++oy) {
      const T* r0 = oy > 0 ? in + (oy - 1) * w : zero.data();
      const T* r1 = in + oy * w;
      const T* r2 = oy + 1 < h ? in + (oy + 1) * w : zero.data();
      T* o = out + oy * w;
      o[0] += w01 * r0[0] + w02 * r0[1] + w11 * r1[0] + w12 * r1[1] + w21 * r2[0] +
              w22 * r2[1];
      for (int ox = 1; ox < w - 1; ++ox) {
        o[ox] += w00 * r0[ox - 1] + w01 * r0[ox] + w02 * r0[ox + 1] + w10 * r1[ox - 1] +
                 w11 * r1[ox] + w12 * r1[ox + 1] + w20 * r2[ox - 1] + w21 * r2[ox] +
                 w22 * r2[ox + 1];
      }
      const int e = w - 1;
      o[e] += w00 * r0[e - 1] + w01 * r0[e] + w10 * r1[e - 1] + w11 * r1[e] +
              w20 * r2[e - 1] + w21 * r2[e];
    }
  }

  // 4x4 kernel, stride 4, pad 0: every output is the weighted sum of one
  // non-overlapping 4x4 input tile.
  void tile4x4(const T* in, int iw, T* out, int oh, int ow, const T* wk) const {
    for (int oy = 0; oy < oh; ++oy) {
      T* orow = out + oy * ow;
      const T* base_row = in + (4 * oy) * iw;
      for (int ox = 0; ox < ow; ++ox) {
        const T* base = base_row + 4 * ox;
        T acc = 0;
        for (int ky = 0; ky < 4; ++ky) {
          const T* r = base + ky * iw;
          const T* w4 = wk + 4 * ky;
          acc += w4[0] * r[0] + w4[1] * r[1] + w4[2] * r[2] + w4[3] * r[3];
        }
        orow[ox] += acc;
      }
    }
  }

  // Weight and input gradients of the tiled 4x4 conv in one pass.
  void tile4x4_grads(const T* in, int iw, T* dx, const T* dy, int oh, int ow, const T* wk,
                     T* gk) const {
    T acc[16] = {};
    for (int oy = 0; oy < oh; ++oy) {
      const T* dy_row = dy + oy * ow;
      const T* in_base = in + (4 * oy) * iw;
      T* dx_base = dx + (4 * oy) * iw;
      for (int ox = 0; ox < ow; ++ox) {
        const T d = dy_row[ox];
        for (int ky = 0; ky < 4; ++ky) {
          const T* r = in_base + ky * iw + 4 * ox;
          T* dr = dx_base + ky * iw + 4 * ox;
          T* a4 = acc + 4 * ky;
          const T* w4 = wk + 4 * ky;
          a4[0] += d * r[0];
          a4[1] += d * r[1];
          a4[2] += d * r[2];
          a4[3] += d * r[3];
          dr[0] += w4[0] * d;
          dr[1] += w4[1] * d;
          dr[2] += w4[2] * d;
          dr[3] += w4[3] * d;
        }
      }
    }
    for (int i = 0; i < 16; ++i) gk[i] += acc[i];
  }

  // out[oy][ox] += wv * in[oy*stride + ky - pad][ox*stride + kx - pad]
  void accumulate_shifted(const T* in_plane, int ih, int iw, T* out_plane, int oh, int ow,
                          T wv, int ky, int kx) const {
    if (stride_ == 1) {
      const int oy_lo = std::max(0, pad_ - ky), oy_hi = std::min(oh, ih + pad_ - ky);
      const int ox_lo = std::max(0, pad_ - kx), ox_hi = std::min(ow, iw + pad_ - kx);
      for (int oy = oy_lo; oy < oy_hi; ++oy) {
        const T* in_row = in_plane + (oy + ky - pad_) * iw + (kx - pad_);
        T* out_row = out_plane + oy * ow;
        for (int ox = ox_lo; ox < ox_hi; ++ox) out_row[ox] += wv * in_row[ox];
      }
      return;
    }
    for (int oy = 0; oy < oh; ++oy) {
      const int iy = oy * stride_ + ky - pad_;
      if (iy < 0 || iy >= ih) continue;
      const T* in_row = in_plane + iy * iw;
      T* out_row = out_plane + oy * ow;
      for (int ox = 0; ox < ow; ++ox) {
        const int ix = ox * stride_ + kx - pad_;
        if (ix >= 0 && ix < iw) out_row[ox] += wv * in_row[ix];
      }
    }
  }

  // sum over valid (oy, ox) of dy[oy][ox] * in[shifted]
  T correlate_shifted(const T* in_plane, int ih, int iw, const T* dy_plane, int oh, int ow,
                      int ky, int kx) const {
    T acc = 0;
    if (stride_ == 1) {
      const int oy_lo = std::max(0, pad_ - ky), oy_hi = std::min(oh, ih + pad_ - ky);
      const int ox_lo = std::max(0, pad_ - kx), ox_hi = std::min(ow, iw + pad_ - kx);
      for (int oy = oy_lo; oy < oy_hi; ++oy) {
        const T* in_row = in_plane + (oy + ky - pad_) * iw + (kx - pad_);
        const T* dy_row = dy_plane + oy * ow;
        for (int ox = ox_lo; ox < ox_hi; ++ox) acc += dy_row[ox] * in_row[ox];
      }
      return acc;
    }
    for (int oy = 0; oy < oh; ++oy) {
      const int iy = oy * stride_ + ky - pad_;
      if (iy < 0 || iy >= ih) continue;
      const T* in_row = in_plane + iy * iw;
      const T* dy_row = dy_plane + oy * ow;
      for (int ox = 0; ox < ow; ++ox) {
        const int ix = ox * stride_ + kx - pad_;
        if (ix >= 0 && ix < iw) acc += dy_row[ox] * in_row[ix];
      }
    }
    return acc;
  }

  // dx[shifted] += wv * dy[oy][ox]
  void spread_shifted(T* dx_plane, int ih, int iw, const T* dy_plane, int oh, int ow, T wv,
                      int ky, int kx) const {
    if (stride_ == 1) {
      const int oy_lo = std::max(0, pad_ - ky), oy_hi = std::min(oh, ih + pad_ - ky);
      const int ox_lo = std::max(0, pad_ - kx), ox_hi = std::min(ow, iw + pad_ - kx);
      for (int oy = oy_lo; oy < oy_hi; ++oy) {
        T* dx_row = dx_plane + (oy + ky - pad_) * iw + (kx - pad_);
        const T* dy_row = dy_plane + oy * ow;
        for (int ox = ox_lo; ox < ox_hi; ++ox) dx_row[ox] += wv * dy_row[ox];
      }
      return;
    }
    for (int oy = 0; oy < oh; ++oy) {
      const int iy = oy * stride_ + ky - pad_;
      if (iy < 0 || iy >= ih) continue;
      T* dx_row = dx_plane + iy * iw;
      const T* dy_row = dy_plane + oy * ow;
      for (int ox = 0; ox < ow; ++ox) {
        const int ix = ox * stride_ + kx - pad_;
        if (ix >= 0 && ix < iw) dx_row[ix] += wv * dy_row[ox];
      }
    }
  }

  int cin_, cout_, k_, stride_, pad_;
  Tensor<T> x_;
};

// Spatial batch normalization; training mode normalizes with batch statistics
// and the backward pass differentiates through them.
template <typename T>
class BatchNorm2d {
 public:
  explicit BatchNorm2d(std::string name, int channels, T momentum = T(0.1),
                       T eps = T(1e-5))
      : channels_(channels), momentum_(momentum), eps_(eps) {
    gamma.name = name + ".gamma";
    gamma.resize({channels});
    std::fill(gamma.w.begin(), gamma.w.end(), T(1));
    beta.name = name + ".beta";
    beta.resize({channels});
    running_mean.assign(static_cast<std::size_t>(channels), T(0));
    running_var.assign(static_cast<std::size_t>(channels), T(1));
    name_ = std::move(name);
  }

  const std::string& name() const { return name_; }
  int channels() const { return channels_; }

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    if (x.c != channels_) throw ShapeMismatchError(name_ + ": channel mismatch");
    Tensor<T> y(x.n, x.c, x.h, x.w);
    const std::size_t plane = x.plane_size();
    const T count = static_cast<T>(static_cast<std::size_t>(x.n) * plane);
    if (train) {
      xhat_ = Tensor<T>(x.n, x.c, x.h, x.w);
      invstd_.assign(static_cast<std::size_t>(channels_), T(0));
      count_ = count;
      for (int ch = 0; ch < channels_; ++ch) {
        T sum = 0;
        for (int in = 0; in < x.n; ++in) {
          const T* p = x.plane(in, ch);
          for (std::size_t i = 0; i < plane; ++i) sum += p[i];
        }
        const T mean = sum / count;
        T varsum = 0;
        for (int in = 0; in < x.n; ++in) {
          const T* p = x.plane(in, ch);
          for (std::size_t i = 0; i < plane; ++i) {
            const T d = p[i] - mean;
            varsum += d * d;
          }
        }
        const T var = varsum / count;  // biased, also what the running stats hold
        const T inv = T(1) / std::sqrt(var + eps_);
        invstd_[ch] = inv;
        running_mean[ch] = (T(1) - momentum_) * running_mean[ch] + momentum_ * mean;
        running_var[ch] = (T(1) - momentum_) * running_var[ch] + momentum_ * var;
        const T g = gamma.w[ch], b = beta.w[ch];
        for (int in = 0; in < x.n; ++in) {
          const T* p = x.plane(in, ch);
          T* xh = xhat_.plane(in, ch);
          T* out = y.plane(in, ch);
          for (std::size_t i = 0; i < plane; ++i) {
            xh[i] = (p[i] - mean) * inv;
            out[i] = g * xh[i] + b;
          }
        }
      }
      return y;
    }
    for (int ch = 0; ch < channels_; ++ch) {
      const T inv = T(1) / std::sqrt(running_var[ch] + eps_);
      const T g = gamma.w[ch], b = beta.w[ch];
      const T mean = running_mean[ch];
      for (int in = 0; in < x.n; ++in) {
        const T* p = x.plane(in, ch);
        T* out = y.plane(in, ch);
        for (std::size_t i = 0; i < plane; ++i) out[i] = g * (p[i] - mean) * inv + b;
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    if (xhat_.size() == 0) throw ShapeMismatchError(name_ + ": backward without forward");
    Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
    const std::size_t plane = dy.plane_size();
    for (int ch = 0; ch < channels_; ++ch) {
      T sum_dy = 0, sum_dy_xhat = 0;
      for (int in = 0; in < dy.n; ++in) {
        const T* d = dy.plane(in, ch);
        const T* xh = xhat_.plane(in, ch);
        for (std::size_t i = 0; i < plane; ++i) {
          sum_dy += d[i];
          sum_dy_xhat += d[i] * xh[i];
        }
      }
      gamma.g[ch] += sum_dy_xhat;
      beta.g[ch] += sum_dy;
      const T scale = gamma.w[ch] * invstd_[ch] / count_;
      for (int in = 0; in < dy.n; ++in) {
        const T* d = dy.plane(in, ch);
        const T* xh = xhat_.plane(in, ch);
        T* out = dx.plane(in, ch);
        for (std::size_t i = 0; i < plane; ++i) {
          out[i] = scale * (count_ * d[i] - sum_dy - xh[i] * sum_dy_xhat);
        }
      }
    }
    return dx;
  }

  ParamTensor<T> gamma, beta;
  std::vector<T> running_mean, running_var;

 private:
  std::string name_;
  int channels_;
  T momentum_, eps_;
  Tensor<T> xhat_;
  std::vector<T> invstd_;
  T count_ = 0;
};

template <typename T>
class Relu {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool train) {
    Tensor<T> y(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.size(); ++i) y.v[i] = x.v[i] > T(0) ? x.v[i] : T(0);
    if (train) y_ = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.v[i] = y_.v[i] > T(0) ? dy.v[i] : T(0);
    return dx;
  }

 private:
  Tensor<T> y_;
};

// 2x2 max pooling with stride 2. The first maximum in scan order wins ties,
// and the backward pass routes gradient to that element only.
template <typename T>
class MaxPool2x2 {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool train) {
    if (x.h % 2 != 0 || x.w % 2 != 0) throw ShapeMismatchError("maxpool needs even dims");
    const int oh = x.h / 2, ow = x.w / 2;
    Tensor<T> y(x.n, x.c, oh, ow);
    if (train) {
      argmax_.assign(y.size(), 0);
      in_shape_ = {x.n, x.c, x.h, x.w};
    }
    std::size_t out_idx = 0;
    for (int in = 0; in < x.n; ++in) {
      for (int ch = 0; ch < x.c; ++ch) {
        const T* p = x.plane(in, ch);
        T* out = y.plane(in, ch);
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            const int base = (2 * oy) * x.w + 2 * ox;
            int best = base;
            T bv = p[base];
            if (p[base + 1] > bv) { best = base + 1; bv = p[base + 1]; }
            if (p[base + x.w] > bv) { best = base + x.w; bv = p[base + x.w]; }
            if (p[base + x.w + 1] > bv) { best = base + x.w + 1; bv = p[base + x.w + 1]; }
            out[oy * ow + ox] = bv;
            if (train) argmax_[out_idx] = best;
            ++out_idx;
          }
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    if (argmax_.empty()) throw ShapeMismatchError("maxpool backward without forward");
    Tensor<T> dx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
    std::size_t out_idx = 0;
    for (int in = 0; in < dy.n; ++in) {
      for (int ch = 0; ch < dy.c; ++ch) {
        const T* d = dy.plane(in, ch);
        T* out = dx.plane(in, ch);
        for (std::size_t i = 0; i < dy.plane_size(); ++i) {
          out[argmax_[out_idx]] += d[i];
          ++out_idx;
        }
      }
    }
    return dx;
  }

 private:
  std::vector<int> argmax_;
  std::array<int, 4> in_shape_{};
};

// Appends one channel whose plane is a per-sample constant (the QP input).
template <typename T>
Tensor<T> concat_channel_const(const Tensor<T>& x, const std::vector<T>& value_per_sample) {
  if (static_cast<int>(value_per_sample.size()) != x.n) {
    throw ShapeMismatchError("per-sample constant count != batch size");
  }
  Tensor<T> y(x.n, x.c + 1, x.h, x.w);
  for (int in = 0; in < x.n; ++in) {
    for (int ch = 0; ch < x.c; ++ch) {
      const T* src = x.plane(in, ch);
      std::copy(src, src + x.plane_size(), y.plane(in, ch));
    }
    T* extra = y.plane(in, x.c);
    std::fill(extra, extra + y.plane_size(), value_per_sample[static_cast<std::size_t>(in)]);
  }
  return y;
}

// Gradient counterpart of concat_channel_const: the constant channel is pure
// input and receives no parameter, so its slice is dropped.
template <typename T>
Tensor<T> drop_last_channel(const Tensor<T>& dy) {
  Tensor<T> dx(dy.n, dy.c - 1, dy.h, dy.w);
  for (int in = 0; in < dy.n; ++in) {
    for (int ch = 0; ch < dx.c; ++ch) {
      const T* src = dy.plane(in, ch);
      std::copy(src, src + dy.plane_size(), dx.plane(in, ch));
    }
  }
  return dx;
}

// Per-location softmax over the channel dimension.
template <typename T>
Tensor<T> channel_softmax(const Tensor<T>& logits) {
  Tensor<T> probs(logits.n, logits.c, logits.h, logits.w);
  const std::size_t plane = logits.plane_size();
  for (int in = 0; in < logits.n; ++in) {
    for (std::size_t i = 0; i < plane; ++i) {
      T mx = logits.plane(in, 0)[i];
      for (int ch = 1; ch < logits.c; ++ch) mx = std::max(mx, logits.plane(in, ch)[i]);
      T denom = 0;
      for (int ch = 0; ch < logits.c; ++ch) {
        const T e = std::exp(logits.plane(in, ch)[i] - mx);
        probs.plane(in, ch)[i] = e;
        denom += e;
      }
      for (int ch = 0; ch < logits.c; ++ch) probs.plane(in, ch)[i] /= denom;
    }
  }
  return probs;
}

}  // namespace partpredict

#endif
