#ifndef PARTPREDICT_TENSOR_HPP
#define PARTPREDICT_TENSOR_HPP

#include <cstddef>
#include <vector>

#include "partpredict/errors.hpp"

namespace partpredict {

// Dense NCHW tensor.
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<std::size_t>(n_) * c_ * h_ * w_, T(0)) {}

  std::size_t size() const { return v.size(); }
  std::size_t plane_size() const { return static_cast<std::size_t>(h) * w; }

  T* plane(int in, int ic) {
    return v.data() + (static_cast<std::size_t>(in) * c + ic) * plane_size();
  }
  const T* plane(int in, int ic) const {
    return v.data() + (static_cast<std::size_t>(in) * c + ic) * plane_size();
  }

  T& at(int in, int ic, int iy, int ix) { return plane(in, ic)[iy * w + ix]; }
  const T& at(int in, int ic, int iy, int ix) const { return plane(in, ic)[iy * w + ix]; }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
};

}  // namespace partpredict

#endif
