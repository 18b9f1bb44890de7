#pragma once

// Reverse-mode autodiff over dense tensors.
//
// A Graph records operations in creation order; backward() replays them in
// reverse. Images are NCHW, token sequences [N, T, D]. Parameters live
// outside the graph and are bound as leaves whose gradients accumulate
// straight into the Parameter.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rooftop/errors.hpp"

namespace rooftop::nn {

using Shape = std::vector<int>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

template <class T>
struct Parameter {
  std::string name;
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;

  Parameter() = default;
  Parameter(std::string n, Shape s)
      : name(std::move(n)), shape(std::move(s)), value(numel(shape), T(0)), grad(numel(shape), T(0)) {}

  [[nodiscard]] std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

struct Var {
  int id = -1;
};

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
class Graph {
 public:
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  [[nodiscard]] bool grad_enabled() const { return grad_enabled_; }

  Var input(Shape shape, std::vector<T> values, bool requires_grad = false) {
    if (values.size() != numel(shape)) throw DataError("input size does not match shape " + shape_str(shape));
    Var v = make(std::move(shape), requires_grad);
    std::copy(values.begin(), values.end(), node(v).val);
    return v;
  }

  /// Binds a parameter as a leaf. With `trainable` false the parameter takes
  /// part in the forward pass but receives no gradient.
  Var param(Parameter<T>& p, bool trainable = true) {
    auto n = std::make_unique<Node>();
    n->shape = p.shape;
    n->size = p.size();
    n->val = p.value.data();
    n->requires_grad = grad_enabled_ && trainable;
    n->grd = n->requires_grad ? p.grad.data() : nullptr;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  [[nodiscard]] const Shape& shape(Var v) const { return node(v).shape; }
  [[nodiscard]] std::span<const T> value(Var v) const { return {node(v).val, node(v).size}; }
  [[nodiscard]] std::span<T> mutable_value(Var v) { return {node(v).val, node(v).size}; }
  [[nodiscard]] std::span<const T> grad(Var v) const {
    const auto& n = node(v);
    if (!n.grd) return {};
    return {n.grd, n.size};
  }
  [[nodiscard]] bool requires_grad(Var v) const { return node(v).requires_grad; }
  [[nodiscard]] T scalar(Var v) const { return node(v).val[0]; }

  /// Backpropagates from `out` seeded with ones (a scalar loss) or `seed`.
  /// Call at most once per graph.
  void backward(Var out) {
    std::vector<T> seed(node(out).size, T(1));
    backward(out, seed);
  }
  void backward(Var out, std::span<const T> seed) {
    auto& o = node(out);
    if (!o.requires_grad) return;
    if (seed.size() != o.size) throw DataError("backward seed size mismatch");
    for (std::size_t i = 0; i < o.size; ++i) o.grd[i] += seed[i];
    for (int i = out.id; i >= 0; --i)
      if (nodes_[i]->backward) nodes_[i]->backward();
  }

  // ---- elementwise -------------------------------------------------------

  Var add(Var a, Var b) {
    check_same(a, b, "add");
    Var y = make(shape(a), needs(a, b));
    const auto n = node(y).size;
    T* yv = node(y).val;
    const T* av = node(a).val;
    const T* bv = node(b).val;
    for (std::size_t i = 0; i < n; ++i) yv[i] = av[i] + bv[i];
    on_backward(y, [this, a, b, y, n] {
      const T* g = node(y).grd;
      for (Var in : {a, b})
        if (T* gi = node(in).grd) for (std::size_t i = 0; i < n; ++i) gi[i] += g[i];
    });
    return y;
  }

  Var sub(Var a, Var b) {
    check_same(a, b, "sub");
    Var y = make(shape(a), needs(a, b));
    const auto n = node(y).size;
    for (std::size_t i = 0; i < n; ++i) node(y).val[i] = node(a).val[i] - node(b).val[i];
    on_backward(y, [this, a, b, y, n] {
      const T* g = node(y).grd;
      if (T* ga = node(a).grd) for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
      if (T* gb = node(b).grd) for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
    });
    return y;
  }

  /// a + b where b's shape equals a's trailing dimensions (b is repeated).
  Var add_broadcast(Var a, Var b) {
    const auto na = node(a).size, nb = node(b).size;
    if (nb == 0 || na % nb != 0) throw DataError("add_broadcast shape mismatch");
    Var y = make(shape(a), needs(a, b));
    for (std::size_t i = 0; i < na; ++i) node(y).val[i] = node(a).val[i] + node(b).val[i % nb];
    on_backward(y, [this, a, b, y, na, nb] {
      const T* g = node(y).grd;
      if (T* ga = node(a).grd) for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
      if (T* gb = node(b).grd) for (std::size_t i = 0; i < na; ++i) gb[i % nb] += g[i];
    });
    return y;
  }

  Var scale(Var a, T s) {
    Var y = make(shape(a), needs(a));
    const auto n = node(y).size;
    for (std::size_t i = 0; i < n; ++i) node(y).val[i] = s * node(a).val[i];
    on_backward(y, [this, a, y, n, s] {
      if (T* ga = node(a).grd)
        for (std::size_t i = 0; i < n; ++i) ga[i] += s * node(y).grd[i];
    });
    return y;
  }

  Var relu(Var a) { return leaky_relu(a, T(0)); }

  Var leaky_relu(Var a, T slope) {
    Var y = make(shape(a), needs(a));
    const auto n = node(y).size;
    const T* av = node(a).val;
    T* yv = node(y).val;
    for (std::size_t i = 0; i < n; ++i) yv[i] = av[i] > T(0) ? av[i] : slope * av[i];
    on_backward(y, [this, a, y, n, slope] {
      T* ga = node(a).grd;
      if (!ga) return;
      const T* av = node(a).val;
      const T* g = node(y).grd;
      for (std::size_t i = 0; i < n; ++i) ga[i] += av[i] > T(0) ? g[i] : slope * g[i];
    });
    return y;
  }

  // ---- reductions and losses --------------------------------------------

  Var mean(Var a) {
    Var y = make({1}, needs(a));
    const auto n = node(a).size;
    T acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += node(a).val[i];
    node(y).val[0] = acc / static_cast<T>(n);
    on_backward(y, [this, a, y, n] {
      if (T* ga = node(a).grd) {
        const T g = node(y).grd[0] / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) ga[i] += g;
      }
    });
    return y;
  }

  /// Mean squared error against a constant target.
  Var mse_loss(Var pred, std::span<const T> target) {
    const auto n = node(pred).size;
    if (target.size() != n) throw DataError("mse target size mismatch");
    Var y = make({1}, needs(pred));
    T acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const T d = node(pred).val[i] - target[i];
      acc += d * d;
    }
    node(y).val[0] = acc / static_cast<T>(n);
    std::vector<T> t(target.begin(), target.end());
    on_backward(y, [this, pred, y, n, t = std::move(t)] {
      if (T* gp = node(pred).grd) {
        const T g = node(y).grd[0] * T(2) / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) gp[i] += g * (node(pred).val[i] - t[i]);
      }
    });
    return y;
  }

  /// Mean absolute error against a constant target.
  Var l1_loss(Var pred, std::span<const T> target) {
    const auto n = node(pred).size;
    if (target.size() != n) throw DataError("l1 target size mismatch");
    Var y = make({1}, needs(pred));
    T acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += std::abs(node(pred).val[i] - target[i]);
    node(y).val[0] = acc / static_cast<T>(n);
    std::vector<T> t(target.begin(), target.end());
    on_backward(y, [this, pred, y, n, t = std::move(t)] {
      if (T* gp = node(pred).grd) {
        const T g = node(y).grd[0] / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) {
          const T d = node(pred).val[i] - t[i];
          gp[i] += d > T(0) ? g : (d < T(0) ? -g : T(0));
        }
      }
    });
    return y;
  }

  // ---- shape ops -------------------------------------------------------

  Var reshape(Var a, Shape s) {
    if (numel(s) != node(a).size) throw DataError("reshape size mismatch");
    Var y = make(std::move(s), needs(a));
    const auto n = node(y).size;
    std::copy_n(node(a).val, n, node(y).val);
    on_backward(y, [this, a, y, n] {
      if (T* ga = node(a).grd)
        for (std::size_t i = 0; i < n; ++i) ga[i] += node(y).grd[i];
    });
    return y;
  }

  /// Concatenate two NCHW tensors along channels.
  Var concat_channels(Var a, Var b) {
    const auto& sa = shape(a);
    const auto& sb = shape(b);
    if (sa.size() != 4 || sb.size() != 4 || sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3])
      throw DataError("concat_channels shape mismatch " + shape_str(sa) + " vs " + shape_str(sb));
    const int n = sa[0], ca = sa[1], cb = sb[1];
    const std::size_t hw = static_cast<std::size_t>(sa[2]) * sa[3];
    Var y = make({n, ca + cb, sa[2], sa[3]}, needs(a, b));
    for (int i = 0; i < n; ++i) {
      std::copy_n(node(a).val + i * ca * hw, ca * hw, node(y).val + i * (ca + cb) * hw);
      std::copy_n(node(b).val + i * cb * hw, cb * hw, node(y).val + (i * (ca + cb) + ca) * hw);
    }
    on_backward(y, [this, a, b, y, n, ca, cb, hw] {
      const T* g = node(y).grd;
      for (int i = 0; i < n; ++i) {
        if (T* ga = node(a).grd)
          for (std::size_t j = 0; j < ca * hw; ++j) ga[i * ca * hw + j] += g[i * (ca + cb) * hw + j];
        if (T* gb = node(b).grd)
          for (std::size_t j = 0; j < cb * hw; ++j) gb[i * cb * hw + j] += g[(i * (ca + cb) + ca) * hw + j];
      }
    });
    return y;
  }

  /// Zero-pads NCHW spatial dims at the bottom/right up to (h, w).
  Var pad_to(Var a, int h, int w) {
    const auto s = shape(a);
    if (s.size() != 4 || h < s[2] || w < s[3]) throw DataError("pad_to target smaller than input");
    const int nc = s[0] * s[1], H = s[2], W = s[3];
    Var y = make({s[0], s[1], h, w}, needs(a));
    for (int i = 0; i < nc; ++i)
      for (int r = 0; r < H; ++r)
        std::copy_n(node(a).val + (i * H + r) * W, W, node(y).val + (i * h + r) * w);
    on_backward(y, [this, a, y, nc, H, W, h, w] {
      if (T* ga = node(a).grd)
        for (int i = 0; i < nc; ++i)
          for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) ga[(i * H + r) * W + c] += node(y).grd[(i * h + r) * w + c];
    });
    return y;
  }

  /// Keeps the top-left (h, w) window of an NCHW tensor.
  Var crop_to(Var a, int h, int w) {
    const auto s = shape(a);
    if (s.size() != 4 || h > s[2] || w > s[3]) throw DataError("crop_to target larger than input");
    const int nc = s[0] * s[1], H = s[2], W = s[3];
    Var y = make({s[0], s[1], h, w}, needs(a));
    for (int i = 0; i < nc; ++i)
      for (int r = 0; r < h; ++r)
        std::copy_n(node(a).val + (i * H + r) * W, w, node(y).val + (i * h + r) * w);
    on_backward(y, [this, a, y, nc, H, W, h, w] {
      if (T* ga = node(a).grd)
        for (int i = 0; i < nc; ++i)
          for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) ga[(i * H + r) * W + c] += node(y).grd[(i * h + r) * w + c];
    });
    return y;
  }

  /// Splits NCHW into non-overlapping p x p patches: [N, (H/p)(W/p), C p p].
  /// Patch order is row-major over the patch grid; features are (c, py, px).
  Var patchify(Var a, int p) {
    const auto s = shape(a);
    if (s.size() != 4 || s[2] % p != 0 || s[3] % p != 0) throw DataError("patchify: size not divisible by patch");
    const int n = s[0], c = s[1], H = s[2], W = s[3], gh = H / p, gw = W / p, d = c * p * p;
    Var y = make({n, gh * gw, d}, needs(a));
    auto idx = std::make_shared<std::vector<int>>(node(y).size);
    std::size_t o = 0;
    for (int i = 0; i < n; ++i)
      for (int ty = 0; ty < gh; ++ty)
        for (int tx = 0; tx < gw; ++tx)
          for (int ch = 0; ch < c; ++ch)
            for (int py = 0; py < p; ++py)
              for (int px = 0; px < p; ++px, ++o)
                (*idx)[o] = ((i * c + ch) * H + ty * p + py) * W + tx * p + px;
    for (std::size_t j = 0; j < o; ++j) node(y).val[j] = node(a).val[(*idx)[j]];
    on_backward(y, [this, a, y, idx] {
      if (T* ga = node(a).grd)
        for (std::size_t j = 0; j < idx->size(); ++j) ga[(*idx)[j]] += node(y).grd[j];
    });
    return y;
  }

  /// [N, h*w, D] tokens (row-major over an h x w grid) -> [N, D, h, w].
  Var tokens_to_image(Var a, int h, int w) {
    const auto s = shape(a);
    if (s.size() != 3 || s[1] != h * w) throw DataError("tokens_to_image: token count mismatch");
    const int n = s[0], t = s[1], d = s[2];
    Var y = make({n, d, h, w}, needs(a));
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < t; ++k)
        for (int c = 0; c < d; ++c) node(y).val[(i * d + c) * t + k] = node(a).val[(i * t + k) * d + c];
    on_backward(y, [this, a, y, n, t, d] {
      if (T* ga = node(a).grd)
        for (int i = 0; i < n; ++i)
          for (int k = 0; k < t; ++k)
            for (int c = 0; c < d; ++c) ga[(i * t + k) * d + c] += node(y).grd[(i * d + c) * t + k];
    });
    return y;
  }

  // ---- convolution family ----------------------------------------------

  /// 2-D convolution, square kernel, zero padding. w: [Co, Ci, K, K], b: [Co].
  Var conv2d(Var x, Var w, Var b, int stride, int pad) {
    const auto sx = shape(x);
    const auto sw = shape(w);
    if (sx.size() != 4 || sw.size() != 4 || sx[1] != sw[1] || sw[2] != sw[3])
      throw DataError("conv2d shape mismatch " + shape_str(sx) + " * " + shape_str(sw));
    const int n = sx[0], ci = sx[1], H = sx[2], W = sx[3], co = sw[0], K = sw[2];
    const int ho = (H + 2 * pad - K) / stride + 1, wo = (W + 2 * pad - K) / stride + 1;
    if (ho < 1 || wo < 1) throw DataError("conv2d output is empty");
    if (b.id >= 0 && node(b).size != static_cast<std::size_t>(co)) throw DataError("conv2d bias size mismatch");
    const int P = ho * wo, R = ci * K * K;
    const Eigen::Index cols = static_cast<Eigen::Index>(n) * P;

    auto col = std::make_shared<RowMat<T>>(R, cols);
    im2col(node(x).val, *col, n, ci, H, W, K, stride, pad, ho, wo);
    const Eigen::Map<const RowMat<T>> wm(node(w).val, co, R);
    RowMat<T> out = wm * (*col);

    Var y = make({n, co, ho, wo}, needs(x, w, b.id >= 0 ? b : x));
    T* yv = node(y).val;
    const T* bv = b.id >= 0 ? node(b).val : nullptr;
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < co; ++c) {
        const T bias = bv ? bv[c] : T(0);
        const T* src = out.data() + static_cast<Eigen::Index>(c) * cols + static_cast<Eigen::Index>(i) * P;
        T* dst = yv + (static_cast<std::size_t>(i) * co + c) * P;
        for (int p = 0; p < P; ++p) dst[p] = src[p] + bias;
      }
    if (!node(y).requires_grad) return y;
    on_backward(y, [this, x, w, b, y, n, ci, H, W, co, K, stride, pad, ho, wo, P, R, cols, col] {
      RowMat<T> dout(co, cols);
      const T* g = node(y).grd;
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < co; ++c)
          std::copy_n(g + (static_cast<std::size_t>(i) * co + c) * P, P,
                      dout.data() + static_cast<Eigen::Index>(c) * cols + static_cast<Eigen::Index>(i) * P);
      if (T* gw = node(w).grd) {
        Eigen::Map<RowMat<T>> gwm(gw, co, R);
        gwm.noalias() += dout * col->transpose();
      }
      if (b.id >= 0)
        if (T* gb = node(b).grd)
          for (int c = 0; c < co; ++c) gb[c] += dout.row(c).sum();
      if (T* gx = node(x).grd) {
        const Eigen::Map<const RowMat<T>> wm(node(w).val, co, R);
        RowMat<T> dcol = wm.transpose() * dout;
        col2im(dcol, gx, n, ci, H, W, K, stride, pad, ho, wo);
      }
    });
    return y;
  }

  Var maxpool2x2(Var x) {
    const auto s = shape(x);
    if (s.size() != 4 || s[2] % 2 || s[3] % 2) throw DataError("maxpool2x2 needs even spatial dims");
    const int nc = s[0] * s[1], H = s[2], W = s[3], ho = H / 2, wo = W / 2;
    Var y = make({s[0], s[1], ho, wo}, needs(x));
    auto arg = std::make_shared<std::vector<int>>(node(y).size);
    const T* xv = node(x).val;
    for (int i = 0; i < nc; ++i)
      for (int r = 0; r < ho; ++r)
        for (int c = 0; c < wo; ++c) {
          int best = (i * H + 2 * r) * W + 2 * c;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const int j = (i * H + 2 * r + dy) * W + 2 * c + dx;
              if (xv[j] > xv[best]) best = j;
            }
          const int o = (i * ho + r) * wo + c;
          (*arg)[o] = best;
          node(y).val[o] = xv[best];
        }
    on_backward(y, [this, x, y, arg] {
      if (T* gx = node(x).grd)
        for (std::size_t o = 0; o < arg->size(); ++o) gx[(*arg)[o]] += node(y).grd[o];
    });
    return y;
  }

  Var upsample_nearest(Var x, int factor) {
    const auto s = shape(x);
    if (s.size() != 4) throw DataError("upsample expects NCHW");
    const int nc = s[0] * s[1], H = s[2], W = s[3], h = H * factor, w = W * factor;
    Var y = make({s[0], s[1], h, w}, needs(x));
    for (int i = 0; i < nc; ++i)
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
          node(y).val[(i * h + r) * w + c] = node(x).val[(i * H + r / factor) * W + c / factor];
    on_backward(y, [this, x, y, nc, H, W, h, w, factor] {
      if (T* gx = node(x).grd)
        for (int i = 0; i < nc; ++i)
          for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
              gx[(i * H + r / factor) * W + c / factor] += node(y).grd[(i * h + r) * w + c];
    });
    return y;
  }

  // ---- dense and normalization ------------------------------------------

  /// y = x W^T + b over the last dimension. w: [Dout, Din], b: [Dout].
  Var dense(Var x, Var w, Var b) {
    const auto sx = shape(x);
    const auto sw = shape(w);
    if (sw.size() != 2 || sx.back() != sw[1]) throw DataError("dense shape mismatch " + shape_str(sx));
    const int din = sw[1], dout = sw[0];
    const Eigen::Index m = static_cast<Eigen::Index>(node(x).size / din);
    Shape so = sx;
    so.back() = dout;
    Var y = make(so, needs(x, w, b.id >= 0 ? b : x));
    const Eigen::Map<const RowMat<T>> xm(node(x).val, m, din);
    const Eigen::Map<const RowMat<T>> wm(node(w).val, dout, din);
    Eigen::Map<RowMat<T>> ym(node(y).val, m, dout);
    ym.noalias() = xm * wm.transpose();
    if (b.id >= 0)
      for (Eigen::Index r = 0; r < m; ++r)
        for (int c = 0; c < dout; ++c) ym(r, c) += node(b).val[c];
    on_backward(y, [this, x, w, b, y, m, din, dout] {
      const Eigen::Map<const RowMat<T>> gy(node(y).grd, m, dout);
      if (T* gw = node(w).grd) {
        const Eigen::Map<const RowMat<T>> xm(node(x).val, m, din);
        Eigen::Map<RowMat<T>>(gw, dout, din).noalias() += gy.transpose() * xm;
      }
      if (b.id >= 0)
        if (T* gb = node(b).grd)
          for (int c = 0; c < dout; ++c) gb[c] += gy.col(c).sum();
      if (T* gx = node(x).grd) {
        const Eigen::Map<const RowMat<T>> wm(node(w).val, dout, din);
        Eigen::Map<RowMat<T>>(gx, m, din).noalias() += gy * wm;
      }
    });
    return y;
  }

  /// Batch normalization over (N, H, W) per channel. In training mode batch
  /// statistics are used and the running estimates updated in place.
  Var batchnorm2d(Var x, Var gamma, Var beta, std::vector<T>& running_mean, std::vector<T>& running_var,
                  bool training, T momentum = T(0.1), T eps = T(1e-5)) {
    const auto s = shape(x);
    if (s.size() != 4) throw DataError("batchnorm2d expects NCHW");
    const int n = s[0], c = s[1], hw = s[2] * s[3];
    const T cnt = static_cast<T>(n) * hw;
    Var y = make(s, needs(x, gamma, beta));
    auto xhat = std::make_shared<std::vector<T>>(node(x).size);
    auto inv_std = std::make_shared<std::vector<T>>(c);
    const T* xv = node(x).val;
    for (int ch = 0; ch < c; ++ch) {
      T mu, var;
      if (training) {
        T acc = 0;
        for (int i = 0; i < n; ++i)
          for (int p = 0; p < hw; ++p) acc += xv[(i * c + ch) * hw + p];
        mu = acc / cnt;
        T acc2 = 0;
        for (int i = 0; i < n; ++i)
          for (int p = 0; p < hw; ++p) {
            const T d = xv[(i * c + ch) * hw + p] - mu;
            acc2 += d * d;
          }
        var = acc2 / cnt;
        running_mean[ch] = (T(1) - momentum) * running_mean[ch] + momentum * mu;
        running_var[ch] = (T(1) - momentum) * running_var[ch] + momentum * var;
      } else {
        mu = running_mean[ch];
        var = running_var[ch];
      }
      const T is = T(1) / std::sqrt(var + eps);
      (*inv_std)[ch] = is;
      const T gm = node(gamma).val[ch], bt = node(beta).val[ch];
      for (int i = 0; i < n; ++i)
        for (int p = 0; p < hw; ++p) {
          const int j = (i * c + ch) * hw + p;
          (*xhat)[j] = (xv[j] - mu) * is;
          node(y).val[j] = gm * (*xhat)[j] + bt;
        }
    }
    on_backward(y, [this, x, gamma, beta, y, n, c, hw, cnt, xhat, inv_std, training] {
      const T* g = node(y).grd;
      T* gx = node(x).grd;
      T* gg = node(gamma).grd;
      T* gb = node(beta).grd;
      for (int ch = 0; ch < c; ++ch) {
        T sum_g = 0, sum_gx = 0;
        for (int i = 0; i < n; ++i)
          for (int p = 0; p < hw; ++p) {
            const int j = (i * c + ch) * hw + p;
            sum_g += g[j];
            sum_gx += g[j] * (*xhat)[j];
          }
        if (gg) gg[ch] += sum_gx;
        if (gb) gb[ch] += sum_g;
        if (!gx) continue;
        const T gm = node(gamma).val[ch];
        const T is = (*inv_std)[ch];
        for (int i = 0; i < n; ++i)
          for (int p = 0; p < hw; ++p) {
            const int j = (i * c + ch) * hw + p;
            if (training)
              gx[j] += gm * is * (g[j] - sum_g / cnt - (*xhat)[j] * sum_gx / cnt);
            else
              gx[j] += gm * is * g[j];
          }
      }
    });
    return y;
  }

  /// Layer normalization over the last dimension.
  Var layernorm(Var x, Var gamma, Var beta, T eps = T(1e-5)) {
    const auto s = shape(x);
    const int d = s.back();
    if (node(gamma).size != static_cast<std::size_t>(d)) throw DataError("layernorm width mismatch");
    const std::size_t rows = node(x).size / d;
    Var y = make(s, needs(x, gamma, beta));
    auto xhat = std::make_shared<std::vector<T>>(node(x).size);
    auto inv_std = std::make_shared<std::vector<T>>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* xr = node(x).val + r * d;
      T mu = 0;
      for (int j = 0; j < d; ++j) mu += xr[j];
      mu /= d;
      T var = 0;
      for (int j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
      var /= d;
      const T is = T(1) / std::sqrt(var + eps);
      (*inv_std)[r] = is;
      for (int j = 0; j < d; ++j) {
        const T xh = (xr[j] - mu) * is;
        (*xhat)[r * d + j] = xh;
        node(y).val[r * d + j] = node(gamma).val[j] * xh + node(beta).val[j];
      }
    }
    on_backward(y, [this, x, gamma, beta, y, rows, d, xhat, inv_std] {
      const T* g = node(y).grd;
      T* gx = node(x).grd;
      T* gg = node(gamma).grd;
      T* gb = node(beta).grd;
      std::vector<T> gh(d);
      for (std::size_t r = 0; r < rows; ++r) {
        T sum_gh = 0, sum_ghx = 0;
        for (int j = 0; j < d; ++j) {
          const T gy = g[r * d + j];
          const T xh = (*xhat)[r * d + j];
          if (gg) gg[j] += gy * xh;
          if (gb) gb[j] += gy;
          gh[j] = gy * node(gamma).val[j];
          sum_gh += gh[j];
          sum_ghx += gh[j] * xh;
        }
        if (!gx) continue;
        const T is = (*inv_std)[r];
        for (int j = 0; j < d; ++j)
          gx[r * d + j] += is * (gh[j] - sum_gh / d - (*xhat)[r * d + j] * sum_ghx / d);
      }
    });
    return y;
  }

  /// Softmax over the last dimension.
  Var softmax(Var x) {
    const auto s = shape(x);
    const int d = s.back();
    const std::size_t rows = node(x).size / d;
    Var y = make(s, needs(x));
    for (std::size_t r = 0; r < rows; ++r) softmax_row(node(x).val + r * d, node(y).val + r * d, d);
    on_backward(y, [this, x, y, rows, d] {
      T* gx = node(x).grd;
      if (!gx) return;
      for (std::size_t r = 0; r < rows; ++r) {
        const T* p = node(y).val + r * d;
        const T* g = node(y).grd + r * d;
        T dot = 0;
        for (int j = 0; j < d; ++j) dot += p[j] * g[j];
        for (int j = 0; j < d; ++j) gx[r * d + j] += p[j] * (g[j] - dot);
      }
    });
    return y;
  }

  /// Scaled dot-product self-attention with `heads` heads. qkv: [N, T, 3D]
  /// laid out as [q | k | v]; output [N, T, D] (heads concatenated).
  Var multi_head_attention(Var qkv, int heads) {
    const auto s = shape(qkv);
    if (s.size() != 3 || s[2] % 3 != 0 || (s[2] / 3) % heads != 0)
      throw DataError("attention expects [N, T, 3D] with D divisible by heads");
    const int n = s[0], t = s[1], d = s[2] / 3, dh = d / heads;
    const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
    Var y = make({n, t, d}, needs(qkv));
    auto probs = std::make_shared<std::vector<T>>(static_cast<std::size_t>(n) * heads * t * t);
    const T* in = node(qkv).val;
    std::vector<T> scores(t);
    for (int i = 0; i < n; ++i)
      for (int h = 0; h < heads; ++h) {
        T* P = probs->data() + (static_cast<std::size_t>(i) * heads + h) * t * t;
        for (int a = 0; a < t; ++a) {
          const T* q = in + (static_cast<std::size_t>(i) * t + a) * 3 * d + h * dh;
          for (int b = 0; b < t; ++b) {
            const T* k = in + (static_cast<std::size_t>(i) * t + b) * 3 * d + d + h * dh;
            T acc = 0;
            for (int e = 0; e < dh; ++e) acc += q[e] * k[e];
            scores[b] = acc * inv_sqrt;
          }
          softmax_row(scores.data(), P + a * t, t);
          T* out = node(y).val + (static_cast<std::size_t>(i) * t + a) * d + h * dh;
          for (int e = 0; e < dh; ++e) out[e] = 0;
          for (int b = 0; b < t; ++b) {
            const T* v = in + (static_cast<std::size_t>(i) * t + b) * 3 * d + 2 * d + h * dh;
            const T pb = P[a * t + b];
            for (int e = 0; e < dh; ++e) out[e] += pb * v[e];
          }
        }
      }
    on_backward(y, [this, qkv, y, n, t, d, dh, heads, inv_sqrt, probs] {
      T* gin = node(qkv).grd;
      if (!gin) return;
      const T* in = node(qkv).val;
      const T* g = node(y).grd;
      std::vector<T> dp(t), ds(t);
      for (int i = 0; i < n; ++i)
        for (int h = 0; h < heads; ++h) {
          const T* P = probs->data() + (static_cast<std::size_t>(i) * heads + h) * t * t;
          for (int a = 0; a < t; ++a) {
            const T* go = g + (static_cast<std::size_t>(i) * t + a) * d + h * dh;
            T dot = 0;
            for (int b = 0; b < t; ++b) {
              const std::size_t rb = (static_cast<std::size_t>(i) * t + b) * 3 * d;
              const T* v = in + rb + 2 * d + h * dh;
              T* gv = gin + rb + 2 * d + h * dh;
              T acc = 0;
              for (int e = 0; e < dh; ++e) {
                acc += go[e] * v[e];
                gv[e] += P[a * t + b] * go[e];
              }
              dp[b] = acc;
              dot += acc * P[a * t + b];
            }
            for (int b = 0; b < t; ++b) ds[b] = P[a * t + b] * (dp[b] - dot) * inv_sqrt;
            const std::size_t ra = (static_cast<std::size_t>(i) * t + a) * 3 * d;
            const T* q = in + ra + h * dh;
            T* gq = gin + ra + h * dh;
            for (int b = 0; b < t; ++b) {
              const std::size_t rb = (static_cast<std::size_t>(i) * t + b) * 3 * d;
              const T* k = in + rb + d + h * dh;
              T* gk = gin + rb + d + h * dh;
              for (int e = 0; e < dh; ++e) {
                gq[e] += ds[b] * k[e];
                gk[e] += ds[b] * q[e];
              }
            }
          }
        }
    });
    return y;
  }

 private:
  struct Node {
    Shape shape;
    std::size_t size = 0;
    std::vector<T> own_value;
    std::vector<T> own_grad;
    T* val = nullptr;
    T* grd = nullptr;
    bool requires_grad = false;
    std::function<void()> backward;
  };

  Node& node(Var v) { return *nodes_[v.id]; }
  const Node& node(Var v) const { return *nodes_[v.id]; }

  Var make(Shape shape, bool requires_grad) {
    auto n = std::make_unique<Node>();
    n->size = numel(shape);
    n->shape = std::move(shape);
    n->own_value.assign(n->size, T(0));
    n->val = n->own_value.data();
    n->requires_grad = requires_grad && grad_enabled_;
    if (n->requires_grad) {
      n->own_grad.assign(n->size, T(0));
      n->grd = n->own_grad.data();
    }
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  template <class... V>
  bool needs(V... vs) const {
    return grad_enabled_ && (node(vs).requires_grad || ...);
  }

  template <class F>
  void on_backward(Var y, F&& f) {
    if (node(y).requires_grad) node(y).backward = std::forward<F>(f);
  }

  void check_same(Var a, Var b, const char* op) const {
    if (shape(a) != shape(b))
      throw DataError(std::string(op) + ": shape mismatch " + shape_str(shape(a)) + " vs " + shape_str(shape(b)));
  }

  static void softmax_row(const T* in, T* out, int d) {
    T mx = -std::numeric_limits<T>::infinity();
    for (int j = 0; j < d; ++j) mx = std::max(mx, in[j]);
    T sum = 0;
    for (int j = 0; j < d; ++j) {
      out[j] = std::exp(in[j] - mx);
      sum += out[j];
    }
    for (int j = 0; j < d; ++j) out[j] /= sum;
  }

  static void im2col(const T* x, RowMat<T>& col, int n, int ci, int H, int W, int K, int stride, int pad, int ho,
                     int wo) {
    const Eigen::Index cols = col.cols();
    const int P = ho * wo;
    for (int c = 0; c < ci; ++c)
      for (int ky = 0; ky < K; ++ky)
        for (int kx = 0; kx < K; ++kx) {
          T* row = col.data() + static_cast<Eigen::Index>((c * K + ky) * K + kx) * cols;
          for (int i = 0; i < n; ++i) {
            const T* xs = x + (static_cast<std::size_t>(i) * ci + c) * H * W;
            T* dst = row + static_cast<Eigen::Index>(i) * P;
            for (int oy = 0; oy < ho; ++oy) {
              const int iy = oy * stride - pad + ky;
              for (int ox = 0; ox < wo; ++ox) {
                const int ix = ox * stride - pad + kx;
                dst[oy * wo + ox] = (iy >= 0 && iy < H && ix >= 0 && ix < W) ? xs[iy * W + ix] : T(0);
              }
            }
          }
        }
  }

  static void col2im(const RowMat<T>& col, T* gx, int n, int ci, int H, int W, int K, int stride, int pad, int ho,
                     int wo) {
    const Eigen::Index cols = col.cols();
    const int P = ho * wo;
    for (int c = 0; c < ci; ++c)
      for (int ky = 0; ky < K; ++ky)
        for (int kx = 0; kx < K; ++kx) {
          const T* row = col.data() + static_cast<Eigen::Index>((c * K + ky) * K + kx) * cols;
          for (int i = 0; i < n; ++i) {
            T* gs = gx + (static_cast<std::size_t>(i) * ci + c) * H * W;
            const T* src = row + static_cast<Eigen::Index>(i) * P;
            for (int oy = 0; oy < ho; ++oy) {
              const int iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= H) continue;
              for (int ox = 0; ox < wo; ++ox) {
                const int ix = ox * stride - pad + kx;
                if (ix >= 0 && ix < W) gs[iy * W + ix] += src[oy * wo + ox];
              }
            }
          }
        }
  }

  bool grad_enabled_;
  std::vector<std::unique_ptr<Node>> nodes_;
};

}  // namespace rooftop::nn
