#include "evsteer/autodiff.hpp"

#include <algorithm>
#include <memory>
#include <stdexcept>
#include <string>

namespace evsteer {

namespace {

// C[M,N] += A[M,K] * B[K,N]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * n;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

// C[M,N] += A[K,M]^T * B[K,N]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[p * m + i];
      double* crow = c + i * n;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

struct ConvGeometry {
  std::size_t channels, height, width, kernel, stride, pad, out_h, out_w;
  std::size_t rows() const { return channels * kernel * kernel; }
  std::size_t cols() const { return out_h * out_w; }
};

void im2col(const ConvGeometry& g, const double* x, double* col) {
  const auto k = g.kernel;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* dst = col + ((c * k + ky) * k + kx) * g.cols();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          double* drow = dst + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(drow, drow + g.out_w, 0.0);
            continue;
          }
          const double* srow = x + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            drow[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) ? 0.0 : srow[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* col, double* dx) {
  const auto k = g.kernel;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* src = col + ((c * k + ky) * k + kx) * g.cols();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          double* drow = dx + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          const double* srow = src + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.width)) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

[[noreturn]] void shape_error(const std::string& op, const std::string& detail) {
  throw std::invalid_argument(op + ": " + detail);
}

}  // namespace

Var Graph::push(Tensor value, bool requires_grad) {
  Node node;
  if (requires_grad) node.grad = Tensor(value.shape());
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return {nodes_.size() - 1};
}

Tensor& Graph::grad_buffer(std::size_t id) { return nodes_[id].grad; }

const Tensor& Graph::grad(Var v) const {
  const Node& node = nodes_.at(v.id);
  if (!node.requires_grad) throw std::logic_error("grad requested for a node that does not require it");
  return node.grad;
}

Var Graph::input(Tensor value) { return push(std::move(value), false); }

Var Graph::parameter(Tensor value) { return push(std::move(value), true); }

Var Graph::conv2d(Var x, Var weight, Var bias, std::size_t stride, std::size_t pad) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(weight);
  if (xv.rank() != 4 || wv.rank() != 4) shape_error("conv2d", "expects 4-D input and weight");
  if (wv.dim(1) != xv.dim(1)) {
    shape_error("conv2d", "input has " + std::to_string(xv.dim(1)) + " channels, weight expects " +
                              std::to_string(wv.dim(1)));
  }
  if (wv.dim(2) != wv.dim(3)) shape_error("conv2d", "kernel must be square");
  if (value(bias).size() != wv.dim(0)) shape_error("conv2d", "bias size mismatch");
  if (stride == 0) shape_error("conv2d", "stride must be positive");

  ConvGeometry g{};
  g.channels = xv.dim(1);
  g.height = xv.dim(2);
  g.width = xv.dim(3);
  g.kernel = wv.dim(2);
  g.stride = stride;
  g.pad = pad;
  if (g.height + 2 * pad < g.kernel || g.width + 2 * pad < g.kernel) shape_error("conv2d", "input too small");
  g.out_h = (g.height + 2 * pad - g.kernel) / stride + 1;
  g.out_w = (g.width + 2 * pad - g.kernel) / stride + 1;
  const std::size_t batch = xv.dim(0);
  const std::size_t out_c = wv.dim(0);

  Tensor out({batch, out_c, g.out_h, g.out_w});
  auto cols = std::make_shared<std::vector<double>>(batch * g.rows() * g.cols());
  const double* bv = value(bias).data().data();
  for (std::size_t n = 0; n < batch; ++n) {
    double* col = cols->data() + n * g.rows() * g.cols();
    im2col(g, xv.data().data() + n * g.channels * g.height * g.width, col);
    double* o = out.data().data() + n * out_c * g.cols();
    for (std::size_t oc = 0; oc < out_c; ++oc) std::fill(o + oc * g.cols(), o + (oc + 1) * g.cols(), bv[oc]);
    gemm_nn(out_c, g.cols(), g.rows(), wv.data().data(), col, o);
  }

  const bool needs = requires_grad(x) || requires_grad(weight) || requires_grad(bias);
  Var y = push(std::move(out), needs);
  if (!needs) return y;
  nodes_[y.id].backward = [this, x, weight, bias, y, g, cols, batch, out_c]() {
    const Tensor& dy = nodes_[y.id].grad;
    const std::size_t in_plane = g.channels * g.height * g.width;
    std::vector<double> dcol(g.rows() * g.cols());
    for (std::size_t n = 0; n < batch; ++n) {
      const double* dyn = dy.data().data() + n * out_c * g.cols();
      const double* col = cols->data() + n * g.rows() * g.cols();
      if (requires_grad(weight)) {
        gemm_nt(out_c, g.rows(), g.cols(), dyn, col, grad_buffer(weight.id).data().data());
      }
      if (requires_grad(bias)) {
        double* db = grad_buffer(bias.id).data().data();
        for (std::size_t oc = 0; oc < out_c; ++oc) {
          double acc = 0.0;
          const double* row = dyn + oc * g.cols();
#pragma omp simd reduction(+ : acc)
          for (std::size_t j = 0; j < g.cols(); ++j) acc += row[j];
          db[oc] += acc;
        }
      }
      if (requires_grad(x)) {
        std::fill(dcol.begin(), dcol.end(), 0.0);
        gemm_tn(g.rows(), g.cols(), out_c, value(weight).data().data(), dyn, dcol.data());
        col2im_add(g, dcol.data(), grad_buffer(x.id).data().data() + n * in_plane);
      }
    }
  };
  return y;
}

Var Graph::relu(Var x) {
  Tensor out = value(x);
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  const bool needs = requires_grad(x);
  Var y = push(std::move(out), needs);
  if (!needs) return y;
  nodes_[y.id].backward = [this, x, y]() {
    const auto xv = value(x).data();
    const auto dy = nodes_[y.id].grad.data();
    auto dx = grad_buffer(x.id).data();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += xv[i] > 0.0 ? dy[i] : 0.0;
  };
  return y;
}

Var Graph::add(Var a, Var b) {
  if (!value(a).same_shape(value(b))) {
    shape_error("add", shape_string(value(a).shape()) + " vs " + shape_string(value(b).shape()));
  }
  Tensor out = value(a);
  const auto bv = value(b).data();
  auto ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += bv[i];
  const bool needs = requires_grad(a) || requires_grad(b);
  Var y = push(std::move(out), needs);
  if (!needs) return y;
  nodes_[y.id].backward = [this, a, b, y]() {
    const auto dy = nodes_[y.id].grad.data();
    for (Var v : {a, b}) {
      if (!requires_grad(v)) continue;
      auto d = grad_buffer(v.id).data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i];
    }
  };
  return y;
}

Var Graph::global_avg_pool(Var x) {
  const Tensor& xv = value(x);
  if (xv.rank() != 4) shape_error("global_avg_pool", "expects (N, C, H, W)");
  const std::size_t n = xv.dim(0);
  const std::size_t c = xv.dim(1);
  const std::size_t plane = xv.dim(2) * xv.dim(3);
  Tensor out({n, c});
  for (std::size_t i = 0; i < n * c; ++i) {
    const double* p = xv.data().data() + i * plane;
    double acc = 0.0;
    for (std::size_t j = 0; j < plane; ++j) acc += p[j];
    out[i] = acc / static_cast<double>(plane);
  }
  const bool needs = requires_grad(x);
  Var y = push(std::move(out), needs);
  if (!needs) return y;
  nodes_[y.id].backward = [this, x, y, n, c, plane]() {
    const auto dy = nodes_[y.id].grad.data();
    auto dx = grad_buffer(x.id).data();
    const double inv = 1.0 / static_cast<double>(plane);
    for (std::size_t i = 0; i < n * c; ++i) {
      const double g = dy[i] * inv;
      double* p = dx.data() + i * plane;
      for (std::size_t j = 0; j < plane; ++j) p[j] += g;
    }
  };
  return y;
}

Var Graph::linear(Var x, Var weight, Var bias) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(weight);
  if (xv.rank() != 2 || wv.rank() != 2) shape_error("linear", "expects (N, I) input and (O, I) weight");
  if (xv.dim(1) != wv.dim(1)) {
    shape_error("linear", "input width " + std::to_string(xv.dim(1)) + " vs weight " + shape_string(wv.shape()));
  }
  if (value(bias).size() != wv.dim(0)) shape_error("linear", "bias size mismatch");
  const std::size_t n = xv.dim(0);
  const std::size_t in = xv.dim(1);
  const std::size_t out_f = wv.dim(0);
  Tensor out({n, out_f});
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t o = 0; o < out_f; ++o) out[s * out_f + o] = value(bias)[o];
  }
  gemm_nt(n, out_f, in, xv.data().data(), wv.data().data(), out.data().data());
  const bool needs = requires_grad(x) || requires_grad(weight) || requires_grad(bias);
  Var y = push(std::move(out), needs);
  if (!needs) return y;
  nodes_[y.id].backward = [this, x, weight, bias, y, n, in, out_f]() {
    const double* dy = nodes_[y.id].grad.data().data();
    if (requires_grad(weight)) {
      gemm_tn(out_f, in, n, dy, value(x).data().data(), grad_buffer(weight.id).data().data());
    }
    if (requires_grad(bias)) {
      auto db = grad_buffer(bias.id).data();
      for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t o = 0; o < out_f; ++o) db[o] += dy[s * out_f + o];
      }
    }
    if (requires_grad(x)) {
      gemm_nn(n, in, out_f, dy, value(weight).data().data(), grad_buffer(x.id).data().data());
    }
  };
  return y;
}

Var Graph::mse(Var pred, std::span<const double> targets) {
  const Tensor& pv = value(pred);
  if (pv.size() != targets.size() || targets.empty()) {
    shape_error("mse", std::to_string(pv.size()) + " predictions vs " + std::to_string(targets.size()) + " targets");
  }
  const auto n = static_cast<double>(targets.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double d = pv[i] - targets[i];
    loss += d * d;
  }
  const bool needs = requires_grad(pred);
  Var y = push(Tensor({1}, {loss / n}), needs);
  if (!needs) return y;
  std::vector<double> t(targets.begin(), targets.end());
  nodes_[y.id].backward = [this, pred, y, t = std::move(t), n]() {
    const double dy = nodes_[y.id].grad[0];
    const auto pv = value(pred).data();
    auto dp = grad_buffer(pred.id).data();
    for (std::size_t i = 0; i < t.size(); ++i) dp[i] += dy * 2.0 * (pv[i] - t[i]) / n;
  };
  return y;
}

void Graph::backward(Var root) {
  Node& r = nodes_.at(root.id);
  if (r.value.size() != 1) throw std::invalid_argument("backward root must be a scalar");
  if (!r.requires_grad) return;
  r.grad[0] += 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    if (nodes_[i].requires_grad && nodes_[i].backward) nodes_[i].backward();
  }
}

}  // namespace evsteer
