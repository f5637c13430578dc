#pragma once
#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "alas/rng.hpp"

// Reverse-mode autodiff over dense row-major tensors, rank <= 3.
// Graphs are taped at op-call time; backward() walks the tape in reverse
// topological order and accumulates into leaf gradient buffers.
// Templated on the scalar so the float32 runtime path and the float64
// finite-difference oracle share one implementation.

namespace alas::ad {

template <class S>
struct Node {
  std::vector<int> shape;
  std::vector<S> v;                       // values
  std::vector<S> g;                       // gradient, lazily allocated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backfn;      // pulls node.g into parents' g
  const char* op = "leaf";

  size_t numel() const { return v.size(); }
  void ensure_grad() {
    if (g.size() != v.size()) g.assign(v.size(), S(0));
  }
};

template <class S>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<S>> n) : n_(std::move(n)) {}

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    auto n = std::make_shared<Node<S>>();
    n->shape = std::move(shape);
    n->v.assign(count(n->shape), S(0));
    n->requires_grad = requires_grad;
    return Tensor(n);
  }
  static Tensor full(std::vector<int> shape, S value, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.n_->v.begin(), t.n_->v.end(), value);
    return t;
  }
  static Tensor from(std::vector<S> data, std::vector<int> shape, bool requires_grad = false) {
    if (data.size() != count(shape)) throw std::runtime_error("tensor init: data/shape size mismatch");
    auto n = std::make_shared<Node<S>>();
    n->shape = std::move(shape);
    n->v = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(n);
  }

  const std::vector<int>& shape() const { return node().shape; }
  int dim(int i) const { return node().shape[size_t(i)]; }
  int rank() const { return int(node().shape.size()); }
  size_t numel() const { return node().v.size(); }
  std::vector<S>& values() { return node().v; }
  const std::vector<S>& values() const { return node().v; }
  std::vector<S>& grad() { return node().g; }
  const std::vector<S>& grad() const { return node().g; }
  bool requires_grad() const { return node().requires_grad; }
  void set_requires_grad(bool b) { node().requires_grad = b; }
  S item() const {
    if (numel() != 1) throw std::runtime_error("item(): tensor is not scalar");
    return node().v[0];
  }
  std::shared_ptr<Node<S>> ptr() const { return n_; }
  Node<S>& node() const {
    if (!n_) throw std::runtime_error("use of empty tensor");
    return *n_;
  }
  bool defined() const { return bool(n_); }

  static size_t count(const std::vector<int>& shape) {
    size_t c = 1;
    for (int d : shape) {
      if (d <= 0) throw std::runtime_error("tensor shape has non-positive dim");
      c *= size_t(d);
    }
    return c;
  }

 private:
  std::shared_ptr<Node<S>> n_;
};

namespace detail {

template <class S>
inline std::shared_ptr<Node<S>> make_node(std::vector<int> shape,
                                          std::vector<std::shared_ptr<Node<S>>> parents,
                                          const char* op) {
  auto n = std::make_shared<Node<S>>();
  n->shape = std::move(shape);
  n->v.assign(Tensor<S>::count(n->shape), S(0));
  n->op = op;
  for (auto& p : parents)
    if (p->requires_grad) n->requires_grad = true;
  n->parents = std::move(parents);
  return n;
}

inline void require_same_shape(const std::vector<int>& a, const std::vector<int>& b, const char* op) {
  if (a != b) throw std::runtime_error(std::string("shape mismatch in ") + op);
}

}  // namespace detail

// ---- elementwise ----

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "add");
  auto n = detail::make_node<S>(a.shape(), {a.ptr(), b.ptr()}, "add");
  const S* pa = a.values().data();
  const S* pb = b.values().data();
  S* pv = n->v.data();
  for (size_t i = 0; i < n->v.size(); ++i) pv[i] = pa[i] + pb[i];
  if (n->requires_grad)
    n->backfn = [](Node<S>& self) {
      for (int k = 0; k < 2; ++k) {
        auto& p = self.parents[size_t(k)];
        if (!p->requires_grad) continue;
        p->ensure_grad();
        S* pg = p->g.data();
        const S* sg = self.g.data();
        for (size_t i = 0; i < self.g.size(); ++i) pg[i] += sg[i];
      }
    };
  return Tensor<S>(n);
}

template <class S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "sub");
  auto n = detail::make_node<S>(a.shape(), {a.ptr(), b.ptr()}, "sub");
  for (size_t i = 0; i < n->v.size(); ++i) n->v[i] = a.values()[i] - b.values()[i];
  if (n->requires_grad)
    n->backfn = [](Node<S>& self) {
      auto& pa = self.parents[0];
      auto& pb = self.parents[1];
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (size_t i = 0; i < self.g.size(); ++i) pa->g[i] += self.g[i];
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (size_t i = 0; i < self.g.size(); ++i) pb->g[i] -= self.g[i];
      }
    };
  return Tensor<S>(n);
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "mul");
  auto n = detail::make_node<S>(a.shape(), {a.ptr(), b.ptr()}, "mul");
  for (size_t i = 0; i < n->v.size(); ++i) n->v[i] = a.values()[i] * b.values()[i];
  if (n->requires_grad)
    n->backfn = [](Node<S>& self) {
      auto& pa = self.parents[0];
      auto& pb = self.parents[1];
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (size_t i = 0; i < self.g.size(); ++i) pa->g[i] += self.g[i] * pb->v[i];
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (size_t i = 0; i < self.g.size(); ++i) pb->g[i] += self.g[i] * pa->v[i];
      }
    };
  return Tensor<S>(n);
}

template <class S>
Tensor<S> neg(const Tensor<S>& a) {
  auto n = detail::make_node<S>(a.shape(), {a.ptr()}, "neg");
  for (size_t i = 0; i < n->v.size(); ++i) n->v[i] = -a.values()[i];
  if (n->requires_grad)
    n->backfn = [](Node<S>& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (size_t i = 0; i < self.g.size(); ++i) p->g[i] -= self.g[i];
    };
  return Tensor<S>(n);
}

template <class S>
Tensor<S> scale(const Tensor<S>& a, S c) {
  auto n = detail::make_node<S>(a.shape(), {a.ptr()}, "scale");
  for (size_t i = 0; i < n->v.size(); ++i) n->v[i] = c * a.values()[i];
  if (n->requires_grad)
    n->backfn = [c](Node<S>& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (size_t i = 0; i < self.g.size(); ++i) p->g[i] += c * self.g[i];
    };
  return Tensor<S>(n);
}

template <class S>
Tensor<S> add_const(const Tensor<S>& a, S c) {
  auto n = detail::make_node<S>(a.shape(), {a.ptr()}, "add_const");
  for (size_t i = 0; i < n->v.size(); ++i) n->v[i] = a.values()[i] + c;
  if (n->requires_grad)
    n->backfn = [](Node<S>& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (size_t i = 0; i < self.g.size(); ++i) p->g[i] += self.g[i];
    };
  return Tensor<S>(n);
}

// broadcast a length-C vector across the trailing axis of x
template <class S>
Tensor<S> add_rowvec(const Tensor<S>& x, const Tensor<S>& b) {
  int C = x.dim(x.rank() - 1);
  if (b.rank() != 1 || b.dim(0) != C) throw std::runtime_error("add_rowvec: bias shape mismatch");
  auto n = detail::make_node<S>(x.shape(), {x.ptr(), b.ptr()}, "add_rowvec");
  size_t rows = n->v.size() / size_t(C);
  for (size_t r = 0; r < rows; ++r)
    for (int c = 0; c < C; ++c) n->v[r * size_t(C) + size_t(c)] = x.values()[r * size_t(C) + size_t(c)] + b.values()[size_t(c)];
  if (n->requires_grad)
    n->backfn = [C, rows](Node<S>& self) {
      auto& px = self.parents[0];
      auto& pb = self.parents[1];
      if (px->requires_grad) {
        px->ensure_grad();
        for (size_t i = 0; i < self.g.size(); ++i) px->g[i] += self.g[i];
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (size_t r = 0; r < rows; ++r)
          for (int c = 0; c < C; ++c) pb->g[size_t(c)] += self.g[r * size_t(C) + size_t(c)];
      }
    };
  return Tensor<S>(n);
}

template <class S>
Tensor<S> mul_rowvec(const Tensor<S>& x, const Tensor<S>& s) {
  int C = x.dim(x.rank() - 1);
  if (s.rank() != 1 || s.dim(0) != C) throw std::runtime_error("mul_rowvec: scale shape mismatch");
  auto n = detail::make_node<S>(x.shape(), {x.ptr(), s.ptr()}, "mul_rowvec");
  size_t rows = n->v.size() / size_t(C);
  for (size_t r = 0; r < rows; ++r)
    for (int c = 0; c < C; ++c)
      n->v[r * size_t(C) + size_t(c)] = x.values()[r * size_t(C) + size_t(c)] * s.values()[size_t(c)];
  if (n->requires_grad)
    n->backfn = [C, rows](Node<S>& self) {
      auto& px = self.parents[0];
      auto& ps = self.parents[1];
      if (px->requires_grad) {
        px->ensure_grad();
        for (size_t r = 0; r < rows; ++r)
          for (int c = 0; c < C; ++c)
            px->g[r * size_t(C) + size_t(c)] += self.g[r * size_t(C) + size_t(c)] * ps->v[size_t(c)];
      }
      if (ps->requires_grad) {
        ps->ensure_grad();
        for (size_t r = 0; r < rows; ++r)
          for (int c = 0; c < C; ++c)
            ps->g[size_t(c)] += self.g[r * size_t(C) + size_t(c)] * px->v[r * size_t(C) + size_t(c)];
      }
    };
  return Tensor<S>(n);
}

// ---- unary nonlinearities ----

template <class S, class F, class DF>
Tensor<S> unary_custom(const Tensor<S>& a, F f, DF dfdx_from_xy, const char* op) {
  auto n = detail::make_node<S>(a.shape(), {a.ptr()}, op);
  for (size_t i = 0; i < n->v.size(); ++i) n->v[i] = f(a.values()[i]);
  if (n->requires_grad)
    n->backfn = [dfdx_from_xy](Node<S>& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (size_t i = 0; i < self.g.size(); ++i)
        p->g[i] += self.g[i] * dfdx_from_xy(p->v[i], self.v[i]);
    };
  return Tensor<S>(n);
}

template <class S>
Tensor<S> sigmoid(const Tensor<S>& a) {
  return unary_custom(
      a, [](S x) { return S(1) / (S(1) + std::exp(-x)); },
      [](S, S y) { return y * (S(1) - y); }, "sigmoid");
}

template <class S>
Tensor<S> tanh_(const Tensor<S>& a) {
  return unary_custom(
      a, [](S x) { return std::tanh(x); }, [](S, S y) { return S(1) - y * y; }, "tanh");
}

template <class S>
Tensor<S> relu(const Tensor<S>& a) {
  return unary_custom(
      a, [](S x) { return x > S(0) ? x : S(0); }, [](S x, S) { return x > S(0) ? S(1) : S(0); },
      "relu");
}

template <class S>
Tensor<S> exp_(const Tensor<S>& a) {
  return unary_custom(
      a, [](S x) { return std::exp(x); }, [](S, S y) { return y; }, "exp");
}

template <class S>
Tensor<S> log_(const Tensor<S>& a) {
  return unary_custom(
      a, [](S x) { return std::log(x); }, [](S x, S) { return S(1) / x; }, "log");
}

template <class S>
Tensor<S> square(const Tensor<S>& a) {
  return unary_custom(
      a, [](S x) { return x * x; }, [](S x, S) { return S(2) * x; }, "square");
}

template <class S>
Tensor<S> sqrt_(const Tensor<S>& a) {
  return unary_custom(
      a, [](S x) { return std::sqrt(x); }, [](S, S y) { return S(0.5) / y; }, "sqrt");
}

template <class S>
Tensor<S> clamp(const Tensor<S>& a, S lo, S hi) {
  return unary_custom(
      a, [lo, hi](S x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](S x, S) { return (x < lo || x > hi) ? S(0) : S(1); }, "clamp");
}

template <class S>
Tensor<S> minimum(const Tensor<S>& a, const Tensor<S>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "minimum");
  auto n = detail::make_node<S>(a.shape(), {a.ptr(), b.ptr()}, "minimum");
  for (size_t i = 0; i < n->v.size(); ++i)
    n->v[i] = a.values()[i] <= b.values()[i] ? a.values()[i] : b.values()[i];
  if (n->requires_grad)
    n->backfn = [](Node<S>& self) {
      auto& pa = self.parents[0];
      auto& pb = self.parents[1];
      if (pa->requires_grad) pa->ensure_grad();
      if (pb->requires_grad) pb->ensure_grad();
      for (size_t i = 0; i < self.g.size(); ++i) {
        bool takes_a = pa->v[i] <= pb->v[i];
        if (takes_a && pa->requires_grad) pa->g[i] += self.g[i];
        if (!takes_a && pb->requires_grad) pb->g[i] += self.g[i];
      }
    };
  return Tensor<S>(n);
}

// ---- matrix products ----

template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw std::runtime_error("matmul: bad shapes");
  int N = a.dim(0), K = a.dim(1), M = b.dim(1);
  auto n = detail::make_node<S>({N, M}, {a.ptr(), b.ptr()}, "matmul");
  {
    const S* A = a.values().data();
    const S* B = b.values().data();
    S* C = n->v.data();
    for (int i = 0; i < N; ++i) {
      S* ci = C + size_t(i) * M;
      const S* ai = A + size_t(i) * K;
      for (int k = 0; k < K; ++k) {
        S aik = ai[k];
        const S* bk = B + size_t(k) * M;
        for (int m = 0; m < M; ++m) ci[m] += aik * bk[m];
      }
    }
  }
  if (n->requires_grad)
    n->backfn = [N, K, M](Node<S>& self) {
      auto& pa = self.parents[0];
      auto& pb = self.parents[1];
      const S* G = self.g.data();
      if (pa->requires_grad) {  // dA = G * B^T
        pa->ensure_grad();
        const S* B = pb->v.data();
        S* dA = pa->g.data();
        for (int i = 0; i < N; ++i)
          for (int k = 0; k < K; ++k) {
            const S* gi = G + size_t(i) * M;
            const S* bk = B + size_t(k) * M;
            S acc = 0;
            for (int m = 0; m < M; ++m) acc += gi[m] * bk[m];
            dA[size_t(i) * K + k] += acc;
          }
      }
      if (pb->requires_grad) {  // dB = A^T * G
        pb->ensure_grad();
        const S* A = pa->v.data();
        S* dB = pb->g.data();
        for (int i = 0; i < N; ++i) {
          const S* ai = A + size_t(i) * K;
          const S* gi = G + size_t(i) * M;
          for (int k = 0; k < K; ++k) {
            S aik = ai[k];
            S* dbk = dB + size_t(k) * M;
            for (int m = 0; m < M; ++m) dbk[m] += aik * gi[m];
          }
        }
      }
    };
  return Tensor<S>(n);
}

// x[B,T,C] * W[C,M] -> [B,T,M]
template <class S>
Tensor<S> matmul3(const Tensor<S>& x, const Tensor<S>& w) {
  if (x.rank() != 3 || w.rank() != 2 || x.dim(2) != w.dim(0))
    throw std::runtime_error("matmul3: bad shapes");
  int B = x.dim(0), T = x.dim(1), C = x.dim(2), M = w.dim(1);
  auto n = detail::make_node<S>({B, T, M}, {x.ptr(), w.ptr()}, "matmul3");
  {
    const S* X = x.values().data();
    const S* W = w.values().data();
    S* Y = n->v.data();
    size_t rows = size_t(B) * T;
    for (size_t r = 0; r < rows; ++r) {
      const S* xr = X + r * C;
      S* yr = Y + r * M;
      for (int k = 0; k < C; ++k) {
        S v = xr[k];
        const S* wk = W + size_t(k) * M;
        for (int m = 0; m < M; ++m) yr[m] += v * wk[m];
      }
    }
  }
  if (n->requires_grad)
    n->backfn = [B, T, C, M](Node<S>& self) {
      auto& px = self.parents[0];
      auto& pw = self.parents[1];
      size_t rows = size_t(B) * T;
      const S* G = self.g.data();
      if (px->requires_grad) {
        px->ensure_grad();
        const S* W = pw->v.data();
        S* dX = px->g.data();
        for (size_t r = 0; r < rows; ++r) {
          const S* gr = G + r * M;
          S* dxr = dX + r * C;
          for (int k = 0; k < C; ++k) {
            const S* wk = W + size_t(k) * M;
            S acc = 0;
            for (int m = 0; m < M; ++m) acc += gr[m] * wk[m];
            dxr[k] += acc;
          }
        }
      }
      if (pw->requires_grad) {
        pw->ensure_grad();
        const S* X = px->v.data();
        S* dW = pw->g.data();
        for (size_t r = 0; r < rows; ++r) {
          const S* xr = X + r * C;
          const S* gr = G + r * M;
          for (int k = 0; k < C; ++k) {
            S v = xr[k];
            S* dwk = dW + size_t(k) * M;
            for (int m = 0; m < M; ++m) dwk[m] += v * gr[m];
          }
        }
      }
    };
  return Tensor<S>(n);
}

template <class S>
Tensor<S> transpose2(const Tensor<S>& a) {
  if (a.rank() != 2) throw std::runtime_error("transpose2: rank != 2");
  int N = a.dim(0), K = a.dim(1);
  auto n = detail::make_node<S>({K, N}, {a.ptr()}, "transpose2");
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < K; ++k) n->v[size_t(k) * N + i] = a.values()[size_t(i) * K + k];
  if (n->requires_grad)
    n->backfn = [N, K](Node<S>& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (int i = 0; i < N; ++i)
        for (int k = 0; k < K; ++k) p->g[size_t(i) * K + k] += self.g[size_t(k) * N + i];
    };
  return Tensor<S>(n);
}

template <class S>
Tensor<S> transpose12(const Tensor<S>& a) {
  if (a.rank() != 3) throw std::runtime_error("transpose12: rank != 3");
  int B = a.dim(0), N = a.dim(1), K = a.dim(2);
  auto n = detail::make_node<S>({B, K, N}, {a.ptr()}, "transpose12");
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < N; ++i)
      for (int k = 0; k < K; ++k)
        n->v[(size_t(b) * K + k) * N + i] = a.values()[(size_t(b) * N + i) * K + k];
  if (n->requires_grad)
    n->backfn = [B, N, K](Node<S>& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int i = 0; i < N; ++i)
          for (int k = 0; k < K; ++k)
            p->g[(size_t(b) * N + i) * K + k] += self.g[(size_t(b) * K + k) * N + i];
    };
  return Tensor<S>(n);
}

// batched matmul: a[B,N,K] * b[B,K,M] -> [B,N,M]
template <class S>
Tensor<S> bmm(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1))
    throw std::runtime_error("bmm: bad shapes");
  int B = a.dim(0), N = a.dim(1), K = a.dim(2), M = b.dim(2);
  auto n = detail::make_node<S>({B, N, M}, {a.ptr(), b.ptr()}, "bmm");
  for (int bb = 0; bb < B; ++bb) {
    const S* A = a.values().data() + size_t(bb) * N * K;
    const S* Bm = b.values().data() + size_t(bb) * K * M;
    S* C = n->v.data() + size_t(bb) * N * M;
    for (int i = 0; i < N; ++i)
      for (int k = 0; k < K; ++k) {
        S aik = A[size_t(i) * K + k];
        const S* bk = Bm + size_t(k) * M;
        S* ci = C + size_t(i) * M;
        for (int m = 0; m < M; ++m) ci[m] += aik * bk[m];
      }
  }
  if (n->requires_grad)
    n->backfn = [B, N, K, M](Node<S>& self) {
      auto& pa = self.parents[0];
      auto& pb = self.parents[1];
      if (pa->requires_grad) pa->ensure_grad();
      if (pb->requires_grad) pb->ensure_grad();
      for (int bb = 0; bb < B; ++bb) {
        const S* G = self.g.data() + size_t(bb) * N * M;
        const S* A = pa->v.data() + size_t(bb) * N * K;
        const S* Bm = pb->v.data() + size_t(bb) * K * M;
        if (pa->requires_grad) {
          S* dA = pa->g.data() + size_t(bb) * N * K;
          for (int i = 0; i < N; ++i)
            for (int k = 0; k < K; ++k) {
              const S* gi = G + size_t(i) * M;
              const S* bk = Bm + size_t(k) * M;
              S acc = 0;
              for (int m = 0; m < M; ++m) acc += gi[m] * bk[m];
              dA[size_t(i) * K + k] += acc;
            }
        }
        if (pb->requires_grad) {
          S* dB = pb->g.data() + size_t(bb) * K * M;
          for (int i = 0; i < N; ++i) {
            const S* ai = A + size_t(i) * K;
            const S* gi = G + size_t(i) * M;
            for (int k = 0; k < K; ++k) {
              S aik = ai[k];
              S* dbk = dB + size_t(k) * M;
              for (int m = 0; m < M; ++m) dbk[m] += aik * gi[m];
            }
          }
        }
      }
    };
  return Tensor<S>(n);
}

// ---- 1-D convolution over the time axis, same padding, odd kernel ----
// x[B,T,Ci], w[k,Ci,Co], b[Co] -> [B,T,Co]
template <class S>
Tensor<S> conv1d_same(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  if (x.rank() != 3 || w.rank() != 3 || b.rank() != 1) throw std::runtime_error("conv1d: bad ranks");
  int B = x.dim(0), T = x.dim(1), Ci = x.dim(2);
  int k = w.dim(0), Co = w.dim(2);
  if (w.dim(1) != Ci || b.dim(0) != Co) throw std::runtime_error("conv1d: shape mismatch");
  if (k % 2 == 0) throw std::runtime_error("conv1d: kernel width must be odd");
  int half = k / 2;
  auto n = detail::make_node<S>({B, T, Co}, {x.ptr(), w.ptr(), b.ptr()}, "conv1d");
  {
    const S* X = x.values().data();
    const S* W = w.values().data();
    const S* Bv = b.values().data();
    S* Y = n->v.data();
    for (int bb = 0; bb < B; ++bb)
      for (int t = 0; t < T; ++t) {
        S* y = Y + (size_t(bb) * T + t) * Co;
        for (int c = 0; c < Co; ++c) y[c] = Bv[c];
        for (int dk = 0; dk < k; ++dk) {
          int tt = t + dk - half;
          if (tt < 0 || tt >= T) continue;  // zero padding
          const S* xr = X + (size_t(bb) * T + tt) * Ci;
          const S* wk = W + size_t(dk) * Ci * Co;
          for (int ci = 0; ci < Ci; ++ci) {
            S v = xr[ci];
            const S* wr = wk + size_t(ci) * Co;
            for (int c = 0; c < Co; ++c) y[c] += v * wr[c];
          }
        }
      }
  }
  if (n->requires_grad)
    n->backfn = [B, T, Ci, k, Co, half](Node<S>& self) {
      auto& px = self.parents[0];
      auto& pw = self.parents[1];
      auto& pb = self.parents[2];
      const S* G = self.g.data();
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (size_t r = 0; r < size_t(B) * T; ++r)
          for (int c = 0; c < Co; ++c) pb->g[size_t(c)] += G[r * Co + size_t(c)];
      }
      if (px->requires_grad) {
        px->ensure_grad();
        const S* W = pw->v.data();
        for (int bb = 0; bb < B; ++bb)
          for (int t = 0; t < T; ++t) {
            const S* gr = G + (size_t(bb) * T + t) * Co;
            for (int dk = 0; dk < k; ++dk) {
              int tt = t + dk - half;
              if (tt < 0 || tt >= T) continue;
              S* dxr = px->g.data() + (size_t(bb) * T + tt) * Ci;
              const S* wk = W + size_t(dk) * Ci * Co;
              for (int ci = 0; ci < Ci; ++ci) {
                const S* wr = wk + size_t(ci) * Co;
                S acc = 0;
                for (int c = 0; c < Co; ++c) acc += gr[c] * wr[c];
                dxr[ci] += acc;
              }
            }
          }
      }
      if (pw->requires_grad) {
        pw->ensure_grad();
        const S* X = px->v.data();
        for (int bb = 0; bb < B; ++bb)
          for (int t = 0; t < T; ++t) {
            const S* gr = G + (size_t(bb) * T + t) * Co;
            for (int dk = 0; dk < k; ++dk) {
              int tt = t + dk - half;
              if (tt < 0 || tt >= T) continue;
              const S* xr = X + (size_t(bb) * T + tt) * Ci;
              S* dwk = pw->g.data() + size_t(dk) * Ci * Co;
              for (int ci = 0; ci < Ci; ++ci) {
                S v = xr[ci];
                S* dwr = dwk + size_t(ci) * Co;
                for (int c = 0; c < Co; ++c) dwr[c] += v * gr[c];
              }
            }
          }
      }
    };
  return Tensor<S>(n);
}

// ---- softmax / layer norm over the trailing axis ----

template <class S>
Tensor<S> softmax_lastdim(const Tensor<S>& x) {
  int C = x.dim(x.rank() - 1);
  auto n = detail::make_node<S>(x.shape(), {x.ptr()}, "softmax");
  size_t rows = n->v.size() / size_t(C);
  for (size_t r = 0; r < rows; ++r) {
    const S* xr = x.values().data() + r * C;
    S* yr = n->v.data() + r * C;
    S mx = xr[0];
    for (int c = 1; c < C; ++c) mx = std::max(mx, xr[c]);
    S sum = 0;
    for (int c = 0; c < C; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      sum += yr[c];
    }
    for (int c = 0; c < C; ++c) yr[c] /= sum;
  }
  if (n->requires_grad)
    n->backfn = [C, rows](Node<S>& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (size_t r = 0; r < rows; ++r) {
        const S* y = self.v.data() + r * C;
        const S* g = self.g.data() + r * C;
        S dot = 0;
        for (int c = 0; c < C; ++c) dot += y[c] * g[c];
        S* dx = p->g.data() + r * C;
        for (int c = 0; c < C; ++c) dx[c] += y[c] * (g[c] - dot);
      }
    };
  return Tensor<S>(n);
}

// normalized to zero mean / unit variance per trailing-axis vector; no affine here
template <class S>
Tensor<S> layer_norm_lastdim(const Tensor<S>& x, S eps) {
  int C = x.dim(x.rank() - 1);
  auto n = detail::make_node<S>(x.shape(), {x.ptr()}, "layer_norm");
  size_t rows = n->v.size() / size_t(C);
  std::vector<S> inv_std(rows);
  for (size_t r = 0; r < rows; ++r) {
    const S* xr = x.values().data() + r * C;
    S mean = 0;
    for (int c = 0; c < C; ++c) mean += xr[c];
    mean /= S(C);
    S var = 0;
    for (int c = 0; c < C; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= S(C);
    S istd = S(1) / std::sqrt(var + eps);
    inv_std[r] = istd;
    S* yr = n->v.data() + r * C;
    for (int c = 0; c < C; ++c) yr[c] = (xr[c] - mean) * istd;
  }
  if (n->requires_grad)
    n->backfn = [C, rows, inv_std](Node<S>& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (size_t r = 0; r < rows; ++r) {
        const S* y = self.v.data() + r * C;
        const S* g = self.g.data() + r * C;
        S gm = 0, gy = 0;
        for (int c = 0; c < C; ++c) {
          gm += g[c];
          gy += g[c] * y[c];
        }
        gm /= S(C);
        gy /= S(C);
        S* dx = p->g.data() + r * C;
        S istd = inv_std[r];
        for (int c = 0; c < C; ++c) dx[c] += istd * (g[c] - gm - y[c] * gy);
      }
    };
  return Tensor<S>(n);
}

// ---- reductions ----

template <class S>
Tensor<S> sum_all(const Tensor<S>& x) {
  auto n = detail::make_node<S>({1}, {x.ptr()}, "sum_all");
  S acc = 0;
  for (S v : x.values()) acc += v;
  n->v[0] = acc;
  if (n->requires_grad)
    n->backfn = [](Node<S>& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      S g = self.g[0];
      for (size_t i = 0; i < p->g.size(); ++i) p->g[i] += g;
    };
  return Tensor<S>(n);
}

template <class S>
Tensor<S> mean_all(const Tensor<S>& x) {
  return scale(sum_all(x), S(1) / S(x.numel()));
}

// x[B,T,C] -> [B,C], mean over T
template <class S>
Tensor<S> mean_axis1(const Tensor<S>& x) {
  if (x.rank() != 3) throw std::runtime_error("mean_axis1: rank != 3");
  int B = x.dim(0), T = x.dim(1), C = x.dim(2);
  auto n = detail::make_node<S>({B, C}, {x.ptr()}, "mean_axis1");
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < C; ++c)
        n->v[size_t(b) * C + c] += x.values()[(size_t(b) * T + t) * C + c] / S(T);
  if (n->requires_grad)
    n->backfn = [B, T, C](Node<S>& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int t = 0; t < T; ++t)
          for (int c = 0; c < C; ++c)
            p->g[(size_t(b) * T + t) * C + c] += self.g[size_t(b) * C + c] / S(T);
    };
  return Tensor<S>(n);
}

// x[N,C] -> [C], mean over rows
template <class S>
Tensor<S> mean_axis0(const Tensor<S>& x) {
  if (x.rank() != 2) throw std::runtime_error("mean_axis0: rank != 2");
  int N = x.dim(0), C = x.dim(1);
  auto n = detail::make_node<S>({C}, {x.ptr()}, "mean_axis0");
  for (int i = 0; i < N; ++i)
    for (int c = 0; c < C; ++c) n->v[size_t(c)] += x.values()[size_t(i) * C + c] / S(N);
  if (n->requires_grad)
    n->backfn = [N, C](Node<S>& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (int i = 0; i < N; ++i)
        for (int c = 0; c < C; ++c) p->g[size_t(i) * C + c] += self.g[size_t(c)] / S(N);
    };
  return Tensor<S>(n);
}

// x[N,C] -> [N]
template <class S>
Tensor<S> sum_lastdim(const Tensor<S>& x) {
  if (x.rank() != 2) throw std::runtime_error("sum_lastdim: rank != 2");
  int N = x.dim(0), C = x.dim(1);
  auto n = detail::make_node<S>({N}, {x.ptr()}, "sum_lastdim");
  for (int i = 0; i < N; ++i) {
    S acc = 0;
    for (int c = 0; c < C; ++c) acc += x.values()[size_t(i) * C + c];
    n->v[size_t(i)] = acc;
  }
  if (n->requires_grad)
    n->backfn = [N, C](Node<S>& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (int i = 0; i < N; ++i)
        for (int c = 0; c < C; ++c) p->g[size_t(i) * C + c] += self.g[size_t(i)];
    };
  return Tensor<S>(n);
}

// x[N,C] scaled per row by s[N]
template <class S>
Tensor<S> mul_rows(const Tensor<S>& x, const Tensor<S>& s) {
  if (x.rank() != 2 || s.rank() != 1 || s.dim(0) != x.dim(0))
    throw std::runtime_error("mul_rows: bad shapes");
  int N = x.dim(0), C = x.dim(1);
  auto n = detail::make_node<S>({N, C}, {x.ptr(), s.ptr()}, "mul_rows");
  for (int i = 0; i < N; ++i)
    for (int c = 0; c < C; ++c)
      n->v[size_t(i) * C + c] = x.values()[size_t(i) * C + c] * s.values()[size_t(i)];
  if (n->requires_grad)
    n->backfn = [N, C](Node<S>& self) {
      auto& px = self.parents[0];
      auto& ps = self.parents[1];
      if (px->requires_grad) {
        px->ensure_grad();
        for (int i = 0; i < N; ++i)
          for (int c = 0; c < C; ++c)
            px->g[size_t(i) * C + c] += self.g[size_t(i) * C + c] * ps->v[size_t(i)];
      }
      if (ps->requires_grad) {
        ps->ensure_grad();
        for (int i = 0; i < N; ++i) {
          S acc = 0;
          for (int c = 0; c < C; ++c)
            acc += self.g[size_t(i) * C + c] * px->v[size_t(i) * C + c];
          ps->g[size_t(i)] += acc;
        }
      }
    };
  return Tensor<S>(n);
}

// whole tensor scaled by a graph scalar s[1]
template <class S>
Tensor<S> mul_bscalar(const Tensor<S>& x, const Tensor<S>& s) {
  if (s.numel() != 1) throw std::runtime_error("mul_bscalar: scale must be scalar");
  auto n = detail::make_node<S>(x.shape(), {x.ptr(), s.ptr()}, "mul_bscalar");
  S sv = s.values()[0];
  for (size_t i = 0; i < n->v.size(); ++i) n->v[i] = x.values()[i] * sv;
  if (n->requires_grad)
    n->backfn = [](Node<S>& self) {
      auto& px = self.parents[0];
      auto& ps = self.parents[1];
      S sv = ps->v[0];
      if (px->requires_grad) {
        px->ensure_grad();
        for (size_t i = 0; i < self.g.size(); ++i) px->g[i] += self.g[i] * sv;
      }
      if (ps->requires_grad) {
        ps->ensure_grad();
        S acc = 0;
        for (size_t i = 0; i < self.g.size(); ++i) acc += self.g[i] * px->v[i];
        ps->g[0] += acc;
      }
    };
  return Tensor<S>(n);
}

// ---- stitching ----

template <class S>
Tensor<S> concat_lastdim(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != b.rank()) throw std::runtime_error("concat_lastdim: rank mismatch");
  std::vector<int> shape = a.shape();
  int Ca = a.dim(a.rank() - 1), Cb = b.dim(b.rank() - 1);
  for (int i = 0; i + 1 < a.rank(); ++i)
    if (a.dim(i) != b.dim(i)) throw std::runtime_error("concat_lastdim: leading dims differ");
  shape.back() = Ca + Cb;
  auto n = detail::make_node<S>(shape, {a.ptr(), b.ptr()}, "concat");
  size_t rows = n->v.size() / size_t(Ca + Cb);
  for (size_t r = 0; r < rows; ++r) {
    std::memcpy(n->v.data() + r * (Ca + Cb), a.values().data() + r * Ca, sizeof(S) * Ca);
    std::memcpy(n->v.data() + r * (Ca + Cb) + Ca, b.values().data() + r * Cb, sizeof(S) * Cb);
  }
  if (n->requires_grad)
    n->backfn = [Ca, Cb, rows](Node<S>& self) {
      auto& pa = self.parents[0];
      auto& pb = self.parents[1];
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (size_t r = 0; r < rows; ++r)
          for (int c = 0; c < Ca; ++c) pa->g[r * Ca + c] += self.g[r * (Ca + Cb) + c];
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (size_t r = 0; r < rows; ++r)
          for (int c = 0; c < Cb; ++c) pb->g[r * Cb + c] += self.g[r * (Ca + Cb) + Ca + c];
      }
    };
  return Tensor<S>(n);
}

template <class S>
Tensor<S> slice_lastdim(const Tensor<S>& x, int off, int len) {
  int C = x.dim(x.rank() - 1);
  if (off < 0 || len <= 0 || off + len > C) throw std::runtime_error("slice_lastdim: out of range");
  std::vector<int> shape = x.shape();
  shape.back() = len;
  auto n = detail::make_node<S>(shape, {x.ptr()}, "slice");
  size_t rows = n->v.size() / size_t(len);
  for (size_t r = 0; r < rows; ++r)
    std::memcpy(n->v.data() + r * len, x.values().data() + r * C + off, sizeof(S) * len);
  if (n->requires_grad)
    n->backfn = [C, off, len, rows](Node<S>& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (size_t r = 0; r < rows; ++r)
        for (int c = 0; c < len; ++c) p->g[r * C + off + c] += self.g[r * len + c];
    };
  return Tensor<S>(n);
}

// x[B,T,C], pick step t -> [B,C]
template <class S>
Tensor<S> select_axis1(const Tensor<S>& x, int t) {
  if (x.rank() != 3) throw std::runtime_error("select_axis1: rank != 3");
  int B = x.dim(0), T = x.dim(1), C = x.dim(2);
  if (t < 0 || t >= T) throw std::runtime_error("select_axis1: index out of range");
  auto n = detail::make_node<S>({B, C}, {x.ptr()}, "select_t");
  for (int b = 0; b < B; ++b)
    std::memcpy(n->v.data() + size_t(b) * C, x.values().data() + (size_t(b) * T + t) * C,
                sizeof(S) * C);
  if (n->requires_grad)
    n->backfn = [B, T, C, t](Node<S>& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) p->g[(size_t(b) * T + t) * C + c] += self.g[size_t(b) * C + c];
    };
  return Tensor<S>(n);
}

// steps, each [B,C] -> [B,T,C]
template <class S>
Tensor<S> stack_axis1(const std::vector<Tensor<S>>& steps) {
  if (steps.empty()) throw std::runtime_error("stack_axis1: empty");
  int B = steps[0].dim(0), C = steps[0].dim(1);
  int T = int(steps.size());
  std::vector<std::shared_ptr<Node<S>>> parents;
  for (auto& s : steps) {
    if (s.rank() != 2 || s.dim(0) != B || s.dim(1) != C)
      throw std::runtime_error("stack_axis1: step shape mismatch");
    parents.push_back(s.ptr());
  }
  auto n = detail::make_node<S>({B, T, C}, parents, "stack_t");
  for (int t = 0; t < T; ++t)
    for (int b = 0; b < B; ++b)
      std::memcpy(n->v.data() + (size_t(b) * T + t) * C,
                  steps[size_t(t)].values().data() + size_t(b) * C, sizeof(S) * C);
  if (n->requires_grad)
    n->backfn = [B, T, C](Node<S>& self) {
      for (int t = 0; t < T; ++t) {
        auto& p = self.parents[size_t(t)];
        if (!p->requires_grad) continue;
        p->ensure_grad();
        for (int b = 0; b < B; ++b)
          for (int c = 0; c < C; ++c)
            p->g[size_t(b) * C + c] += self.g[(size_t(b) * T + t) * C + c];
      }
    };
  return Tensor<S>(n);
}

template <class S>
Tensor<S> reverse_axis1(const Tensor<S>& x) {
  if (x.rank() != 3) throw std::runtime_error("reverse_axis1: rank != 3");
  int B = x.dim(0), T = x.dim(1), C = x.dim(2);
  auto n = detail::make_node<S>({B, T, C}, {x.ptr()}, "reverse_t");
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < T; ++t)
      std::memcpy(n->v.data() + (size_t(b) * T + t) * C,
                  x.values().data() + (size_t(b) * T + (T - 1 - t)) * C, sizeof(S) * C);
  if (n->requires_grad)
    n->backfn = [B, T, C](Node<S>& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int t = 0; t < T; ++t)
          for (int c = 0; c < C; ++c)
            p->g[(size_t(b) * T + (T - 1 - t)) * C + c] += self.g[(size_t(b) * T + t) * C + c];
    };
  return Tensor<S>(n);
}

// [B,T,C] -> [B*T,C]
template <class S>
Tensor<S> merge_bt(const Tensor<S>& x) {
  if (x.rank() != 3) throw std::runtime_error("merge_bt: rank != 3");
  int B = x.dim(0), T = x.dim(1), C = x.dim(2);
  auto n = detail::make_node<S>({B * T, C}, {x.ptr()}, "merge_bt");
  n->v = x.values();
  if (n->requires_grad)
    n->backfn = [](Node<S>& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (size_t i = 0; i < self.g.size(); ++i) p->g[i] += self.g[i];
    };
  return Tensor<S>(n);
}

// value copy with gradient flow severed
template <class S>
Tensor<S> detach(const Tensor<S>& x) {
  auto n = std::make_shared<Node<S>>();
  n->shape = x.shape();
  n->v = x.values();
  n->op = "detach";
  return Tensor<S>(n);
}

template <class S>
const Tensor<S>& assert_finite(const Tensor<S>& x, const char* tag) {
  for (S v : x.values())
    if (!std::isfinite(double(v)))
      throw std::runtime_error(std::string("non-finite value in ") + tag);
  return x;
}

// ---- backward ----

template <class S>
void backward(const Tensor<S>& out) {
  if (out.numel() != 1) throw std::runtime_error("backward: output must be scalar");
  if (!out.node().requires_grad) throw std::runtime_error("backward: output does not require grad");

  // iterative post-order DFS for reverse topological order
  std::vector<Node<S>*> order;
  std::map<Node<S>*, int> state;  // 0 unseen, 1 in stack, 2 done
  std::vector<Node<S>*> stack{&out.node()};
  while (!stack.empty()) {
    Node<S>* n = stack.back();
    int& st = state[n];
    if (st == 0) {
      st = 1;
      for (auto& p : n->parents)
        if (p->requires_grad && state[p.get()] == 0) stack.push_back(p.get());
    } else {
      stack.pop_back();
      if (st == 1) {
        st = 2;
        order.push_back(n);
      }
    }
  }

  out.node().ensure_grad();
  out.node().g[0] = S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<S>* n = *it;
    if (n->backfn && n->g.size() == n->v.size()) n->backfn(*n);
  }
}

// ---- parameter store ----

template <class S>
class ParamStore {
 public:
  struct Entry {
    Tensor<S> t;
    bool frozen = false;
  };

  Tensor<S>& add(const std::string& name, Tensor<S> t) {
    if (entries_.count(name)) throw std::runtime_error("duplicate parameter: " + name);
    t.set_requires_grad(true);
    auto [it, ok] = entries_.emplace(name, Entry{std::move(t), false});
    return it->second.t;
  }

  Tensor<S>& get(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::runtime_error("unknown parameter: " + name);
    return it->second.t;
  }
  const Tensor<S>& get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::runtime_error("unknown parameter: " + name);
    return it->second.t;
  }
  bool has(const std::string& name) const { return entries_.count(name) != 0; }
  bool frozen(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::runtime_error("unknown parameter: " + name);
    return it->second.frozen;
  }

  void set_frozen(const std::string& name, bool frozen) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::runtime_error("unknown parameter: " + name);
    it->second.frozen = frozen;
    it->second.t.set_requires_grad(!frozen);
  }

  // freeze/unfreeze every parameter whose name starts with prefix
  int set_frozen_prefix(const std::string& prefix, bool frozen) {
    int hits = 0;
    for (auto& [name, e] : entries_) {
      if (name.rfind(prefix, 0) == 0) {
        e.frozen = frozen;
        e.t.set_requires_grad(!frozen);
        ++hits;
      }
    }
    return hits;
  }

  void zero_grad() {
    for (auto& [name, e] : entries_) {
      auto& g = e.t.grad();
      std::fill(g.begin(), g.end(), S(0));
    }
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (auto& [name, e] : entries_) out.push_back(name);
    return out;  // map order: sorted
  }

  size_t size() const { return entries_.size(); }

  // deep copy of current values for a name prefix ("" for all)
  std::map<std::string, std::vector<S>> snapshot(const std::string& prefix = "") const {
    std::map<std::string, std::vector<S>> out;
    for (auto& [name, e] : entries_)
      if (name.rfind(prefix, 0) == 0) out[name] = e.t.values();
    return out;
  }

  template <class F>
  void for_each(F f) {
    for (auto& [name, e] : entries_) f(name, e.t, e.frozen);
  }

 private:
  std::map<std::string, Entry> entries_;
};

// Xavier-uniform init keyed by parameter name so values do not depend on
// registration order.
template <class S>
Tensor<S> xavier_init(const std::vector<int>& shape, int fan_in, int fan_out, uint64_t seed,
                      const std::string& name) {
  Rng rng(seed, "init:" + name);
  double bound = std::sqrt(6.0 / double(fan_in + fan_out));
  std::vector<S> data(Tensor<S>::count(shape));
  for (auto& v : data) v = S(rng.uniform(-bound, bound));
  return Tensor<S>::from(std::move(data), shape);
}

// ---- finite-difference gradient verification ----

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  size_t worst_index = 0;
  int n_checked = 0;
  bool pass = false;
};

// Compares reverse-mode gradients of scalar f() against 64-bit central
// differences, parameter by parameter. stride subsamples components of
// large tensors (stride 1 checks all).
inline GradCheckReport grad_check(ParamStore<double>& store,
                                  const std::function<Tensor<double>()>& f, double h = 1e-4,
                                  double tol = 1e-3, int stride = 1) {
  store.zero_grad();
  Tensor<double> out = f();
  backward(out);

  std::map<std::string, std::vector<double>> analytic;
  store.for_each([&](const std::string& name, Tensor<double>& t, bool frozen) {
    if (!frozen && t.requires_grad()) {
      t.node().ensure_grad();
      analytic[name] = t.grad();
    }
  });

  GradCheckReport rep;
  for (auto& [name, ga] : analytic) {
    auto& vals = store.get(name).values();
    for (size_t i = 0; i < vals.size(); i += size_t(std::max(1, stride))) {
      double keep = vals[i];
      vals[i] = keep + h;
      double fp = f().item();
      vals[i] = keep - h;
      double fm = f().item();
      vals[i] = keep;
      double num = (fp - fm) / (2 * h);
      double ana = ga[i];
      double denom = std::max(std::abs(num), std::abs(ana));
      double rel = denom < 1e-7 ? 0.0 : std::abs(num - ana) / denom;
      ++rep.n_checked;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = name;
        rep.worst_index = i;
      }
    }
  }
  rep.pass = rep.max_rel_err <= tol && rep.n_checked > 0;
  return rep;
}

}  // namespace alas::ad
