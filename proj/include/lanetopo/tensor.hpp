#pragma once

// Dense 2-D tensor with reverse-mode differentiation. Templated on the
// scalar type: double for verification/gradcheck, float for training.
// Graphs are DAGs of shared nodes; backward() runs a deterministic
// reverse topological sweep. Single-threaded by design — a graph and its
// parameters are confined to one thread.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "lanetopo/common.hpp"

namespace lanetopo {

inline std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

template <typename T>
class Tensor {
  public:
    struct Node {
        std::vector<int> shape;
        std::vector<T> values;
        std::vector<T> grad;  // allocated on demand, same length as values
        bool requires_grad = false;
        std::vector<Tensor> parents;
        std::function<void(Node&)> backward_fn;  // reads this->grad, accumulates into parents

        size_t numel() const { return values.size(); }
        void ensure_grad() {
            if (grad.size() != values.size()) grad.assign(values.size(), T(0));
        }
    };

    Tensor() = default;

    Tensor(std::vector<int> shape, std::vector<T> values, bool requires_grad = false) {
        size_t n = 1;
        for (int d : shape) {
            if (d < 0) throw ShapeError("negative dimension in " + shape_str(shape));
            n *= size_t(d);
        }
        if (n != values.size())
            throw ShapeError("value count " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(shape));
        node_ = std::make_shared<Node>();
        node_->shape = std::move(shape);
        node_->values = std::move(values);
        node_->requires_grad = requires_grad;
    }

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
        return constant(std::move(shape), T(0), requires_grad);
    }

    static Tensor constant(std::vector<int> shape, T value, bool requires_grad = false) {
        size_t n = 1;
        for (int d : shape) n *= size_t(d);
        return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
    }

    static Tensor randn(std::vector<int> shape, Rng& rng, double scale = 1.0,
                        bool requires_grad = false) {
        size_t n = 1;
        for (int d : shape) n *= size_t(d);
        std::vector<T> v(n);
        for (auto& x : v) x = T(rng.normal() * scale);
        return Tensor(std::move(shape), std::move(v), requires_grad);
    }

    static Tensor uniform(std::vector<int> shape, Rng& rng, double lo, double hi,
                          bool requires_grad = false) {
        size_t n = 1;
        for (int d : shape) n *= size_t(d);
        std::vector<T> v(n);
        for (auto& x : v) x = T(rng.uniform(lo, hi));
        return Tensor(std::move(shape), std::move(v), requires_grad);
    }

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    size_t numel() const { return node_->values.size(); }
    int rows() const { return node_->shape.size() == 2 ? node_->shape[0] : int(numel()); }
    int cols() const { return node_->shape.size() == 2 ? node_->shape[1] : 1; }
    bool requires_grad() const { return node_->requires_grad; }

    const std::vector<T>& values() const { return node_->values; }
    std::vector<T>& mutable_values() { return node_->values; }
    const std::vector<T>& grad() const { return node_->grad; }
    bool has_grad() const { return node_->grad.size() == node_->values.size(); }

    T value() const {
        if (numel() != 1)
            throw UsageError("value() requires a scalar tensor, got " + shape_str(shape()));
        return node_->values[0];
    }
    T at(int r, int c) const { return node_->values[size_t(r) * cols() + c]; }

    Node* node() const { return node_.get(); }

    void zero_grad() { node_->grad.assign(node_->values.size(), T(0)); }

    // Detached constant copy (no graph edge).
    Tensor detach() const { return Tensor(node_->shape, node_->values, false); }

    // Reverse-mode sweep from a scalar. Gradients accumulate across repeated
    // calls unless zero_grad() is used on the leaves in between.
    void backward() const {
        if (numel() != 1) throw UsageError("backward() requires a scalar loss");
        if (!std::isfinite(double(node_->values[0])))
            throw NumericError("backward() on non-finite loss");
        std::vector<Node*> order;
        topo_sort(node_.get(), order);
        node_->ensure_grad();
        node_->grad[0] += T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node* n = *it;
            if (n->backward_fn && n->grad.size() == n->values.size()) n->backward_fn(*n);
        }
    }

    // ---- graph construction helpers ----

    static Tensor make_op(std::vector<int> shape, std::vector<T> values,
                          std::vector<Tensor> parents,
                          std::function<void(Node&)> backward_fn) {
        Tensor out(std::move(shape), std::move(values), false);
        for (const auto& p : parents)
            if (p.requires_grad()) out.node_->requires_grad = true;
        if (out.node_->requires_grad) {
            out.node_->parents = std::move(parents);
            out.node_->backward_fn = std::move(backward_fn);
        }
        return out;
    }

  private:
    static void topo_sort(Node* root, std::vector<Node*>& order) {
        // Iterative DFS; child order fixed by parent vectors, so the
        // resulting order is deterministic for a given graph.
        std::unordered_set<Node*> visited;
        std::vector<std::pair<Node*, size_t>> stack;
        stack.emplace_back(root, 0);
        visited.insert(root);
        while (!stack.empty()) {
            auto& [n, i] = stack.back();
            if (i < n->parents.size()) {
                Node* p = n->parents[i].node();
                ++i;
                if (visited.insert(p).second) stack.emplace_back(p, 0);
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }
    }

    std::shared_ptr<Node> node_;
};

namespace detail {

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

template <typename T, typename Fwd, typename Bwd>
Tensor<T> elementwise2(const Tensor<T>& a, const Tensor<T>& b, const char* name, Fwd fwd,
                       Bwd bwd) {
    check_same_shape(a, b, name);
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<T> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i], bv[i]);
    return Tensor<T>::make_op(
        a.shape(), std::move(out), {a, b},
        [a, b, bwd](typename Tensor<T>::Node& n) {
            const auto& av = a.values();
            const auto& bv = b.values();
            for (size_t i = 0; i < av.size(); ++i) {
                T da, db;
                bwd(av[i], bv[i], n.values[i], n.grad[i], da, db);
                if (a.requires_grad()) {
                    a.node()->ensure_grad();
                    a.node()->grad[i] += da;
                }
                if (b.requires_grad()) {
                    b.node()->ensure_grad();
                    b.node()->grad[i] += db;
                }
            }
        });
}

template <typename T, typename Fwd, typename Bwd>
Tensor<T> elementwise1(const Tensor<T>& a, Fwd fwd, Bwd bwd) {
    const auto& av = a.values();
    std::vector<T> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
    return Tensor<T>::make_op(a.shape(), std::move(out), {a},
                              [a, bwd](typename Tensor<T>::Node& n) {
                                  if (!a.requires_grad()) return;
                                  a.node()->ensure_grad();
                                  const auto& av = a.values();
                                  for (size_t i = 0; i < av.size(); ++i)
                                      a.node()->grad[i] += bwd(av[i], n.values[i]) * n.grad[i];
                              });
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::elementwise2(
        a, b, "add", [](T x, T y) { return x + y; },
        [](T, T, T, T g, T& da, T& db) { da = g, db = g; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::elementwise2(
        a, b, "sub", [](T x, T y) { return x - y; },
        [](T, T, T, T g, T& da, T& db) { da = g, db = -g; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::elementwise2(
        a, b, "mul", [](T x, T y) { return x * y; },
        [](T x, T y, T, T g, T& da, T& db) { da = g * y, db = g * x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::elementwise2(
        a, b, "div", [](T x, T y) { return x / y; },
        [](T x, T y, T, T g, T& da, T& db) {
            da = g / y;
            db = -g * x / (y * y);
        });
}

// Ties route the gradient to the first operand.
template <typename T>
Tensor<T> max2(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::elementwise2(
        a, b, "max2", [](T x, T y) { return x >= y ? x : y; },
        [](T x, T y, T, T g, T& da, T& db) {
            da = x >= y ? g : T(0);
            db = x >= y ? T(0) : g;
        });
}

template <typename T>
Tensor<T> min2(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::elementwise2(
        a, b, "min2", [](T x, T y) { return x <= y ? x : y; },
        [](T x, T y, T, T g, T& da, T& db) {
            da = x <= y ? g : T(0);
            db = x <= y ? T(0) : g;
        });
}

// a*x + b elementwise with scalar constants.
template <typename T>
Tensor<T> affine(const Tensor<T>& x, T a, T b) {
    return detail::elementwise1(
        x, [a, b](T v) { return a * v + b; }, [a](T, T) { return a; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T a) {
    return affine(x, a, T(0));
}

template <typename T>
Tensor<T> neg(const Tensor<T>& x) {
    return scale(x, T(-1));
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
    return detail::elementwise1(
        x, [](T v) { return std::exp(v); }, [](T, T out) { return out; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    return detail::elementwise1(
        x,
        [](T v) {
            return v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                             : std::exp(v) / (T(1) + std::exp(v));
        },
        [](T, T out) { return out * (T(1) - out); });
}

// log(1 + e^x), computed as max(x,0) + log1p(e^{-|x|}).
template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
    return detail::elementwise1(
        x,
        [](T v) { return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v))); },
        [](T v, T) {
            return v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                             : std::exp(v) / (T(1) + std::exp(v));
        });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    return detail::elementwise1(
        x, [](T v) { return v > T(0) ? v : T(0); },
        [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
    return detail::elementwise1(
        x, [](T v) { return std::abs(v); },
        [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

// tanh-form Gaussian error activation
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    const T s = T(std::sqrt(2.0 / M_PI));
    const T c = T(0.044715);
    return detail::elementwise1(
        x,
        [s, c](T v) { return T(0.5) * v * (T(1) + std::tanh(s * (v + c * v * v * v))); },
        [s, c](T v, T) {
            T u = s * (v + c * v * v * v);
            T t = std::tanh(u);
            T sech2 = T(1) - t * t;
            return T(0.5) * (T(1) + t) + T(0.5) * v * sech2 * s * (T(1) + T(3) * c * v * v);
        });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows())
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    const int n = a.rows(), k = a.cols(), m = b.cols();
    std::vector<T> out(size_t(n) * m, T(0));
    const T* ap = a.values().data();
    const T* bp = b.values().data();
    for (int i = 0; i < n; ++i) {
        T* orow = out.data() + size_t(i) * m;
        const T* arow = ap + size_t(i) * k;
        for (int p = 0; p < k; ++p) {
            const T av = arow[p];
            if (av == T(0)) continue;
            const T* brow = bp + size_t(p) * m;
            for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
    return Tensor<T>::make_op(
        {n, m}, std::move(out), {a, b}, [a, b, n, k, m](typename Tensor<T>::Node& nd) {
            const T* g = nd.grad.data();
            if (a.requires_grad()) {
                a.node()->ensure_grad();
                T* da = a.node()->grad.data();
                const T* bp = b.values().data();
                // dA = G * B^T
                for (int i = 0; i < n; ++i)
                    for (int p = 0; p < k; ++p) {
                        const T* grow = g + size_t(i) * m;
                        const T* brow = bp + size_t(p) * m;
                        T acc = T(0);
                        for (int j = 0; j < m; ++j) acc += grow[j] * brow[j];
                        da[size_t(i) * k + p] += acc;
                    }
            }
            if (b.requires_grad()) {
                b.node()->ensure_grad();
                T* db = b.node()->grad.data();
                const T* ap = a.values().data();
                // dB = A^T * G
                for (int i = 0; i < n; ++i) {
                    const T* arow = ap + size_t(i) * k;
                    const T* grow = g + size_t(i) * m;
                    for (int p = 0; p < k; ++p) {
                        const T av = arow[p];
                        if (av == T(0)) continue;
                        T* drow = db + size_t(p) * m;
                        for (int j = 0; j < m; ++j) drow[j] += av * grow[j];
                    }
                }
            }
        });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
    if (x.shape().size() != 2) throw ShapeError("transpose: expects 2-D tensor");
    const int n = x.rows(), m = x.cols();
    std::vector<T> out(size_t(n) * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out[size_t(j) * n + i] = x.values()[size_t(i) * m + j];
    return Tensor<T>::make_op({m, n}, std::move(out), {x},
                              [x, n, m](typename Tensor<T>::Node& nd) {
                                  if (!x.requires_grad()) return;
                                  x.node()->ensure_grad();
                                  for (int i = 0; i < n; ++i)
                                      for (int j = 0; j < m; ++j)
                                          x.node()->grad[size_t(i) * m + j] +=
                                              nd.grad[size_t(j) * n + i];
                              });
}

// x [n x m] + row vector v [m]
template <typename T>
Tensor<T> add_row(const Tensor<T>& x, const Tensor<T>& v) {
    if (x.shape().size() != 2 || int(v.numel()) != x.cols())
        throw ShapeError("add_row: " + shape_str(x.shape()) + " + " + shape_str(v.shape()));
    const int n = x.rows(), m = x.cols();
    std::vector<T> out(x.values());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out[size_t(i) * m + j] += v.values()[j];
    return Tensor<T>::make_op(x.shape(), std::move(out), {x, v},
                              [x, v, n, m](typename Tensor<T>::Node& nd) {
                                  if (x.requires_grad()) {
                                      x.node()->ensure_grad();
                                      for (size_t i = 0; i < nd.grad.size(); ++i)
                                          x.node()->grad[i] += nd.grad[i];
                                  }
                                  if (v.requires_grad()) {
                                      v.node()->ensure_grad();
                                      for (int i = 0; i < n; ++i)
                                          for (int j = 0; j < m; ++j)
                                              v.node()->grad[j] += nd.grad[size_t(i) * m + j];
                                  }
                              });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    T s = T(0);
    for (T v : x.values()) s += v;
    return Tensor<T>::make_op({1}, {s}, {x}, [x](typename Tensor<T>::Node& nd) {
        if (!x.requires_grad()) return;
        x.node()->ensure_grad();
        for (auto& g : x.node()->grad) g += nd.grad[0];
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
    return scale(sum(x), T(1) / T(x.numel()));
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& xs) {
    if (xs.empty()) throw UsageError("concat_cols: empty input");
    const int n = xs[0].rows();
    int m = 0;
    for (const auto& x : xs) {
        if (x.shape().size() != 2 || x.rows() != n)
            throw ShapeError("concat_cols: row mismatch");
        m += x.cols();
    }
    std::vector<T> out(size_t(n) * m);
    int off = 0;
    for (const auto& x : xs) {
        const int c = x.cols();
        for (int i = 0; i < n; ++i)
            std::copy_n(x.values().data() + size_t(i) * c, c,
                        out.data() + size_t(i) * m + off);
        off += c;
    }
    return Tensor<T>::make_op({n, m}, std::move(out), xs,
                              [xs, n, m](typename Tensor<T>::Node& nd) {
                                  int off = 0;
                                  for (const auto& x : xs) {
                                      const int c = x.cols();
                                      if (x.requires_grad()) {
                                          x.node()->ensure_grad();
                                          for (int i = 0; i < n; ++i)
                                              for (int j = 0; j < c; ++j)
                                                  x.node()->grad[size_t(i) * c + j] +=
                                                      nd.grad[size_t(i) * m + off + j];
                                      }
                                      off += c;
                                  }
                              });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, int start, int len) {
    if (x.shape().size() != 2 || start < 0 || len < 0 || start + len > x.cols())
        throw ShapeError("slice_cols: range [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") out of " + shape_str(x.shape()));
    const int n = x.rows(), m = x.cols();
    std::vector<T> out(size_t(n) * len);
    for (int i = 0; i < n; ++i)
        std::copy_n(x.values().data() + size_t(i) * m + start, len, out.data() + size_t(i) * len);
    return Tensor<T>::make_op({n, len}, std::move(out), {x},
                              [x, start, len, n, m](typename Tensor<T>::Node& nd) {
                                  if (!x.requires_grad()) return;
                                  x.node()->ensure_grad();
                                  for (int i = 0; i < n; ++i)
                                      for (int j = 0; j < len; ++j)
                                          x.node()->grad[size_t(i) * m + start + j] +=
                                              nd.grad[size_t(i) * len + j];
                              });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, int start, int len) {
    if (x.shape().size() != 2 || start < 0 || len < 0 || start + len > x.rows())
        throw ShapeError("slice_rows: range [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") out of " + shape_str(x.shape()));
    const int m = x.cols();
    std::vector<T> out(x.values().begin() + size_t(start) * m,
                       x.values().begin() + size_t(start + len) * m);
    return Tensor<T>::make_op({len, m}, std::move(out), {x},
                              [x, start, len, m](typename Tensor<T>::Node& nd) {
                                  if (!x.requires_grad()) return;
                                  x.node()->ensure_grad();
                                  for (size_t i = 0; i < size_t(len) * m; ++i)
                                      x.node()->grad[size_t(start) * m + i] += nd.grad[i];
                              });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<int>& idx) {
    if (x.shape().size() != 2) throw ShapeError("gather_rows: expects 2-D tensor");
    const int m = x.cols();
    for (int i : idx)
        if (i < 0 || i >= x.rows())
            throw UsageError("gather_rows: index " + std::to_string(i) + " out of " +
                             std::to_string(x.rows()) + " rows");
    std::vector<T> out(idx.size() * size_t(m));
    for (size_t r = 0; r < idx.size(); ++r)
        std::copy_n(x.values().data() + size_t(idx[r]) * m, m, out.data() + r * m);
    return Tensor<T>::make_op({int(idx.size()), m}, std::move(out), {x},
                              [x, idx, m](typename Tensor<T>::Node& nd) {
                                  if (!x.requires_grad()) return;
                                  x.node()->ensure_grad();
                                  for (size_t r = 0; r < idx.size(); ++r)
                                      for (int j = 0; j < m; ++j)
                                          x.node()->grad[size_t(idx[r]) * m + j] +=
                                              nd.grad[r * m + j];
                              });
}

// Row-wise numerically stabilized softmax. mask (optional, row-major n x m,
// nonzero = attend) sends excluded logits to -inf before normalization.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x, const std::vector<uint8_t>* mask = nullptr) {
    if (x.shape().size() != 2) throw ShapeError("softmax_rows: expects 2-D tensor");
    const int n = x.rows(), m = x.cols();
    if (mask && int(mask->size()) != n * m)
        throw ShapeError("softmax_rows: mask size mismatch");
    std::vector<T> out(size_t(n) * m, T(0));
    for (int i = 0; i < n; ++i) {
        const T* row = x.values().data() + size_t(i) * m;
        T* orow = out.data() + size_t(i) * m;
        T mx = -std::numeric_limits<T>::infinity();
        int alive = 0;
        for (int j = 0; j < m; ++j) {
            if (mask && !(*mask)[size_t(i) * m + j]) continue;
            mx = std::max(mx, row[j]);
            ++alive;
        }
        if (alive == 0)
            throw ConfigError("softmax_rows: fully masked row " + std::to_string(i));
        T s = T(0);
        for (int j = 0; j < m; ++j) {
            if (mask && !(*mask)[size_t(i) * m + j]) continue;
            orow[j] = std::exp(row[j] - mx);
            s += orow[j];
        }
        for (int j = 0; j < m; ++j) orow[j] /= s;
    }
    return Tensor<T>::make_op({n, m}, std::move(out), {x},
                              [x, n, m](typename Tensor<T>::Node& nd) {
                                  if (!x.requires_grad()) return;
                                  x.node()->ensure_grad();
                                  for (int i = 0; i < n; ++i) {
                                      const T* p = nd.values.data() + size_t(i) * m;
                                      const T* g = nd.grad.data() + size_t(i) * m;
                                      T dot = T(0);
                                      for (int j = 0; j < m; ++j) dot += p[j] * g[j];
                                      T* dx = x.node()->grad.data() + size_t(i) * m;
                                      for (int j = 0; j < m; ++j) dx[j] += p[j] * (g[j] - dot);
                                  }
                              });
}

// Per-row normalization to zero mean / unit variance, then affine.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5)) {
    if (x.shape().size() != 2) throw ShapeError("layer_norm: expects 2-D tensor");
    const int n = x.rows(), m = x.cols();
    if (int(gamma.numel()) != m || int(beta.numel()) != m)
        throw ShapeError("layer_norm: affine params must have length " + std::to_string(m));
    if (eps <= T(0)) throw ConfigError("layer_norm: eps must be positive");
    for (T v : x.values())
        if (!std::isfinite(double(v))) throw NumericError("layer_norm: non-finite input");
    std::vector<T> out(size_t(n) * m);
    std::vector<T> rstd(n), xhat(size_t(n) * m);
    for (int i = 0; i < n; ++i) {
        const T* row = x.values().data() + size_t(i) * m;
        T mu = T(0);
        for (int j = 0; j < m; ++j) mu += row[j];
        mu /= T(m);
        T var = T(0);
        for (int j = 0; j < m; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= T(m);
        rstd[i] = T(1) / std::sqrt(var + eps);
        for (int j = 0; j < m; ++j) {
            T h = (row[j] - mu) * rstd[i];
            xhat[size_t(i) * m + j] = h;
            out[size_t(i) * m + j] = gamma.values()[j] * h + beta.values()[j];
        }
    }
    return Tensor<T>::make_op(
        {n, m}, std::move(out), {x, gamma, beta},
        [x, gamma, beta, n, m, rstd, xhat](typename Tensor<T>::Node& nd) {
            for (int i = 0; i < n; ++i) {
                const T* g = nd.grad.data() + size_t(i) * m;
                const T* h = xhat.data() + size_t(i) * m;
                if (gamma.requires_grad()) {
                    gamma.node()->ensure_grad();
                    for (int j = 0; j < m; ++j) gamma.node()->grad[j] += g[j] * h[j];
                }
                if (beta.requires_grad()) {
                    beta.node()->ensure_grad();
                    for (int j = 0; j < m; ++j) beta.node()->grad[j] += g[j];
                }
                if (x.requires_grad()) {
                    x.node()->ensure_grad();
                    T mean_gg = T(0), mean_ggh = T(0);
                    for (int j = 0; j < m; ++j) {
                        T gg = g[j] * gamma.values()[j];
                        mean_gg += gg;
                        mean_ggh += gg * h[j];
                    }
                    mean_gg /= T(m);
                    mean_ggh /= T(m);
                    T* dx = x.node()->grad.data() + size_t(i) * m;
                    for (int j = 0; j < m; ++j) {
                        T gg = g[j] * gamma.values()[j];
                        dx[j] += (gg - mean_gg - h[j] * mean_ggh) * rstd[i];
                    }
                }
            }
        });
}

// Pairwise two-layer MLP scores: logit[r][s] = w2 . act(A[r] + B[s] + b1) + b2,
// structurally an MLP over the concatenation [a_r ; b_s] whose first layer is
// split into the two row projections that produced A and B.
template <typename T>
Tensor<T> pair_mlp_logits(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& b1,
                          const Tensor<T>& w2, const Tensor<T>& b2) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.cols())
        throw ShapeError("pair_mlp_logits: hidden width mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    const int na = a.rows(), nb = b.rows(), h = a.cols();
    if (int(b1.numel()) != h || int(w2.numel()) != h || b2.numel() != 1)
        throw ShapeError("pair_mlp_logits: parameter shape mismatch");
    const T s = T(std::sqrt(2.0 / M_PI));
    const T c = T(0.044715);
    auto act = [s, c](T v) { return T(0.5) * v * (T(1) + std::tanh(s * (v + c * v * v * v))); };
    auto dact = [s, c](T v) {
        T u = s * (v + c * v * v * v);
        T t = std::tanh(u);
        return T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * s * (T(1) + T(3) * c * v * v);
    };
    std::vector<T> out(size_t(na) * nb);
    std::vector<T> pre(h);
    for (int r = 0; r < na; ++r) {
        const T* ar = a.values().data() + size_t(r) * h;
        for (int sidx = 0; sidx < nb; ++sidx) {
            const T* bs = b.values().data() + size_t(sidx) * h;
            T acc = b2.values()[0];
            for (int j = 0; j < h; ++j) acc += w2.values()[j] * act(ar[j] + bs[j] + b1.values()[j]);
            out[size_t(r) * nb + sidx] = acc;
        }
    }
    (void)pre;
    return Tensor<T>::make_op(
        {na, nb}, std::move(out), {a, b, b1, w2, b2},
        [a, b, b1, w2, b2, na, nb, h, act, dact](typename Tensor<T>::Node& nd) {
            const bool ga = a.requires_grad(), gb = b.requires_grad();
            const bool g1 = b1.requires_grad(), g2 = w2.requires_grad(), gb2 = b2.requires_grad();
            if (ga) a.node()->ensure_grad();
            if (gb) b.node()->ensure_grad();
            if (g1) b1.node()->ensure_grad();
            if (g2) w2.node()->ensure_grad();
            if (gb2) b2.node()->ensure_grad();
            for (int r = 0; r < na; ++r) {
                const T* ar = a.values().data() + size_t(r) * h;
                for (int sidx = 0; sidx < nb; ++sidx) {
                    const T g = nd.grad[size_t(r) * nb + sidx];
                    if (g == T(0)) continue;
                    const T* bs = b.values().data() + size_t(sidx) * h;
                    for (int j = 0; j < h; ++j) {
                        T p = ar[j] + bs[j] + b1.values()[j];
                        T u = act(p);
                        T gpre = g * w2.values()[j] * dact(p);
                        if (ga) a.node()->grad[size_t(r) * h + j] += gpre;
                        if (gb) b.node()->grad[size_t(sidx) * h + j] += gpre;
                        if (g1) b1.node()->grad[j] += gpre;
                        if (g2) w2.node()->grad[j] += g * u;
                    }
                    if (gb2) b2.node()->grad[0] += g;
                }
            }
        });
}

}  // namespace lanetopo
