#pragma once

// Parameter registry and the attention / feed-forward building blocks used
// by the decoders and heads.

#include <map>
#include <string>
#include <vector>

#include "lanetopo/tensor.hpp"

namespace lanetopo {

enum class Init { fan_in_uniform, zeros, ones, normal_002, identity };

// Ordered map from dot-separated parameter path to tensor. Each parameter is
// initialized from an rng derived from (store seed, parameter name), so
// re-initialization with the same seed is bit-identical and independent of
// creation order.
template <typename T>
class ParamStore {
  public:
    explicit ParamStore(uint64_t seed = 0) : seed_(seed) {}

    uint64_t seed() const { return seed_; }

    // Tensors are shared handles, so returning by value aliases the stored
    // parameter.
    Tensor<T> get_or_create(const std::string& name, std::vector<int> shape, Init init) {
        auto it = index_.find(name);
        if (it != index_.end()) {
            Tensor<T>& t = entries_[it->second].second;
            if (t.shape() != shape)
                throw ConfigError("parameter " + name + " requested with shape " +
                                  shape_str(shape) + " but registered as " +
                                  shape_str(t.shape()));
            return t;
        }
        Rng rng(seed_ ^ fnv1a64(name));
        Tensor<T> t = init_tensor(shape, init, rng);
        entries_.emplace_back(name, t);
        index_[name] = entries_.size() - 1;
        return t;
    }

    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    Tensor<T> at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw UsageError("unknown parameter: " + name);
        return entries_[it->second].second;
    }

    const std::vector<std::pair<std::string, Tensor<T>>>& entries() const { return entries_; }
    std::vector<std::pair<std::string, Tensor<T>>>& entries_mut() { return entries_; }
    size_t size() const { return entries_.size(); }

    void zero_grad() {
        for (auto& [name, t] : entries_) t.zero_grad();
    }

    size_t parameter_count() const {
        size_t n = 0;
        for (const auto& [name, t] : entries_) n += t.numel();
        return n;
    }

  private:
    static Tensor<T> init_tensor(const std::vector<int>& shape, Init init, Rng& rng) {
        switch (init) {
            case Init::zeros:
                return Tensor<T>::zeros(shape, true);
            case Init::ones:
                return Tensor<T>::constant(shape, T(1), true);
            case Init::normal_002:
                return Tensor<T>::randn(shape, rng, 0.02, true);
            case Init::identity: {
                if (shape.size() != 2) throw ConfigError("identity init expects a matrix");
                auto t = Tensor<T>::zeros(shape, true);
                int n = std::min(shape[0], shape[1]);
                for (int i = 0; i < n; ++i) t.mutable_values()[size_t(i) * shape[1] + i] = T(1);
                return t;
            }
            case Init::fan_in_uniform: {
                int fan_in = shape.size() == 2 ? shape[0] : int(shape[0]);
                double a = 1.0 / std::sqrt(double(std::max(fan_in, 1)));
                return Tensor<T>::uniform(shape, rng, -a, a, true);
            }
        }
        throw ConfigError("unknown init");
    }

    uint64_t seed_;
    std::vector<std::pair<std::string, Tensor<T>>> entries_;
    std::map<std::string, size_t> index_;
};

// x [n x in] -> x W + b, W stored as [in x out].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, ParamStore<T>& ps, const std::string& prefix, int in,
                 int out, Init w_init = Init::fan_in_uniform) {
    auto w = ps.get_or_create(prefix + ".w", {in, out}, w_init);
    auto b = ps.get_or_create(prefix + ".b", {out}, Init::zeros);
    return add_row(matmul(x, w), b);
}

template <typename T>
Tensor<T> layer_norm_mod(const Tensor<T>& x, ParamStore<T>& ps, const std::string& prefix,
                         int width, T eps = T(1e-5)) {
    auto g = ps.get_or_create(prefix + ".gamma", {width}, Init::ones);
    auto b = ps.get_or_create(prefix + ".beta", {width}, Init::zeros);
    return layer_norm(x, g, b, eps);
}

// Multi-head scaled dot-product attention with learned Q/K/V/output
// projections. mask (n_q x n_k, nonzero = attend) applies to every head.
// Self-attention is the call with k = v = q. attn_probs, when given,
// receives the per-head softmax matrices.
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, int heads,
                    ParamStore<T>& ps, const std::string& prefix,
                    const std::vector<uint8_t>* mask = nullptr,
                    std::vector<Tensor<T>>* attn_probs = nullptr) {
    const int c = q.cols();
    if (c % heads != 0)
        throw ConfigError("attention: channels " + std::to_string(c) +
                          " not divisible by heads " + std::to_string(heads));
    if (k.cols() != c || v.cols() != c || k.rows() != v.rows())
        throw ShapeError("attention: key/value shape mismatch");
    const int ch = c / heads;
    auto qp = linear(q, ps, prefix + ".q", c, c);
    auto kp = linear(k, ps, prefix + ".k", c, c);
    auto vp = linear(v, ps, prefix + ".v", c, c);
    const T scl = T(1.0 / std::sqrt(double(ch)));
    std::vector<Tensor<T>> head_outs;
    head_outs.reserve(heads);
    for (int h = 0; h < heads; ++h) {
        auto qh = slice_cols(qp, h * ch, ch);
        auto kh = slice_cols(kp, h * ch, ch);
        auto vh = slice_cols(vp, h * ch, ch);
        auto logits = scale(matmul(qh, transpose(kh)), scl);
        auto probs = softmax_rows(logits, mask);
        if (attn_probs) attn_probs->push_back(probs);
        head_outs.push_back(matmul(probs, vh));
    }
    auto cat = heads == 1 ? head_outs[0] : concat_cols(head_outs);
    return linear(cat, ps, prefix + ".out", c, c);
}

// Two linear layers with a smooth nonlinearity between; shape-preserving.
template <typename T>
Tensor<T> ffn(const Tensor<T>& x, ParamStore<T>& ps, const std::string& prefix, int width,
              int hidden = 0) {
    if (hidden <= 0) hidden = 4 * width;
    auto h = gelu(linear(x, ps, prefix + ".fc1", width, hidden));
    return linear(h, ps, prefix + ".fc2", hidden, width);
}

}  // namespace lanetopo
