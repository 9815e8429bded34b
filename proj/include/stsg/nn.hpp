#pragma once

#include <map>
#include <random>

#include "stsg/autodiff.hpp"

namespace stsg {

// Named parameter set. Creation order is stable and defines checkpoint
// layout; names must be unique.
class ParamStore {
  public:
    struct Entry {
        std::string name;
        Tensor value;
        Tensor grad;
        // Adam state
        Tensor m, v2;
    };

    // Uniform(-1/sqrt(in), 1/sqrt(in)) init from the store's generator.
    // in = fan-in = cols for weight[out x in].
    int add(const std::string& name, int rows, int cols) {
        double bound = 1.0 / std::sqrt(static_cast<double>(cols));
        return add_init(name, rows, cols, -bound, bound);
    }

    int add_zero(const std::string& name, int rows, int cols) {
        return add_init(name, rows, cols, 0.0, 0.0);
    }

    int add_init(const std::string& name, int rows, int cols, double lo, double hi) {
        if (index_.count(name))
            throw std::invalid_argument("parameter name already used: " + name);
        Entry e;
        e.name = name;
        e.value = Tensor(rows, cols);
        if (lo != hi) {
            std::uniform_real_distribution<double> dist(lo, hi);
            for (double& x : e.value.v) x = dist(rng_);
        }
        e.grad = Tensor(rows, cols);
        e.m = Tensor(rows, cols);
        e.v2 = Tensor(rows, cols);
        index_[name] = static_cast<int>(entries_.size());
        entries_.push_back(std::move(e));
        return static_cast<int>(entries_.size()) - 1;
    }

    void seed(uint64_t s) { rng_.seed(s); }

    bool has(const std::string& name) const { return index_.count(name) != 0; }
    Entry& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
        return entries_[it->second];
    }
    const Entry& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
        return entries_[it->second];
    }

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }

  private:
    std::vector<Entry> entries_;
    std::map<std::string, int> index_;
    std::mt19937_64 rng_{0};
};

// Per-forward-pass binding of parameters onto a tape. After backward() the
// node gradients are pulled back into the store.
class ParamBinding {
  public:
    ParamBinding(Tape& tape, ParamStore& store) : tape_(&tape), store_(&store) {}

    Var operator[](const std::string& name) {
        auto it = bound_.find(name);
        if (it != bound_.end()) return {tape_, it->second};
        Var v = ad::constant(*tape_, store_->at(name).value);
        bound_[name] = v.id;
        return v;
    }

    // Accumulates tape gradients into the store's grad buffers.
    void pull_grads() {
        for (auto& [name, id] : bound_) {
            Tensor& g = store_->at(name).grad;
            const Tensor& tg = tape_->grad(id);
            for (size_t i = 0; i < g.size(); ++i) g.v[i] += tg.v[i];
        }
    }

  private:
    Tape* tape_;
    ParamStore* store_;
    std::map<std::string, int> bound_;
};

namespace nn {

struct AttentionConfig {
    int model_dim = 64;
    int heads = 4;
    int layers = 1;

    void validate() const {
        if (model_dim % heads != 0)
            throw DimensionError("attention config: model_dim not divisible by heads");
        if (layers < 1) throw DimensionError("attention config: layers must be >= 1");
    }
    int head_dim() const { return model_dim / heads; }
};

// y = x W^T (+ bias). W is [out x in].
inline Var linear(const Var& x, const Var& w, const Var* bias = nullptr) {
    if (x.cols() != w.cols())
        throw DimensionError("linear: input " + shape_str(x.val()) + " vs weight " +
                             shape_str(w.val()));
    Var y = ad::matmul(x, ad::transpose(w));
    if (bias) y = ad::add_row(y, *bias);
    return y;
}

// Registers the parameters of one attention block (q/k/v/out projections).
inline void declare_attention(ParamStore& ps, const std::string& prefix, int d) {
    ps.add(prefix + ".wq", d, d);
    ps.add(prefix + ".wk", d, d);
    ps.add(prefix + ".wv", d, d);
    ps.add(prefix + ".wo", d, d);
}

// Scaled dot-product attention, one softmax per head, heads concatenated and
// output-projected. q: m x d, k/v: L x d.
inline Var multi_head_attention(const Var& q, const Var& k, const Var& v, ParamBinding& pb,
                                const std::string& prefix, const AttentionConfig& cfg) {
    cfg.validate();
    if (q.cols() != cfg.model_dim || k.cols() != cfg.model_dim || v.cols() != cfg.model_dim)
        throw DimensionError("attention: dim mismatch with config");
    if (k.rows() == 0) throw DimensionError("attention: empty key set");
    if (k.rows() != v.rows()) throw DimensionError("attention: K/V row mismatch");

    Var qp = linear(q, pb[prefix + ".wq"]);
    Var kp = linear(k, pb[prefix + ".wk"]);
    Var vp = linear(v, pb[prefix + ".wv"]);

    int hd = cfg.head_dim();
    double scl = 1.0 / std::sqrt(static_cast<double>(hd));
    std::vector<Var> heads;
    for (int h = 0; h < cfg.heads; ++h) {
        Var qh = ad::slice_cols(qp, h * hd, (h + 1) * hd);
        Var kh = ad::slice_cols(kp, h * hd, (h + 1) * hd);
        Var vh = ad::slice_cols(vp, h * hd, (h + 1) * hd);
        Var att = ad::softmax_rows(ad::scale(ad::matmul(qh, ad::transpose(kh)), scl));
        heads.push_back(ad::matmul(att, vh));
    }
    Var cat = heads[0];
    for (size_t h = 1; h < heads.size(); ++h) cat = ad::concat_cols(cat, heads[h]);
    return linear(cat, pb[prefix + ".wo"]);
}

inline void declare_ffn(ParamStore& ps, const std::string& prefix, int d, int hidden) {
    ps.add(prefix + ".w1", hidden, d);
    ps.add_zero(prefix + ".b1", 1, hidden);
    ps.add(prefix + ".w2", d, hidden);
    ps.add_zero(prefix + ".b2", 1, d);
}

inline Var feed_forward(const Var& x, ParamBinding& pb, const std::string& prefix) {
    Var b1 = pb[prefix + ".b1"];
    Var b2 = pb[prefix + ".b2"];
    Var h = ad::gelu(linear(x, pb[prefix + ".w1"], &b1));
    return linear(h, pb[prefix + ".w2"], &b2);
}

inline void declare_encoder(ParamStore& ps, const std::string& prefix, int d,
                            const AttentionConfig& cfg) {
    for (int l = 0; l < cfg.layers; ++l) {
        std::string lp = prefix + ".l" + std::to_string(l);
        declare_attention(ps, lp + ".self", d);
        declare_ffn(ps, lp + ".ffn", d, 2 * d);
    }
}

// Self-attention encoder stack. Sinusoidal positions are added once to the
// input; each layer is x + MHA, then + FFN.
inline Var encode(const Var& x, ParamBinding& pb, const std::string& prefix,
                  const AttentionConfig& cfg, bool add_positions = true) {
    Var h = x;
    if (add_positions) {
        Var pe = ad::constant(*x.tape, sinusoidal_pe(x.rows(), x.cols()));
        h = ad::add(h, pe);
    }
    for (int l = 0; l < cfg.layers; ++l) {
        std::string lp = prefix + ".l" + std::to_string(l);
        Var a = ad::add(h, multi_head_attention(h, h, h, pb, lp + ".self", cfg));
        h = ad::add(a, feed_forward(a, pb, lp + ".ffn"));
    }
    return h;
}

}  // namespace nn

// Central finite-difference check of d(loss)/d(params). `loss_fn` must build
// a fresh tape each call and return the scalar loss value given the current
// store contents; `grad_fn` runs forward+backward and fills store grads.
// Returns max over parameter entries of |analytic - numeric| / max(1,|numeric|).
struct GradCheckResult {
    double max_rel_err = 0;
    std::string worst_param;
};

template <class LossFn, class GradFn>
GradCheckResult grad_check(ParamStore& ps, LossFn&& loss_value, GradFn&& run_backward,
                           double step = 1e-5) {
    for (auto& e : ps.entries()) std::fill(e.grad.v.begin(), e.grad.v.end(), 0.0);
    run_backward();

    GradCheckResult res;
    for (auto& e : ps.entries()) {
        for (size_t i = 0; i < e.value.size(); ++i) {
            double keep = e.value.v[i];
            e.value.v[i] = keep + step;
            double up = loss_value();
            e.value.v[i] = keep - step;
            double dn = loss_value();
            e.value.v[i] = keep;
            if (!std::isfinite(up) || !std::isfinite(dn))
                throw NumericError("non-finite loss while differencing parameter " + e.name);
            double numeric = (up - dn) / (2 * step);
            double analytic = e.grad.v[i];
            double err = std::fabs(analytic - numeric) / std::max(1.0, std::fabs(numeric));
            if (err > res.max_rel_err) {
                res.max_rel_err = err;
                res.worst_param = e.name;
            }
        }
    }
    return res;
}

}  // namespace stsg
