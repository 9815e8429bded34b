#pragma once

#include <algorithm>
#include <functional>
#include <memory>

#include "stsg/tensor.hpp"

namespace stsg {

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Reverse-mode tape over Tensor-valued nodes. Every op records a backward
// closure; backward() walks the tape in reverse creation order.
class Tape {
  public:
    struct Node {
        Tensor val;
        Tensor grad;
        std::function<void(Tape&)> back;  // null for leaves
    };

    Tape() { nodes_.reserve(1024); }

    // Gradient buffers are not allocated here: forward-only evaluations
    // (finite differencing in particular) never touch them, so backward()
    // sizes them instead.
    int push(Tensor val, std::function<void(Tape&)> back = nullptr) {
        Node n;
        n.val = std::move(val);
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    const Tensor& val(int i) const { return nodes_[i].val; }
    Tensor& grad(int i) { return nodes_[i].grad; }
    size_t size() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss)=1 on a 1x1 node and accumulates into every grad.
    void backward(int loss) {
        const Tensor& lv = nodes_[loss].val;
        if (lv.rows != 1 || lv.cols != 1)
            throw DimensionError("backward: loss node must be scalar, got " + shape_str(lv));
        for (auto& n : nodes_) n.grad = Tensor(n.val.rows, n.val.cols);
        nodes_[loss].grad.v[0] = 1.0;
        for (int i = loss; i >= 0; --i)
            if (nodes_[i].back) nodes_[i].back(*this);
    }

  private:
    std::vector<Node> nodes_;
};

// Handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Tensor& val() const { return tape->val(id); }
    const Tensor& grad() const { return tape->grad(id); }
    int rows() const { return val().rows; }
    int cols() const { return val().cols; }
};

namespace ad {

inline Var constant(Tape& t, Tensor v) { return {&t, t.push(std::move(v))}; }

inline void check_same(const Var& a, const Var& b, const char* op) {
    if (!a.val().same_shape(b.val()))
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.val()) + " vs " +
                             shape_str(b.val()));
}

inline Var add(const Var& a, const Var& b) {
    check_same(a, b, "add");
    Tape& t = *a.tape;
    Tensor out = a.val();
    for (size_t i = 0; i < out.size(); ++i) out.v[i] += b.val().v[i];
    int aid = a.id, bid = b.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid, bid](Tape& tp) {
        const Tensor& g = tp.grad(id);
        for (size_t i = 0; i < g.size(); ++i) {
            tp.grad(aid).v[i] += g.v[i];
            tp.grad(bid).v[i] += g.v[i];
        }
    });
    return {&t, id};
}

inline Var sub(const Var& a, const Var& b) {
    check_same(a, b, "sub");
    Tape& t = *a.tape;
    Tensor out = a.val();
    for (size_t i = 0; i < out.size(); ++i) out.v[i] -= b.val().v[i];
    int aid = a.id, bid = b.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid, bid](Tape& tp) {
        const Tensor& g = tp.grad(id);
        for (size_t i = 0; i < g.size(); ++i) {
            tp.grad(aid).v[i] += g.v[i];
            tp.grad(bid).v[i] -= g.v[i];
        }
    });
    return {&t, id};
}

inline Var mul(const Var& a, const Var& b) {
    check_same(a, b, "mul");
    Tape& t = *a.tape;
    Tensor out = a.val();
    for (size_t i = 0; i < out.size(); ++i) out.v[i] *= b.val().v[i];
    int aid = a.id, bid = b.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid, bid](Tape& tp) {
        const Tensor& g = tp.grad(id);
        for (size_t i = 0; i < g.size(); ++i) {
            tp.grad(aid).v[i] += g.v[i] * tp.val(bid).v[i];
            tp.grad(bid).v[i] += g.v[i] * tp.val(aid).v[i];
        }
    });
    return {&t, id};
}

inline Var div(const Var& a, const Var& b) {
    check_same(a, b, "div");
    Tape& t = *a.tape;
    Tensor out = a.val();
    for (size_t i = 0; i < out.size(); ++i) out.v[i] /= b.val().v[i];
    int aid = a.id, bid = b.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid, bid](Tape& tp) {
        const Tensor& g = tp.grad(id);
        for (size_t i = 0; i < g.size(); ++i) {
            double bv = tp.val(bid).v[i];
            tp.grad(aid).v[i] += g.v[i] / bv;
            tp.grad(bid).v[i] -= g.v[i] * tp.val(aid).v[i] / (bv * bv);
        }
    });
    return {&t, id};
}

inline Var scale(const Var& a, double c) {
    Tape& t = *a.tape;
    Tensor out = a.val();
    for (double& x : out.v) x *= c;
    int aid = a.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid, c](Tape& tp) {
        const Tensor& g = tp.grad(id);
        for (size_t i = 0; i < g.size(); ++i) tp.grad(aid).v[i] += g.v[i] * c;
    });
    return {&t, id};
}

inline Var add_scalar(const Var& a, double c) {
    Tape& t = *a.tape;
    Tensor out = a.val();
    for (double& x : out.v) x += c;
    int aid = a.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid](Tape& tp) {
        const Tensor& g = tp.grad(id);
        for (size_t i = 0; i < g.size(); ++i) tp.grad(aid).v[i] += g.v[i];
    });
    return {&t, id};
}

inline Var matmul(const Var& a, const Var& b) {
    Tape& t = *a.tape;
    Tensor out = stsg::matmul(a.val(), b.val());
    int aid = a.id, bid = b.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid, bid](Tape& tp) {
        const Tensor& g = tp.grad(id);
        const Tensor& av = tp.val(aid);
        const Tensor& bv = tp.val(bid);
        Tensor& ga = tp.grad(aid);
        Tensor& gb = tp.grad(bid);
        // dA += G B^T ; dB += A^T G
        for (int i = 0; i < av.rows; ++i)
            for (int k = 0; k < av.cols; ++k) {
                double s = 0;
                for (int j = 0; j < bv.cols; ++j) s += g.at(i, j) * bv.at(k, j);
                ga.at(i, k) += s;
            }
        for (int k = 0; k < av.cols; ++k)
            for (int j = 0; j < bv.cols; ++j) {
                double s = 0;
                for (int i = 0; i < av.rows; ++i) s += av.at(i, k) * g.at(i, j);
                gb.at(k, j) += s;
            }
    });
    return {&t, id};
}

inline Var transpose(const Var& a) {
    Tape& t = *a.tape;
    Tensor out = stsg::transpose(a.val());
    int aid = a.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid](Tape& tp) {
        const Tensor& g = tp.grad(id);
        Tensor& ga = tp.grad(aid);
        for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) ga.at(j, i) += g.at(i, j);
    });
    return {&t, id};
}

// Broadcast a 1xC row vector across all rows of a.
inline Var add_row(const Var& a, const Var& row) {
    if (row.rows() != 1 || row.cols() != a.cols())
        throw DimensionError("add_row: bias shape " + shape_str(row.val()) + " for " +
                             shape_str(a.val()));
    Tape& t = *a.tape;
    Tensor out = a.val();
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out.at(i, j) += row.val().at(0, j);
    int aid = a.id, rid = row.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid, rid](Tape& tp) {
        const Tensor& g = tp.grad(id);
        Tensor& ga = tp.grad(aid);
        Tensor& gr = tp.grad(rid);
        for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) {
                ga.at(i, j) += g.at(i, j);
                gr.at(0, j) += g.at(i, j);
            }
    });
    return {&t, id};
}

// Row-wise softmax with max shift.
inline Var softmax_rows(const Var& a) {
    Tape& t = *a.tape;
    Tensor out = a.val();
    for (int i = 0; i < out.rows; ++i) {
        double mx = out.at(i, 0);
        for (int j = 1; j < out.cols; ++j) mx = std::max(mx, out.at(i, j));
        double sum = 0;
        for (int j = 0; j < out.cols; ++j) {
            out.at(i, j) = std::exp(out.at(i, j) - mx);
            sum += out.at(i, j);
        }
        for (int j = 0; j < out.cols; ++j) out.at(i, j) /= sum;
    }
    int aid = a.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid](Tape& tp) {
        const Tensor& g = tp.grad(id);
        const Tensor& s = tp.val(id);
        Tensor& ga = tp.grad(aid);
        for (int i = 0; i < g.rows; ++i) {
            double dot = 0;
            for (int j = 0; j < g.cols; ++j) dot += g.at(i, j) * s.at(i, j);
            for (int j = 0; j < g.cols; ++j) ga.at(i, j) += s.at(i, j) * (g.at(i, j) - dot);
        }
    });
    return {&t, id};
}

inline Var logistic(const Var& a) {
    Tape& t = *a.tape;
    Tensor out = a.val();
    for (double& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
    int aid = a.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid](Tape& tp) {
        const Tensor& g = tp.grad(id);
        const Tensor& s = tp.val(id);
        Tensor& ga = tp.grad(aid);
        for (size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] * s.v[i] * (1.0 - s.v[i]);
    });
    return {&t, id};
}

// Smooth activation for the feed-forward blocks (tanh form); keeps finite
// difference checks clean since there is no kink.
inline constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2/pi)

inline Var gelu(const Var& a) {
    Tape& t = *a.tape;
    const double k = kGeluScale;
    Tensor out = a.val();
    for (double& x : out.v) {
        double u = k * (x + 0.044715 * x * x * x);
        x = 0.5 * x * (1.0 + std::tanh(u));
    }
    int aid = a.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid](Tape& tp) {
        const Tensor& g = tp.grad(id);
        const Tensor& xv = tp.val(aid);
        Tensor& ga = tp.grad(aid);
        for (size_t i = 0; i < g.size(); ++i) {
            double x = xv.v[i];
            double u = kGeluScale * (x + 0.044715 * x * x * x);
            double th = std::tanh(u);
            double du = kGeluScale * (1.0 + 3.0 * 0.044715 * x * x);
            double d = 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
            ga.v[i] += g.v[i] * d;
        }
    });
    return {&t, id};
}

inline Var log(const Var& a) {
    Tape& t = *a.tape;
    Tensor out = a.val();
    for (double& x : out.v) x = std::log(x);
    int aid = a.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid](Tape& tp) {
        const Tensor& g = tp.grad(id);
        const Tensor& xv = tp.val(aid);
        Tensor& ga = tp.grad(aid);
        for (size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] / xv.v[i];
    });
    return {&t, id};
}

// x^p elementwise, x >= 0. Gradient p*x^(p-1).
inline Var powc(const Var& a, double p) {
    Tape& t = *a.tape;
    Tensor out = a.val();
    for (double& x : out.v) x = std::pow(x, p);
    int aid = a.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid, p](Tape& tp) {
        const Tensor& g = tp.grad(id);
        const Tensor& xv = tp.val(aid);
        Tensor& ga = tp.grad(aid);
        for (size_t i = 0; i < g.size(); ++i)
            ga.v[i] += g.v[i] * p * std::pow(xv.v[i], p - 1.0);
    });
    return {&t, id};
}

// Hard clamp; gradient flows only where the input is inside [lo, hi].
inline Var clamp(const Var& a, double lo, double hi) {
    Tape& t = *a.tape;
    Tensor out = a.val();
    for (double& x : out.v) x = std::min(hi, std::max(lo, x));
    int aid = a.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid, lo, hi](Tape& tp) {
        const Tensor& g = tp.grad(id);
        const Tensor& xv = tp.val(aid);
        Tensor& ga = tp.grad(aid);
        for (size_t i = 0; i < g.size(); ++i)
            if (xv.v[i] > lo && xv.v[i] < hi) ga.v[i] += g.v[i];
    });
    return {&t, id};
}

inline Var emax(const Var& a, const Var& b) {
    check_same(a, b, "emax");
    Tape& t = *a.tape;
    Tensor out = a.val();
    for (size_t i = 0; i < out.size(); ++i) out.v[i] = std::max(out.v[i], b.val().v[i]);
    int aid = a.id, bid = b.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid, bid](Tape& tp) {
        const Tensor& g = tp.grad(id);
        for (size_t i = 0; i < g.size(); ++i) {
            if (tp.val(aid).v[i] >= tp.val(bid).v[i])
                tp.grad(aid).v[i] += g.v[i];
            else
                tp.grad(bid).v[i] += g.v[i];
        }
    });
    return {&t, id};
}

inline Var emin(const Var& a, const Var& b) {
    check_same(a, b, "emin");
    Tape& t = *a.tape;
    Tensor out = a.val();
    for (size_t i = 0; i < out.size(); ++i) out.v[i] = std::min(out.v[i], b.val().v[i]);
    int aid = a.id, bid = b.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid, bid](Tape& tp) {
        const Tensor& g = tp.grad(id);
        for (size_t i = 0; i < g.size(); ++i) {
            if (tp.val(aid).v[i] <= tp.val(bid).v[i])
                tp.grad(aid).v[i] += g.v[i];
            else
                tp.grad(bid).v[i] += g.v[i];
        }
    });
    return {&t, id};
}

inline Var relu0(const Var& a) {
    Tape& t = *a.tape;
    Tensor out = a.val();
    for (double& x : out.v) x = std::max(0.0, x);
    int aid = a.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid](Tape& tp) {
        const Tensor& g = tp.grad(id);
        const Tensor& xv = tp.val(aid);
        Tensor& ga = tp.grad(aid);
        for (size_t i = 0; i < g.size(); ++i)
            if (xv.v[i] > 0) ga.v[i] += g.v[i];
    });
    return {&t, id};
}

inline Var abs_(const Var& a) {
    Tape& t = *a.tape;
    Tensor out = a.val();
    for (double& x : out.v) x = std::fabs(x);
    int aid = a.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid](Tape& tp) {
        const Tensor& g = tp.grad(id);
        const Tensor& xv = tp.val(aid);
        Tensor& ga = tp.grad(aid);
        for (size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] * (xv.v[i] >= 0 ? 1.0 : -1.0);
    });
    return {&t, id};
}

inline Var concat_cols(const Var& a, const Var& b) {
    if (a.rows() != b.rows())
        throw DimensionError("concat_cols: row mismatch " + shape_str(a.val()) + " vs " +
                             shape_str(b.val()));
    Tape& t = *a.tape;
    Tensor out(a.rows(), a.cols() + b.cols());
    for (int i = 0; i < out.rows; ++i) {
        for (int j = 0; j < a.cols(); ++j) out.at(i, j) = a.val().at(i, j);
        for (int j = 0; j < b.cols(); ++j) out.at(i, a.cols() + j) = b.val().at(i, j);
    }
    int aid = a.id, bid = b.id, ac = a.cols(), bc = b.cols();
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid, bid, ac, bc](Tape& tp) {
        const Tensor& g = tp.grad(id);
        for (int i = 0; i < g.rows; ++i) {
            for (int j = 0; j < ac; ++j) tp.grad(aid).at(i, j) += g.at(i, j);
            for (int j = 0; j < bc; ++j) tp.grad(bid).at(i, j) += g.at(i, ac + j);
        }
    });
    return {&t, id};
}

inline Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows: empty list");
    Tape& t = *parts[0].tape;
    int cols = parts[0].cols();
    int rows = 0;
    for (const Var& p : parts) {
        if (p.cols() != cols) throw DimensionError("concat_rows: column mismatch");
        rows += p.rows();
    }
    Tensor out(rows, cols);
    int r = 0;
    std::vector<std::pair<int, int>> spans;  // (id, row offset)
    for (const Var& p : parts) {
        spans.emplace_back(p.id, r);
        for (int i = 0; i < p.rows(); ++i)
            for (int j = 0; j < cols; ++j) out.at(r + i, j) = p.val().at(i, j);
        r += p.rows();
    }
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, spans, cols](Tape& tp) {
        const Tensor& g = tp.grad(id);
        for (auto [pid, off] : spans) {
            Tensor& gp = tp.grad(pid);
            for (int i = 0; i < gp.rows; ++i)
                for (int j = 0; j < cols; ++j) gp.at(i, j) += g.at(off + i, j);
        }
    });
    return {&t, id};
}

inline Var slice_cols(const Var& a, int c0, int c1) {
    if (c0 < 0 || c1 > a.cols() || c0 >= c1)
        throw DimensionError("slice_cols: bad range on " + shape_str(a.val()));
    Tape& t = *a.tape;
    Tensor out(a.rows(), c1 - c0);
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out.at(i, j) = a.val().at(i, c0 + j);
    int aid = a.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid, c0](Tape& tp) {
        const Tensor& g = tp.grad(id);
        Tensor& ga = tp.grad(aid);
        for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) ga.at(i, c0 + j) += g.at(i, j);
    });
    return {&t, id};
}

inline Var slice_rows(const Var& a, int r0, int r1) {
    if (r0 < 0 || r1 > a.rows() || r0 >= r1)
        throw DimensionError("slice_rows: bad range on " + shape_str(a.val()));
    Tape& t = *a.tape;
    Tensor out(r1 - r0, a.cols());
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out.at(i, j) = a.val().at(r0 + i, j);
    int aid = a.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid, r0](Tape& tp) {
        const Tensor& g = tp.grad(id);
        Tensor& ga = tp.grad(aid);
        for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) ga.at(r0 + i, j) += g.at(i, j);
    });
    return {&t, id};
}

inline Var pick(const Var& a, int r, int c) {
    if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols())
        throw std::out_of_range("pick: index (" + std::to_string(r) + "," + std::to_string(c) +
                                ") outside " + shape_str(a.val()));
    Tape& t = *a.tape;
    Tensor out(1, 1);
    out.v[0] = a.val().at(r, c);
    int aid = a.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid, r, c](Tape& tp) {
        tp.grad(aid).at(r, c) += tp.grad(id).v[0];
    });
    return {&t, id};
}

inline Var sum_all(const Var& a) {
    Tape& t = *a.tape;
    Tensor out(1, 1);
    for (double x : a.val().v) out.v[0] += x;
    int aid = a.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid](Tape& tp) {
        double g = tp.grad(id).v[0];
        for (double& x : tp.grad(aid).v) x += g;
    });
    return {&t, id};
}

inline Var mean_all(const Var& a) { return scale(sum_all(a), 1.0 / a.val().size()); }

// Rows x 1 column of log(sum(exp(row))) with max shift.
inline Var logsumexp_rows(const Var& a) {
    Tape& t = *a.tape;
    Tensor out(a.rows(), 1);
    for (int i = 0; i < a.rows(); ++i) {
        double mx = a.val().at(i, 0);
        for (int j = 1; j < a.cols(); ++j) mx = std::max(mx, a.val().at(i, j));
        double s = 0;
        for (int j = 0; j < a.cols(); ++j) s += std::exp(a.val().at(i, j) - mx);
        out.at(i, 0) = mx + std::log(s);
    }
    int aid = a.id;
    int id = static_cast<int>(t.size());
    t.push(std::move(out), [id, aid](Tape& tp) {
        const Tensor& g = tp.grad(id);
        const Tensor& xv = tp.val(aid);
        const Tensor& lv = tp.val(id);
        Tensor& ga = tp.grad(aid);
        for (int i = 0; i < xv.rows; ++i)
            for (int j = 0; j < xv.cols; ++j)
                ga.at(i, j) += g.at(i, 0) * std::exp(xv.at(i, j) - lv.at(i, 0));
    });
    return {&t, id};
}

}  // namespace ad
}  // namespace stsg
