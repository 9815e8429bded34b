#pragma once

#include "stsg/data.hpp"
#include "stsg/nn.hpp"

namespace stsg {

struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-cue text and region embeddings feeding query construction and the
// feature bank. All vectors are unit length d_l.
struct CueEmbeddings {
    int d_l = 0;
    std::vector<std::vector<double>> sub_t, obj_t, pred_t;
    std::vector<std::vector<double>> sub_v, obj_v, pred_v;
    std::vector<BoundingBox> sub_box, obj_box;

    int count() const { return static_cast<int>(sub_t.size()); }
};

namespace detail {

inline std::vector<double> mean_unit(const std::vector<std::vector<double>>& vecs) {
    std::vector<double> m(vecs[0].size(), 0.0);
    for (const auto& v : vecs)
        for (size_t i = 0; i < m.size(); ++i) m[i] += v[i];
    double n = 0;
    for (double x : m) n += x * x;
    n = std::sqrt(n);
    if (n == 0) throw NumericError("cue predicate embeddings cancel to zero");
    for (double& x : m) x /= n;
    return m;
}

}  // namespace detail

// Embeds cue labels and regions. Cues beyond `capacity` are dropped in
// provider (confidence) order. Multi-predicate cues embed as the
// re-normalized mean of the individual predicate embeddings. The predicate
// region is the union of the subject and object boxes.
inline CueEmbeddings embed_cues(const FrameCues& fc, const EmbeddingProvider& provider,
                                int capacity) {
    CueEmbeddings ce;
    ce.d_l = provider.dim();
    int take = std::min<int>(capacity, static_cast<int>(fc.cues.size()));
    for (int i = 0; i < take; ++i) {
        const Cue& c = fc.cues[i];
        if (c.predicates.empty())
            throw std::invalid_argument("cue without predicates cannot be embedded");
        ce.sub_t.push_back(provider.embed(c.subject, EmbedKind::text));
        ce.obj_t.push_back(provider.embed(c.object, EmbedKind::text));
        BoundingBox pred_region = union_box(c.sub_box, c.obj_box);
        ce.sub_v.push_back(provider.embed(c.subject, EmbedKind::visual, &c.sub_box));
        ce.obj_v.push_back(provider.embed(c.object, EmbedKind::visual, &c.obj_box));
        std::vector<std::vector<double>> pt, pv;
        for (const std::string& p : c.predicates) {
            pt.push_back(provider.embed(p, EmbedKind::text));
            pv.push_back(provider.embed(p, EmbedKind::visual, &pred_region));
        }
        ce.pred_t.push_back(detail::mean_unit(pt));
        ce.pred_v.push_back(detail::mean_unit(pv));
        ce.sub_box.push_back(c.sub_box);
        ce.obj_box.push_back(c.obj_box);
    }
    return ce;
}

// Content + position pair; the combined query is their sum.
struct QueryBlock {
    Var content;
    Var position;

    Var combined() const { return ad::add(content, position); }
};

namespace detail {

inline Tensor rows_from(const std::vector<std::vector<double>>& vecs, int cols) {
    Tensor t(static_cast<int>(vecs.size()), cols);
    for (size_t i = 0; i < vecs.size(); ++i)
        for (int j = 0; j < cols; ++j) t.at(static_cast<int>(i), j) = vecs[i][j];
    return t;
}

}  // namespace detail

// Content rows 0..x are a bias-free projection of concat(sub_t, obj_t); the
// remaining rows stay zero, so with no cues the combined query reduces to
// the position anchors alone.
inline QueryBlock build_subject_object_queries(Tape& tape, const CueEmbeddings& cues,
                                               const Var& anchors, const Var& proj) {
    int n = anchors.rows();
    int d = anchors.cols();
    int x = cues.count();
    if (x > n)
        throw CapacityError("cue count " + std::to_string(x) + " exceeds query capacity " +
                            std::to_string(n));
    if (proj.rows() != d || proj.cols() != 2 * cues.d_l)
        throw DimensionError("subject-object projection must be " + std::to_string(d) + "x" +
                             std::to_string(2 * cues.d_l) + ", got " + shape_str(proj.val()));
    Var content;
    if (x == 0) {
        content = ad::constant(tape, Tensor(n, d));
    } else {
        Tensor cat(x, 2 * cues.d_l);
        for (int i = 0; i < x; ++i)
            for (int j = 0; j < cues.d_l; ++j) {
                cat.at(i, j) = cues.sub_t[i][j];
                cat.at(i, cues.d_l + j) = cues.obj_t[i][j];
            }
        Var filled = nn::linear(ad::constant(tape, std::move(cat)), proj);
        if (x == n)
            content = filled;
        else
            content = ad::concat_rows({filled, ad::constant(tape, Tensor(n - x, d))});
    }
    return {content, anchors};
}

// Predicate content projects pred_t per cue; position reuses the decoded
// subject-object queries row-for-row, so cue i's two content sources share
// index i.
inline QueryBlock build_predicate_queries(Tape& tape, const CueEmbeddings& cues, const Var& so_out,
                                          const Var& proj) {
    int n = so_out.rows();
    int d = so_out.cols();
    int x = cues.count();
    if (x > n)
        throw DimensionError("cue rows exceed decoded query rows");
    if (proj.rows() != d || proj.cols() != cues.d_l)
        throw DimensionError("predicate projection must be " + std::to_string(d) + "x" +
                             std::to_string(cues.d_l) + ", got " + shape_str(proj.val()));
    Var content;
    if (x == 0) {
        content = ad::constant(tape, Tensor(n, d));
    } else {
        Var filled = nn::linear(ad::constant(tape, detail::rows_from(cues.pred_t, cues.d_l)), proj);
        if (x == n)
            content = filled;
        else
            content = ad::concat_rows({filled, ad::constant(tape, Tensor(n - x, d))});
    }
    return {content, so_out};
}

}  // namespace stsg
