#pragma once

#include "stsg/feature_bank.hpp"

namespace stsg {

enum class ContentSource { vlm, zero };
enum class PredicateMemory { bank, image };

struct ModelConfig {
    int n_queries = 100;
    int model_dim = 64;
    int embed_dim = 16;   // d_l
    int layers = 6;
    int heads = 4;
    int n_ref = 1;
    int feature_channels = 6;  // columns of the raw frame feature grid
    int object_classes = 6;
    std::vector<int> group_sizes = {3, 4, 5};
    ContentSource content_source = ContentSource::vlm;
    PredicateMemory predicate_memory = PredicateMemory::bank;

    void validate() const {
        if (group_sizes.size() != 3) throw std::invalid_argument("exactly 3 predicate groups");
        if (model_dim % heads != 0) throw DimensionError("model_dim not divisible by heads");
        if (layers < 1 || n_queries < 1 || embed_dim < 1 || object_classes < 2)
            throw std::invalid_argument("invalid model config");
        if (n_ref < 0) throw std::invalid_argument("n_ref must be >= 0");
    }

    nn::AttentionConfig attn() const { return {model_dim, heads, layers}; }
    nn::AttentionConfig attn_2d() const { return {2 * model_dim, heads, 1}; }
    int total_predicates() const { return group_sizes[0] + group_sizes[1] + group_sizes[2]; }
    int no_object_class() const { return object_classes; }
};

// Per-query outputs still on the tape; the loss consumes these directly.
struct ForwardOutputs {
    Var subject_logits;  // N x (C+1)
    Var object_logits;
    Var subject_box;     // N x 4 corner form
    Var object_box;
    std::vector<Var> predicate_probs;  // one N x group_size per group
};

// Plain-value view for matching cost computation and evaluation.
struct TripletPrediction {
    std::vector<double> subject_dist;  // softmaxed, incl. no-object
    std::vector<double> object_dist;
    BoundingBox subject_box;
    BoundingBox object_box;
    std::vector<std::vector<double>> predicate_probs;  // per group
};

struct TripletPredictionSet {
    std::vector<TripletPrediction> items;
    int count() const { return static_cast<int>(items.size()); }
};

inline void declare_decoder(ParamStore& ps, const std::string& prefix, int d, int layers) {
    for (int l = 0; l < layers; ++l) {
        std::string lp = prefix + ".l" + std::to_string(l);
        nn::declare_attention(ps, lp + ".self", d);
        nn::declare_attention(ps, lp + ".cross", d);
        nn::declare_ffn(ps, lp + ".ffn", d, 2 * d);
    }
}

inline void declare_mlp3(ParamStore& ps, const std::string& prefix, int d, int out) {
    ps.add(prefix + ".w1", d, d);
    ps.add_zero(prefix + ".b1", 1, d);
    ps.add(prefix + ".w2", d, d);
    ps.add_zero(prefix + ".b2", 1, d);
    ps.add(prefix + ".w3", out, d);
    ps.add_zero(prefix + ".b3", 1, out);
}

inline Var mlp3(const Var& x, ParamBinding& pb, const std::string& prefix) {
    Var b1 = pb[prefix + ".b1"];
    Var b2 = pb[prefix + ".b2"];
    Var b3 = pb[prefix + ".b3"];
    Var h = ad::gelu(nn::linear(x, pb[prefix + ".w1"], &b1));
    h = ad::gelu(nn::linear(h, pb[prefix + ".w2"], &b2));
    return nn::linear(h, pb[prefix + ".w3"], &b3);
}

// Declares every parameter of the pipeline in a fixed order; the order
// defines both initialization and checkpoint layout.
inline void declare_model(ParamStore& ps, const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    ps.seed(seed);
    int d = cfg.model_dim;
    ps.add("input_proj", d, cfg.feature_channels);
    nn::declare_encoder(ps, "img.enc", d, cfg.attn());
    ps.add("anchors", cfg.n_queries, d);
    ps.add("query.so_proj", d, 2 * cfg.embed_dim);
    ps.add("query.pred_proj", d, cfg.embed_dim);
    declare_bank_params(ps, d, cfg.embed_dim);
    nn::declare_encoder(ps, "bank.enc", d, cfg.attn());
    declare_decoder(ps, "so_dec", d, cfg.layers);
    declare_decoder(ps, "pred_dec", d, cfg.layers);
    nn::declare_attention(ps, "temporal.cross", 2 * d);
    nn::declare_ffn(ps, "temporal.ffn", 2 * d, 4 * d);
    declare_mlp3(ps, "head.sub_box", d, 4);
    declare_mlp3(ps, "head.obj_box", d, 4);
    ps.add("head.sub_cls.w", cfg.object_classes + 1, d);
    ps.add_zero("head.sub_cls.b", 1, cfg.object_classes + 1);
    ps.add("head.obj_cls.w", cfg.object_classes + 1, d);
    ps.add_zero("head.obj_cls.b", 1, cfg.object_classes + 1);
    for (int g = 0; g < 3; ++g) {
        ps.add("head.pred" + std::to_string(g) + ".w", cfg.group_sizes[g], d);
        ps.add_zero("head.pred" + std::to_string(g) + ".b", 1, cfg.group_sizes[g]);
    }
}

// Encoder over projected frame features, sinusoidal positions added once.
inline Var encode_image(Tape& tape, const Tensor& raw, ParamBinding& pb, const ModelConfig& cfg) {
    if (raw.rows < 1) throw DimensionError("encode_image: empty feature grid");
    Var x = nn::linear(ad::constant(tape, raw), pb["input_proj"]);
    return nn::encode(x, pb, "img.enc", cfg.attn());
}

// Shared decoder layer stack: self-attention over queries, cross-attention
// to the memory, feed-forward. The position component is re-added to the
// attention inputs at every layer.
inline Var decode(const QueryBlock& q, const Var& memory, ParamBinding& pb,
                  const std::string& prefix, const nn::AttentionConfig& cfg) {
    Var s = q.content;
    for (int l = 0; l < cfg.layers; ++l) {
        std::string lp = prefix + ".l" + std::to_string(l);
        Var sq = ad::add(s, q.position);
        Var a = ad::add(s, nn::multi_head_attention(sq, sq, s, pb, lp + ".self", cfg));
        Var aq = ad::add(a, q.position);
        Var b = ad::add(a, nn::multi_head_attention(aq, memory, memory, pb, lp + ".cross", cfg));
        s = ad::add(b, nn::feed_forward(b, pb, lp + ".ffn"));
    }
    return s;
}

inline Var subject_object_decode(const QueryBlock& q, const Var& encoded, ParamBinding& pb,
                                 const ModelConfig& cfg) {
    return decode(q, encoded, pb, "so_dec", cfg.attn());
}

inline Var predicate_decode(const QueryBlock& q, const Var& memory, ParamBinding& pb,
                            const ModelConfig& cfg) {
    return decode(q, memory, pb, "pred_dec", cfg.attn());
}

inline Var form_triplets(const Var& so, const Var& p) {
    if (so.rows() != p.rows())
        throw DimensionError("form_triplets: row mismatch " + shape_str(so.val()) + " vs " +
                             shape_str(p.val()));
    return ad::concat_cols(so, p);
}

inline std::pair<Var, Var> split_triplets(const Var& tri) {
    int d = tri.cols() / 2;
    return {ad::slice_cols(tri, 0, d), ad::slice_cols(tri, d, 2 * d)};
}

// Cross-frame context: current triplet rows attend over the concatenated
// reference rows (no positional marks, so reference order cannot matter),
// then a residual feed-forward. No references leaves the input untouched.
inline Var temporal_aggregate(const Var& current, const std::vector<Var>& refs, ParamBinding& pb,
                              const nn::AttentionConfig& cfg2d) {
    if (refs.empty()) return current;
    for (const Var& r : refs)
        if (!r.val().same_shape(current.val()))
            throw DimensionError("temporal_aggregate: reference shape mismatch");
    Var keys = refs.size() == 1 ? refs[0] : ad::concat_rows(refs);
    Var h = nn::multi_head_attention(current, keys, keys, pb, "temporal.cross", cfg2d);
    return ad::add(h, nn::feed_forward(h, pb, "temporal.ffn"));
}

// Box head output is center form through a logistic squash, converted to
// corners on the tape.
inline Var boxes_from_head(const Var& raw) {
    Var sq = ad::logistic(raw);  // (cx, cy, w, h) in (0,1)
    Var cx = ad::slice_cols(sq, 0, 1);
    Var cy = ad::slice_cols(sq, 1, 2);
    Var wh = ad::slice_cols(sq, 2, 3);
    Var hh = ad::slice_cols(sq, 3, 4);
    Var x1 = ad::sub(cx, ad::scale(wh, 0.5));
    Var y1 = ad::sub(cy, ad::scale(hh, 0.5));
    Var x2 = ad::add(cx, ad::scale(wh, 0.5));
    Var y2 = ad::add(cy, ad::scale(hh, 0.5));
    return ad::concat_cols(ad::concat_cols(x1, y1), ad::concat_cols(x2, y2));
}

inline ForwardOutputs predict_heads(const Var& triplets, ParamBinding& pb, const ModelConfig& cfg) {
    auto [so, p] = split_triplets(triplets);
    ForwardOutputs out;
    out.subject_box = boxes_from_head(mlp3(so, pb, "head.sub_box"));
    out.object_box = boxes_from_head(mlp3(so, pb, "head.obj_box"));
    Var sb = pb["head.sub_cls.b"];
    Var ob = pb["head.obj_cls.b"];
    out.subject_logits = nn::linear(so, pb["head.sub_cls.w"], &sb);
    out.object_logits = nn::linear(so, pb["head.obj_cls.w"], &ob);
    for (int g = 0; g < 3; ++g) {
        std::string hp = "head.pred" + std::to_string(g);
        Var b = pb[hp + ".b"];
        out.predicate_probs.push_back(ad::logistic(nn::linear(p, pb[hp + ".w"], &b)));
    }
    return out;
}

// Everything needed to run one frame through the pipeline.
struct FrameInput {
    const Tensor* raw_features = nullptr;
    FrameCues cues;
};

// Runs encoder, both decoders and triplet concatenation for one frame.
inline Var frame_triplets(Tape& tape, const FrameInput& in, const EmbeddingProvider& provider,
                          ParamBinding& pb, const ModelConfig& cfg) {
    Var encoded = encode_image(tape, *in.raw_features, pb, cfg);
    FrameCues cues = in.cues;
    if (cfg.content_source == ContentSource::zero) cues.cues.clear();
    CueEmbeddings ce = embed_cues(cues, provider, cfg.n_queries);

    QueryBlock so_q = build_subject_object_queries(tape, ce, pb["anchors"], pb["query.so_proj"]);
    Var so_out = subject_object_decode(so_q, encoded, pb, cfg);

    Var memory = encoded;
    if (cfg.predicate_memory == PredicateMemory::bank) {
        MultiModalBank bank = assemble_bank(tape, ce, pb);
        memory = encode_bank(bank, pb, cfg.attn());
    }
    QueryBlock p_q = build_predicate_queries(tape, ce, so_out, pb["query.pred_proj"]);
    Var p_out = predicate_decode(p_q, memory, pb, cfg);
    return form_triplets(so_out, p_out);
}

// Full forward: current frame plus reference frames through the shared
// pipeline, temporal aggregation, prediction heads.
inline ForwardOutputs forward(Tape& tape, const FrameInput& current,
                              const std::vector<FrameInput>& refs,
                              const EmbeddingProvider& provider, ParamBinding& pb,
                              const ModelConfig& cfg) {
    Var tri = frame_triplets(tape, current, provider, pb, cfg);
    std::vector<Var> ref_tris;
    for (const FrameInput& r : refs)
        ref_tris.push_back(frame_triplets(tape, r, provider, pb, cfg));
    Var agg = temporal_aggregate(tri, ref_tris, pb, cfg.attn_2d());
    return predict_heads(agg, pb, cfg);
}

// Extracts plain probabilities and clamped boxes for matching and metrics.
inline TripletPredictionSet extract_predictions(const ForwardOutputs& out, const ModelConfig& cfg) {
    TripletPredictionSet set;
    int n = out.subject_logits.rows();
    const Tensor& sl = out.subject_logits.val();
    const Tensor& ol = out.object_logits.val();
    const Tensor& sb = out.subject_box.val();
    const Tensor& ob = out.object_box.val();
    auto softmax_row = [](const Tensor& t, int i) {
        std::vector<double> r(t.cols);
        double mx = t.at(i, 0);
        for (int j = 1; j < t.cols; ++j) mx = std::max(mx, t.at(i, j));
        double s = 0;
        for (int j = 0; j < t.cols; ++j) s += (r[j] = std::exp(t.at(i, j) - mx));
        for (double& x : r) x /= s;
        return r;
    };
    auto clamp_box = [](const Tensor& t, int i) {
        BoundingBox b{t.at(i, 0), t.at(i, 1), t.at(i, 2), t.at(i, 3)};
        b.x1 = std::clamp(b.x1, 0.0, 1.0);
        b.y1 = std::clamp(b.y1, 0.0, 1.0);
        b.x2 = std::clamp(b.x2, b.x1, 1.0);
        b.y2 = std::clamp(b.y2, b.y1, 1.0);
        return b;
    };
    for (int i = 0; i < n; ++i) {
        TripletPrediction tp;
        tp.subject_dist = softmax_row(sl, i);
        tp.object_dist = softmax_row(ol, i);
        tp.subject_box = clamp_box(sb, i);
        tp.object_box = clamp_box(ob, i);
        for (int g = 0; g < 3; ++g) {
            const Tensor& pg = out.predicate_probs[g].val();
            std::vector<double> r(pg.cols);
            for (int j = 0; j < pg.cols; ++j) r[j] = pg.at(i, j);
            tp.predicate_probs.push_back(std::move(r));
        }
        set.items.push_back(std::move(tp));
    }
    return set;
}

}  // namespace stsg
