#pragma once

#include "stsg/queries.hpp"

namespace stsg {

enum class TokenRole { sub_text, sub_vis, obj_text, obj_vis, pred_text, pred_vis, spatial, null_token };

inline const char* role_name(TokenRole r) {
    switch (r) {
        case TokenRole::sub_text: return "sub_text";
        case TokenRole::sub_vis: return "sub_vis";
        case TokenRole::obj_text: return "obj_text";
        case TokenRole::obj_vis: return "obj_vis";
        case TokenRole::pred_text: return "pred_text";
        case TokenRole::pred_vis: return "pred_vis";
        case TokenRole::spatial: return "spatial";
        case TokenRole::null_token: return "null";
    }
    return "?";
}

// Tagged token sequence: 7 tokens per cue region (region-major, fixed role
// order), or one learned null token when there are no cues.
struct MultiModalBank {
    Var tokens;                       // T x d
    std::vector<TokenRole> roles;     // length T
    std::vector<int> region_index;    // length T; -1 for the null token
};

// The 12-vector of Eq-style spatial geometry: both boxes, center difference,
// both areas. Exposed separately so it can be unit-checked pre-projection.
inline Tensor spatial_vector(const BoundingBox& sub, const BoundingBox& obj) {
    Tensor v(1, 12);
    double* p = v.v.data();
    p[0] = sub.x1; p[1] = sub.y1; p[2] = sub.x2; p[3] = sub.y2;
    p[4] = obj.x1; p[5] = obj.y1; p[6] = obj.x2; p[7] = obj.y2;
    p[8] = sub.cx() - obj.cx();
    p[9] = sub.cy() - obj.cy();
    p[10] = sub.area();
    p[11] = obj.area();
    return v;
}

// Projects the relative-geometry 12-vector into model space.
inline Var spatial_feature(Tape& tape, const BoundingBox& sub, const BoundingBox& obj,
                           const Var& proj) {
    if (proj.cols() != 12)
        throw DimensionError("spatial projection must have 12 input columns, got " +
                             shape_str(proj.val()));
    return nn::linear(ad::constant(tape, spatial_vector(sub, obj)), proj);
}

inline void declare_bank_params(ParamStore& ps, int d, int d_l) {
    ps.add("bank.text_proj", d, d_l);
    ps.add("bank.vis_proj", d, d_l);
    ps.add("bank.spatial_proj", d, 12);
    ps.add("bank.null_token", 1, d);
}

// Assembles the per-frame token sequence: per region the six projected
// text/visual embeddings plus the spatial feature, concatenated along the
// sequence axis. One shared projection per modality.
inline MultiModalBank assemble_bank(Tape& tape, const CueEmbeddings& cues, ParamBinding& pb) {
    MultiModalBank bank;
    int x = cues.count();
    if (x == 0) {
        bank.tokens = pb["bank.null_token"];
        bank.roles = {TokenRole::null_token};
        bank.region_index = {-1};
        return bank;
    }
    Var text_proj = pb["bank.text_proj"];
    Var vis_proj = pb["bank.vis_proj"];
    Var spatial_proj = pb["bank.spatial_proj"];
    std::vector<Var> tokens;
    auto one = [&](const std::vector<double>& v) {
        Tensor t(1, cues.d_l);
        std::copy(v.begin(), v.end(), t.v.begin());
        return ad::constant(tape, std::move(t));
    };
    for (int i = 0; i < x; ++i) {
        tokens.push_back(nn::linear(one(cues.sub_t[i]), text_proj));
        tokens.push_back(nn::linear(one(cues.sub_v[i]), vis_proj));
        tokens.push_back(nn::linear(one(cues.obj_t[i]), text_proj));
        tokens.push_back(nn::linear(one(cues.obj_v[i]), vis_proj));
        tokens.push_back(nn::linear(one(cues.pred_t[i]), text_proj));
        tokens.push_back(nn::linear(one(cues.pred_v[i]), vis_proj));
        tokens.push_back(spatial_feature(tape, cues.sub_box[i], cues.obj_box[i], spatial_proj));
        for (TokenRole r : {TokenRole::sub_text, TokenRole::sub_vis, TokenRole::obj_text,
                            TokenRole::obj_vis, TokenRole::pred_text, TokenRole::pred_vis,
                            TokenRole::spatial})
            bank.roles.push_back(r);
        for (int k = 0; k < 7; ++k) bank.region_index.push_back(i);
    }
    bank.tokens = ad::concat_rows(tokens);
    return bank;
}

// Self-attention over the bank tokens, sinusoidal positions added first.
inline Var encode_bank(const MultiModalBank& bank, ParamBinding& pb, const nn::AttentionConfig& cfg) {
    return nn::encode(bank.tokens, pb, "bank.enc", cfg);
}

}  // namespace stsg
