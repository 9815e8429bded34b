#pragma once

#include "stsg/matcher.hpp"

namespace stsg {

enum class EvalMode { predcls, sgcls, sgdet };

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline EvalMode parse_mode(const std::string& s) {
    if (s == "predcls") return EvalMode::predcls;
    if (s == "sgcls") return EvalMode::sgcls;
    if (s == "sgdet") return EvalMode::sgdet;
    throw ConfigError("unknown evaluation mode: " + s);
}

inline const char* mode_name(EvalMode m) {
    switch (m) {
        case EvalMode::predcls: return "predcls";
        case EvalMode::sgcls: return "sgcls";
        case EvalMode::sgdet: return "sgdet";
    }
    return "?";
}

// One ranked prediction: subject, object, predicate with confidences; the
// ranking score is the product of the three.
struct ScoredTriplet {
    int subject_class = 0;
    BoundingBox subject_box;
    double subject_conf = 1.0;
    int object_class = 0;
    BoundingBox object_box;
    double object_conf = 1.0;
    int predicate = 0;
    double predicate_conf = 1.0;
    int pair_key = 0;  // subject-object unit the candidate came from

    double combined() const { return subject_conf * object_conf * predicate_conf; }
};

// A single ground-truth <s,p,o> instance (one per predicate id).
struct GtInstance {
    int subject_class = 0;
    int object_class = 0;
    int predicate = 0;
    BoundingBox subject_box;
    BoundingBox object_box;
};

inline std::vector<GtInstance> expand_gts(const FrameAnnotation& fa) {
    std::vector<GtInstance> out;
    for (const Triplet& t : fa.triplets)
        for (int p : t.predicates)
            out.push_back({fa.entities[t.subject].class_id, fa.entities[t.object].class_id, p,
                           fa.entities[t.subject].box, fa.entities[t.object].box});
    return out;
}

namespace detail {

inline int argmax_real_class(const std::vector<double>& dist) {
    // last slot is no-object; rank real classes only
    int best = 0;
    for (size_t j = 1; j + 1 < dist.size(); ++j)
        if (dist[j] > dist[best]) best = static_cast<int>(j);
    return best;
}

inline double predicate_prob(const TripletPrediction& tp, int global_pred, const Vocabulary& vocab) {
    int g = vocab.group_of(global_pred);
    return tp.predicate_probs[g][global_pred - vocab.group_offset(g)];
}

}  // namespace detail

// Expands predictions into ranked candidates per evaluation mode. predcls
// and sgcls substitute ground-truth boxes (and labels, for predcls) into the
// query each ground-truth pair was matched to; sgdet scores everything.
inline std::vector<ScoredTriplet> enumerate_candidates(const TripletPredictionSet& preds,
                                                       EvalMode mode, const FrameAnnotation& gt,
                                                       const LossWeights& w,
                                                       const Vocabulary& vocab) {
    std::vector<ScoredTriplet> cands;
    int total_preds = vocab.n_predicates();
    if (mode == EvalMode::sgdet) {
        for (int q = 0; q < preds.count(); ++q) {
            const TripletPrediction& tp = preds.items[q];
            int sc = detail::argmax_real_class(tp.subject_dist);
            int oc = detail::argmax_real_class(tp.object_dist);
            for (int p = 0; p < total_preds; ++p) {
                ScoredTriplet st;
                st.subject_class = sc;
                st.subject_conf = tp.subject_dist[sc];
                st.subject_box = tp.subject_box;
                st.object_class = oc;
                st.object_conf = tp.object_dist[oc];
                st.object_box = tp.object_box;
                st.predicate = p;
                st.predicate_conf = detail::predicate_prob(tp, p, vocab);
                st.pair_key = q;
                cands.push_back(st);
            }
        }
        return cands;
    }

    // gt pairs take the predicate (and, for sgcls, label) scores of their
    // matched queries
    std::vector<GtTriplet> gts = gt_triplets(gt);
    MatchResult match = match_frame(gts, preds, w, vocab);
    for (size_t i = 0; i < gts.size(); ++i) {
        const TripletPrediction& tp = preds.items[match.row_to_col[i]];
        ScoredTriplet base;
        base.subject_box = gts[i].subject_box;
        base.object_box = gts[i].object_box;
        base.pair_key = static_cast<int>(i);
        if (mode == EvalMode::predcls) {
            base.subject_class = gts[i].subject_class;
            base.object_class = gts[i].object_class;
            base.subject_conf = 1.0;
            base.object_conf = 1.0;
        } else {  // sgcls
            base.subject_class = detail::argmax_real_class(tp.subject_dist);
            base.subject_conf = tp.subject_dist[base.subject_class];
            base.object_class = detail::argmax_real_class(tp.object_dist);
            base.object_conf = tp.object_dist[base.object_class];
        }
        for (int p = 0; p < total_preds; ++p) {
            ScoredTriplet st = base;
            st.predicate = p;
            st.predicate_conf = detail::predicate_prob(tp, p, vocab);
            cands.push_back(st);
        }
    }
    return cands;
}

// Deterministic ranking: score descending, then pair key, then predicate id.
inline void rank_candidates(std::vector<ScoredTriplet>& cands) {
    std::sort(cands.begin(), cands.end(), [](const ScoredTriplet& a, const ScoredTriplet& b) {
        if (a.combined() != b.combined()) return a.combined() > b.combined();
        if (a.pair_key != b.pair_key) return a.pair_key < b.pair_key;
        return a.predicate < b.predicate;
    });
}

// Keeps the single best-scoring predicate per pair (or per pair and group
// when per_group is set). Ties go to the lower predicate id.
inline std::vector<ScoredTriplet> filter_with_constraint(std::vector<ScoredTriplet> cands,
                                                         bool per_group, const Vocabulary& vocab) {
    rank_candidates(cands);
    std::vector<ScoredTriplet> kept;
    std::map<std::pair<int, int>, bool> seen;
    for (const ScoredTriplet& c : cands) {
        std::pair<int, int> key{c.pair_key, per_group ? vocab.group_of(c.predicate) : 0};
        if (seen[key]) continue;
        seen[key] = true;
        kept.push_back(c);
    }
    return kept;
}

namespace detail {

inline bool candidate_matches(const ScoredTriplet& c, const GtInstance& g, EvalMode mode,
                              double iou_thr) {
    if (c.subject_class != g.subject_class || c.object_class != g.object_class ||
        c.predicate != g.predicate)
        return false;
    if (mode == EvalMode::sgdet)
        return iou(c.subject_box, g.subject_box) >= iou_thr &&
               iou(c.object_box, g.object_box) >= iou_thr;
    return true;
}

// Greedy rank-order matching of the top-K candidates against the ground
// truth; marks which gt instances were recovered. The predicate constraint
// is applied inside the top-K window, so the constrained candidate set is a
// subset of the unconstrained one and with-constraint recall can never
// exceed no-constraint recall at the same K.
inline std::vector<bool> match_top_k(std::vector<ScoredTriplet> cands,
                                     const std::vector<GtInstance>& gts, int K, EvalMode mode,
                                     double iou_thr, bool constrained = false,
                                     bool per_group = false, const Vocabulary* vocab = nullptr) {
    rank_candidates(cands);
    if (static_cast<int>(cands.size()) > K) cands.resize(K);
    if (constrained) {
        if (!vocab) throw ConfigError("constrained recall requires a vocabulary");
        cands = filter_with_constraint(std::move(cands), per_group, *vocab);
    }
    std::vector<bool> hit(gts.size(), false);
    for (const ScoredTriplet& c : cands) {
        for (size_t i = 0; i < gts.size(); ++i) {
            if (hit[i]) continue;
            if (candidate_matches(c, gts[i], mode, iou_thr)) {
                hit[i] = true;
                break;
            }
        }
    }
    return hit;
}

}  // namespace detail

// Fraction of ground-truth triplets recovered in the top-K ranked
// candidates. Empty ground truth is defined as 1.0 (callers exclude such
// frames from averaging).
inline double recall_at_k(const std::vector<ScoredTriplet>& cands, const std::vector<GtInstance>& gts,
                          int K, EvalMode mode, double iou_thr = 0.5, bool constrained = false,
                          bool per_group = false, const Vocabulary* vocab = nullptr) {
    if (K <= 0) throw ConfigError("recall K must be positive");
    if (gts.empty()) return 1.0;
    std::vector<bool> hit =
        detail::match_top_k(cands, gts, K, mode, iou_thr, constrained, per_group, vocab);
    int n = 0;
    for (bool h : hit) n += h;
    return static_cast<double>(n) / gts.size();
}

struct PerPredicateRecall {
    std::vector<int> support;     // gt instances per predicate class
    std::vector<double> recall;   // matched/support; 0 when support is 0
    double mean = 0;              // unweighted over classes with support
};

// Recall per predicate class pooled over frames; mean over classes that
// appear in the ground truth.
inline PerPredicateRecall mean_recall_at_k(
    const std::vector<std::vector<ScoredTriplet>>& frame_cands,
    const std::vector<std::vector<GtInstance>>& frame_gts, int K, EvalMode mode,
    const Vocabulary& vocab, double iou_thr = 0.5, bool constrained = false,
    bool per_group = false) {
    if (K <= 0) throw ConfigError("recall K must be positive");
    if (frame_cands.size() != frame_gts.size())
        throw DimensionError("mean_recall_at_k: frame count mismatch");
    PerPredicateRecall out;
    out.support.assign(vocab.n_predicates(), 0);
    std::vector<int> matched(vocab.n_predicates(), 0);
    for (size_t f = 0; f < frame_gts.size(); ++f) {
        const auto& gts = frame_gts[f];
        std::vector<bool> hit = detail::match_top_k(frame_cands[f], gts, K, mode, iou_thr,
                                                    constrained, per_group, &vocab);
        for (size_t i = 0; i < gts.size(); ++i) {
            out.support[gts[i].predicate] += 1;
            if (hit[i]) matched[gts[i].predicate] += 1;
        }
    }
    out.recall.assign(vocab.n_predicates(), 0.0);
    int classes = 0;
    double sum = 0;
    for (int p = 0; p < vocab.n_predicates(); ++p) {
        if (out.support[p] == 0) continue;
        out.recall[p] = static_cast<double>(matched[p]) / out.support[p];
        sum += out.recall[p];
        ++classes;
    }
    out.mean = classes ? sum / classes : 0.0;
    return out;
}

}  // namespace stsg
