#pragma once

#include "stsg/losses.hpp"
#include "stsg/model.hpp"

namespace stsg {

struct MatchResult {
    std::vector<int> row_to_col;  // ground-truth index -> prediction index
    double total = 0;
};

namespace detail {

// Jonker-Volgenant shortest augmenting path over the active rows/columns.
// rows: indices into cost's rows; active: per-column availability.
inline double jv_min_total(const Tensor& cost, const std::vector<int>& rows,
                           const std::vector<bool>& active, std::vector<int>* row_to_col = nullptr) {
    int n = static_cast<int>(rows.size());
    std::vector<int> cols;
    for (int j = 0; j < cost.cols; ++j)
        if (active[j]) cols.push_back(j);
    int m = static_cast<int>(cols.size());
    if (n == 0) {
        if (row_to_col) row_to_col->clear();
        return 0.0;
    }
    if (n > m) throw CapacityError("assignment needs at least as many columns as rows");

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0), v(m + 1, 0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = 0;
            double delta = inf;
            for (int j = 1; j <= m; ++j)
                if (!used[j]) {
                    double cur = cost.at(rows[i0 - 1], cols[j - 1]) - u[i0] - v[j];
                    if (cur < minv[j]) {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if (minv[j] < delta) {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else
                    minv[j] -= delta;
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> assign(n, -1);
    for (int j = 1; j <= m; ++j)
        if (p[j]) assign[p[j] - 1] = cols[j - 1];
    if (row_to_col) *row_to_col = assign;
    double total = 0;
    for (int i = 0; i < n; ++i) total += cost.at(rows[i], assign[i]);
    return total;
}

}  // namespace detail

// Globally minimal injective row->column assignment, n <= m, finite costs.
// Among cost-minimal assignments the lexicographically smallest column
// sequence is returned.
inline MatchResult hungarian(const Tensor& cost) {
    int n = cost.rows, m = cost.cols;
    if (n > m)
        throw CapacityError("cost matrix has more rows (" + std::to_string(n) + ") than columns (" +
                            std::to_string(m) + ")");
    for (double x : cost.v)
        if (!std::isfinite(x)) throw NumericError("assignment costs must be finite");

    MatchResult res;
    if (n == 0) return res;

    std::vector<int> all_rows(n);
    for (int i = 0; i < n; ++i) all_rows[i] = i;
    std::vector<bool> active(m, true);
    double best = detail::jv_min_total(cost, all_rows, active);
    double tol = 1e-12 * std::max(1.0, std::fabs(best));

    // Fix rows in order to the smallest column that still admits an optimum.
    res.row_to_col.assign(n, -1);
    double fixed_sum = 0;
    for (int i = 0; i < n; ++i) {
        std::vector<int> rest(all_rows.begin() + i + 1, all_rows.end());
        bool placed = false;
        for (int j = 0; j < m && !placed; ++j) {
            if (!active[j]) continue;
            active[j] = false;
            double sub = rest.empty() ? 0.0 : detail::jv_min_total(cost, rest, active);
            if (fixed_sum + cost.at(i, j) + sub <= best + tol) {
                res.row_to_col[i] = j;
                fixed_sum += cost.at(i, j);
                placed = true;
            } else
                active[j] = true;
        }
        if (!placed) throw NumericError("assignment refinement failed");  // unreachable
    }
    for (int i = 0; i < n; ++i) res.total += cost.at(i, res.row_to_col[i]);
    return res;
}

// Ground-truth side of one matching pair.
struct GtTriplet {
    int subject_class = 0;
    int object_class = 0;
    BoundingBox subject_box;
    BoundingBox object_box;
    std::vector<int> predicates;  // global ids
};

inline std::vector<GtTriplet> gt_triplets(const FrameAnnotation& fa) {
    std::vector<GtTriplet> out;
    for (const Triplet& t : fa.triplets) {
        GtTriplet g;
        g.subject_class = fa.entities[t.subject].class_id;
        g.object_class = fa.entities[t.object].class_id;
        g.subject_box = fa.entities[t.subject].box;
        g.object_box = fa.entities[t.object].box;
        g.predicates = t.predicates;
        out.push_back(std::move(g));
    }
    return out;
}

// Composite cost: weighted classification terms plus the weighted box terms.
// The same formula is the per-pair training loss.
inline double matching_cost(const GtTriplet& gt, const TripletPrediction& pred,
                            const LossWeights& w, const Vocabulary& vocab) {
    auto ce_from_dist = [](const std::vector<double>& dist, int target) {
        return -std::log(std::clamp(dist[target], kProbEps, 1.0));
    };
    double cost = w.alpha_s * ce_from_dist(pred.subject_dist, gt.subject_class) +
                  w.alpha_o * ce_from_dist(pred.object_dist, gt.object_class);

    std::vector<double> probs;
    for (const auto& g : pred.predicate_probs) probs.insert(probs.end(), g.begin(), g.end());
    std::vector<bool> hot(probs.size(), false);
    for (int p : gt.predicates) hot.at(p) = true;
    (void)vocab;
    cost += w.alpha_p * focal_loss(probs, hot, w.focal_gamma, w.focal_alpha);

    double box = w.lambda_l1 * l1_box(gt.subject_box, pred.subject_box) +
                 w.lambda_giou * giou_loss(gt.subject_box, pred.subject_box) +
                 w.lambda_l1 * l1_box(gt.object_box, pred.object_box) +
                 w.lambda_giou * giou_loss(gt.object_box, pred.object_box);
    return cost + w.beta * box;
}

// Cost matrix over (ground truth, query) pairs, then the optimal assignment.
inline MatchResult match_frame(const std::vector<GtTriplet>& gts, const TripletPredictionSet& preds,
                               const LossWeights& w, const Vocabulary& vocab) {
    int n = static_cast<int>(gts.size());
    if (n > preds.count())
        throw CapacityError("frame has " + std::to_string(n) + " ground-truth triplets but only " +
                            std::to_string(preds.count()) + " queries");
    Tensor cost(n, preds.count());
    for (int i = 0; i < n; ++i)
        for (int q = 0; q < preds.count(); ++q)
            cost.at(i, q) = matching_cost(gts[i], preds.items[q], w, vocab);
    return hungarian(cost);
}

struct LossBreakdown {
    Var total;
    double cls_subject = 0;
    double cls_object = 0;
    double cls_predicate = 0;
    double box = 0;
    double no_object = 0;
    std::vector<int> assignment;
};

// Differentiable training loss. Matched pairs contribute the full composite
// term; unmatched queries are pushed toward the no-object class with the
// down-weighted cross-entropy. The assignment may be supplied (e.g. frozen
// during a finite-difference check); otherwise it is recomputed from the
// current values.
inline LossBreakdown total_loss(Tape& tape, const ForwardOutputs& out,
                                const FrameAnnotation& gt_frame, const LossWeights& w,
                                const ModelConfig& cfg, const Vocabulary& vocab,
                                const std::vector<int>* fixed_assignment = nullptr) {
    std::vector<GtTriplet> gts = gt_triplets(gt_frame);
    TripletPredictionSet preds = extract_predictions(out, cfg);
    LossBreakdown lb;
    if (fixed_assignment) {
        lb.assignment = *fixed_assignment;
        if (lb.assignment.size() != gts.size())
            throw DimensionError("fixed assignment length does not match ground truth");
    } else {
        lb.assignment = match_frame(gts, preds, w, vocab).row_to_col;
    }

    int no_obj = cfg.no_object_class();
    std::vector<bool> matched(preds.count(), false);
    std::vector<Var> terms;
    auto track = [&](Var v, double& slot) {
        slot += v.val().v[0];
        terms.push_back(v);
    };

    for (size_t i = 0; i < gts.size(); ++i) {
        int q = lb.assignment[i];
        matched[q] = true;
        const GtTriplet& g = gts[i];
        track(ad::scale(ad_loss::cross_entropy_row(out.subject_logits, q, g.subject_class), w.alpha_s),
              lb.cls_subject);
        track(ad::scale(ad_loss::cross_entropy_row(out.object_logits, q, g.object_class), w.alpha_o),
              lb.cls_object);
        for (int grp = 0; grp < 3; ++grp) {
            int off = vocab.group_offset(grp);
            std::vector<bool> hot(vocab.group_sizes[grp], false);
            for (int p : g.predicates)
                if (vocab.group_of(p) == grp) hot[p - off] = true;
            Var row = ad::slice_rows(out.predicate_probs[grp], q, q + 1);
            track(ad::scale(ad_loss::focal_row(row, hot, w.focal_gamma, w.focal_alpha), w.alpha_p),
                  lb.cls_predicate);
        }
        Tensor gsb(1, 4, {g.subject_box.x1, g.subject_box.y1, g.subject_box.x2, g.subject_box.y2});
        Tensor gob(1, 4, {g.object_box.x1, g.object_box.y1, g.object_box.x2, g.object_box.y2});
        Var psb = ad::slice_rows(out.subject_box, q, q + 1);
        Var pob = ad::slice_rows(out.object_box, q, q + 1);
        Var gs = ad::constant(tape, std::move(gsb));
        Var go = ad::constant(tape, std::move(gob));
        Var box = ad::add(ad::add(ad::scale(ad_geom::l1_box(psb, gs), w.lambda_l1),
                                  ad::scale(ad_geom::giou_loss(psb, gs), w.lambda_giou)),
                          ad::add(ad::scale(ad_geom::l1_box(pob, go), w.lambda_l1),
                                  ad::scale(ad_geom::giou_loss(pob, go), w.lambda_giou)));
        track(ad::scale(box, w.beta), lb.box);
    }
    for (int q = 0; q < preds.count(); ++q) {
        if (matched[q]) continue;
        track(ad_loss::cross_entropy_row(out.subject_logits, q, no_obj, w.no_object_weight),
              lb.no_object);
        track(ad_loss::cross_entropy_row(out.object_logits, q, no_obj, w.no_object_weight),
              lb.no_object);
    }

    Var total = terms[0];
    for (size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
    lb.total = total;
    return lb;
}

}  // namespace stsg
