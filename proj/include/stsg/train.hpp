#pragma once

#include "stsg/checkpoint.hpp"
#include "stsg/config.hpp"

namespace stsg {

// In-memory dataset: aligned per-frame features, annotations and cues.
struct Dataset {
    std::vector<FrameFeatures> features;
    std::vector<FrameAnnotation> annotations;
    std::vector<FrameCues> cues;

    int frames() const { return static_cast<int>(annotations.size()); }

    void check_aligned() const {
        if (features.size() != annotations.size() || cues.size() != annotations.size())
            throw std::runtime_error("dataset files disagree on frame count");
        for (size_t i = 0; i < annotations.size(); ++i)
            if (features[i].video != annotations[i].video || features[i].frame != annotations[i].frame ||
                cues[i].video != annotations[i].video || cues[i].frame != annotations[i].frame)
                throw std::runtime_error("dataset files disagree on frame identity at record " +
                                         std::to_string(i));
    }

    // indices of up to n_ref frames from the same video, nearest first
    std::vector<int> reference_frames(int idx, int n_ref) const {
        std::vector<int> refs;
        int v = annotations[idx].video;
        for (int off = 1; static_cast<int>(refs.size()) < n_ref && off < frames(); ++off) {
            int before = idx - off, after = idx + off;
            if (before >= 0 && annotations[before].video == v) refs.push_back(before);
            if (static_cast<int>(refs.size()) < n_ref && after < frames() &&
                annotations[after].video == v)
                refs.push_back(after);
            if ((before < 0 || annotations[before].video != v) &&
                (after >= frames() || annotations[after].video != v))
                break;
        }
        return refs;
    }

    FrameInput input(int idx) const { return {&features[idx].feats, cues[idx]}; }
};

inline Dataset dataset_from(SyntheticData d) {
    return {std::move(d.features), std::move(d.annotations), std::move(d.cues)};
}

inline Dataset load_dataset(const std::string& dir, const Vocabulary& vocab) {
    Dataset d;
    d.annotations = load_annotations(dir + "/annotations.txt", vocab);
    d.cues = load_cues(dir + "/cues.txt");
    d.features = load_features(dir + "/features.txt");
    d.check_aligned();
    return d;
}

// Adam with decoupled weight decay; no schedule.
struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    long t = 0;

    void step(ParamStore& ps) {
        ++t;
        double c1 = 1.0 - std::pow(beta1, t);
        double c2 = 1.0 - std::pow(beta2, t);
        for (auto& e : ps.entries()) {
            for (size_t i = 0; i < e.value.size(); ++i) {
                double g = e.grad.v[i];
                e.m.v[i] = beta1 * e.m.v[i] + (1 - beta1) * g;
                e.v2.v[i] = beta2 * e.v2.v[i] + (1 - beta2) * g * g;
                double mh = e.m.v[i] / c1;
                double vh = e.v2.v[i] / c2;
                e.value.v[i] -= lr * (mh / (std::sqrt(vh) + eps) + weight_decay * e.value.v[i]);
            }
            std::fill(e.grad.v.begin(), e.grad.v.end(), 0.0);
        }
    }
};

struct StepLog {
    int step = 0;
    int frame = 0;
    double total = 0;
    double cls_subject = 0, cls_object = 0, cls_predicate = 0, box = 0, no_object = 0;
};

// Forward + loss for one frame without touching gradients.
inline LossBreakdown frame_loss(Tape& tape, const Dataset& data, int idx,
                                const EmbeddingProvider& provider, ParamStore& ps,
                                const RunConfig& cfg, const Vocabulary& vocab,
                                ParamBinding* out_binding = nullptr) {
    ParamBinding pb(tape, ps);
    std::vector<FrameInput> refs;
    for (int r : data.reference_frames(idx, cfg.model.n_ref)) refs.push_back(data.input(r));
    ForwardOutputs out = forward(tape, data.input(idx), refs, provider, pb, cfg.model);
    LossBreakdown lb = total_loss(tape, out, data.annotations[idx], cfg.loss, cfg.model, vocab);
    if (out_binding) *out_binding = pb;
    return lb;
}

// Sequential training over frames (round-robin); aborts on non-finite loss.
template <class StepCallback>
void train(const Dataset& data, const EmbeddingProvider& provider, ParamStore& ps,
           const RunConfig& cfg, const Vocabulary& vocab, Adam& opt, StepCallback&& on_step) {
    if (data.frames() == 0) throw std::runtime_error("cannot train on an empty dataset");
    for (int step = 0; step < cfg.steps; ++step) {
        int idx = step % data.frames();
        Tape tape;
        ParamBinding pb(tape, ps);
        LossBreakdown lb = frame_loss(tape, data, idx, provider, ps, cfg, vocab, &pb);
        double total = lb.total.val().v[0];
        if (!std::isfinite(total))
            throw NumericError("non-finite training loss at step " + std::to_string(step));
        tape.backward(lb.total.id);
        pb.pull_grads();
        opt.step(ps);
        on_step(StepLog{step, idx, total, lb.cls_subject, lb.cls_object, lb.cls_predicate, lb.box,
                        lb.no_object});
    }
}

// ---------------------------------------------------------------------------
// Evaluation driver and report output.

struct MetricsReport {
    struct Row {
        EvalMode mode;
        bool with_constraint;
        int k;
        double recall;
        double mean_recall;
    };
    std::vector<Row> rows;
    // per-predicate recall for each (mode, constraint, k)
    std::vector<PerPredicateRecall> per_predicate;
    std::vector<std::string> predicate_labels;
};

inline TripletPredictionSet predict_frame(const Dataset& data, int idx,
                                          const EmbeddingProvider& provider, ParamStore& ps,
                                          const RunConfig& cfg) {
    Tape tape;
    ParamBinding pb(tape, ps);
    std::vector<FrameInput> refs;
    for (int r : data.reference_frames(idx, cfg.model.n_ref)) refs.push_back(data.input(r));
    ForwardOutputs out = forward(tape, data.input(idx), refs, provider, pb, cfg.model);
    return extract_predictions(out, cfg.model);
}

inline MetricsReport evaluate(const Dataset& data, const EmbeddingProvider& provider,
                              ParamStore& ps, const RunConfig& cfg, const Vocabulary& vocab,
                              const std::vector<EvalMode>& modes,
                              const std::vector<bool>& constraints, const std::vector<int>& ks) {
    std::vector<TripletPredictionSet> preds;
    for (int i = 0; i < data.frames(); ++i) preds.push_back(predict_frame(data, i, provider, ps, cfg));

    MetricsReport report;
    report.predicate_labels = vocab.predicates;
    for (EvalMode mode : modes) {
        // candidates are constraint-independent; compute once per mode
        std::vector<std::vector<ScoredTriplet>> cands;
        std::vector<std::vector<GtInstance>> gts;
        for (int i = 0; i < data.frames(); ++i) {
            cands.push_back(
                enumerate_candidates(preds[i], mode, data.annotations[i], cfg.loss, vocab));
            gts.push_back(expand_gts(data.annotations[i]));
        }
        for (bool with_c : constraints) {
            for (int k : ks) {
                double sum = 0;
                int counted = 0;
                for (int i = 0; i < data.frames(); ++i) {
                    if (gts[i].empty()) continue;  // defined recall 1.0, excluded from averaging
                    sum += recall_at_k(cands[i], gts[i], k, mode, cfg.iou_threshold, with_c,
                                       cfg.constraint_per_group, &vocab);
                    ++counted;
                }
                PerPredicateRecall pp = mean_recall_at_k(cands, gts, k, mode, vocab,
                                                         cfg.iou_threshold, with_c,
                                                         cfg.constraint_per_group);
                report.rows.push_back(
                    {mode, with_c, k, counted ? sum / counted : 1.0, pp.mean});
                report.per_predicate.push_back(std::move(pp));
            }
        }
    }
    return report;
}

inline std::string report_text(const MetricsReport& r) {
    char buf[128];
    std::string out = "mode     constraint  K    R@K      mR@K\n";
    for (const auto& row : r.rows) {
        std::snprintf(buf, sizeof buf, "%-8s %-11s %-4d %.6f %.6f\n", mode_name(row.mode),
                      row.with_constraint ? "with" : "no", row.k, row.recall, row.mean_recall);
        out += buf;
    }
    return out;
}

inline std::string report_structured(const MetricsReport& r) {
    std::string out = "# stsg metrics v1\n";
    for (size_t i = 0; i < r.rows.size(); ++i) {
        const auto& row = r.rows[i];
        std::string base = std::string("mode=") + mode_name(row.mode) +
                           " constraint=" + (row.with_constraint ? "with" : "no") +
                           " k=" + std::to_string(row.k);
        out += "recall " + base + " value=" + detail::fmt(row.recall) + "\n";
        out += "mean_recall " + base + " value=" + detail::fmt(row.mean_recall) + "\n";
        const PerPredicateRecall& pp = r.per_predicate[i];
        for (size_t p = 0; p < r.predicate_labels.size(); ++p)
            out += "predicate_recall " + base + " label=" + r.predicate_labels[p] +
                   " support=" + std::to_string(pp.support[p]) +
                   " value=" + detail::fmt(pp.recall[p]) + "\n";
    }
    return out;
}

// Tab-separated per-predicate recalls for bar charts, one block per row set.
inline std::string report_plot_data(const MetricsReport& r) {
    std::string out = "label\tsupport";
    for (const auto& row : r.rows)
        out += std::string("\t") + mode_name(row.mode) + (row.with_constraint ? "_with" : "_no") +
               "@" + std::to_string(row.k);
    out += "\n";
    for (size_t p = 0; p < r.predicate_labels.size(); ++p) {
        out += r.predicate_labels[p] + "\t" +
               std::to_string(r.per_predicate.empty() ? 0 : r.per_predicate[0].support[p]);
        for (const auto& pp : r.per_predicate) out += "\t" + detail::fmt(pp.recall[p]);
        out += "\n";
    }
    return out;
}

}  // namespace stsg
