// End-to-end acceptance checks. Each criterion prints a single PASS/FAIL
// line; the process exits nonzero if any criterion fails.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "stsg/checkpoint.hpp"
#include "stsg/metrics.hpp"
#include "stsg/train.hpp"

using namespace stsg;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// --------------------------------------------------------------------------
// 1. assignment oracle vs exhaustive permutation search

MatchResult brute_force_assignment(const Tensor& cost) {
    int n = cost.rows, m = cost.cols;
    MatchResult best;
    best.total = std::numeric_limits<double>::infinity();
    std::vector<int> pick(n);
    std::function<void(int, std::vector<bool>&)> rec = [&](int i, std::vector<bool>& used) {
        if (i == n) {
            double total = 0;
            for (int r = 0; r < n; ++r) total += cost.at(r, pick[r]);
            if (total < best.total) {
                best.total = total;
                best.row_to_col = pick;
            }
            return;
        }
        for (int j = 0; j < m; ++j) {
            if (used[j]) continue;
            used[j] = true;
            pick[i] = j;
            rec(i + 1, used);
            used[j] = false;
        }
    };
    std::vector<bool> used(m, false);
    rec(0, used);
    return best;
}

bool criterion_assignment(std::string& detail) {
    auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    for (int n = 1; n <= 7; ++n)
        for (int rep = 0; rep < 30; ++rep) {
            int m = n + static_cast<int>(rng() % 3);
            Tensor cost(n, m);
            for (double& x : cost.v) x = u(rng);
            MatchResult fast = hungarian(cost);
            MatchResult slow = brute_force_assignment(cost);
            if (fast.total != slow.total || fast.row_to_col != slow.row_to_col) {
                detail = "mismatch at n=" + std::to_string(n) + " rep=" + std::to_string(rep);
                return false;
            }
            ++checked;
        }
    double secs = seconds_since(t0);
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d matrices, %.2fs", checked, secs);
    detail = buf;
    return secs < 10.0;
}

// --------------------------------------------------------------------------
// 2. recall metrics vs a brute-force reference evaluator

double reference_recall(std::vector<ScoredTriplet> cands, const std::vector<GtInstance>& gts,
                        int K, EvalMode mode, double iou_thr, bool with_constraint,
                        const Vocabulary& vocab) {
    if (gts.empty()) return 1.0;
    std::vector<size_t> order(cands.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        double sa = cands[a].subject_conf * cands[a].object_conf * cands[a].predicate_conf;
        double sb = cands[b].subject_conf * cands[b].object_conf * cands[b].predicate_conf;
        if (sa != sb) return sa > sb;
        if (cands[a].pair_key != cands[b].pair_key) return cands[a].pair_key < cands[b].pair_key;
        return cands[a].predicate < cands[b].predicate;
    });
    // the K cutoff comes first; the constraint then prunes inside that
    // window so its survivors are a subset of the unconstrained top-K
    if (static_cast<int>(order.size()) > K) order.resize(K);
    std::vector<size_t> ranked;
    std::set<int> taken;
    for (size_t idx : order) {
        if (with_constraint) {
            if (taken.count(cands[idx].pair_key)) continue;
            taken.insert(cands[idx].pair_key);
        }
        ranked.push_back(idx);
    }

    std::vector<bool> hit(gts.size(), false);
    for (size_t idx : ranked) {
        const ScoredTriplet& c = cands[idx];
        for (size_t g = 0; g < gts.size(); ++g) {
            if (hit[g]) continue;
            if (c.subject_class != gts[g].subject_class) continue;
            if (c.object_class != gts[g].object_class) continue;
            if (c.predicate != gts[g].predicate) continue;
            if (mode == EvalMode::sgdet &&
                (iou(c.subject_box, gts[g].subject_box) < iou_thr ||
                 iou(c.object_box, gts[g].object_box) < iou_thr))
                continue;
            hit[g] = true;
            break;
        }
    }
    int n = 0;
    for (bool h : hit) n += h;
    return static_cast<double>(n) / gts.size();
}

bool criterion_metrics(std::string& detail) {
    auto t0 = Clock::now();
    Vocabulary vocab = Vocabulary::make(5, {2, 2, 2});
    std::mt19937_64 rng(515);
    std::uniform_real_distribution<double> u(0.05, 1.0), ub(0.0, 0.6);
    auto rand_box = [&]() {
        double x1 = ub(rng), y1 = ub(rng);
        return BoundingBox{x1, y1, x1 + 0.2 + ub(rng) / 2, y1 + 0.2 + ub(rng) / 2};
    };
    int fixtures = 0;
    for (int trial = 0; trial < 520; ++trial) {
        int n_gts = static_cast<int>(rng() % 6);
        int n_cands = 1 + static_cast<int>(rng() % 30);
        std::vector<GtInstance> gts;
        for (int i = 0; i < n_gts; ++i)
            gts.push_back({static_cast<int>(rng() % 4), static_cast<int>(rng() % 4),
                           static_cast<int>(rng() % 6), rand_box(), rand_box()});
        std::vector<ScoredTriplet> cands;
        for (int i = 0; i < n_cands; ++i) {
            ScoredTriplet c;
            c.pair_key = static_cast<int>(rng() % 8);
            c.subject_class = static_cast<int>(rng() % 4);
            c.object_class = static_cast<int>(rng() % 4);
            c.predicate = static_cast<int>(rng() % 6);
            c.subject_conf = u(rng);
            c.object_conf = u(rng);
            c.predicate_conf = u(rng);
            c.subject_box = rand_box();
            c.object_box = rand_box();
            if (!gts.empty() && rng() % 2) {
                const GtInstance& g = gts[rng() % gts.size()];
                c.subject_box = g.subject_box;
                c.object_box = g.object_box;
            }
            cands.push_back(c);
        }
        ++fixtures;
        for (EvalMode mode : {EvalMode::predcls, EvalMode::sgcls, EvalMode::sgdet})
            for (bool constraint : {false, true})
                for (int K : {1, 5, 10}) {
                    double got = recall_at_k(cands, gts, K, mode, 0.5, constraint, false, &vocab);
                    double want = reference_recall(cands, gts, K, mode, 0.5, constraint, vocab);
                    if (got != want) {
                        detail = "recall mismatch at fixture " + std::to_string(trial);
                        return false;
                    }
                    // mean recall over the single-frame fixture must pool to
                    // the same per-class hits the reference sees
                    PerPredicateRecall mr =
                        mean_recall_at_k({cands}, {gts}, K, mode, vocab, 0.5, constraint, false);
                    double pooled = 0;
                    int classes = 0;
                    for (int p = 0; p < vocab.n_predicates(); ++p) {
                        if (mr.support[p] == 0) continue;
                        pooled += mr.recall[p] * mr.support[p];
                        classes += mr.support[p];
                    }
                    double via_classes = classes ? pooled / classes : 1.0;
                    if (!gts.empty() && via_classes != want) {
                        detail = "mean-recall mismatch at fixture " + std::to_string(trial);
                        return false;
                    }
                }
    }
    double secs = seconds_since(t0);
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d fixtures, %.2fs", fixtures, secs);
    detail = buf;
    return secs < 30.0;
}

// --------------------------------------------------------------------------
// 3. end-to-end gradient checks

// One full finite-difference check of the end-to-end loss for a given seed.
GradCheckResult grad_check_seed(uint64_t seed) {
    SyntheticConfig synth;
    synth.seed = seed;
    synth.frames = 2;
    synth.frames_per_video = 2;
    synth.grid = 3;  // 9 feature grid rows
    synth.objects = 4;
    SyntheticData data = generate_synthetic(synth);
    Vocabulary vocab = synth.vocabulary();
    // keep exactly two cues on the current frame
    while (data.cues[0].cues.size() > 2) data.cues[0].cues.pop_back();
    if (data.cues[0].cues.size() < 2) {
        Cue extra = data.cues[0].cues[0];
        extra.object = vocab.objects.back();
        data.cues[0].cues.push_back(extra);
    }

    ModelConfig cfg;
    cfg.n_queries = 4;
    cfg.model_dim = 8;
    cfg.embed_dim = 4;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.n_ref = 1;
    cfg.feature_channels = synth.objects;
    cfg.object_classes = synth.objects;

    ParamStore ps;
    declare_model(ps, cfg, seed * 31 + 7);
    EmbeddingProvider provider(seed, cfg.embed_dim);
    LossWeights w;
    FrameInput current{&data.features[0].feats, data.cues[0]};
    FrameInput ref{&data.features[1].feats, data.cues[1]};

    std::vector<int> assignment;
    {
        Tape tape;
        ParamBinding pb(tape, ps);
        ForwardOutputs out = forward(tape, current, {ref}, provider, pb, cfg);
        assignment = total_loss(tape, out, data.annotations[0], w, cfg, vocab).assignment;
    }
    auto loss_value = [&]() {
        Tape tape;
        ParamBinding pb(tape, ps);
        ForwardOutputs out = forward(tape, current, {ref}, provider, pb, cfg);
        return total_loss(tape, out, data.annotations[0], w, cfg, vocab, &assignment)
            .total.val().v[0];
    };
    auto run_backward = [&]() {
        Tape tape;
        ParamBinding pb(tape, ps);
        ForwardOutputs out = forward(tape, current, {ref}, provider, pb, cfg);
        LossBreakdown lb =
            total_loss(tape, out, data.annotations[0], w, cfg, vocab, &assignment);
        tape.backward(lb.total.id);
        pb.pull_grads();
    };
    return grad_check(ps, loss_value, run_backward);
}

bool criterion_gradients(std::string& detail) {
    auto t0 = Clock::now();
    const int n_seeds = 20;
    // seeds are fully independent (own data, own parameters), so they run
    // on worker threads to stay inside the time budget
    std::vector<GradCheckResult> results(n_seeds);
    std::atomic<int> next{0};
    unsigned n_workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                                         n_seeds));
    std::vector<std::thread> workers;
    for (unsigned w = 0; w < n_workers; ++w)
        workers.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n_seeds; i = next.fetch_add(1))
                results[i] = grad_check_seed(static_cast<uint64_t>(i) + 1);
        });
    for (std::thread& t : workers) t.join();

    double worst = 0;
    std::string worst_param;
    int seeds_done = 0;
    for (const GradCheckResult& res : results) {
        if (res.max_rel_err > worst) {
            worst = res.max_rel_err;
            worst_param = res.worst_param;
        }
        ++seeds_done;
    }
    double secs = seconds_since(t0);
    char buf[192];
    std::snprintf(buf, sizeof buf, "%d seeds, max rel err %.3g (%s), %.1fs", seeds_done, worst,
                  worst_param.c_str(), secs);
    detail = buf;
    return worst < 1e-5 && secs < 120.0;
}

// --------------------------------------------------------------------------
// 4. hand-valued loss and geometry oracles

bool criterion_unit_values(std::string& detail) {
    double g1 = giou({0, 0, 1, 1}, {1, 1, 2, 2});
    double g2 = giou({0, 0, 2, 2}, {1, 1, 2, 2});
    double focal = focal_loss({0.5}, {true}, 2.0, 0.25);
    double focal_expect = 0.25 * 0.25 * std::log(2.0);  // = 0.0433216987...
    double ce = cross_entropy({1.0, 1.0, 1.0, 1.0}, 0);
    char buf[192];
    std::snprintf(buf, sizeof buf, "giou %.9g / %.9g, focal %.9g, ce %.9g", g1, g2, focal, ce);
    detail = buf;
    return std::fabs(g1 - (-0.5)) < 1e-9 && std::fabs(g2 - 0.25) < 1e-9 &&
           std::fabs(focal - focal_expect) < 1e-9 && std::fabs(ce - std::log(4.0)) < 1e-9;
}

// --------------------------------------------------------------------------
// 5. overfit a small synthetic set

RunConfig overfit_config() {
    RunConfig cfg;
    cfg.seed = 7;
    cfg.steps = 2000;
    cfg.lr = 1e-3;
    cfg.synth.frames = 30;
    cfg.synth.frames_per_video = 30;
    cfg.synth.grid = 8;
    cfg.synth.objects = 6;
    cfg.synth.max_predicates_per_pair = 1;
    cfg.model.n_queries = 8;
    cfg.model.model_dim = 32;
    cfg.model.embed_dim = 16;
    cfg.model.layers = 2;
    cfg.model.heads = 4;
    cfg.model.n_ref = 0;
    cfg.finalize();
    return cfg;
}

bool criterion_overfit(std::string& detail) {
    auto t0 = Clock::now();
    RunConfig cfg = overfit_config();
    Vocabulary vocab = cfg.vocabulary();
    Dataset data = dataset_from(generate_synthetic(cfg.synth));
    EmbeddingProvider provider(cfg.seed, cfg.model.embed_dim);
    ParamStore ps;
    declare_model(ps, cfg.model, cfg.seed);
    Adam opt;
    opt.lr = cfg.lr;
    train(data, provider, ps, cfg, vocab, opt, [](const StepLog&) {});

    MetricsReport r = evaluate(data, provider, ps, cfg, vocab,
                               {EvalMode::predcls, EvalMode::sgdet}, {true}, {10});
    double predcls = r.rows[0].recall;
    double sgdet = r.rows[1].recall;
    double secs = seconds_since(t0);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "predcls with R@10 = %.3f (need >= 0.90), sgdet with R@10 = %.3f (need >= 0.70), %.0fs",
                  predcls, sgdet, secs);
    detail = buf;
    return predcls >= 0.90 && sgdet >= 0.70 && secs < 600.0;
}

// --------------------------------------------------------------------------
// 6. ablation direction on noisy oracle cues

double ablation_recall(uint64_t seed, ContentSource content, PredicateMemory memory) {
    RunConfig cfg;
    cfg.seed = seed;
    cfg.steps = 100;
    cfg.lr = 1e-3;
    cfg.synth.frames = 25;
    cfg.synth.frames_per_video = 5;
    cfg.synth.grid = 4;
    cfg.synth.objects = 6;
    cfg.synth.cue_noise = 0.2;
    cfg.model.n_queries = 8;
    cfg.model.model_dim = 32;
    cfg.model.embed_dim = 16;
    cfg.model.layers = 2;
    cfg.model.heads = 4;
    cfg.model.n_ref = 0;
    cfg.model.content_source = content;
    cfg.model.predicate_memory = memory;
    cfg.finalize();

    Vocabulary vocab = cfg.vocabulary();
    Dataset data = dataset_from(generate_synthetic(cfg.synth));
    EmbeddingProvider provider(cfg.seed, cfg.model.embed_dim);
    ParamStore ps;
    declare_model(ps, cfg.model, cfg.seed);
    Adam opt;
    opt.lr = cfg.lr;
    train(data, provider, ps, cfg, vocab, opt, [](const StepLog&) {});
    MetricsReport r = evaluate(data, provider, ps, cfg, vocab, {EvalMode::predcls}, {true}, {10});
    return r.rows[0].recall;
}

bool criterion_ablation(std::string& detail) {
    double mmfb = 0, dsqi = 0, iaqi = 0;
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        mmfb += ablation_recall(seed, ContentSource::vlm, PredicateMemory::bank);
        dsqi += ablation_recall(seed, ContentSource::vlm, PredicateMemory::image);
        iaqi += ablation_recall(seed, ContentSource::zero, PredicateMemory::image);
    }
    mmfb /= 5;
    dsqi /= 5;
    iaqi /= 5;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "mean predcls with R@10: full %.3f >= cued queries %.3f >= anchors only %.3f",
                  mmfb, dsqi, iaqi);
    detail = buf;
    return mmfb > dsqi && dsqi > iaqi;
}

// --------------------------------------------------------------------------
// 7. recall monotonicity across random data and model configurations

bool criterion_invariants(std::string& detail) {
    std::mt19937_64 rng(808);
    int configs = 0;
    for (int trial = 0; trial < 50; ++trial) {
        RunConfig cfg;
        cfg.seed = 1000 + trial;
        cfg.synth.frames = 2 + static_cast<int>(rng() % 4);
        cfg.synth.frames_per_video = 1 + static_cast<int>(rng() % cfg.synth.frames);
        cfg.synth.grid = 2 + static_cast<int>(rng() % 3);
        cfg.synth.objects = 3 + static_cast<int>(rng() % 4);
        cfg.synth.cue_noise = (rng() % 5) / 10.0;
        cfg.synth.zipf_exponent = (rng() % 3) / 2.0;
        cfg.model.n_queries = 4 + static_cast<int>(rng() % 5);
        cfg.model.model_dim = 8;
        cfg.model.embed_dim = 4;
        cfg.model.layers = 1;
        cfg.model.heads = 2;
        cfg.model.n_ref = static_cast<int>(rng() % 2);
        cfg.finalize();

        Vocabulary vocab = cfg.vocabulary();
        Dataset data = dataset_from(generate_synthetic(cfg.synth));
        EmbeddingProvider provider(cfg.seed, cfg.model.embed_dim);
        ParamStore ps;
        declare_model(ps, cfg.model, cfg.seed);
        MetricsReport r =
            evaluate(data, provider, ps, cfg, vocab,
                     {EvalMode::predcls, EvalMode::sgcls, EvalMode::sgdet}, {true, false},
                     {10, 20, 50});
        auto recall = [&](EvalMode m, bool c, int k) {
            for (const auto& row : r.rows)
                if (row.mode == m && row.with_constraint == c && row.k == k) return row.recall;
            return -1.0;
        };
        for (EvalMode m : {EvalMode::predcls, EvalMode::sgcls, EvalMode::sgdet})
            for (bool c : {true, false}) {
                if (!(recall(m, c, 10) <= recall(m, c, 20) &&
                      recall(m, c, 20) <= recall(m, c, 50))) {
                    detail = "K-monotonicity violated at config " + std::to_string(trial);
                    return false;
                }
            }
        for (EvalMode m : {EvalMode::predcls, EvalMode::sgcls, EvalMode::sgdet})
            for (int k : {10, 20, 50})
                if (recall(m, true, k) > recall(m, false, k)) {
                    detail = "constraint inequality violated at config " + std::to_string(trial);
                    return false;
                }
        ++configs;
    }
    detail = std::to_string(configs) + " random configurations";
    return true;
}

// --------------------------------------------------------------------------
// 8. byte-identical reruns of the full pipeline

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool criterion_reproducibility(std::string& detail) {
    namespace fs = std::filesystem;
    fs::path root = fs::temp_directory_path() / "stsg_acceptance_repro";
    fs::remove_all(root);
    fs::create_directories(root);

    RunConfig cfg;
    cfg.seed = 17;
    cfg.steps = 5;
    cfg.synth.frames = 3;
    cfg.synth.frames_per_video = 3;
    cfg.synth.grid = 3;
    cfg.synth.objects = 4;
    cfg.model.n_queries = 4;
    cfg.model.model_dim = 8;
    cfg.model.embed_dim = 4;
    cfg.model.layers = 1;
    cfg.model.heads = 2;
    cfg.model.n_ref = 1;
    cfg.finalize();
    Vocabulary vocab = cfg.vocabulary();

    auto run_pipeline = [&](const std::string& tag) {
        fs::path dir = root / tag;
        fs::create_directories(dir);
        SyntheticData sdata = generate_synthetic(cfg.synth);
        save_annotations((dir / "annotations.txt").string(), sdata.annotations, vocab);
        save_cues((dir / "cues.txt").string(), sdata.cues);
        save_features((dir / "features.txt").string(), sdata.features);

        Dataset data = load_dataset(dir.string(), vocab);
        EmbeddingProvider provider(cfg.seed, cfg.model.embed_dim);
        ParamStore ps;
        declare_model(ps, cfg.model, cfg.seed);
        Adam opt;
        opt.lr = cfg.lr;
        train(data, provider, ps, cfg, vocab, opt, [](const StepLog&) {});
        save_checkpoint((dir / "model.ckpt").string(), ps);

        MetricsReport r = evaluate(data, provider, ps, cfg, vocab,
                                   {EvalMode::predcls, EvalMode::sgdet}, {true, false}, {10, 20});
        std::ofstream((dir / "report.kv").string(), std::ios::binary) << report_structured(r);
        return dir;
    };

    fs::path a = run_pipeline("a");
    fs::path b = run_pipeline("b");
    for (const char* f : {"annotations.txt", "cues.txt", "features.txt", "model.ckpt", "report.kv"})
        if (read_file((a / f).string()) != read_file((b / f).string())) {
            detail = std::string("file differs between reruns: ") + f;
            return false;
        }
    fs::remove_all(root);
    detail = "gen-data, train, eval outputs byte-identical across reruns";
    return true;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        bool (*fn)(std::string&);
    };
    Criterion criteria[] = {
        {"1 assignment matches exhaustive search", criterion_assignment},
        {"2 recall metrics match brute-force reference", criterion_metrics},
        {"3 end-to-end gradients pass finite differences", criterion_gradients},
        {"4 loss and geometry hand values", criterion_unit_values},
        {"5 overfit recall targets", criterion_overfit},
        {"6 ablation ordering", criterion_ablation},
        {"7 recall monotonicity invariants", criterion_invariants},
        {"8 byte-identical reruns", criterion_reproducibility},
    };
    int failures = 0;
    for (const Criterion& c : criteria) {
        std::string detail;
        bool ok = false;
        try {
            ok = c.fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("%s  criterion %s  (%s)\n", ok ? "PASS" : "FAIL", c.name, detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
