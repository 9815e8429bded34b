// Command-line harness: synthetic data generation, training, evaluation and
// fixture inspection.

#include <algorithm>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "stsg/remote.hpp"
#include "stsg/train.hpp"

namespace fs = std::filesystem;
using namespace stsg;

namespace {

struct KeyOverrides {
    std::map<std::string, std::string> values;
};

// Every config key is also a command-line flag of the same name; keys with
// underscores get a dashed alias (--content-source for --content_source).
void register_config_flags(CLI::App* cmd, KeyOverrides& ov) {
    for (const std::string& key : config_key_names()) {
        std::string names = "--" + key;
        if (key.find('_') != std::string::npos) {
            std::string dashed = key;
            std::replace(dashed.begin(), dashed.end(), '_', '-');
            names += ",--" + dashed;
        }
        auto* opt = cmd->add_option_function<std::string>(
            names, [&ov, key](const std::string& v) { ov.values[key] = v; });
        opt->group("config overrides");
    }
}

RunConfig resolve_config(const std::string& config_path, const KeyOverrides& ov) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    for (const auto& [k, v] : ov.values) set_config_key(cfg, k, v);
    cfg.finalize();
    return cfg;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

int cmd_gen_data(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    SyntheticData data = generate_synthetic(cfg.synth);
    Vocabulary vocab = cfg.vocabulary();
    save_annotations(out_dir + "/annotations.txt", data.annotations, vocab);
    save_cues(out_dir + "/cues.txt", data.cues);
    save_features(out_dir + "/features.txt", data.features);

    std::string manifest = "# stsg manifest v1\n";
    manifest += "seed=" + std::to_string(cfg.seed) + "\n";
    manifest += "frames=" + std::to_string(data.annotations.size()) + "\n";
    manifest += "files=annotations.txt,cues.txt,features.txt\n";
    write_file(out_dir + "/manifest.txt", manifest);
    write_file(out_dir + "/run_config.txt", dump_config(cfg));
    std::cout << "wrote " << data.annotations.size() << " frames to " << out_dir << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& data_dir, const std::string& out_ckpt,
              const std::string& resume_ckpt) {
    Vocabulary vocab = cfg.vocabulary();
    Dataset data = load_dataset(data_dir, vocab);
    EmbeddingProvider provider(cfg.seed, cfg.model.embed_dim);

    ParamStore ps;
    declare_model(ps, cfg.model, cfg.seed);
    if (!resume_ckpt.empty()) load_checkpoint(resume_ckpt, ps);

    Adam opt;
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;

    std::string log = "# step frame total cls_s cls_o cls_p box no_obj\n";
    double final_loss = 0;
    train(data, provider, ps, cfg, vocab, opt, [&](const StepLog& s) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%d %d %.9g %.9g %.9g %.9g %.9g %.9g\n", s.step, s.frame,
                      s.total, s.cls_subject, s.cls_object, s.cls_predicate, s.box, s.no_object);
        log += buf;
        final_loss = s.total;
    });
    save_checkpoint(out_ckpt, ps);
    write_file(out_ckpt + ".log", log);
    write_file(out_ckpt + ".config", dump_config(cfg));
    std::cout << "final loss " << final_loss << ", checkpoint " << out_ckpt << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& data_dir, const std::string& ckpt,
             const std::string& out_dir, const std::vector<std::string>& mode_names,
             const std::vector<std::string>& constraint_names, std::vector<int> ks) {
    Vocabulary vocab = cfg.vocabulary();
    Dataset data = load_dataset(data_dir, vocab);
    EmbeddingProvider provider(cfg.seed, cfg.model.embed_dim);

    ParamStore ps;
    declare_model(ps, cfg.model, cfg.seed);
    load_checkpoint(ckpt, ps);

    std::vector<EvalMode> modes;
    for (const std::string& m : mode_names) modes.push_back(parse_mode(m));
    std::vector<bool> constraints;
    for (const std::string& c : constraint_names) {
        if (c == "with")
            constraints.push_back(true);
        else if (c == "no")
            constraints.push_back(false);
        else
            throw ConfigError("constraint must be 'with' or 'no', got '" + c + "'");
    }
    for (int k : ks)
        if (k <= 0) throw ConfigError("K values must be positive");

    MetricsReport report = evaluate(data, provider, ps, cfg, vocab, modes, constraints, ks);
    fs::create_directories(out_dir);
    write_file(out_dir + "/report.txt", report_text(report));
    write_file(out_dir + "/report.kv", report_structured(report));
    write_file(out_dir + "/predicates.tsv", report_plot_data(report));
    write_file(out_dir + "/run_config.txt", dump_config(cfg));
    std::cout << report_text(report);
    return 0;
}

int cmd_inspect(const std::string& path, const RunConfig& cfg) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string head;
    std::getline(in, head);
    in.close();

    if (head == "stsg-checkpoint v1") {
        ParamStore ps;
        declare_model(ps, cfg.model, cfg.seed);
        load_checkpoint(path, ps);
        std::cout << "checkpoint with " << ps.size() << " parameters\n";
        for (const auto& e : ps.entries())
            std::cout << "  " << e.name << "  " << shape_str(e.value) << "\n";
        return 0;
    }
    if (head == "# stsg annotations v1") {
        auto frames = load_annotations(path, cfg.vocabulary());
        std::cout << frames.size() << " annotated frames\n";
        for (const auto& fa : frames) {
            std::cout << "  video " << fa.video << " frame " << fa.frame << ": "
                      << fa.entities.size() << " entities, " << fa.triplets.size() << " triplets\n";
        }
        return 0;
    }
    if (head == "# stsg cues v1") {
        auto frames = load_cues(path);
        std::cout << frames.size() << " cue records\n";
        for (const auto& fc : frames) {
            std::cout << "  video " << fc.video << " frame " << fc.frame << ": " << fc.cues.size()
                      << " cues";
            for (const Cue& c : fc.cues) std::cout << " [" << c.subject << "->" << c.object << "]";
            std::cout << "\n";
        }
        return 0;
    }
    if (head == "# stsg frame features v1") {
        auto frames = load_features(path);
        std::cout << frames.size() << " feature records\n";
        for (const auto& ff : frames)
            std::cout << "  video " << ff.video << " frame " << ff.frame << ": "
                      << shape_str(ff.feats) << "\n";
        return 0;
    }
    if (head == "# stsg metrics v1" || head == "# stsg manifest v1") {
        std::ifstream again(path, std::ios::binary);
        std::cout << again.rdbuf();
        return 0;
    }
    throw ConfigError("unrecognized fixture file: " + path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spatio-temporal scene graph toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_path, data_dir, ckpt_path, resume_path, inspect_path;
    std::vector<std::string> modes = {"predcls", "sgcls", "sgdet"};
    std::vector<std::string> constraints = {"with", "no"};
    std::vector<int> ks = {10, 20, 50};
    KeyOverrides ov;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    gen->add_option("--config", config_path, "key=value config file");
    gen->add_option("--out", out_path, "output directory")->required();
    register_config_flags(gen, ov);

    auto* train_cmd = app.add_subcommand("train", "train a model on a dataset");
    train_cmd->add_option("--config", config_path, "key=value config file");
    train_cmd->add_option("--data", data_dir, "dataset directory")->required();
    train_cmd->add_option("--out", out_path, "checkpoint output path")->required();
    train_cmd->add_option("--resume", resume_path, "checkpoint to resume from");
    register_config_flags(train_cmd, ov);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->add_option("--config", config_path, "key=value config file");
    eval_cmd->add_option("--data", data_dir, "dataset directory")->required();
    eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
    eval_cmd->add_option("--out", out_path, "report output directory")->required();
    eval_cmd->add_option("--mode", modes, "evaluation modes (predcls sgcls sgdet)");
    eval_cmd->add_option("--constraint", constraints, "constraint settings (with no)");
    eval_cmd->add_option("--k", ks, "recall cutoffs");
    register_config_flags(eval_cmd, ov);

    auto* inspect_cmd = app.add_subcommand("inspect", "pretty-print a fixture file");
    inspect_cmd->add_option("file", inspect_path, "file to inspect")->required();
    inspect_cmd->add_option("--config", config_path, "key=value config file");
    register_config_flags(inspect_cmd, ov);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        RunConfig cfg = resolve_config(config_path, ov);
        if (gen->parsed()) return cmd_gen_data(cfg, out_path);
        if (train_cmd->parsed()) return cmd_train(cfg, data_dir, out_path, resume_path);
        if (eval_cmd->parsed()) return cmd_eval(cfg, data_dir, ckpt_path, out_path, modes, constraints, ks);
        if (inspect_cmd->parsed()) return cmd_inspect(inspect_path, cfg);
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const CheckpointError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const CapacityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
