#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* cli_binary() {
    const char* bin = std::getenv("STSG_CLI");
    REQUIRE_MESSAGE(bin != nullptr, "STSG_CLI must point at the tool binary");
    return bin;
}

fs::path work_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "stsg_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

RunResult run(const std::string& args) {
    fs::path out = work_dir() / "stdout.txt";
    fs::path err = work_dir() / "stderr.txt";
    std::string cmd = std::string(cli_binary()) + " " + args + " >" + out.string() + " 2>" +
                      err.string();
    int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

// small dataset/model flags shared by the pipeline tests
const char* kTiny =
    "--seed 5 --frames 3 --frames-per-video 3 --grid 3 --objects 4 "
    "--n-queries 4 --model-dim 8 --embed-dim 4 --layers 1 --heads 2 --n-ref 1";

}  // namespace

TEST_CASE("running without a subcommand fails") {
    RunResult r = run("");
    CHECK(r.exit_code == 1);
    RunResult help = run("--help");
    CHECK(help.exit_code == 0);
    CHECK(help.out.find("gen-data") != std::string::npos);
}

TEST_CASE("gen-data writes the dataset and an accurate manifest") {
    fs::path dir = work_dir() / "data";
    RunResult r = run("gen-data --out " + dir.string() + " " + kTiny);
    REQUIRE(r.exit_code == 0);
    for (const char* f : {"annotations.txt", "cues.txt", "features.txt", "manifest.txt",
                          "run_config.txt"})
        CHECK(fs::exists(dir / f));
    std::string manifest = slurp(dir / "manifest.txt");
    CHECK(manifest.rfind("# stsg manifest v1\n", 0) == 0);
    CHECK(manifest.find("seed=5\n") != std::string::npos);
    CHECK(manifest.find("frames=3\n") != std::string::npos);
    CHECK(manifest.find("files=annotations.txt,cues.txt,features.txt\n") != std::string::npos);

    // the written config reproduces the overrides
    std::string cfgtext = slurp(dir / "run_config.txt");
    CHECK(cfgtext.find("seed=5") != std::string::npos);
    CHECK(cfgtext.find("model_dim=8") != std::string::npos);
}

TEST_CASE("regenerating with the same flags is byte-identical") {
    fs::path a = work_dir() / "data";  // from the previous test
    if (!fs::exists(a / "manifest.txt"))
        REQUIRE(run("gen-data --out " + a.string() + " " + kTiny).exit_code == 0);
    fs::path b = work_dir() / "data_again";
    REQUIRE(run("gen-data --out " + b.string() + " " + kTiny).exit_code == 0);
    for (const char* f : {"annotations.txt", "cues.txt", "features.txt", "manifest.txt",
                          "run_config.txt"})
        CHECK(slurp(a / f) == slurp(b / f));

    // a different seed changes the data
    fs::path c = work_dir() / "data_other";
    std::string reseeded = kTiny;
    reseeded.replace(reseeded.find("--seed 5"), 8, "--seed 6");
    REQUIRE(run("gen-data --out " + c.string() + " " + reseeded).exit_code == 0);
    CHECK(slurp(a / "annotations.txt") != slurp(c / "annotations.txt"));
}

TEST_CASE("unknown configuration keys are rejected") {
    fs::path dir = work_dir() / "bad";
    RunResult r = run("gen-data --out " + dir.string() + " --warp-factor 9");
    CHECK(r.exit_code == 1);

    fs::path cfg = work_dir() / "bad.cfg";
    std::ofstream(cfg) << "warp_factor=9\n";
    RunResult r2 = run("gen-data --out " + dir.string() + " --config " + cfg.string());
    CHECK(r2.exit_code == 1);
    CHECK(r2.err.find("error:") != std::string::npos);
    CHECK(r2.err.find("warp_factor") != std::string::npos);
}

TEST_CASE("train writes a checkpoint, a loss log and the resolved config") {
    fs::path data = work_dir() / "data";
    if (!fs::exists(data / "manifest.txt"))
        REQUIRE(run("gen-data --out " + data.string() + " " + kTiny).exit_code == 0);
    fs::path ckpt = work_dir() / "model.ckpt";
    RunResult r = run("train --data " + data.string() + " --out " + ckpt.string() + " " + kTiny +
                      " --steps 4");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("final loss") != std::string::npos);
    CHECK(fs::exists(ckpt));
    std::string log = slurp(work_dir() / "model.ckpt.log");
    CHECK(log.rfind("# step frame total cls_s cls_o cls_p box no_obj\n", 0) == 0);
    CHECK(std::count(log.begin(), log.end(), '\n') == 5);  // header + 4 steps
    CHECK(slurp(work_dir() / "model.ckpt.config").find("steps=4") != std::string::npos);
}

TEST_CASE("resuming from a checkpoint reproduces the next loss exactly") {
    fs::path data = work_dir() / "data";
    if (!fs::exists(data / "manifest.txt"))
        REQUIRE(run("gen-data --out " + data.string() + " " + kTiny).exit_code == 0);

    // base: 3 steps over 3 frames, so the next step starts back at frame 0
    fs::path base = work_dir() / "base.ckpt";
    REQUIRE(run("train --data " + data.string() + " --out " + base.string() + " " + kTiny +
                " --steps 3").exit_code == 0);
    // uninterrupted 4-step run for the reference step-3 loss
    fs::path full = work_dir() / "full.ckpt";
    REQUIRE(run("train --data " + data.string() + " --out " + full.string() + " " + kTiny +
                " --steps 4").exit_code == 0);
    // resume the base checkpoint for one step
    fs::path resumed = work_dir() / "resumed.ckpt";
    REQUIRE(run("train --data " + data.string() + " --out " + resumed.string() + " --resume " +
                base.string() + " " + kTiny + " --steps 1").exit_code == 0);

    auto log_line = [](const std::string& s, int step) {
        std::istringstream in(s);
        std::string line;
        std::getline(in, line);  // header
        for (int i = 0; i <= step; ++i) std::getline(in, line);
        return line;
    };
    std::string full_l = log_line(slurp(work_dir() / "full.ckpt.log"), 3);   // "3 0 <total> ..."
    std::string res_l = log_line(slurp(work_dir() / "resumed.ckpt.log"), 0);  // "0 0 <total> ..."
    std::istringstream fl(full_l), rl(res_l);
    int step_f, frame_f, step_r, frame_r;
    std::string total_f, total_r;
    fl >> step_f >> frame_f >> total_f;
    rl >> step_r >> frame_r >> total_r;
    CHECK(step_f == 3);
    CHECK(step_r == 0);
    CHECK(frame_f == 0);
    CHECK(frame_r == 0);
    // same parameters, same frame: the printed loss is digit-for-digit equal
    CHECK(total_f == total_r);
}

TEST_CASE("eval produces byte-stable reports") {
    fs::path data = work_dir() / "data";
    fs::path ckpt = work_dir() / "model.ckpt";
    if (!fs::exists(ckpt)) {
        REQUIRE(run("gen-data --out " + data.string() + " " + kTiny).exit_code == 0);
        REQUIRE(run("train --data " + data.string() + " --out " + ckpt.string() + " " + kTiny +
                    " --steps 4").exit_code == 0);
    }
    fs::path rep1 = work_dir() / "report1";
    fs::path rep2 = work_dir() / "report2";
    std::string eval_args = "eval --data " + data.string() + " --checkpoint " + ckpt.string() +
                            " " + kTiny + " --mode predcls sgdet --constraint with no --k 10 20";
    RunResult r1 = run(eval_args + " --out " + rep1.string());
    REQUIRE(r1.exit_code == 0);
    CHECK(r1.out.rfind("mode     constraint  K    R@K      mR@K\n", 0) == 0);
    RunResult r2 = run(eval_args + " --out " + rep2.string());
    REQUIRE(r2.exit_code == 0);
    for (const char* f : {"report.txt", "report.kv", "predicates.tsv", "run_config.txt"})
        CHECK(slurp(rep1 / f) == slurp(rep2 / f));

    std::string kv = slurp(rep1 / "report.kv");
    CHECK(kv.rfind("# stsg metrics v1\n", 0) == 0);
    CHECK(kv.find("recall mode=predcls constraint=with k=10 value=") != std::string::npos);
    CHECK(kv.find("predicate_recall mode=sgdet") != std::string::npos);

    RunResult bad_mode = run(eval_args + " --out " + rep1.string() + " --mode stereo");
    CHECK(bad_mode.exit_code == 1);
    CHECK(bad_mode.err.find("unknown evaluation mode") != std::string::npos);
}

TEST_CASE("missing inputs fail with a nonzero exit") {
    fs::path nowhere = work_dir() / "does_not_exist";
    RunResult r = run("train --data " + nowhere.string() + " --out " + (work_dir() / "x").string() +
                      " " + kTiny + " --steps 1");
    CHECK(r.exit_code != 0);
    RunResult r2 = run("eval --data " + nowhere.string() + " --checkpoint " +
                       (work_dir() / "no.ckpt").string() + " --out " +
                       (work_dir() / "norep").string());
    CHECK(r2.exit_code != 0);

    // checkpoint/model mismatch is a reported error, not a crash
    fs::path data = work_dir() / "data";
    fs::path ckpt = work_dir() / "model.ckpt";
    if (fs::exists(ckpt)) {
        std::string widened = kTiny;
        widened.replace(widened.find("--model-dim 8"), 13, "--model-dim 16");
        RunResult r3 = run("eval --data " + data.string() + " --checkpoint " + ckpt.string() +
                           " --out " + (work_dir() / "norep2").string() + " " + widened);
        CHECK(r3.exit_code == 1);
        CHECK(r3.err.find("error:") != std::string::npos);
    }
}

TEST_CASE("an empty dataset is representable") {
    fs::path dir = work_dir() / "empty";
    RunResult r = run("gen-data --out " + dir.string() + " --frames 0 --objects 4 --grid 3");
    REQUIRE(r.exit_code == 0);
    CHECK(slurp(dir / "manifest.txt").find("frames=0\n") != std::string::npos);
    CHECK(slurp(dir / "annotations.txt") == "# stsg annotations v1\n");
    // training on it fails cleanly
    RunResult t = run("train --data " + dir.string() + " --out " +
                      (work_dir() / "empty.ckpt").string() + " --objects 4 --steps 1");
    CHECK(t.exit_code != 0);
}

TEST_CASE("inspect recognizes every fixture format") {
    fs::path data = work_dir() / "data";
    fs::path ckpt = work_dir() / "model.ckpt";
    if (!fs::exists(ckpt)) {
        REQUIRE(run("gen-data --out " + data.string() + " " + kTiny).exit_code == 0);
        REQUIRE(run("train --data " + data.string() + " --out " + ckpt.string() + " " + kTiny +
                    " --steps 4").exit_code == 0);
    }
    RunResult ann = run("inspect " + (data / "annotations.txt").string() + " " + kTiny);
    CHECK(ann.exit_code == 0);
    CHECK(ann.out.find("annotated frames") != std::string::npos);
    RunResult cue = run("inspect " + (data / "cues.txt").string());
    CHECK(cue.exit_code == 0);
    CHECK(cue.out.find("cue records") != std::string::npos);
    RunResult feat = run("inspect " + (data / "features.txt").string());
    CHECK(feat.exit_code == 0);
    CHECK(feat.out.find("feature records") != std::string::npos);
    RunResult man = run("inspect " + (data / "manifest.txt").string());
    CHECK(man.exit_code == 0);
    CHECK(man.out.find("# stsg manifest v1") != std::string::npos);
    RunResult ck = run("inspect " + ckpt.string() + " " + kTiny);
    CHECK(ck.exit_code == 0);
    CHECK(ck.out.find("checkpoint with") != std::string::npos);
    CHECK(ck.out.find("anchors") != std::string::npos);

    fs::path junk = work_dir() / "junk.txt";
    std::ofstream(junk) << "hello\n";
    RunResult j = run("inspect " + junk.string());
    CHECK(j.exit_code == 1);
    CHECK(j.err.find("unrecognized fixture file") != std::string::npos);
}
