// Training orchestration: task-set parsing, config assembly, full tiny
// training runs with artifact and determinism checks, divergence aborts, and
// the ablation / sweep harnesses.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "mtlseg/common.hpp"
#include "mtlseg/config.hpp"
#include "mtlseg/data.hpp"
#include "mtlseg/eval.hpp"
#include "mtlseg/nn.hpp"
#include "mtlseg/run.hpp"

using namespace mtlseg;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per call, removed lazily by the OS; keeping the
// trees around between assertions makes failures easy to inspect.
fs::path scratch_dir(const std::string& tag) {
    static int counter = 0;
    fs::path dir = fs::temp_directory_path() / ("mtlseg_run_" + tag + "_" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Six 16x16 scenes with one or two small buildings each; split lands at
// train/val/test = 4/1/1 (floors 3/1/1 plus the remainder index to train).
const std::string& tiny_dataset() {
    static std::string dir;
    if (dir.empty()) {
        fs::path p = scratch_dir("data");
        SceneConfig scene;
        scene.size = 16;
        scene.channels = 3;
        scene.count_min = 1;
        scene.count_max = 2;
        scene.size_min = 4;
        scene.size_max = 6;
        scene.boundary_radius = 1;
        scene.rng_seed = 77;
        SplitSpec split;
        split.train = 0.5;
        split.val = 0.25;
        split.test = 0.25;
        split.seed = 5;
        write_dataset(p.string(), scene, 6, split);
        dir = p.string();
    }
    return dir;
}

RunConfig tiny_config() {
    RunConfig cfg;
    cfg.dataset_dir = tiny_dataset();
    cfg.model.in_channels = 3;
    cfg.model.depth = 1;
    cfg.model.widths = {4};
    cfg.epochs = 2;
    cfg.batch_size = 2;
    cfg.lr = 0.01f;
    cfg.crop = 16;
    cfg.augment = true;
    cfg.model_seed = 11;
    cfg.shuffle_seed = 12;
    return cfg;
}

std::vector<std::string> read_lines(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

std::vector<std::string> split_fields(const std::string& row) {
    std::vector<std::string> out;
    std::stringstream ss(row);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    return out;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("task set label and parse round-trip") {
    CHECK(TaskSet{true, false, false}.label() == "S");
    CHECK(TaskSet{true, false, true}.label() == "S+R");
    CHECK(TaskSet{true, true, false}.label() == "S+B");
    CHECK(TaskSet{true, true, true}.label() == "S+B+R");

    for (const char* label : {"S", "S+R", "S+B", "S+B+R"}) {
        CHECK(TaskSet::parse(label).label() == label);
    }
    // Order-insensitive parse, canonical label out.
    CHECK(TaskSet::parse("S+R+B").label() == "S+B+R");
    CHECK(TaskSet::parse("B+S").label() == "S+B");

    CHECK_THROWS_AS(TaskSet::parse(""), ConfigError);
    CHECK_THROWS_AS(TaskSet::parse("B+R"), ConfigError);   // segmentation is mandatory
    CHECK_THROWS_AS(TaskSet::parse("S+S"), ConfigError);   // duplicate
    CHECK_THROWS_AS(TaskSet::parse("S+X"), ConfigError);   // unknown task
    CHECK_THROWS_AS(TaskSet::parse("S++B"), ConfigError);  // empty token
}

TEST_CASE("metrics csv formatting") {
    CHECK(metrics_csv_header() == "experiment,subset,tp,fp,fn,tn,iou,f1");
    MetricsReport r;
    r.counts = {3, 1, 2, 10};
    r.iou = 0.5;
    r.f1 = 2.0 / 3.0;
    CHECK(metrics_csv_row("S+B", "test", r) == "S+B,test,3,1,2,10,0.5,0.666666667");
}

TEST_CASE("run config assembly from parsed config text") {
    const Config c = Config::from_string(
        "[model]\n"
        "in_channels = 1\n"
        "depth = 2\n"
        "widths = 8, 4\n"
        "[train]\n"
        "dataset = /tmp/somewhere\n"
        "tasks = S+B\n"
        "weighting = fixed\n"
        "w_seg = 1\n"
        "w_bnd = 0.25\n"
        "w_rec = 0\n"
        "epochs = 7\n"
        "batch_size = 3\n"
        "lr = 0.005\n"
        "momentum = 0.8\n"
        "weight_decay = 0.0001\n"
        "crop = 32\n"
        "augment = no\n"
        "model_seed = 100\n"
        "shuffle_seed = 200\n",
        "test.cfg");
    c.check_allowed(train_config_keys());
    RunConfig r = run_config_from(c);
    CHECK(r.model.in_channels == 1);
    CHECK(r.model.depth == 2);
    CHECK(r.model.widths == std::vector<int>{8, 4});
    CHECK(r.dataset_dir == "/tmp/somewhere");
    CHECK(r.tasks.label() == "S+B");
    CHECK(r.weighting == Weighting::kFixed);
    CHECK(r.weights.seg == doctest::Approx(1.0));
    CHECK(r.weights.bnd == doctest::Approx(0.25));
    CHECK(r.weights.rec == doctest::Approx(0.0));
    CHECK(r.epochs == 7);
    CHECK(r.batch_size == 3);
    CHECK(r.lr == doctest::Approx(0.005));
    CHECK(r.momentum == doctest::Approx(0.8));
    CHECK(r.crop == 32);
    CHECK(r.augment == false);
    CHECK(r.model_seed == 100);
    CHECK(r.shuffle_seed == 200);

    // Defaults fill everything that is not mentioned.
    RunConfig d = run_config_from(Config::from_string("[train]\ndataset = x\n", "d.cfg"));
    CHECK(d.weighting == Weighting::kUncertainty);
    CHECK(d.tasks.label() == "S+B+R");
    CHECK(d.epochs == 300);
    CHECK(d.crop == 64);
    CHECK(d.augment == true);

    CHECK_THROWS_AS(
        run_config_from(Config::from_string("[train]\nweighting = learned\n", "w.cfg")),
        ConfigError);
}

TEST_CASE("gen spec assembly and seed overrides") {
    const Config c = Config::from_string(
        "[data]\n"
        "size = 48\n"
        "channels = 1\n"
        "count_min = 2\n"
        "count_max = 5\n"
        "size_min = 6\n"
        "size_max = 12\n"
        "texture_amplitude = 0.2\n"
        "boundary_radius = 2\n"
        "seed = 9\n"
        "n = 20\n"
        "split_train = 0.6\n"
        "split_val = 0.2\n"
        "split_test = 0.2\n"
        "split_seed = 3\n",
        "gen.cfg");
    c.check_allowed(gen_config_keys());
    GenSpec g = gen_spec_from(c);
    CHECK(g.scene.size == 48);
    CHECK(g.scene.channels == 1);
    CHECK(g.scene.count_min == 2);
    CHECK(g.scene.count_max == 5);
    CHECK(g.scene.size_min == 6);
    CHECK(g.scene.size_max == 12);
    CHECK(g.scene.texture_amplitude == doctest::Approx(0.2));
    CHECK(g.scene.boundary_radius == 2);
    CHECK(g.scene.rng_seed == 9);
    CHECK(g.n == 20);
    CHECK(g.split.train == doctest::Approx(0.6));
    CHECK(g.split.seed == 3);

    // --seed maps to (seed, seed + 1) across the primary/secondary streams.
    override_seeds(g, 500);
    CHECK(g.scene.rng_seed == 500);
    CHECK(g.split.seed == 501);

    RunConfig r;
    override_seeds(r, 500);
    CHECK(r.model_seed == 500);
    CHECK(r.shuffle_seed == 501);
}

TEST_CASE("train_run rejects bad configuration") {
    RunConfig cfg = tiny_config();
    fs::path out = scratch_dir("reject");

    RunConfig bad = cfg;
    bad.tasks.seg = false;
    bad.tasks.bnd = true;
    CHECK_THROWS_AS(train_run(bad, (out / "a").string()), ConfigError);

    bad = cfg;
    bad.epochs = 0;
    CHECK_THROWS_AS(train_run(bad, (out / "b").string()), ConfigError);

    bad = cfg;
    bad.batch_size = 0;
    CHECK_THROWS_AS(train_run(bad, (out / "c").string()), ConfigError);

    bad = cfg;
    bad.lr = 0.0f;
    CHECK_THROWS_AS(train_run(bad, (out / "d").string()), ConfigError);

    bad = cfg;
    bad.momentum = 1.0f;
    CHECK_THROWS_AS(train_run(bad, (out / "e").string()), ConfigError);

    bad = cfg;
    bad.crop = 15;  // depth 1 needs a multiple of 2
    CHECK_THROWS_AS(train_run(bad, (out / "f").string()), ConfigError);

    bad = cfg;
    bad.weighting = Weighting::kFixed;
    bad.weights = {0.0f, 0.0f, 0.0f};
    CHECK_THROWS_AS(train_run(bad, (out / "g").string()), ConfigError);

    // Dataset-dependent problems surface as value errors instead.
    bad = cfg;
    bad.crop = 32;  // scenes are 16x16
    CHECK_THROWS_AS(train_run(bad, (out / "h").string()), ValueError);

    bad = cfg;
    bad.model.in_channels = 1;  // dataset images have 3 channels
    CHECK_THROWS_AS(train_run(bad, (out / "i").string()), ValueError);
}

TEST_CASE("train_run writes the full artifact set with the right shapes") {
    RunConfig cfg = tiny_config();
    cfg.tasks = TaskSet{true, true, true};
    fs::path out = scratch_dir("artifacts");
    TrainOutcome outcome = train_run(cfg, out.string());

    CHECK(outcome.checkpoint_path == (out / "checkpoint.bin").string());
    CHECK(fs::exists(out / "checkpoint.bin"));
    CHECK(fs::exists(out / "run_config.txt"));
    CHECK(outcome.best_val_iou >= 0.0);
    CHECK(outcome.best_val_iou <= 1.0);
    CHECK(outcome.has_test);

    // 4 train samples / batch 2 = 2 steps per epoch, 2 epochs.
    const auto loss_lines = read_lines(out / "loss.csv");
    REQUIRE(loss_lines.size() == 1 + 4);
    CHECK(loss_lines[0] ==
          "step,l_seg,l_bnd,l_rec,l_joint,w_seg_eff,w_bnd_eff,w_rec_eff,s_seg,s_bnd,s_rec");
    for (int i = 0; i < 4; ++i) {
        CHECK(split_fields(loss_lines[static_cast<std::size_t>(i) + 1])[0] == std::to_string(i));
    }

    // Uncertainty weighting starts at s = 0: effective weights exactly
    // (1, 1, 0.5) on the very first step.
    const auto first = split_fields(loss_lines[1]);
    REQUIRE(first.size() == 11);
    CHECK(first[5] == "1");
    CHECK(first[6] == "1");
    CHECK(first[7] == "0.5");
    CHECK(first[8] == "0");
    CHECK(first[9] == "0");
    CHECK(first[10] == "0");

    const auto val_lines = read_lines(out / "val_metrics.csv");
    REQUIRE(val_lines.size() == 1 + 2);  // one row per epoch
    CHECK(val_lines[0] == "epoch,tp,fp,fn,tn,iou,f1");

    const auto test_lines = read_lines(out / "test_metrics.csv");
    REQUIRE(test_lines.size() == 1 + 1);
    CHECK(test_lines[0] == metrics_csv_header());
    CHECK(test_lines[1].rfind("S+B+R,test,", 0) == 0);

    // The echoed run config parses back to the same settings.
    RunConfig echoed = run_config_from(Config::from_file((out / "run_config.txt").string()));
    CHECK(echoed.dataset_dir == cfg.dataset_dir);
    CHECK(echoed.tasks.label() == "S+B+R");
    CHECK(echoed.epochs == cfg.epochs);
    CHECK(echoed.batch_size == cfg.batch_size);
    CHECK(echoed.model.widths == cfg.model.widths);
    CHECK(echoed.model_seed == cfg.model_seed);
    CHECK(echoed.shuffle_seed == cfg.shuffle_seed);

    // Checkpoint provenance: task flags and all three seeds.
    LoadedCheckpoint lc = load_checkpoint(outcome.checkpoint_path);
    CHECK(lc.meta.task_seg);
    CHECK(lc.meta.task_bnd);
    CHECK(lc.meta.task_rec);
    CHECK(lc.meta.model_seed == cfg.model_seed);
    CHECK(lc.meta.shuffle_seed == cfg.shuffle_seed);
    CHECK(lc.meta.data_seed == load_dataset(cfg.dataset_dir).scene.rng_seed);
    REQUIRE(lc.extras.size() == 3);  // one trained log-variance per active task
    for (float s : lc.extras) CHECK(std::isfinite(s));
}

TEST_CASE("train_run is deterministic end to end") {
    RunConfig cfg = tiny_config();
    cfg.tasks = TaskSet{true, true, true};
    fs::path a = scratch_dir("det_a");
    fs::path b = scratch_dir("det_b");
    train_run(cfg, a.string());
    train_run(cfg, b.string());
    CHECK(read_bytes(a / "loss.csv") == read_bytes(b / "loss.csv"));
    CHECK(read_bytes(a / "val_metrics.csv") == read_bytes(b / "val_metrics.csv"));
    CHECK(read_bytes(a / "checkpoint.bin") == read_bytes(b / "checkpoint.bin"));

    // A different shuffle seed changes the trajectory.
    RunConfig other = cfg;
    other.shuffle_seed = 999;
    fs::path c = scratch_dir("det_c");
    train_run(other, c.string());
    CHECK(read_bytes(a / "loss.csv") != read_bytes(c / "loss.csv"));
}

TEST_CASE("fixed single-task training equals zero-weighted multi-task training") {
    // Multi-task with fixed weights (1, 0, 0) must reproduce plain single-task
    // training bit for bit: the zero-weighted heads contribute exactly-zero
    // gradient, and the shared trunk sees identical arithmetic.
    RunConfig s_only = tiny_config();
    s_only.weighting = Weighting::kFixed;
    s_only.tasks = TaskSet{true, false, false};
    s_only.weights = {1.0f, 0.0f, 0.0f};

    RunConfig zero_aux = s_only;
    zero_aux.tasks = TaskSet{true, true, true};

    fs::path a = scratch_dir("sonly");
    fs::path b = scratch_dir("zeroaux");
    train_run(s_only, a.string());
    train_run(zero_aux, b.string());

    CHECK(read_bytes(a / "loss.csv") == read_bytes(b / "loss.csv"));

    // The checkpoint files differ in their task flags, so compare the
    // trained parameters themselves.
    LoadedCheckpoint la = load_checkpoint((a / "checkpoint.bin").string());
    LoadedCheckpoint lb = load_checkpoint((b / "checkpoint.bin").string());
    REQUIRE(la.model.params.size() == lb.model.params.size());
    for (std::size_t i = 0; i < la.model.params.size(); ++i) {
        const auto va = la.model.params[i].value.values();
        const auto vb = lb.model.params[i].value.values();
        REQUIRE(va.size() == vb.size());
        CHECK(std::equal(va.begin(), va.end(), vb.begin()));
    }

    // In fixed mode the joint loss with only S active is the segmentation
    // loss itself, field for field.
    const auto lines = read_lines(a / "loss.csv");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split_fields(lines[i]);
        REQUIRE(f.size() == 11);
        CHECK(f[4] == f[1]);  // l_joint == l_seg
        CHECK(f[6] == "0");   // w_bnd_eff
        CHECK(f[7] == "0");   // w_rec_eff
    }

    // Fixed-weight checkpoints carry no uncertainty extras.
    CHECK(la.extras.empty());
    CHECK(lb.extras.empty());
}

TEST_CASE("uncertainty training moves the log-variances and logs them") {
    RunConfig cfg = tiny_config();
    cfg.tasks = TaskSet{true, false, true};  // S+R
    cfg.epochs = 3;
    fs::path out = scratch_dir("unc");
    train_run(cfg, out.string());

    LoadedCheckpoint lc = load_checkpoint((out / "checkpoint.bin").string());
    REQUIRE(lc.extras.size() == 2);  // s_seg, s_rec in task order

    const auto lines = read_lines(out / "loss.csv");
    const auto last = split_fields(lines.back());
    REQUIRE(last.size() == 11);
    // After several steps the recorded s values have left their zero init
    // (their gradient is -w*exp(-s)*L + 1/2, which only vanishes at the
    // optimum, never at the start).
    CHECK(last[8] != "0");   // s_seg
    CHECK(last[9] == "0");   // s_bnd stays untouched: task inactive
    CHECK(last[10] != "0");  // s_rec
}

TEST_CASE("training aborts with a divergence report at an absurd lr") {
    RunConfig cfg = tiny_config();
    cfg.weighting = Weighting::kFixed;
    cfg.tasks = TaskSet{true, false, false};
    cfg.weights = {1.0f, 0.0f, 0.0f};
    cfg.lr = 1e12f;
    cfg.epochs = 5;
    fs::path out = scratch_dir("diverge");

    bool thrown = false;
    try {
        train_run(cfg, out.string());
    } catch (const DivergenceError& e) {
        thrown = true;
        CHECK(e.step >= 0);
        CHECK(std::string(e.what()).find("diverged") != std::string::npos);
        const bool joint_bad = !std::isfinite(e.breakdown.l_joint);
        const bool seg_bad = !std::isfinite(e.breakdown.l_seg);
        CHECK((joint_bad || seg_bad));
    }
    CHECK(thrown);
}

TEST_CASE("evaluate_model aggregates full confusion totals") {
    Dataset ds = load_dataset(tiny_dataset());
    Model model = build_model(ModelConfig{3, 1, {4}, true, true, false}, 3);

    std::vector<int> idx = ds.split.train;
    REQUIRE(idx.size() == 4);
    MetricsReport plain = evaluate_model(model, ds, idx, false);
    const std::int64_t total =
        plain.counts.tp + plain.counts.fp + plain.counts.fn + plain.counts.tn;
    CHECK(total == 4 * 16 * 16);  // every pixel of every sample counted once

    // Post-processing is anti-extensive: it can only turn predictions off,
    // so true positives cannot grow.
    MetricsReport post = evaluate_model(model, ds, idx, true);
    CHECK(post.counts.tp <= plain.counts.tp);
    const std::int64_t post_total =
        post.counts.tp + post.counts.fp + post.counts.fn + post.counts.tn;
    CHECK(post_total == total);

    CHECK_THROWS_AS(evaluate_model(model, ds, {99}, false), ValueError);
}

TEST_CASE("ablation harness trains every task subset and scores a post-processed row") {
    RunConfig base = tiny_config();
    base.epochs = 1;
    fs::path out = scratch_dir("ablation");
    run_ablation(base, out.string());

    for (const char* sub : {"S", "S_R", "S_B", "S_B_R"}) {
        CHECK(fs::exists(out / sub / "checkpoint.bin"));
        CHECK(fs::exists(out / sub / "loss.csv"));
    }

    const auto lines = read_lines(out / "ablation.csv");
    REQUIRE(lines.size() == 1 + 5);
    CHECK(lines[0] == metrics_csv_header() + ",model_seed,data_seed,shuffle_seed");
    const char* expected[] = {"S", "S+R", "S+B", "S+B+R", "S+B+R+P"};
    std::string seed_suffix;
    for (int i = 0; i < 5; ++i) {
        const auto f = split_fields(lines[static_cast<std::size_t>(i) + 1]);
        REQUIRE(f.size() == 11);
        CHECK(f[0] == expected[i]);
        CHECK(f[1] == "test");
        // Every row reports the same seed triple: the comparison is seed-matched.
        const std::string suffix = f[8] + "," + f[9] + "," + f[10];
        if (i == 0) {
            seed_suffix = suffix;
        } else {
            CHECK(suffix == seed_suffix);
        }
    }

    // The post-processed row re-scores the S+B+R checkpoint, so its
    // pixel total still covers the whole test subset.
    const auto last = split_fields(lines[5]);
    const long total = std::stol(last[2]) + std::stol(last[3]) + std::stol(last[4]) +
                       std::stol(last[5]);
    CHECK(total == 16 * 16);  // one test sample
}

TEST_CASE("sweep harness grids the auxiliary fixed weights") {
    RunConfig base = tiny_config();
    base.weighting = Weighting::kFixed;
    base.epochs = 1;
    fs::path out = scratch_dir("sweep");
    run_sweep(base, {0.0, 1.0}, {0.5}, out.string());

    CHECK(fs::exists(out / "wb0_wr0.5" / "checkpoint.bin"));
    CHECK(fs::exists(out / "wb1_wr0.5" / "checkpoint.bin"));

    const auto lines = read_lines(out / "sweep.csv");
    REQUIRE(lines.size() == 1 + 2);
    CHECK(lines[0] == "w_bnd,w_rec,iou,f1");
    CHECK(split_fields(lines[1])[0] == "0");
    CHECK(split_fields(lines[2])[0] == "1");
    CHECK(split_fields(lines[1])[1] == "0.5");

    RunConfig unc = base;
    unc.weighting = Weighting::kUncertainty;
    CHECK_THROWS_AS(run_sweep(unc, {0.0}, {0.0}, (out / "x").string()), ConfigError);
    CHECK_THROWS_AS(run_sweep(base, {}, {0.0}, (out / "y").string()), ConfigError);
    CHECK_THROWS_AS(run_sweep(base, {-1.0}, {0.0}, (out / "z").string()), ConfigError);
}
