// Command-line front end: dataset generation, training, evaluation, and the
// weight-sweep / task-ablation harnesses. Exit codes: 0 success, 1 usage or
// configuration error, 2 runtime failure (I/O, bad data, divergence).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mtlseg/run.hpp"

namespace {

using namespace mtlseg;

struct Options {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    bool has_seed = false;
    bool force = false;
    bool postprocess = false;
};

Config load_config(const Options& o,
                   const std::map<std::string, std::set<std::string>>& allowed) {
    Config c = Config::from_file(o.config);
    c.check_allowed(allowed);
    return c;
}

int cmd_gen_data(const Options& o) {
    GenSpec spec;
    if (!o.config.empty()) {
        spec = gen_spec_from(load_config(o, gen_config_keys()));
    }
    if (o.has_seed) {
        override_seeds(spec, o.seed);
    }

    namespace fs = std::filesystem;
    if (fs::exists(o.out) && !fs::is_empty(o.out) && !o.force) {
        throw IoError("output directory '" + o.out +
                      "' is not empty; pass --force to overwrite it");
    }

    write_dataset(o.out, spec.scene, spec.n, spec.split);
    SplitResult split = split_dataset(spec.n, spec.split);
    std::cout << "wrote " << spec.n << " samples to " << o.out << " (train/val/test = "
              << split.train.size() << "/" << split.val.size() << "/" << split.test.size()
              << ")\n";
    return 0;
}

int cmd_train(const Options& o) {
    RunConfig cfg = run_config_from(load_config(o, train_config_keys()));
    if (o.has_seed) {
        override_seeds(cfg, o.seed);
    }
    TrainOutcome outcome = train_run(cfg, o.out);
    std::cout << "trained " << cfg.tasks.label() << " for " << cfg.epochs
              << " epochs; checkpoint at " << outcome.checkpoint_path << "\n";
    if (outcome.best_val_iou >= 0.0) {
        std::cout << "best val IoU " << str_g9(outcome.best_val_iou) << "\n";
    }
    if (outcome.has_test) {
        std::cout << "test IoU " << str_g9(outcome.test_report.iou) << ", F1 "
                  << str_g9(outcome.test_report.f1) << "\n";
    }
    return 0;
}

int cmd_eval(const Options& o) {
    Config c = load_config(o, eval_config_keys());
    const std::string checkpoint = c.get_string("eval", "checkpoint", "");
    const std::string dataset_dir = c.get_string("eval", "dataset", "");
    if (checkpoint.empty()) {
        throw ConfigError("eval.checkpoint must name a checkpoint file");
    }
    if (dataset_dir.empty()) {
        throw ConfigError("eval.dataset must name a dataset directory");
    }
    const std::string subset = c.get_string("eval", "subset", "test");
    const bool postprocess = o.postprocess || c.get_bool("eval", "postprocess", false);

    LoadedCheckpoint lc = load_checkpoint(checkpoint);
    if (postprocess && !lc.meta.task_bnd) {
        throw ValueError(
            "post-processing fuses the boundary head, but this checkpoint was trained "
            "without the boundary task");
    }

    Dataset ds = load_dataset(dataset_dir);
    const std::vector<int>* indices = nullptr;
    if (subset == "train") {
        indices = &ds.split.train;
    } else if (subset == "val") {
        indices = &ds.split.val;
    } else if (subset == "test") {
        indices = &ds.split.test;
    } else {
        throw ConfigError("eval.subset must be train, val or test, got '" + subset + "'");
    }
    if (indices->empty()) {
        throw ValueError("subset '" + subset + "' of '" + dataset_dir + "' is empty");
    }

    MetricsReport rep = evaluate_model(lc.model, ds, *indices, postprocess);
    TaskSet trained{lc.meta.task_seg, lc.meta.task_bnd, lc.meta.task_rec};
    const std::string experiment = trained.label() + (postprocess ? "+P" : "");
    const std::string row = metrics_csv_row(experiment, subset, rep);
    std::cout << metrics_csv_header() << "\n" << row << "\n";

    if (!o.out.empty()) {
        std::filesystem::create_directories(o.out);
        const std::string path = o.out + "/eval_metrics.csv";
        std::ofstream f(path, std::ios::binary);
        if (!f) {
            throw IoError("cannot open '" + path + "' for writing");
        }
        f << metrics_csv_header() << "\n" << row << "\n";
    }
    return 0;
}

int cmd_sweep(const Options& o) {
    Config c = load_config(o, sweep_config_keys());
    RunConfig base = run_config_from(c);
    if (o.has_seed) {
        override_seeds(base, o.seed);
    }
    const std::vector<double> w_bnd = c.get_real_list("sweep", "w_bnd_values", {});
    const std::vector<double> w_rec = c.get_real_list("sweep", "w_rec_values", {});
    run_sweep(base, w_bnd, w_rec, o.out);
    std::cout << "swept " << w_bnd.size() * w_rec.size() << " weight points; results in "
              << o.out << "/sweep.csv\n";
    return 0;
}

int cmd_ablation(const Options& o) {
    RunConfig base = run_config_from(load_config(o, train_config_keys()));
    if (o.has_seed) {
        override_seeds(base, o.seed);
    }
    run_ablation(base, o.out);
    std::cout << "wrote 5 ablation rows to " << o.out << "/ablation.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-task building-footprint segmentation toolkit"};
    app.require_subcommand(1);

    Options o;

    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset directory");
    gen->add_option("--config", o.config, "config file with a [data] section");
    gen->add_option("--out", o.out, "dataset directory to create")->required();
    CLI::Option* gen_seed = gen->add_option("--seed", o.seed, "override scene and split seeds");
    gen->add_flag("--force", o.force, "write even if the directory is not empty");

    CLI::App* train = app.add_subcommand("train", "train a model on a dataset");
    train->add_option("--config", o.config, "config file with [model]/[train] sections")
        ->required();
    train->add_option("--out", o.out, "run artifact directory")->required();
    CLI::Option* train_seed =
        train->add_option("--seed", o.seed, "override model and shuffle seeds");

    CLI::App* eval = app.add_subcommand("eval", "score a checkpoint on a dataset subset");
    eval->add_option("--config", o.config, "config file with an [eval] section")->required();
    eval->add_option("--out", o.out, "directory for eval_metrics.csv (optional)");
    eval->add_flag("--postprocess", o.postprocess,
                   "fuse the boundary head and open the mask before scoring");

    CLI::App* sweep = app.add_subcommand("sweep", "grid over fixed auxiliary loss weights");
    sweep->add_option("--config", o.config, "config file with [train]/[sweep] sections")
        ->required();
    sweep->add_option("--out", o.out, "sweep artifact directory")->required();
    CLI::Option* sweep_seed =
        sweep->add_option("--seed", o.seed, "override model and shuffle seeds");

    CLI::App* ablation =
        app.add_subcommand("ablation", "train every task subset and score the fused variant");
    ablation->add_option("--config", o.config, "config file with [model]/[train] sections")
        ->required();
    ablation->add_option("--out", o.out, "ablation artifact directory")->required();
    CLI::Option* ablation_seed =
        ablation->add_option("--seed", o.seed, "override model and shuffle seeds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help or the parse error
        return code == 0 ? 0 : 1;
    }

    o.has_seed = (gen_seed->count() > 0) || (train_seed->count() > 0) ||
                 (sweep_seed->count() > 0) || (ablation_seed->count() > 0);

    try {
        if (gen->parsed()) return cmd_gen_data(o);
        if (train->parsed()) return cmd_train(o);
        if (eval->parsed()) return cmd_eval(o);
        if (sweep->parsed()) return cmd_sweep(o);
        if (ablation->parsed()) return cmd_ablation(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
