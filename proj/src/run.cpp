#include "mtlseg/run.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <utility>

#include "mtlseg/rng.hpp"

namespace mtlseg {

namespace {

// Same hand-rolled Fisher-Yates as the dataset split: std::shuffle's draw
// sequence is implementation-defined, and epoch order must be reproducible
// everywhere.
void shuffle_indices(std::vector<int>& v, std::mt19937& g) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
        int j = uniform_int(g, 0, i);
        std::swap(v[i], v[j]);
    }
}

// Stacks per-sample (1,C,H,W) tensors into one (B,C,H,W) batch.
Tensor stack_batch(const std::vector<Sample>& batch, const Tensor Sample::* field) {
    const Shape s0 = (batch.front().*field).shape();
    Tensor out = Tensor::zeros({static_cast<int>(batch.size()), s0.c, s0.h, s0.w});
    auto dst = out.values();
    std::size_t per = static_cast<std::size_t>(s0.numel());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        auto src = (batch[i].*field).values();
        if ((batch[i].*field).shape() != s0) {
            throw ShapeError("cannot stack mixed-size samples into one batch");
        }
        std::memcpy(dst.data() + i * per, src.data(), per * sizeof(float));
    }
    return out;
}

std::ofstream open_csv(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    return f;
}

void validate_run_config(const RunConfig& cfg) {
    if (!cfg.tasks.seg) {
        throw ConfigError("the segmentation task is mandatory; tasks must include S");
    }
    if (cfg.dataset_dir.empty()) {
        throw ConfigError("no dataset directory configured for training");
    }
    if (cfg.epochs < 1) {
        throw ConfigError("epochs must be >= 1, got " + std::to_string(cfg.epochs));
    }
    if (cfg.batch_size < 1) {
        throw ConfigError("batch_size must be >= 1, got " + std::to_string(cfg.batch_size));
    }
    if (!(cfg.lr > 0.0f) || !std::isfinite(cfg.lr)) {
        throw ConfigError("lr must be a positive finite number, got " + str_g9(cfg.lr));
    }
    if (!(cfg.momentum >= 0.0f) || cfg.momentum >= 1.0f) {
        throw ConfigError("momentum must lie in [0,1), got " + str_g9(cfg.momentum));
    }
    if (!(cfg.weight_decay >= 0.0f)) {
        throw ConfigError("weight_decay must be >= 0, got " + str_g9(cfg.weight_decay));
    }
    const int divisor = 1 << cfg.model.depth;
    if (cfg.crop < 1 || cfg.crop % divisor != 0) {
        throw ConfigError("crop must be a positive multiple of 2^depth = " +
                          std::to_string(divisor) + ", got " + std::to_string(cfg.crop));
    }
    if (cfg.weighting == Weighting::kFixed) {
        float active_sum = 0.0f;
        if (cfg.tasks.seg) active_sum += cfg.weights.seg;
        if (cfg.tasks.bnd) active_sum += cfg.weights.bnd;
        if (cfg.tasks.rec) active_sum += cfg.weights.rec;
        if (cfg.weights.seg < 0.0f || cfg.weights.bnd < 0.0f || cfg.weights.rec < 0.0f) {
            throw ConfigError("fixed task weights must be non-negative");
        }
        if (!(active_sum > 0.0f)) {
            throw ConfigError("fixed task weights of the active tasks must not all be zero");
        }
    }
}

void write_run_config(const std::string& path, const RunConfig& cfg) {
    std::ofstream f = open_csv(path);
    f << "[model]\n";
    f << "in_channels = " << cfg.model.in_channels << "\n";
    f << "depth = " << cfg.model.depth << "\n";
    f << "widths = ";
    for (std::size_t i = 0; i < cfg.model.widths.size(); ++i) {
        f << (i ? "," : "") << cfg.model.widths[i];
    }
    f << "\n\n[train]\n";
    f << "dataset = " << cfg.dataset_dir << "\n";
    f << "tasks = " << cfg.tasks.label() << "\n";
    f << "weighting = "
      << (cfg.weighting == Weighting::kFixed ? "fixed" : "uncertainty") << "\n";
    f << "w_seg = " << str_g9(cfg.weights.seg) << "\n";
    f << "w_bnd = " << str_g9(cfg.weights.bnd) << "\n";
    f << "w_rec = " << str_g9(cfg.weights.rec) << "\n";
    f << "epochs = " << cfg.epochs << "\n";
    f << "batch_size = " << cfg.batch_size << "\n";
    f << "lr = " << str_g9(cfg.lr) << "\n";
    f << "momentum = " << str_g9(cfg.momentum) << "\n";
    f << "weight_decay = " << str_g9(cfg.weight_decay) << "\n";
    f << "crop = " << cfg.crop << "\n";
    f << "augment = " << (cfg.augment ? "true" : "false") << "\n";
    f << "model_seed = " << cfg.model_seed << "\n";
    f << "shuffle_seed = " << cfg.shuffle_seed << "\n";
}

std::string row_dir_name(std::string label) {
    std::replace(label.begin(), label.end(), '+', '_');
    return label;
}

}  // namespace

// ---- TaskSet ----------------------------------------------------------------------

std::string TaskSet::label() const {
    std::string s = "S";
    if (bnd) s += "+B";
    if (rec) s += "+R";
    return s;
}

TaskSet TaskSet::parse(const std::string& s) {
    TaskSet t{false, false, false};
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t next = s.find('+', pos);
        std::string tok = s.substr(pos, next == std::string::npos ? next : next - pos);
        bool* flag = nullptr;
        if (tok == "S") flag = &t.seg;
        else if (tok == "B") flag = &t.bnd;
        else if (tok == "R") flag = &t.rec;
        if (flag == nullptr) {
            throw ConfigError("bad task set '" + s + "': expected '+'-joined S, B, R tokens");
        }
        if (*flag) {
            throw ConfigError("bad task set '" + s + "': task '" + tok + "' listed twice");
        }
        *flag = true;
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    if (!t.seg) {
        throw ConfigError("bad task set '" + s + "': segmentation (S) is mandatory");
    }
    return t;
}

// ---- DivergenceError ----------------------------------------------------------------

DivergenceError::DivergenceError(long step_, const LossBreakdown& b)
    : Error("training diverged at step " + std::to_string(step_) +
            ": l_seg=" + str_g9(b.l_seg) + " l_bnd=" + str_g9(b.l_bnd) +
            " l_rec=" + str_g9(b.l_rec) + " l_joint=" + str_g9(b.l_joint) +
            " s=(" + str_g9(b.s_values[0]) + "," + str_g9(b.s_values[1]) + "," +
            str_g9(b.s_values[2]) + ")"),
      step(step_),
      breakdown(b) {}

// ---- config assembly -----------------------------------------------------------------

RunConfig run_config_from(const Config& c) {
    RunConfig r;
    r.dataset_dir = c.get_string("train", "dataset", "");
    r.model.in_channels = static_cast<int>(c.get_int("model", "in_channels", 3));
    r.model.depth = static_cast<int>(c.get_int("model", "depth", 3));
    r.model.widths = c.get_int_list("model", "widths", r.model.widths);
    r.tasks = TaskSet::parse(c.get_string("train", "tasks", "S+B+R"));
    const std::string w = c.get_string("train", "weighting", "uncertainty");
    if (w == "fixed") {
        r.weighting = Weighting::kFixed;
    } else if (w == "uncertainty") {
        r.weighting = Weighting::kUncertainty;
    } else {
        throw ConfigError("train.weighting must be 'fixed' or 'uncertainty', got '" + w + "'");
    }
    r.weights.seg = static_cast<float>(c.get_real("train", "w_seg", r.weights.seg));
    r.weights.bnd = static_cast<float>(c.get_real("train", "w_bnd", r.weights.bnd));
    r.weights.rec = static_cast<float>(c.get_real("train", "w_rec", r.weights.rec));
    r.epochs = static_cast<int>(c.get_int("train", "epochs", r.epochs));
    r.batch_size = static_cast<int>(c.get_int("train", "batch_size", r.batch_size));
    r.lr = static_cast<float>(c.get_real("train", "lr", r.lr));
    r.momentum = static_cast<float>(c.get_real("train", "momentum", r.momentum));
    r.weight_decay = static_cast<float>(c.get_real("train", "weight_decay", r.weight_decay));
    r.crop = static_cast<int>(c.get_int("train", "crop", r.crop));
    r.augment = c.get_bool("train", "augment", r.augment);
    r.model_seed = c.get_u64("train", "model_seed", r.model_seed);
    r.shuffle_seed = c.get_u64("train", "shuffle_seed", r.shuffle_seed);
    return r;
}

GenSpec gen_spec_from(const Config& c) {
    GenSpec g;
    g.scene.size = static_cast<int>(c.get_int("data", "size", g.scene.size));
    g.scene.channels = static_cast<int>(c.get_int("data", "channels", g.scene.channels));
    g.scene.count_min = static_cast<int>(c.get_int("data", "count_min", g.scene.count_min));
    g.scene.count_max = static_cast<int>(c.get_int("data", "count_max", g.scene.count_max));
    g.scene.size_min = static_cast<int>(c.get_int("data", "size_min", g.scene.size_min));
    g.scene.size_max = static_cast<int>(c.get_int("data", "size_max", g.scene.size_max));
    g.scene.texture_amplitude =
        static_cast<float>(c.get_real("data", "texture_amplitude", g.scene.texture_amplitude));
    g.scene.boundary_radius =
        static_cast<int>(c.get_int("data", "boundary_radius", g.scene.boundary_radius));
    g.scene.rng_seed = c.get_u64("data", "seed", g.scene.rng_seed);
    g.n = static_cast<int>(c.get_int("data", "n", g.n));
    g.split.train = c.get_real("data", "split_train", g.split.train);
    g.split.val = c.get_real("data", "split_val", g.split.val);
    g.split.test = c.get_real("data", "split_test", g.split.test);
    g.split.seed = c.get_u64("data", "split_seed", g.split.seed);
    return g;
}

void override_seeds(RunConfig& cfg, std::uint64_t seed) {
    cfg.model_seed = seed;
    cfg.shuffle_seed = seed + 1;
}

void override_seeds(GenSpec& spec, std::uint64_t seed) {
    spec.scene.rng_seed = seed;
    spec.split.seed = seed + 1;
}

const std::map<std::string, std::set<std::string>>& train_config_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"model", {"in_channels", "depth", "widths"}},
        {"train",
         {"dataset", "tasks", "weighting", "w_seg", "w_bnd", "w_rec", "epochs", "batch_size",
          "lr", "momentum", "weight_decay", "crop", "augment", "model_seed", "shuffle_seed"}},
    };
    return keys;
}

const std::map<std::string, std::set<std::string>>& gen_config_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"data",
         {"size", "channels", "count_min", "count_max", "size_min", "size_max",
          "texture_amplitude", "boundary_radius", "seed", "n", "split_train", "split_val",
          "split_test", "split_seed"}},
    };
    return keys;
}

const std::map<std::string, std::set<std::string>>& eval_config_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"eval", {"checkpoint", "dataset", "subset", "postprocess"}},
    };
    return keys;
}

const std::map<std::string, std::set<std::string>>& sweep_config_keys() {
    static const std::map<std::string, std::set<std::string>> keys = [] {
        auto k = train_config_keys();
        k["sweep"] = {"w_bnd_values", "w_rec_values"};
        return k;
    }();
    return keys;
}

// ---- evaluation ------------------------------------------------------------------------

MetricsReport evaluate_model(Model& model, const Dataset& ds, const std::vector<int>& indices,
                             bool postprocess, int se_radius) {
    Tape tape(false);  // inference only, no backward bookkeeping
    ConfusionCounts total;
    for (int idx : indices) {
        if (idx < 0 || idx >= static_cast<int>(ds.samples.size())) {
            throw ValueError("evaluation index " + std::to_string(idx) + " out of range");
        }
        const Sample& s = ds.samples[static_cast<std::size_t>(idx)];
        ModelOutputs out = forward(tape, model, s.image);
        Tensor pred = threshold(sigmoid(tape, out.seg_logits));
        if (postprocess) {
            Tensor bnd_pred = threshold(sigmoid(tape, out.bnd_logits));
            pred = fuse_postprocess(pred, bnd_pred, se_radius);
        }
        total += confusion(pred, s.seg_mask);
    }
    return metrics(total);
}

std::string metrics_csv_header() {
    return "experiment,subset,tp,fp,fn,tn,iou,f1";
}

std::string metrics_csv_row(const std::string& experiment, const std::string& subset,
                            const MetricsReport& r) {
    return experiment + "," + subset + "," + std::to_string(r.counts.tp) + "," +
           std::to_string(r.counts.fp) + "," + std::to_string(r.counts.fn) + "," +
           std::to_string(r.counts.tn) + "," + str_g9(r.iou) + "," + str_g9(r.f1);
}

// ---- training --------------------------------------------------------------------------

TrainOutcome train_run(const RunConfig& cfg, const std::string& out_dir) {
    validate_run_config(cfg);

    Dataset ds = load_dataset(cfg.dataset_dir);
    if (ds.samples.empty() || ds.split.train.empty()) {
        throw ValueError("dataset '" + cfg.dataset_dir + "' has no training samples");
    }
    const Shape img_shape = ds.samples.front().image.shape();
    if (img_shape.c != cfg.model.in_channels) {
        throw ValueError("dataset has " + std::to_string(img_shape.c) +
                         " channels but the model expects " +
                         std::to_string(cfg.model.in_channels));
    }
    if (cfg.crop > img_shape.h || cfg.crop > img_shape.w) {
        throw ValueError("crop " + std::to_string(cfg.crop) + " exceeds the scene size " +
                         std::to_string(img_shape.h));
    }
    std::filesystem::create_directories(out_dir);
    write_run_config(out_dir + "/run_config.txt", cfg);

    Model model = build_model(cfg.model, cfg.model_seed);
    UncertaintyParams unc = make_uncertainty_params();

    std::vector<Parameter*> optimized = model.parameters();
    if (cfg.weighting == Weighting::kUncertainty) {
        if (cfg.tasks.seg) optimized.push_back(&unc.s_seg);
        if (cfg.tasks.bnd) optimized.push_back(&unc.s_bnd);
        if (cfg.tasks.rec) optimized.push_back(&unc.s_rec);
    }

    // The trained log-variances, in seg/bnd/rec order, for checkpoint extras.
    auto collect_extras = [&]() {
        std::vector<float> extras;
        if (cfg.weighting == Weighting::kUncertainty) {
            if (cfg.tasks.seg) extras.push_back(unc.s_seg.value.item());
            if (cfg.tasks.bnd) extras.push_back(unc.s_bnd.value.item());
            if (cfg.tasks.rec) extras.push_back(unc.s_rec.value.item());
        }
        return extras;
    };

    AugmentPolicy policy;
    policy.boundary_radius = ds.scene.boundary_radius;

    std::ofstream loss_csv = open_csv(out_dir + "/loss.csv");
    loss_csv << loss_csv_header() << "\n";
    std::ofstream val_csv = open_csv(out_dir + "/val_metrics.csv");
    val_csv << "epoch,tp,fp,fn,tn,iou,f1" << "\n";

    const int n_train = static_cast<int>(ds.split.train.size());
    long step = 0;
    double best_val_iou = -1.0;
    bool have_snapshot = false;
    std::vector<std::vector<float>> best_values;
    std::vector<float> best_extras;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937 g = make_rng(cfg.shuffle_seed, static_cast<std::uint64_t>(epoch));
        std::vector<int> order = ds.split.train;
        shuffle_indices(order, g);

        for (int begin = 0; begin < n_train; begin += cfg.batch_size) {
            const int end = std::min(begin + cfg.batch_size, n_train);
            std::vector<Sample> batch;
            batch.reserve(static_cast<std::size_t>(end - begin));
            for (int i = begin; i < end; ++i) {
                Sample s = ds.samples[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
                if (cfg.augment) {
                    s = augment(s, g, policy);
                }
                s = random_crop(s, cfg.crop, g);
                batch.push_back(std::move(s));
            }
            Tensor img = stack_batch(batch, &Sample::image);
            Tensor seg_gt = stack_batch(batch, &Sample::seg_mask);
            Tensor bnd_gt = stack_batch(batch, &Sample::bnd_mask);

            Tape tape;
            ModelOutputs out = forward(tape, model, img);

            // Every task loss is logged every step, but only active tasks may
            // record backward work.
            auto task_loss = [&](bool active, auto&& make) {
                if (active) {
                    return make();
                }
                tape.set_recording(false);
                Tensor t = make();
                tape.set_recording(true);
                return t;
            };
            Tensor l_seg =
                task_loss(cfg.tasks.seg, [&] { return bce_loss(tape, out.seg_logits, seg_gt); });
            Tensor l_bnd =
                task_loss(cfg.tasks.bnd, [&] { return bce_loss(tape, out.bnd_logits, bnd_gt); });
            Tensor l_rec =
                task_loss(cfg.tasks.rec, [&] { return mae_loss(tape, out.recon, img); });

            LossBreakdown bd;
            bd.l_seg = l_seg.item();
            bd.l_bnd = l_bnd.item();
            bd.l_rec = l_rec.item();
            if (cfg.weighting == Weighting::kUncertainty) {
                const Parameter* sp[3] = {&unc.s_seg, &unc.s_bnd, &unc.s_rec};
                const bool active[3] = {cfg.tasks.seg, cfg.tasks.bnd, cfg.tasks.rec};
                for (int t = 0; t < 3; ++t) {
                    if (!active[t]) continue;
                    const float sv = sp[t]->value.item();
                    bd.s_values[static_cast<std::size_t>(t)] = sv;
                    bd.effective_weights[static_cast<std::size_t>(t)] =
                        (t == 2 ? 0.5f : 1.0f) * std::exp(-sv);
                    bd.regularizer_terms[static_cast<std::size_t>(t)] = 0.5f * sv;
                }
            } else {
                if (cfg.tasks.seg) bd.effective_weights[0] = cfg.weights.seg;
                if (cfg.tasks.bnd) bd.effective_weights[1] = cfg.weights.bnd;
                if (cfg.tasks.rec) bd.effective_weights[2] = cfg.weights.rec;
            }

            const bool tasks_finite = (!cfg.tasks.seg || std::isfinite(bd.l_seg)) &&
                                      (!cfg.tasks.bnd || std::isfinite(bd.l_bnd)) &&
                                      (!cfg.tasks.rec || std::isfinite(bd.l_rec));
            if (!tasks_finite) {
                bd.l_joint = std::numeric_limits<float>::quiet_NaN();
                throw DivergenceError(step, bd);
            }

            Tensor joint;
            auto accumulate = [&](const Tensor& term) {
                joint = joint.defined() ? add(tape, joint, term) : term;
            };
            if (cfg.weighting == Weighting::kUncertainty) {
                if (cfg.tasks.seg) accumulate(uncertainty_task_term(tape, l_seg, unc.s_seg, false));
                if (cfg.tasks.bnd) accumulate(uncertainty_task_term(tape, l_bnd, unc.s_bnd, false));
                if (cfg.tasks.rec) accumulate(uncertainty_task_term(tape, l_rec, unc.s_rec, true));
            } else {
                if (cfg.tasks.seg) accumulate(scale(tape, l_seg, cfg.weights.seg));
                if (cfg.tasks.bnd) accumulate(scale(tape, l_bnd, cfg.weights.bnd));
                if (cfg.tasks.rec) accumulate(scale(tape, l_rec, cfg.weights.rec));
            }
            bd.l_joint = joint.item();
            if (!std::isfinite(bd.l_joint)) {
                throw DivergenceError(step, bd);
            }

            loss_csv << loss_csv_row(step, bd) << "\n";

            tape.backward(joint);
            sgd_step(optimized, cfg.lr, cfg.momentum, cfg.weight_decay);
            ++step;
        }

        if (!ds.split.val.empty()) {
            MetricsReport rep = evaluate_model(model, ds, ds.split.val, false);
            val_csv << epoch << "," << rep.counts.tp << "," << rep.counts.fp << ","
                    << rep.counts.fn << "," << rep.counts.tn << "," << str_g9(rep.iou) << ","
                    << str_g9(rep.f1) << "\n";
            if (rep.iou > best_val_iou) {
                best_val_iou = rep.iou;
                have_snapshot = true;
                best_values.clear();
                for (Parameter* p : model.parameters()) {
                    auto v = p->value.values();
                    best_values.emplace_back(v.begin(), v.end());
                }
                best_extras = collect_extras();
            }
        }
    }

    // Keep the epoch with the best validation IoU (ties keep the earlier one);
    // without validation data the final weights stand.
    std::vector<float> extras;
    if (have_snapshot) {
        std::vector<Parameter*> params = model.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto dst = params[i]->value.values();
            std::copy(best_values[i].begin(), best_values[i].end(), dst.begin());
        }
        extras = best_extras;
    } else {
        extras = collect_extras();
    }

    TrainOutcome outcome;
    outcome.best_val_iou = have_snapshot ? best_val_iou : -1.0;
    outcome.checkpoint_path = out_dir + "/checkpoint.bin";
    CheckpointMeta meta;
    meta.task_seg = cfg.tasks.seg;
    meta.task_bnd = cfg.tasks.bnd;
    meta.task_rec = cfg.tasks.rec;
    meta.model_seed = cfg.model_seed;
    meta.data_seed = ds.scene.rng_seed;
    meta.shuffle_seed = cfg.shuffle_seed;
    save_checkpoint(outcome.checkpoint_path, model, meta, extras);

    std::ofstream test_csv = open_csv(out_dir + "/test_metrics.csv");
    test_csv << metrics_csv_header() << "\n";
    if (!ds.split.test.empty()) {
        outcome.has_test = true;
        outcome.test_report = evaluate_model(model, ds, ds.split.test, false);
        test_csv << metrics_csv_row(cfg.tasks.label(), "test", outcome.test_report) << "\n";
    }
    return outcome;
}

// ---- harnesses ---------------------------------------------------------------------------

void run_ablation(const RunConfig& base, const std::string& out_dir) {
    Dataset ds = load_dataset(base.dataset_dir);
    if (ds.split.test.empty()) {
        throw ValueError("ablation scoring needs a non-empty test subset in '" +
                         base.dataset_dir + "'");
    }

    std::filesystem::create_directories(out_dir);
    std::ofstream csv = open_csv(out_dir + "/ablation.csv");
    csv << metrics_csv_header() << ",model_seed,data_seed,shuffle_seed" << "\n";
    const std::string seed_cols = "," + std::to_string(base.model_seed) + "," +
                                  std::to_string(ds.scene.rng_seed) + "," +
                                  std::to_string(base.shuffle_seed);

    const TaskSet rows[4] = {
        {true, false, false},  // S
        {true, false, true},   // S+R
        {true, true, false},   // S+B
        {true, true, true},    // S+B+R
    };
    std::string full_checkpoint;
    for (const TaskSet& tasks : rows) {
        RunConfig cfg = base;
        cfg.tasks = tasks;
        TrainOutcome o = train_run(cfg, out_dir + "/" + row_dir_name(tasks.label()));
        csv << metrics_csv_row(tasks.label(), "test", o.test_report) << seed_cols << "\n";
        if (tasks.bnd && tasks.rec) {
            full_checkpoint = o.checkpoint_path;
        }
    }

    // Fifth row: the full model's checkpoint, re-scored with boundary-fusion
    // post-processing instead of retraining.
    LoadedCheckpoint lc = load_checkpoint(full_checkpoint);
    MetricsReport rep = evaluate_model(lc.model, ds, ds.split.test, true);
    csv << metrics_csv_row("S+B+R+P", "test", rep) << seed_cols << "\n";
}

void run_sweep(const RunConfig& base, const std::vector<double>& w_bnd_values,
               const std::vector<double>& w_rec_values, const std::string& out_dir) {
    if (base.weighting != Weighting::kFixed) {
        throw ConfigError("sweep explores fixed weights; set train.weighting = fixed");
    }
    if (w_bnd_values.empty() || w_rec_values.empty()) {
        throw ConfigError("sweep needs non-empty sweep.w_bnd_values and sweep.w_rec_values");
    }
    for (double v : w_bnd_values) {
        if (!(v >= 0.0)) throw ConfigError("sweep.w_bnd_values must be non-negative");
    }
    for (double v : w_rec_values) {
        if (!(v >= 0.0)) throw ConfigError("sweep.w_rec_values must be non-negative");
    }

    std::filesystem::create_directories(out_dir);
    std::ofstream csv = open_csv(out_dir + "/sweep.csv");
    csv << "w_bnd,w_rec,iou,f1" << "\n";
    for (double wb : w_bnd_values) {
        for (double wr : w_rec_values) {
            RunConfig cfg = base;
            cfg.tasks = {true, true, true};
            cfg.weights.seg = 1.0f;
            cfg.weights.bnd = static_cast<float>(wb);
            cfg.weights.rec = static_cast<float>(wr);
            const std::string point_dir =
                out_dir + "/wb" + str_g9(wb) + "_wr" + str_g9(wr);
            TrainOutcome o = train_run(cfg, point_dir);
            if (!o.has_test) {
                throw ValueError("sweep scoring needs a non-empty test subset in '" +
                                 base.dataset_dir + "'");
            }
            csv << str_g9(wb) << "," << str_g9(wr) << "," << str_g9(o.test_report.iou) << ","
                << str_g9(o.test_report.f1) << "\n";
        }
    }
}

}  // namespace mtlseg
