#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mtlseg/config.hpp"
#include "mtlseg/data.hpp"
#include "mtlseg/eval.hpp"
#include "mtlseg/loss.hpp"
#include "mtlseg/nn.hpp"

namespace mtlseg {

// Which task losses train. Segmentation is always on; the boundary and
// reconstruction heads are built regardless and simply receive zero loss
// weight (and therefore no head-exclusive gradient) when inactive.
struct TaskSet {
    bool seg = true;
    bool bnd = false;
    bool rec = false;

    std::string label() const;                  // "S", "S+R", "S+B", "S+B+R"
    static TaskSet parse(const std::string& s);  // accepts the same labels
};

enum class Weighting { kFixed, kUncertainty };

struct RunConfig {
    std::string dataset_dir;
    ModelConfig model;
    TaskSet tasks;
    Weighting weighting = Weighting::kUncertainty;
    TaskWeights weights;  // fixed mode only
    int epochs = 300;
    int batch_size = 4;
    float lr = 2.5e-3f;
    float momentum = 0.9f;
    float weight_decay = 1e-4f;
    int crop = 64;
    bool augment = true;
    std::uint64_t model_seed = 1;
    std::uint64_t shuffle_seed = 2;
};

// Raised when a task or joint loss stops being finite; carries the step and
// its full loss breakdown for the abort report.
class DivergenceError : public Error {
public:
    DivergenceError(long step, const LossBreakdown& b);
    long step;
    LossBreakdown breakdown;
};

struct TrainOutcome {
    std::string checkpoint_path;
    double best_val_iou = -1.0;  // -1 when there were no validation samples
    bool has_test = false;
    MetricsReport test_report;
};

// ---- config assembly -------------------------------------------------------------

// [model]/[train] sections; see the README for the key list.
RunConfig run_config_from(const Config& c);

// [data] section: scene parameters plus dataset size and split ratios.
struct GenSpec {
    SceneConfig scene;
    int n = 64;
    SplitSpec split;
};
GenSpec gen_spec_from(const Config& c);

// --seed overrides: the primary stream gets the seed itself, the secondary
// (shuffle / split) stream gets seed+1.
void override_seeds(RunConfig& cfg, std::uint64_t seed);
void override_seeds(GenSpec& spec, std::uint64_t seed);

// Allowed config sections/keys per subcommand, shared between the CLI and the
// tests that exercise config validation.
const std::map<std::string, std::set<std::string>>& train_config_keys();
const std::map<std::string, std::set<std::string>>& gen_config_keys();
const std::map<std::string, std::set<std::string>>& eval_config_keys();
const std::map<std::string, std::set<std::string>>& sweep_config_keys();

// ---- training and evaluation ------------------------------------------------------

// Full training run; writes checkpoint.bin, loss.csv, val_metrics.csv,
// test_metrics.csv and run_config.txt into out_dir.
TrainOutcome train_run(const RunConfig& cfg, const std::string& out_dir);

// Thresholds the segmentation head at 0.5 (optionally fusing with the
// thresholded boundary head and opening), aggregates confusion counts over
// the given samples, and scores them.
MetricsReport evaluate_model(Model& model, const Dataset& ds, const std::vector<int>& indices,
                             bool postprocess, int se_radius = 1);

// Report rows: experiment ∈ {S, S+R, S+B, S+B+R, S+B+R+P}.
std::string metrics_csv_header();
std::string metrics_csv_row(const std::string& experiment, const std::string& subset,
                            const MetricsReport& r);

// ---- harnesses ---------------------------------------------------------------------

// Trains the four task-subset rows with shared seeds, evaluates the full row
// again with post-processing, and writes ablation.csv (plus one artifact
// directory per trained row) under out_dir.
void run_ablation(const RunConfig& base, const std::string& out_dir);

// Grid over auxiliary fixed weights with w_seg = 1; one training run per
// point; writes sweep.csv plus per-point artifact directories.
void run_sweep(const RunConfig& base, const std::vector<double>& w_bnd_values,
               const std::vector<double>& w_rec_values, const std::string& out_dir);

}  // namespace mtlseg
