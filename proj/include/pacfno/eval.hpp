#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pacfno/backbone.hpp"
#include "pacfno/blocks.hpp"
#include "pacfno/data.hpp"
#include "pacfno/metrics.hpp"
#include "pacfno/training.hpp"

namespace pacfno {

// ---------------------------------------------------------------- reporting

struct EvalRow {
    std::string method;
    int resolution = 0;
    std::string corruption = "none";
    int severity = 0;
    double top1 = 0.0;
    double relative = -1.0;  // negative means "no target-resolution row yet"
    int n_samples = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    uint64_t seed = 0;
    std::string config_digest;
    double wall_clock_s = 0.0;  // metadata only; excluded from the CSV so
                                // identical runs serialize byte-identically

    // Columns: method,resolution,corruption,severity,top1,relative,n.
    // Written atomically (temp file + rename).
    void write_csv(const std::string& path) const;
    static EvalReport read_csv(const std::string& path);

    const EvalRow* find(const std::string& method, int resolution,
                        const std::string& corruption = "none", int severity = 0) const;
};

// Fills row.relative for every row whose (method, corruption, severity) group
// has a row at target_resolution with positive top-1.
void fill_relative(EvalReport& report, int target_resolution);

// ---------------------------------------------------------------- run config

struct CorruptionSpec {
    std::string kind = "fog";
    int severity = 3;
};

struct DatasetSpec {
    std::string kind = "synthetic";  // synthetic | idx | ppm
    int classes = 8;
    int train_count = 320;
    int val_count = 128;
    int test_count = 160;
    std::string images_path;  // idx
    std::string labels_path;  // idx
    std::string root;         // ppm tree
};

struct RunConfig {
    int target_resolution = 32;
    std::vector<int> training_resolutions = {8, 16, 32};
    std::vector<int> eval_resolutions = {8, 12, 16, 24, 32};
    int m = 2;
    int n = 1;
    std::string mode = "all-component";  // all-component | vanilla | lowpass | highpass
    TrainPlan plan;
    std::vector<int> backbone_widths = {16, 32, 64};
    int pretrain_epochs = 30;
    double pretrain_lr = 1e-3;
    DatasetSpec dataset;
    std::vector<CorruptionSpec> corruptions;
    std::vector<std::string> baselines = {"resize-bicubic"};
    std::string out_dir = "runs/out";
    uint64_t seed = 0;
};

RunConfig config_from_json_file(const std::string& path);
RunConfig config_from_json_text(const std::string& text);
std::string config_to_json(const RunConfig& config);
std::string config_digest(const RunConfig& config);  // FNV-1a64 of canonical JSON
void validate_config(const RunConfig& config);       // throws ConfigError before any compute
LayerMode mode_from_name(const std::string& name);

// ---------------------------------------------------------------- checkpoint

// Versioned binary container: magic "PACF", format version, config digest,
// then named blobs (name, extents, little-endian float64 payload).
struct Blob {
    Shape shape;
    std::vector<double> data;
};
using BlobMap = std::map<std::string, Blob>;

void write_blobs(const std::string& path, const std::string& digest, const BlobMap& blobs);
BlobMap read_blobs(const std::string& path, const std::string& expected_digest);

void checkpoint_save(const std::string& path, const std::string& digest, PacFnoLayer& layer,
                     TinyCnn& backbone, const OptimState* optim = nullptr);
// Restores into an already-constructed pair with matching configuration;
// throws on magic/version/digest/shape mismatches (distinct messages).
void checkpoint_load(const std::string& path, const std::string& digest, PacFnoLayer& layer,
                     TinyCnn& backbone, OptimState* optim = nullptr);

// ---------------------------------------------------------------- baselines

enum class Interp { kNearest, kBilinear, kBicubic, kArea };
Interp interp_from_name(const std::string& name);
std::string interp_name(Interp kind);

// Upscales each image to the target with the chosen kernel and scores the
// unmodified backbone.
EvalRow resize_baseline_eval(TinyCnn& backbone, const LabeledImageSet& low_res, int target,
                             Interp interp, int batch_size);

// Fine-tunes all backbone parameters on bicubic-upscaled low-resolution
// images mixed with target-resolution images (epochs = plan.k_second at
// plan.lr_first). Zero epochs leaves the model equal to the resize baseline.
void finetune_baseline(TinyCnn& backbone, const MultiResDataset& train, const TrainPlan& plan);

// ------------------------------------------------------------- orchestration

struct ExperimentArtifacts {
    EvalReport report;
    double backbone_ref_top1 = 0.0;
    bool loaded_from_checkpoint = false;
};

// Pretrains (or restores) a backbone, trains PAC-FNO two-stage, evaluates the
// model plus requested baselines at every eval resolution and corruption, and
// writes report.csv + model.ckpt under config.out_dir.
ExperimentArtifacts run_experiment(const RunConfig& config);

// Per-branch radial curves of the first-stage hidden vectors, averaged over
// the probe images; optional serial-configuration comparison rows.
// CSV columns: branch,bin,radius,value.
void spectra_report(PacFnoLayer& layer, const std::vector<Tensor>& probes, int bins,
                    PacFnoLayer* serial, const std::string& path);

// Fig.-6-style ablation: shares one pretrained backbone and dataset, returns
// per-resolution top-1 for two-stage / first-only / second-only plus the
// resize baseline.
struct TwoStageAblation {
    std::map<int, double> two_stage;
    std::map<int, double> first_only;
    std::map<int, double> second_only;
    std::map<int, double> resize_bicubic;
    double backbone_ref_top1 = 0.0;
};
TwoStageAblation ablate_two_stage(const RunConfig& config);

// Fig.-5-style ablation at an equal block budget: parallel vs serial top-1 on
// clean and corrupted eval sets at the target resolution.
struct ParallelSerialAblation {
    int parallel_m = 0, parallel_n = 0;
    int serial_m = 0, serial_n = 0;
    std::map<int, double> parallel_clean;   // by resolution
    std::map<int, double> serial_clean;
    double parallel_corrupted_target = 0.0;
    double serial_corrupted_target = 0.0;
};
ParallelSerialAblation ablate_parallel_serial(const RunConfig& config, int parallel_m,
                                              int parallel_n, int serial_n);

}  // namespace pacfno
