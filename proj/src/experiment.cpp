#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pacfno/eval.hpp"
#include "pacfno/spectral.hpp"

namespace fs = std::filesystem;

namespace pacfno {

Interp interp_from_name(const std::string& name) {
    if (name == "nearest") return Interp::kNearest;
    if (name == "bilinear") return Interp::kBilinear;
    if (name == "bicubic") return Interp::kBicubic;
    if (name == "area") return Interp::kArea;
    throw ConfigError("unknown interpolation kind: " + name);
}

std::string interp_name(Interp kind) {
    switch (kind) {
        case Interp::kNearest: return "nearest";
        case Interp::kBilinear: return "bilinear";
        case Interp::kBicubic: return "bicubic";
        case Interp::kArea: return "area";
    }
    throw ConfigError("unknown interpolation kind");
}

namespace {

Tensor resize_with(const Tensor& x, int h, int w, Interp interp) {
    switch (interp) {
        case Interp::kNearest: return nearest_resize(x, h, w);
        case Interp::kBilinear: return bilinear_resize(x, h, w);
        case Interp::kBicubic: return bicubic_resize(x, h, w);
        case Interp::kArea: return area_resize(x, h, w);
    }
    throw ConfigError("unknown interpolation kind");
}

LabeledImageSet upscale_set(const LabeledImageSet& low, int target, Interp interp) {
    LabeledImageSet up;
    up.labels = low.labels;
    up.class_count = low.class_count;
    up.resolution = target;
    up.split = low.split;
    up.provenance = low.provenance;
    up.images.reserve(low.images.size());
    for (const Tensor& img : low.images) {
        Tensor big = resize_with(img, target, target, interp);
        for (int64_t i = 0; i < big.size(); ++i)
            big.data()[i] = std::clamp(big.data()[i], 0.0, 1.0);
        up.images.push_back(std::move(big));
    }
    return up;
}

}  // namespace

EvalRow resize_baseline_eval(TinyCnn& backbone, const LabeledImageSet& low_res, int target,
                             Interp interp, int batch_size) {
    LabeledImageSet up =
        (low_res.resolution == target) ? low_res : upscale_set(low_res, target, interp);
    EvalRow row;
    row.method = "resize-" + interp_name(interp);
    row.resolution = low_res.resolution;
    row.top1 = backbone_top1(backbone, up, batch_size);
    row.n_samples = static_cast<int>(low_res.size());
    return row;
}

void finetune_baseline(TinyCnn& backbone, const MultiResDataset& train, const TrainPlan& plan) {
    std::vector<Tensor> params = backbone.parameters();
    OptimState opt = OptimState::create(params, plan.lr_first > 0 ? plan.lr_first : 1.0);
    Rng rng(plan.seed + 2);
    const int target = train.target_resolution;
    for (int epoch = 0; epoch < plan.k_second; ++epoch) {
        for (auto& [res, set] : train.by_resolution) {
            LabeledImageSet up =
                (res == target) ? set : upscale_set(set, target, Interp::kBicubic);
            std::vector<int> order(up.size());
            for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
            rng.shuffle(order);
            for (size_t start = 0; start < order.size();
                 start += static_cast<size_t>(plan.batch_size)) {
                std::vector<int> idx(
                    order.begin() + start,
                    order.begin() + std::min(order.size(),
                                             start + static_cast<size_t>(plan.batch_size)));
                std::vector<int> labels;
                Tensor xb = stack_batch(up, idx, &labels);
                for (Tensor& p : params) p.zero_grad();
                Tape tape;
                {
                    TapeScope scope(tape);
                    backward(cross_entropy(backbone_forward(xb, backbone, true), labels));
                }
                adam_step(params, opt);
            }
        }
    }
}

namespace {

struct Splits {
    LabeledImageSet train, val, test;
};

LabeledImageSet slice_set(const LabeledImageSet& src, int from, int count,
                          const std::string& split) {
    LabeledImageSet out;
    out.class_count = src.class_count;
    out.resolution = src.resolution;
    out.split = split;
    out.provenance = src.provenance;
    for (int i = from; i < from + count && i < static_cast<int>(src.size()); ++i) {
        out.images.push_back(src.images[i]);
        out.labels.push_back(src.labels[i]);
    }
    return out;
}

Splits build_splits(const RunConfig& c) {
    const DatasetSpec& d = c.dataset;
    Splits s;
    if (d.kind == "synthetic") {
        int total = d.train_count + d.val_count + d.test_count;
        LabeledImageSet all = gen_shapes(c.seed, total, d.classes, c.target_resolution);
        s.train = slice_set(all, 0, d.train_count, "train");
        s.val = slice_set(all, d.train_count, d.val_count, "val");
        s.test = slice_set(all, d.train_count + d.val_count, d.test_count, "test");
    } else if (d.kind == "idx") {
        LabeledImageSet all = load_idx(d.images_path, d.labels_path);
        if (all.resolution != c.target_resolution)
            throw ConfigError("config: idx resolution does not match the target");
        int train_n = std::min<int>(d.train_count, static_cast<int>(all.size()));
        int val_n = std::min<int>(d.val_count, static_cast<int>(all.size()) - train_n);
        int test_n =
            std::min<int>(d.test_count, static_cast<int>(all.size()) - train_n - val_n);
        s.train = slice_set(all, 0, train_n, "train");
        s.val = slice_set(all, train_n, val_n, "val");
        s.test = slice_set(all, train_n + val_n, test_n, "test");
    } else if (d.kind == "ppm") {
        s.train = load_set_ppm(d.root, "train", c.target_resolution);
        s.val = load_set_ppm(d.root, "val", c.target_resolution);
        s.test = load_set_ppm(d.root, "test", c.target_resolution);
    } else {
        throw ConfigError("config: unknown dataset kind " + d.kind);
    }
    if (s.train.size() == 0 || s.val.size() == 0 || s.test.size() == 0)
        throw DataError("dataset split is empty");
    return s;
}

LabeledImageSet corrupt_set(const LabeledImageSet& src, CorruptionKind kind, int severity,
                            uint64_t seed) {
    LabeledImageSet out;
    out.labels = src.labels;
    out.class_count = src.class_count;
    out.resolution = src.resolution;
    out.split = src.split;
    out.provenance = src.provenance;
    out.images.reserve(src.size());
    for (size_t i = 0; i < src.size(); ++i)
        out.images.push_back(
            corrupt(src.images[i], kind, severity, seed ^ (0x9e3779b9ULL + i)));
    return out;
}

}  // namespace

ExperimentArtifacts run_experiment(const RunConfig& config) {
    validate_config(config);
    auto t_start = std::chrono::steady_clock::now();
    const std::string digest = config_digest(config);
    Splits splits = build_splits(config);

    Rng init_rng(config.seed);
    TinyCnn backbone = make_tiny_cnn(config.target_resolution, config.target_resolution,
                                     splits.train.class_count, config.backbone_widths, init_rng);
    PacFnoLayer layer =
        make_pacfno_layer(config.m, config.n, config.target_resolution, config.target_resolution,
                          mode_from_name(config.mode), init_rng);

    ExperimentArtifacts artifacts;
    artifacts.report.seed = config.seed;
    artifacts.report.config_digest = digest;

    fs::path ckpt = fs::path(config.out_dir) / "model.ckpt";
    TrainPlan plan = config.plan;
    plan.seed = config.seed;
    if (fs::exists(ckpt)) {
        checkpoint_load(ckpt.string(), digest, layer, backbone);
        artifacts.loaded_from_checkpoint = true;
        artifacts.backbone_ref_top1 = backbone_top1(backbone, splits.val, plan.batch_size);
    } else {
        artifacts.backbone_ref_top1 =
            pretrain_backbone(backbone, splits.train, splits.val, config.pretrain_epochs,
                              config.pretrain_lr, plan.batch_size, config.seed);
        MultiResDataset train_multi = make_multires(splits.train, config.training_resolutions);
        MultiResDataset val_multi = make_multires(splits.val, config.training_resolutions);
        TrainReport train_report = train_full(layer, backbone, train_multi, val_multi,
                                              artifacts.backbone_ref_top1, plan);
        fs::create_directories(config.out_dir);
        train_report.write_csv((fs::path(config.out_dir) / "training.csv").string());
        checkpoint_save(ckpt.string(), digest, layer, backbone);
    }

    // Evaluation pyramid covers every eval resolution, trained or not.
    MultiResDataset eval_multi = make_multires(splits.test, config.eval_resolutions);

    auto eval_pacfno = [&](const MultiResDataset& ds, const std::string& corruption,
                           int severity) {
        for (auto& [res, set] : ds.by_resolution) {
            bool wanted = res == config.target_resolution;
            for (int e : config.eval_resolutions) wanted = wanted || (e == res);
            if (!wanted) continue;
            EvalRow row;
            row.method = "pacfno";
            row.resolution = res;
            row.corruption = corruption;
            row.severity = severity;
            row.top1 = combined_top1(layer, backbone, set, plan.batch_size);
            row.n_samples = static_cast<int>(set.size());
            artifacts.report.rows.push_back(row);
        }
    };
    auto eval_resize = [&](const MultiResDataset& ds, Interp interp,
                           const std::string& corruption, int severity, TinyCnn& net,
                           const std::string& method_override = "") {
        for (auto& [res, set] : ds.by_resolution) {
            EvalRow row = resize_baseline_eval(net, set, config.target_resolution, interp,
                                               plan.batch_size);
            if (!method_override.empty()) row.method = method_override;
            row.corruption = corruption;
            row.severity = severity;
            artifacts.report.rows.push_back(row);
        }
    };

    eval_pacfno(eval_multi, "none", 0);
    bool wants_finetune = false;
    for (const std::string& b : config.baselines) {
        if (b == "finetune") {
            wants_finetune = true;
            continue;
        }
        eval_resize(eval_multi, interp_from_name(b.substr(7)), "none", 0, backbone);
    }
    TinyCnn finetuned = backbone;
    if (wants_finetune) {
        finetuned = clone_backbone(backbone);  // the fine-tune must not disturb the backbone
        MultiResDataset train_multi = make_multires(splits.train, config.training_resolutions);
        finetune_baseline(finetuned, train_multi, plan);
        eval_resize(eval_multi, Interp::kBicubic, "none", 0, finetuned, "finetune");
    }

    for (const CorruptionSpec& spec : config.corruptions) {
        CorruptionKind kind = corruption_from_name(spec.kind);
        LabeledImageSet corrupted = corrupt_set(splits.test, kind, spec.severity, config.seed);
        MultiResDataset corrupted_multi = make_multires(corrupted, config.eval_resolutions);
        eval_pacfno(corrupted_multi, spec.kind, spec.severity);
        for (const std::string& b : config.baselines) {
            if (b == "finetune") {
                if (wants_finetune)
                    eval_resize(corrupted_multi, Interp::kBicubic, spec.kind, spec.severity,
                                finetuned, "finetune");
                continue;
            }
            eval_resize(corrupted_multi, interp_from_name(b.substr(7)), spec.kind, spec.severity,
                        backbone);
        }
    }

    fill_relative(artifacts.report, config.target_resolution);
    artifacts.report.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    artifacts.report.write_csv((fs::path(config.out_dir) / "report.csv").string());
    return artifacts;
}

void spectra_report(PacFnoLayer& layer, const std::vector<Tensor>& probes, int bins,
                    PacFnoLayer* serial, const std::string& path) {
    if (probes.empty()) throw DataError("spectra_report: no probe images");
    auto branch_curves = [&](PacFnoLayer& net) {
        std::vector<std::vector<double>> acc(net.branches, std::vector<double>(bins, 0.0));
        for (const Tensor& probe : probes) {
            Tensor batch = reshape(probe, {1, probe.extent(0), probe.extent(1), probe.extent(2)});
            std::vector<Tensor> hidden = pacfno_first_stage_hidden(batch, net);
            for (int b = 0; b < net.branches; ++b) {
                Tensor img = reshape(hidden[b], {hidden[b].extent(1), hidden[b].extent(2),
                                                 hidden[b].extent(3)});
                auto curve = radial_spectrum(img, bins);
                for (int i = 0; i < bins; ++i) acc[b][i] += curve[i].second;
            }
        }
        for (auto& c : acc)
            for (double& v : c) v /= static_cast<double>(probes.size());
        return acc;
    };

    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DataError("spectra_report: cannot open " + tmp.string());
        out << "branch,bin,radius,value\n";
        char buf[128];
        auto emit = [&](const std::string& name, const std::vector<double>& curve) {
            for (int i = 0; i < bins; ++i) {
                std::snprintf(buf, sizeof(buf), "%s,%d,%.6f,%.9f\n", name.c_str(), i,
                              (i + 0.5) / bins, curve[i]);
                out << buf;
            }
        };
        auto curves = branch_curves(layer);
        for (int b = 0; b < layer.branches; ++b) emit("branch" + std::to_string(b), curves[b]);
        if (serial != nullptr) {
            auto scurves = branch_curves(*serial);
            emit("serial", scurves[0]);
        }
    }
    fs::rename(tmp, target);
}

TwoStageAblation ablate_two_stage(const RunConfig& config) {
    validate_config(config);
    Splits splits = build_splits(config);
    TrainPlan plan = config.plan;
    plan.seed = config.seed;

    Rng rng(config.seed);
    TinyCnn pretrained = make_tiny_cnn(config.target_resolution, config.target_resolution,
                                       splits.train.class_count, config.backbone_widths, rng);
    TwoStageAblation out;
    out.backbone_ref_top1 =
        pretrain_backbone(pretrained, splits.train, splits.val, config.pretrain_epochs,
                          config.pretrain_lr, plan.batch_size, config.seed);

    MultiResDataset train_multi = make_multires(splits.train, config.training_resolutions);
    MultiResDataset test_multi = make_multires(splits.test, config.eval_resolutions);

    // All three arms share one layer initialization and the same pretrained
    // backbone snapshot.
    Rng layer_rng(config.seed + 1);
    PacFnoLayer layer0 =
        make_pacfno_layer(config.m, config.n, config.target_resolution, config.target_resolution,
                          mode_from_name(config.mode), layer_rng);

    auto eval_all = [&](PacFnoLayer& layer, TinyCnn& net, std::map<int, double>& into) {
        for (auto& [res, set] : test_multi.by_resolution)
            into[res] = combined_top1(layer, net, set, plan.batch_size);
    };

    {  // full two-stage
        PacFnoLayer layer = clone_layer(layer0);
        TinyCnn net = clone_backbone(pretrained);
        MultiResDataset val_multi = make_multires(splits.val, config.training_resolutions);
        train_full(layer, net, train_multi, val_multi, out.backbone_ref_top1, plan);
        eval_all(layer, net, out.two_stage);
    }
    {  // first stage only
        PacFnoLayer layer = clone_layer(layer0);
        TinyCnn net = clone_backbone(pretrained);
        stage1_train(layer, net, train_multi.target(), splits.val, out.backbone_ref_top1, plan);
        eval_all(layer, net, out.first_only);
    }
    {  // second stage only (no harmonization phase)
        PacFnoLayer layer = clone_layer(layer0);
        TinyCnn net = clone_backbone(pretrained);
        stage2_train(layer, net, train_multi, plan);
        eval_all(layer, net, out.second_only);
    }
    for (auto& [res, set] : test_multi.by_resolution)
        out.resize_bicubic[res] =
            resize_baseline_eval(pretrained, set, config.target_resolution, Interp::kBicubic,
                                 plan.batch_size)
                .top1;
    return out;
}

ParallelSerialAblation ablate_parallel_serial(const RunConfig& config, int parallel_m,
                                              int parallel_n, int serial_n) {
    if (parallel_m * parallel_n != serial_n)
        throw ConfigError("parallel/serial ablation requires an equal AC-FNO block budget");
    if (config.corruptions.empty())
        throw ConfigError("parallel/serial ablation needs a corruption spec");
    ParallelSerialAblation out;
    out.parallel_m = parallel_m;
    out.parallel_n = parallel_n;
    out.serial_m = 1;
    out.serial_n = serial_n;

    RunConfig base = config;
    base.baselines = {};
    auto run_arm = [&](int m, int n, const std::string& tag, std::map<int, double>& clean,
                       double& corrupted_target) {
        RunConfig arm = base;
        arm.m = m;
        arm.n = n;
        arm.out_dir = (fs::path(config.out_dir) / tag).string();
        ExperimentArtifacts art = run_experiment(arm);
        for (const EvalRow& row : art.report.rows) {
            if (row.method != "pacfno") continue;
            if (row.corruption == "none")
                clean[row.resolution] = row.top1;
            else if (row.resolution == config.target_resolution)
                corrupted_target = row.top1;
        }
    };
    run_arm(parallel_m, parallel_n, "parallel", out.parallel_clean,
            out.parallel_corrupted_target);
    run_arm(1, serial_n, "serial", out.serial_clean, out.serial_corrupted_target);
    return out;
}

}  // namespace pacfno
