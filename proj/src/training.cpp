#include "pacfno/training.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "pacfno/metrics.hpp"

namespace pacfno {

bool harmonized(double combined_val_top1, double backbone_ref_top1, double delta_points) {
    if (combined_val_top1 < 0.0 || combined_val_top1 > 1.0 || backbone_ref_top1 < 0.0 ||
        backbone_ref_top1 > 1.0)
        throw ConfigError("harmonized: accuracies must be fractions in [0,1]");
    if (delta_points < 0.0) throw ConfigError("harmonized: delta must be >= 0");
    // 1e-12 absorbs decimal literals that do not round-trip in binary.
    return combined_val_top1 >= backbone_ref_top1 - delta_points / 100.0 - 1e-12;
}

double combined_top1(PacFnoLayer& layer, TinyCnn& backbone, const LabeledImageSet& set,
                     int batch_size) {
    if (set.size() == 0) throw DataError("combined_top1: empty dataset");
    double correct = 0.0;
    size_t n = set.size();
    for (size_t start = 0; start < n; start += batch_size) {
        std::vector<int> idx;
        for (size_t i = start; i < std::min(n, start + batch_size); ++i)
            idx.push_back(static_cast<int>(i));
        std::vector<int> labels;
        Tensor xb = stack_batch(set, idx, &labels);
        Tensor hf = pacfno_forward(xb, layer, false);
        Tensor logits = backbone_forward(hf, backbone, false);
        correct += top1(logits, labels) * static_cast<double>(idx.size());
    }
    return correct / static_cast<double>(n);
}

namespace {

// One pass over a dataset updating `params`; returns the mean batch loss.
double train_epoch(PacFnoLayer& layer, TinyCnn& backbone, const LabeledImageSet& set,
                   std::vector<Tensor>& params, OptimState& opt, int batch_size, Rng& rng) {
    std::vector<int> order(set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);
    double loss_acc = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += batch_size) {
        std::vector<int> idx(order.begin() + start,
                             order.begin() +
                                 std::min(order.size(), start + static_cast<size_t>(batch_size)));
        std::vector<int> labels;
        Tensor xb = stack_batch(set, idx, &labels);
        for (Tensor& p : params) p.zero_grad();
        Tape tape;
        {
            TapeScope scope(tape);
            Tensor hf = pacfno_forward(xb, layer, true);
            Tensor logits = backbone_forward(hf, backbone, true);
            Tensor loss = cross_entropy(logits, labels);
            loss_acc += loss.value();
            backward(loss);
        }
        adam_step(params, opt);
        ++batches;
    }
    return batches > 0 ? loss_acc / batches : 0.0;
}

}  // namespace

int stage1_train(PacFnoLayer& layer, TinyCnn& backbone, const LabeledImageSet& train_target,
                 const LabeledImageSet& val_target, double backbone_ref_top1,
                 const TrainPlan& plan, TrainReport* report) {
    if (train_target.size() == 0) throw DataError("stage1_train: empty dataset");
    if (plan.lr_first < 0.0) throw ConfigError("stage1_train: lr must be >= 0");
    ParamGroups groups{layer.parameters(), backbone.parameters()};
    std::vector<Tensor> joint = groups.theta_o;
    joint.insert(joint.end(), groups.theta_p.begin(), groups.theta_p.end());
    // lr 0 runs the loop without moving parameters (adam rejects lr <= 0).
    OptimState opt = OptimState::create(joint, plan.lr_first > 0.0 ? plan.lr_first : 1.0);
    Rng rng(plan.seed);
    int epochs_used = 0;
    for (int epoch = 0; epoch < plan.k_first; ++epoch) {
        double mean_loss = 0.0;
        if (plan.lr_first > 0.0)
            mean_loss = train_epoch(layer, backbone, train_target, joint, opt, plan.batch_size, rng);
        ++epochs_used;
        double val = combined_top1(layer, backbone, val_target, plan.batch_size);
        if (report) {
            report->epochs.push_back(
                {1, epochs_used, train_target.resolution, mean_loss, val});
        }
        if (harmonized(val, backbone_ref_top1, plan.delta)) {
            if (report) report->harmonized_epoch = epochs_used;
            break;
        }
    }
    if (report) report->stage1_epochs = epochs_used;
    return epochs_used;
}

void stage2_train(PacFnoLayer& layer, TinyCnn& backbone, const MultiResDataset& train,
                  const TrainPlan& plan, TrainReport* report) {
    if (train.by_resolution.find(train.target_resolution) == train.by_resolution.end())
        throw DataError("stage2_train: target resolution missing from the multires set");
    std::vector<Tensor> theta_o = layer.parameters();
    OptimState opt = OptimState::create(theta_o, plan.lr_second > 0.0 ? plan.lr_second : 1.0);
    Rng rng(plan.seed + 1);
    std::vector<int> lows;
    for (auto& [res, set] : train.by_resolution)
        if (res != train.target_resolution) lows.push_back(res);
    std::sort(lows.begin(), lows.end());
    for (int epoch = 0; epoch < plan.k_second; ++epoch) {
        // Low resolutions ascending, then the target set.
        std::vector<int> sequence = lows;
        sequence.push_back(train.target_resolution);
        for (int res : sequence) {
            double mean_loss = 0.0;
            if (plan.lr_second > 0.0)
                mean_loss = train_epoch(layer, backbone, train.by_resolution.at(res), theta_o, opt,
                                        plan.batch_size, rng);
            if (report) report->epochs.push_back({2, epoch + 1, res, mean_loss, -1.0});
        }
    }
}

TrainReport train_full(PacFnoLayer& layer, TinyCnn& backbone, const MultiResDataset& train,
                       const MultiResDataset& val, double backbone_ref_top1,
                       const TrainPlan& plan) {
    TrainReport report;
    report.resolutions = train.resolutions();
    report.backbone_ref_top1 = backbone_ref_top1;
    stage1_train(layer, backbone, train.target(), val.target(), backbone_ref_top1, plan, &report);
    stage2_train(layer, backbone, train, plan, &report);
    for (auto& [res, set] : val.by_resolution)
        report.final_val_top1.push_back({res, combined_top1(layer, backbone, set, plan.batch_size)});
    return report;
}

void TrainReport::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("TrainReport: cannot open " + path);
    out << "phase,epoch,resolution,mean_loss,val_top1\n";
    char buf[160];
    for (const EpochLog& e : epochs) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.9f,%.6f\n", e.phase, e.epoch, e.resolution,
                      e.mean_loss, e.val_top1);
        out << buf;
    }
}

}  // namespace pacfno
