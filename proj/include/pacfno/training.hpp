#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pacfno/backbone.hpp"
#include "pacfno/blocks.hpp"
#include "pacfno/data.hpp"

namespace pacfno {

struct TrainPlan {
    int k_first = 30;        // max stage-1 epochs
    int k_second = 20;       // stage-2 epochs
    double lr_first = 1e-3;
    double lr_second = 1e-6;
    double delta = 1.0;      // harmonization tolerance in top-1 points
    int batch_size = 16;
    uint64_t seed = 0;
};

struct ParamGroups {
    std::vector<Tensor> theta_o;  // PAC-FNO layer parameters
    std::vector<Tensor> theta_p;  // backbone parameters
};

// True iff combined >= reference - delta/100 (boundary inclusive).
bool harmonized(double combined_val_top1, double backbone_ref_top1, double delta_points);

struct EpochLog {
    int phase = 1;
    int epoch = 0;
    int resolution = 0;
    double mean_loss = 0.0;
    double val_top1 = -1.0;  // combined model at target, when evaluated
};

struct TrainReport {
    std::vector<int> resolutions;       // of the training multires set
    std::vector<EpochLog> epochs;
    int harmonized_epoch = -1;          // 1-based; -1 when never reached
    int stage1_epochs = 0;
    double backbone_ref_top1 = 0.0;
    std::vector<std::pair<int, double>> final_val_top1;  // per resolution

    void write_csv(const std::string& path) const;
};

// Combined model eval-mode top-1 over one dataset.
double combined_top1(PacFnoLayer& layer, TinyCnn& backbone, const LabeledImageSet& set,
                     int batch_size);

// Stage 1: jointly trains theta_o and theta_p on the target-resolution data
// with lr_first, early-stopping as soon as the harmonization criterion holds
// on the validation split. Returns the number of epochs used.
int stage1_train(PacFnoLayer& layer, TinyCnn& backbone, const LabeledImageSet& train_target,
                 const LabeledImageSet& val_target, double backbone_ref_top1,
                 const TrainPlan& plan, TrainReport* report = nullptr);

// Stage 2: fine-tunes theta_o only with lr_second; each epoch iterates the
// low-resolution sets ascending, then the target set. theta_p is untouched.
void stage2_train(PacFnoLayer& layer, TinyCnn& backbone, const MultiResDataset& train,
                  const TrainPlan& plan, TrainReport* report = nullptr);

// stage1 followed by stage2, with per-resolution validation scores at the end.
TrainReport train_full(PacFnoLayer& layer, TinyCnn& backbone, const MultiResDataset& train,
                       const MultiResDataset& val, double backbone_ref_top1,
                       const TrainPlan& plan);

}  // namespace pacfno
