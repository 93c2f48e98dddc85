#pragma once

#include <vector>

#include "pacfno/tensor.hpp"

namespace pacfno {

// Fraction of rows whose argmax equals the label; ties break toward the
// lowest class index.
double top1(const Tensor& logits, const std::vector<int>& labels);

// acc_low / acc_target. The target accuracy must be positive.
double relative_accuracy(double acc_low, double acc_target);

}  // namespace pacfno
