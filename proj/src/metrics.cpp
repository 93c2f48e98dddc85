#include "pacfno/metrics.hpp"

namespace pacfno {

double top1(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) throw ShapeError("top1: expected [N,K] logits");
    int n = logits.extent(0), k = logits.extent(1);
    if (n < 1) throw ShapeError("top1: empty batch");
    if (static_cast<int>(labels.size()) != n) throw ShapeError("top1: label count mismatch");
    int hits = 0;
    const double* p = logits.data();
    for (int i = 0; i < n; ++i) {
        int best = 0;
        for (int j = 1; j < k; ++j)
            if (p[i * k + j] > p[i * k + best]) best = j;  // strict: ties keep the lowest index
        if (best == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / n;
}

double relative_accuracy(double acc_low, double acc_target) {
    if (acc_target <= 0.0) throw ConfigError("relative_accuracy: target accuracy must be > 0");
    return acc_low / acc_target;
}

}  // namespace pacfno
