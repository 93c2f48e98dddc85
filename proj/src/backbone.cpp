#include "pacfno/backbone.hpp"

#include <cmath>

#include "pacfno/data.hpp"
#include "pacfno/metrics.hpp"

namespace pacfno {

std::vector<Tensor> TinyCnn::parameters() {
    std::vector<Tensor> out;
    for (ConvStage& s : stages) {
        out.push_back(s.weight);
        out.push_back(s.bias);
        out.push_back(s.bn.gamma);
        out.push_back(s.bn.beta);
    }
    out.push_back(head_weight);
    out.push_back(head_bias);
    return out;
}

int64_t TinyCnn::parameter_count() {
    int64_t n = 0;
    for (Tensor& t : parameters()) n += t.size();
    return n;
}

TinyCnn make_tiny_cnn(int input_h, int input_w, int classes, const std::vector<int>& widths,
                      Rng& rng) {
    if (widths.empty()) throw ConfigError("make_tiny_cnn: at least one stage");
    int div = 1 << static_cast<int>(widths.size());
    if (input_h % div != 0 || input_w % div != 0)
        throw ConfigError("make_tiny_cnn: input extent must divide 2^stages");
    TinyCnn model;
    model.input_h = input_h;
    model.input_w = input_w;
    model.classes = classes;
    int ci = 3;
    for (int co : widths) {
        ConvStage st;
        st.weight = Tensor::zeros({co, ci, 3, 3});
        st.bias = Tensor::zeros({co});
        double fan_in = static_cast<double>(ci) * 9.0;
        double bound = std::sqrt(6.0 / (6.0 * fan_in));
        double bbound = 1.0 / std::sqrt(fan_in);
        for (int64_t i = 0; i < st.weight.size(); ++i)
            st.weight.data()[i] = rng.uniform(-bound, bound);
        for (int64_t i = 0; i < st.bias.size(); ++i) st.bias.data()[i] = rng.uniform(-bbound, bbound);
        st.weight.set_requires_grad(true);
        st.bias.set_requires_grad(true);
        st.bn = BnState::create(co);
        model.stages.push_back(std::move(st));
        ci = co;
    }
    model.head_weight = Tensor::zeros({classes, ci});
    model.head_bias = Tensor::zeros({classes});
    double bound = 1.0 / std::sqrt(static_cast<double>(ci));
    for (int64_t i = 0; i < model.head_weight.size(); ++i)
        model.head_weight.data()[i] = rng.uniform(-bound, bound);
    for (int64_t i = 0; i < model.head_bias.size(); ++i)
        model.head_bias.data()[i] = rng.uniform(-bound, bound);
    model.head_weight.set_requires_grad(true);
    model.head_bias.set_requires_grad(true);
    return model;
}

namespace {

Tensor deep_param(const Tensor& t) {
    Tensor copy = t.detach_copy();
    copy.set_requires_grad(t.requires_grad());
    return copy;
}

}  // namespace

TinyCnn clone_backbone(const TinyCnn& src) {
    TinyCnn out = src;  // vectors copy; tensor handles still shared
    for (size_t i = 0; i < out.stages.size(); ++i) {
        out.stages[i].weight = deep_param(src.stages[i].weight);
        out.stages[i].bias = deep_param(src.stages[i].bias);
        out.stages[i].bn.gamma = deep_param(src.stages[i].bn.gamma);
        out.stages[i].bn.beta = deep_param(src.stages[i].bn.beta);
    }
    out.head_weight = deep_param(src.head_weight);
    out.head_bias = deep_param(src.head_bias);
    return out;
}

Tensor backbone_forward(const Tensor& x, TinyCnn& model, bool training) {
    if (x.rank() != 4) throw ShapeError("backbone_forward: expected [N,3,H,W]");
    if (x.extent(2) != model.input_h || x.extent(3) != model.input_w || x.extent(1) != 3)
        throw ShapeError("backbone_forward: input does not match model configuration");
    Tensor h = x;
    for (ConvStage& s : model.stages)
        h = avg_pool2(gelu(batch_norm(conv3x3(h, s.weight, s.bias), s.bn, training)));
    return linear(global_avg_pool(h), model.head_weight, model.head_bias);
}

double backbone_top1(TinyCnn& model, const LabeledImageSet& set, int batch_size) {
    if (set.size() == 0) throw DataError("backbone_top1: empty dataset");
    double correct = 0.0;
    size_t n = set.size();
    for (size_t start = 0; start < n; start += batch_size) {
        std::vector<int> idx;
        for (size_t i = start; i < std::min(n, start + batch_size); ++i)
            idx.push_back(static_cast<int>(i));
        std::vector<int> labels;
        Tensor xb = stack_batch(set, idx, &labels);
        Tensor logits = backbone_forward(xb, model, false);
        correct += top1(logits, labels) * static_cast<double>(idx.size());
    }
    return correct / static_cast<double>(n);
}

double pretrain_backbone(TinyCnn& model, const LabeledImageSet& train, const LabeledImageSet& val,
                         int epochs, double lr, int batch_size, uint64_t seed) {
    if (train.size() == 0) throw DataError("pretrain_backbone: empty training set");
    if (train.resolution != model.input_h)
        throw ShapeError("pretrain_backbone: dataset resolution does not match the model");
    std::vector<Tensor> params = model.parameters();
    OptimState opt = OptimState::create(params, lr);
    Rng rng(seed);
    std::vector<int> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (size_t start = 0; start < order.size(); start += batch_size) {
            std::vector<int> idx(order.begin() + start,
                                 order.begin() + std::min(order.size(),
                                                          start + static_cast<size_t>(batch_size)));
            std::vector<int> labels;
            Tensor xb = stack_batch(train, idx, &labels);
            for (Tensor& p : params) p.zero_grad();
            Tape tape;
            {
                TapeScope scope(tape);
                Tensor loss = cross_entropy(backbone_forward(xb, model, true), labels);
                backward(loss);
            }
            adam_step(params, opt);
        }
    }
    return backbone_top1(model, val, batch_size);
}

}  // namespace pacfno
