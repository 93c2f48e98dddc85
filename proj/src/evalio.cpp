#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pacfno/eval.hpp"

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace pacfno {

// ---------------------------------------------------------------- reporting

void EvalReport::write_csv(const std::string& path) const {
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("EvalReport: cannot open " + tmp.string());
        char buf[256];
        std::snprintf(buf, sizeof(buf), "# seed=%" PRIu64 "\n", seed);
        out << buf;
        out << "# config=" << config_digest << "\n";
        out << "method,resolution,corruption,severity,top1,relative,n\n";
        for (const EvalRow& r : rows) {
            std::string rel;
            if (r.relative >= 0.0) {
                std::snprintf(buf, sizeof(buf), "%.6f", r.relative);
                rel = buf;
            }
            std::snprintf(buf, sizeof(buf), "%s,%d,%s,%d,%.6f,%s,%d\n", r.method.c_str(),
                          r.resolution, r.corruption.c_str(), r.severity, r.top1, rel.c_str(),
                          r.n_samples);
            out << buf;
        }
    }
    fs::rename(tmp, target);  // atomic publish
}

EvalReport EvalReport::read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("EvalReport: cannot open " + path);
    EvalReport report;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("# seed=", 0) == 0) report.seed = std::stoull(line.substr(7));
            if (line.rfind("# config=", 0) == 0) report.config_digest = line.substr(9);
            continue;
        }
        if (!header_seen) {  // column header
            header_seen = true;
            continue;
        }
        std::stringstream ss(line);
        std::string field;
        EvalRow row;
        std::getline(ss, row.method, ',');
        std::getline(ss, field, ',');
        row.resolution = std::stoi(field);
        std::getline(ss, row.corruption, ',');
        std::getline(ss, field, ',');
        row.severity = std::stoi(field);
        std::getline(ss, field, ',');
        row.top1 = std::stod(field);
        std::getline(ss, field, ',');
        row.relative = field.empty() ? -1.0 : std::stod(field);
        std::getline(ss, field, ',');
        row.n_samples = std::stoi(field);
        report.rows.push_back(std::move(row));
    }
    return report;
}

const EvalRow* EvalReport::find(const std::string& method, int resolution,
                                const std::string& corruption, int severity) const {
    for (const EvalRow& r : rows)
        if (r.method == method && r.resolution == resolution && r.corruption == corruption &&
            r.severity == severity)
            return &r;
    return nullptr;
}

void fill_relative(EvalReport& report, int target_resolution) {
    for (EvalRow& r : report.rows) {
        const EvalRow* target = report.find(r.method, target_resolution, r.corruption, r.severity);
        if (target != nullptr && target->top1 > 0.0)
            r.relative = relative_accuracy(r.top1, target->top1);
    }
}

// ---------------------------------------------------------------- run config

namespace {

json plan_to_json(const TrainPlan& p) {
    return json{{"k_first", p.k_first},   {"k_second", p.k_second},
                {"lr_first", p.lr_first}, {"lr_second", p.lr_second},
                {"delta", p.delta},       {"batch_size", p.batch_size}};
}

TrainPlan plan_from_json(const json& j) {
    TrainPlan p;
    p.k_first = j.value("k_first", p.k_first);
    p.k_second = j.value("k_second", p.k_second);
    p.lr_first = j.value("lr_first", p.lr_first);
    p.lr_second = j.value("lr_second", p.lr_second);
    p.delta = j.value("delta", p.delta);
    p.batch_size = j.value("batch_size", p.batch_size);
    return p;
}

}  // namespace

std::string config_to_json(const RunConfig& c) {
    json j;
    j["target_resolution"] = c.target_resolution;
    j["training_resolutions"] = c.training_resolutions;
    j["eval_resolutions"] = c.eval_resolutions;
    j["m"] = c.m;
    j["n"] = c.n;
    j["mode"] = c.mode;
    j["plan"] = plan_to_json(c.plan);
    j["backbone_widths"] = c.backbone_widths;
    j["pretrain_epochs"] = c.pretrain_epochs;
    j["pretrain_lr"] = c.pretrain_lr;
    j["dataset"] = json{{"kind", c.dataset.kind},
                        {"classes", c.dataset.classes},
                        {"train_count", c.dataset.train_count},
                        {"val_count", c.dataset.val_count},
                        {"test_count", c.dataset.test_count},
                        {"images_path", c.dataset.images_path},
                        {"labels_path", c.dataset.labels_path},
                        {"root", c.dataset.root}};
    json corr = json::array();
    for (const CorruptionSpec& s : c.corruptions)
        corr.push_back(json{{"kind", s.kind}, {"severity", s.severity}});
    j["corruptions"] = corr;
    j["baselines"] = c.baselines;
    j["out_dir"] = c.out_dir;
    j["seed"] = c.seed;
    return j.dump(2);
}

RunConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    RunConfig c;
    try {
        c.target_resolution = j.value("target_resolution", c.target_resolution);
        if (j.contains("training_resolutions"))
            c.training_resolutions = j["training_resolutions"].get<std::vector<int>>();
        if (j.contains("eval_resolutions"))
            c.eval_resolutions = j["eval_resolutions"].get<std::vector<int>>();
        c.m = j.value("m", c.m);
        c.n = j.value("n", c.n);
        c.mode = j.value("mode", c.mode);
        if (j.contains("plan")) c.plan = plan_from_json(j["plan"]);
        if (j.contains("backbone_widths"))
            c.backbone_widths = j["backbone_widths"].get<std::vector<int>>();
        c.pretrain_epochs = j.value("pretrain_epochs", c.pretrain_epochs);
        c.pretrain_lr = j.value("pretrain_lr", c.pretrain_lr);
        if (j.contains("dataset")) {
            const json& d = j["dataset"];
            c.dataset.kind = d.value("kind", c.dataset.kind);
            c.dataset.classes = d.value("classes", c.dataset.classes);
            c.dataset.train_count = d.value("train_count", c.dataset.train_count);
            c.dataset.val_count = d.value("val_count", c.dataset.val_count);
            c.dataset.test_count = d.value("test_count", c.dataset.test_count);
            c.dataset.images_path = d.value("images_path", c.dataset.images_path);
            c.dataset.labels_path = d.value("labels_path", c.dataset.labels_path);
            c.dataset.root = d.value("root", c.dataset.root);
        }
        if (j.contains("corruptions")) {
            c.corruptions.clear();
            for (const json& s : j["corruptions"])
                c.corruptions.push_back({s.value("kind", "fog"), s.value("severity", 3)});
        }
        if (j.contains("baselines")) c.baselines = j["baselines"].get<std::vector<std::string>>();
        c.out_dir = j.value("out_dir", c.out_dir);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    return c;
}

RunConfig config_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return config_from_json_text(buffer.str());
}

std::string config_digest(const RunConfig& config) {
    // Canonical form: nlohmann objects serialize with sorted keys.
    RunConfig canonical = config;
    canonical.out_dir = "";  // digest identifies the experiment, not its output location
    std::string text = config_to_json(canonical);
    uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, hash);
    return buf;
}

LayerMode mode_from_name(const std::string& name) {
    if (name == "vanilla") return LayerMode::kVanilla;
    if (name == "all-component") return LayerMode::kAllComponent;
    if (name == "lowpass") return LayerMode::kLowpassAblation;
    if (name == "highpass") return LayerMode::kHighpassAblation;
    throw ConfigError("unknown layer mode: " + name);
}

void validate_config(const RunConfig& c) {
    if (c.m < 1 || c.n < 1) throw ConfigError("config: m and n must be >= 1");
    if (c.target_resolution < 4) throw ConfigError("config: target resolution too small");
    mode_from_name(c.mode);
    for (int r : c.training_resolutions) {
        if (r > c.target_resolution)
            throw ConfigError("config: training resolution exceeds the target");
        bool known = r == c.target_resolution;
        for (int e : c.eval_resolutions) known = known || (e == r);
        if (!known)
            throw ConfigError("config: training resolutions must be eval resolutions or target");
    }
    if (c.plan.lr_first < 0 || c.plan.lr_second < 0 || c.plan.delta < 0)
        throw ConfigError("config: plan values must be non-negative");
    if (c.plan.batch_size < 1) throw ConfigError("config: batch size must be >= 1");
    if (c.dataset.kind != "synthetic" && c.dataset.kind != "idx" && c.dataset.kind != "ppm")
        throw ConfigError("config: unknown dataset kind " + c.dataset.kind);
    int div = 1 << static_cast<int>(c.backbone_widths.size());
    if (c.target_resolution % div != 0)
        throw ConfigError("config: target resolution must divide 2^stages of the backbone");
    for (const CorruptionSpec& s : c.corruptions) {
        corruption_from_name(s.kind);
        if (s.severity < 1 || s.severity > 5)
            throw ConfigError("config: corruption severity out of range");
    }
    for (const std::string& b : c.baselines) {
        if (b == "finetune") continue;
        if (b.rfind("resize-", 0) == 0) {
            interp_from_name(b.substr(7));
            continue;
        }
        throw ConfigError("config: unknown baseline " + b);
    }
}

// ---------------------------------------------------------------- checkpoint

namespace {

constexpr uint32_t kCheckpointVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
}

uint32_t get_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw DataError(std::string("checkpoint: truncated ") + what);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<char*>(b), 8);
}

double get_f64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw DataError("checkpoint: truncated payload");
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, const char* what) {
    uint32_t len = get_u32(in, what);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw DataError(std::string("checkpoint: truncated ") + what);
    return s;
}

}  // namespace

void write_blobs(const std::string& path, const std::string& digest, const BlobMap& blobs) {
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("checkpoint: cannot open " + tmp.string());
        out.write("PACF", 4);
        put_u32(out, kCheckpointVersion);
        put_string(out, digest);
        put_u32(out, static_cast<uint32_t>(blobs.size()));
        for (const auto& [name, blob] : blobs) {
            put_string(out, name);
            put_u32(out, static_cast<uint32_t>(blob.shape.size()));
            for (int e : blob.shape) put_u32(out, static_cast<uint32_t>(e));
            for (double v : blob.data) put_f64(out, v);
        }
        if (!out) throw DataError("checkpoint: write failed");
    }
    fs::rename(tmp, target);
}

BlobMap read_blobs(const std::string& path, const std::string& expected_digest) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "PACF", 4) != 0)
        throw DataError("checkpoint: bad magic");
    uint32_t version = get_u32(in, "version");
    if (version != kCheckpointVersion)
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    std::string digest = get_string(in, "digest");
    if (!expected_digest.empty() && digest != expected_digest)
        throw DataError("checkpoint: config digest mismatch");
    uint32_t count = get_u32(in, "blob count");
    BlobMap blobs;
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = get_string(in, "blob name");
        uint32_t rank = get_u32(in, "blob rank");
        Blob blob;
        int64_t total = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            int e = static_cast<int>(get_u32(in, "blob extent"));
            blob.shape.push_back(e);
            total *= e;
        }
        blob.data.resize(total);
        for (int64_t v = 0; v < total; ++v) blob.data[v] = get_f64(in);
        blobs[name] = std::move(blob);
    }
    return blobs;
}

namespace {

void add_tensor(BlobMap& blobs, const std::string& name, const Tensor& t) {
    blobs[name] = Blob{t.shape(), std::vector<double>(t.data(), t.data() + t.size())};
}

void add_vector(BlobMap& blobs, const std::string& name, const std::vector<double>& v) {
    blobs[name] = Blob{{static_cast<int>(v.size())}, v};
}

void restore_tensor(const BlobMap& blobs, const std::string& name, Tensor& t) {
    auto it = blobs.find(name);
    if (it == blobs.end()) throw DataError("checkpoint: missing blob " + name);
    if (it->second.shape != t.shape())
        throw ShapeError("checkpoint: shape mismatch for " + name);
    std::copy(it->second.data.begin(), it->second.data.end(), t.data());
}

void restore_vector(const BlobMap& blobs, const std::string& name, std::vector<double>& v) {
    auto it = blobs.find(name);
    if (it == blobs.end()) throw DataError("checkpoint: missing blob " + name);
    if (it->second.data.size() != v.size())
        throw ShapeError("checkpoint: shape mismatch for " + name);
    v = it->second.data;
}

}  // namespace

void checkpoint_save(const std::string& path, const std::string& digest, PacFnoLayer& layer,
                     TinyCnn& backbone, const OptimState* optim) {
    BlobMap blobs;
    for (int b = 0; b < layer.branches; ++b)
        for (int s = 0; s < layer.stages; ++s) {
            std::string prefix = "layer/block" + std::to_string(b) + "_" + std::to_string(s) + "/";
            FnoBlockParams& p = layer.block(b, s);
            add_tensor(blobs, prefix + "filter", p.filter.weight);
            add_tensor(blobs, prefix + "conv_w", p.conv_weight);
            add_tensor(blobs, prefix + "conv_b", p.conv_bias);
        }
    add_tensor(blobs, "layer/fusion_w", layer.fusion_weight);
    add_tensor(blobs, "layer/fusion_b", layer.fusion_bias);
    add_tensor(blobs, "layer/bn_gamma", layer.bn.gamma);
    add_tensor(blobs, "layer/bn_beta", layer.bn.beta);
    add_vector(blobs, "layer/bn_rmean", layer.bn.running_mean);
    add_vector(blobs, "layer/bn_rvar", layer.bn.running_var);
    for (size_t i = 0; i < backbone.stages.size(); ++i) {
        std::string prefix = "backbone/stage" + std::to_string(i) + "/";
        ConvStage& st = backbone.stages[i];
        add_tensor(blobs, prefix + "conv_w", st.weight);
        add_tensor(blobs, prefix + "conv_b", st.bias);
        add_tensor(blobs, prefix + "bn_gamma", st.bn.gamma);
        add_tensor(blobs, prefix + "bn_beta", st.bn.beta);
        add_vector(blobs, prefix + "bn_rmean", st.bn.running_mean);
        add_vector(blobs, prefix + "bn_rvar", st.bn.running_var);
    }
    add_tensor(blobs, "backbone/head_w", backbone.head_weight);
    add_tensor(blobs, "backbone/head_b", backbone.head_bias);
    if (optim != nullptr) {
        add_vector(blobs, "optim/step", {static_cast<double>(optim->step)});
        for (size_t i = 0; i < optim->m.size(); ++i) {
            add_vector(blobs, "optim/m" + std::to_string(i), optim->m[i]);
            add_vector(blobs, "optim/v" + std::to_string(i), optim->v[i]);
        }
    }
    write_blobs(path, digest, blobs);
}

void checkpoint_load(const std::string& path, const std::string& digest, PacFnoLayer& layer,
                     TinyCnn& backbone, OptimState* optim) {
    BlobMap blobs = read_blobs(path, digest);
    for (int b = 0; b < layer.branches; ++b)
        for (int s = 0; s < layer.stages; ++s) {
            std::string prefix = "layer/block" + std::to_string(b) + "_" + std::to_string(s) + "/";
            FnoBlockParams& p = layer.block(b, s);
            restore_tensor(blobs, prefix + "filter", p.filter.weight);
            restore_tensor(blobs, prefix + "conv_w", p.conv_weight);
            restore_tensor(blobs, prefix + "conv_b", p.conv_bias);
        }
    restore_tensor(blobs, "layer/fusion_w", layer.fusion_weight);
    restore_tensor(blobs, "layer/fusion_b", layer.fusion_bias);
    restore_tensor(blobs, "layer/bn_gamma", layer.bn.gamma);
    restore_tensor(blobs, "layer/bn_beta", layer.bn.beta);
    restore_vector(blobs, "layer/bn_rmean", layer.bn.running_mean);
    restore_vector(blobs, "layer/bn_rvar", layer.bn.running_var);
    for (size_t i = 0; i < backbone.stages.size(); ++i) {
        std::string prefix = "backbone/stage" + std::to_string(i) + "/";
        ConvStage& st = backbone.stages[i];
        restore_tensor(blobs, prefix + "conv_w", st.weight);
        restore_tensor(blobs, prefix + "conv_b", st.bias);
        restore_tensor(blobs, prefix + "bn_gamma", st.bn.gamma);
        restore_tensor(blobs, prefix + "bn_beta", st.bn.beta);
        restore_vector(blobs, prefix + "bn_rmean", st.bn.running_mean);
        restore_vector(blobs, prefix + "bn_rvar", st.bn.running_var);
    }
    restore_tensor(blobs, "backbone/head_w", backbone.head_weight);
    restore_tensor(blobs, "backbone/head_b", backbone.head_bias);
    if (optim != nullptr) {
        std::vector<double> step(1);
        restore_vector(blobs, "optim/step", step);
        optim->step = static_cast<int64_t>(step[0]);
        for (size_t i = 0; i < optim->m.size(); ++i) {
            restore_vector(blobs, "optim/m" + std::to_string(i), optim->m[i]);
            restore_vector(blobs, "optim/v" + std::to_string(i), optim->v[i]);
        }
    }
}

}  // namespace pacfno
