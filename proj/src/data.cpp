#include "pacfno/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "pacfno/rng.hpp"
#include "pacfno/spectral.hpp"

namespace fs = std::filesystem;

namespace pacfno {

namespace {

constexpr int kShapeVocabulary = 8;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

struct Pose {
    double cx, cy;     // center in [0,1] coordinates
    double scale;      // shape radius as a fraction of the image
    double rot;        // radians
    double fg[3], bg[3];
};

// Signed distance of point (x,y) to the class shape in unit coordinates
// (negative inside). Shapes are confusable under large rotations (square vs
// diamond), so poses only jitter within +-15 degrees.
double shape_sdf(int cls, double x, double y) {
    double r;
    switch (cls) {
        case 0:  // circle
            return std::hypot(x, y) - 1.0;
        case 1: {  // square
            double dx = std::abs(x) - 0.82, dy = std::abs(y) - 0.82;
            return std::max(dx, dy);
        }
        case 2: {  // triangle (upward)
            double d = std::max({0.866 * x + 0.5 * y, -0.866 * x + 0.5 * y, -y - 0.5});
            return d - 0.5;
        }
        case 3: {  // cross
            double dh = std::max(std::abs(x) - 1.0, std::abs(y) - 0.34);
            double dv = std::max(std::abs(x) - 0.34, std::abs(y) - 1.0);
            return std::min(dh, dv);
        }
        case 4:  // ring
            r = std::hypot(x, y);
            return std::abs(r - 0.72) - 0.28;
        case 5:  // bar
            return std::max(std::abs(x) - 1.0, std::abs(y) - 0.3);
        case 6:  // diamond (L1 ball)
            return (std::abs(x) + std::abs(y)) - 1.05;
        case 7: {  // dot grid
            double px = std::fmod(std::abs(x) + 0.35, 0.7) - 0.35;
            double py = std::fmod(std::abs(y) + 0.35, 0.7) - 0.35;
            double dots = std::hypot(px, py) - 0.21;
            double bounds = std::max(std::abs(x) - 0.85, std::abs(y) - 0.85);
            return std::max(dots, bounds);
        }
        default:
            throw ConfigError("gen_shapes: class id out of the vocabulary");
    }
}

Tensor render_shape(int cls, const Pose& pose, int res, Rng& rng) {
    Tensor img = Tensor::zeros({3, res, res});
    const double aa = 1.0 / res;  // ~1 pixel anti-aliasing band
    const double cosr = std::cos(pose.rot), sinr = std::sin(pose.rot);
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            double ux = (x + 0.5) / res - pose.cx;
            double uy = (y + 0.5) / res - pose.cy;
            double rx = (cosr * ux + sinr * uy) / pose.scale;
            double ry = (-sinr * ux + cosr * uy) / pose.scale;
            double sd = shape_sdf(cls, rx, ry) * pose.scale;
            double alpha = std::clamp(0.5 - sd / aa, 0.0, 1.0);
            for (int c = 0; c < 3; ++c) {
                double v = pose.bg[c] + alpha * (pose.fg[c] - pose.bg[c]);
                v += rng.normal(0.0, 0.02);
                img.data()[(static_cast<int64_t>(c) * res + y) * res + x] = clamp01(v);
            }
        }
    return img;
}

}  // namespace

LabeledImageSet gen_shapes(uint64_t seed, int count, int classes, int resolution) {
    if (classes < 1 || classes > kShapeVocabulary)
        throw ConfigError("gen_shapes: K must be between 1 and 8");
    if (resolution < 16) throw ConfigError("gen_shapes: resolution must be >= 16");
    LabeledImageSet set;
    set.class_count = classes;
    set.resolution = resolution;
    set.provenance = "synthetic:" + std::to_string(seed);
    for (int i = 0; i < count; ++i) {
        int cls = i % classes;  // balanced by construction
        Rng rng = Rng::substream(seed, static_cast<uint64_t>(i));
        Pose pose;
        pose.cx = rng.uniform(0.38, 0.62);
        pose.cy = rng.uniform(0.38, 0.62);
        pose.scale = rng.uniform(0.24, 0.40);
        pose.rot = rng.uniform(-M_PI / 12.0, M_PI / 12.0);
        for (int c = 0; c < 3; ++c) {
            pose.fg[c] = rng.uniform(0.60, 1.0);
            pose.bg[c] = rng.uniform(0.0, 0.30);
        }
        set.images.push_back(render_shape(cls, pose, resolution, rng));
        set.labels.push_back(cls);
    }
    return set;
}

namespace {

uint32_t read_be32(std::istream& in, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw DataError(std::string("load_idx: truncated ") + what);
    return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
           (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

}  // namespace

LabeledImageSet load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgf(images_path, std::ios::binary);
    if (!imgf) throw DataError("load_idx: cannot open " + images_path);
    if (read_be32(imgf, "image header") != 0x00000803u)
        throw DataError("load_idx: bad image magic");
    uint32_t n = read_be32(imgf, "image count");
    uint32_t rows = read_be32(imgf, "rows");
    uint32_t cols = read_be32(imgf, "cols");

    std::ifstream labf(labels_path, std::ios::binary);
    if (!labf) throw DataError("load_idx: cannot open " + labels_path);
    if (read_be32(labf, "label header") != 0x00000801u)
        throw DataError("load_idx: bad label magic");
    uint32_t ln = read_be32(labf, "label count");
    if (ln != n) throw DataError("load_idx: image/label count mismatch");

    LabeledImageSet set;
    set.resolution = static_cast<int>(rows);
    set.provenance = images_path;
    std::vector<unsigned char> pix(static_cast<size_t>(rows) * cols);
    int max_label = -1;
    for (uint32_t i = 0; i < n; ++i) {
        imgf.read(reinterpret_cast<char*>(pix.data()), pix.size());
        if (!imgf) throw DataError("load_idx: truncated image payload");
        Tensor t = Tensor::zeros({3, static_cast<int>(rows), static_cast<int>(cols)});
        for (size_t p = 0; p < pix.size(); ++p) {
            double v = pix[p] / 255.0;
            t.data()[p] = v;
            t.data()[pix.size() + p] = v;
            t.data()[2 * pix.size() + p] = v;
        }
        set.images.push_back(std::move(t));
        int lab = labf.get();
        if (lab == EOF) throw DataError("load_idx: truncated label payload");
        set.labels.push_back(lab);
        max_label = std::max(max_label, lab);
    }
    set.class_count = max_label + 1;
    return set;
}

MultiResDataset make_multires(const LabeledImageSet& src, const std::vector<int>& resolutions) {
    MultiResDataset out;
    out.target_resolution = src.resolution;
    for (int r : resolutions) {
        if (r > src.resolution) throw ConfigError("make_multires: upscale request");
        if (r == src.resolution) {
            out.by_resolution[r] = src;
            continue;
        }
        LabeledImageSet low;
        low.labels = src.labels;
        low.class_count = src.class_count;
        low.resolution = r;
        low.split = src.split;
        low.provenance = src.provenance;
        for (const Tensor& img : src.images) low.images.push_back(bilinear_resize(img, r, r));
        out.by_resolution[r] = std::move(low);
    }
    if (out.by_resolution.find(src.resolution) == out.by_resolution.end())
        out.by_resolution[src.resolution] = src;
    return out;
}

CorruptionKind corruption_from_name(const std::string& name) {
    if (name == "gaussian_noise") return CorruptionKind::kGaussianNoise;
    if (name == "brightness") return CorruptionKind::kBrightness;
    if (name == "contrast") return CorruptionKind::kContrast;
    if (name == "pixelate") return CorruptionKind::kPixelate;
    if (name == "fog") return CorruptionKind::kFog;
    throw ConfigError("unknown corruption kind: " + name);
}

std::string corruption_name(CorruptionKind kind) {
    switch (kind) {
        case CorruptionKind::kGaussianNoise: return "gaussian_noise";
        case CorruptionKind::kBrightness: return "brightness";
        case CorruptionKind::kContrast: return "contrast";
        case CorruptionKind::kPixelate: return "pixelate";
        case CorruptionKind::kFog: return "fog";
    }
    throw ConfigError("unknown corruption kind");
}

namespace {

// Diamond-square plasma with wrap-around edges on a power-of-two grid,
// min-max normalized to [0,1].
std::vector<double> plasma_field(int h, int w, uint64_t seed) {
    int size = 1;
    while (size < std::max(h, w)) size <<= 1;
    size = std::max(size, 4);
    std::vector<double> g(static_cast<size_t>(size) * size, 0.0);
    Rng rng(seed);
    auto at = [&](int y, int x) -> double& {
        return g[static_cast<size_t>((y + size) % size) * size + ((x + size) % size)];
    };
    at(0, 0) = rng.uniform();
    double amp = 1.0;
    const double decay = 0.6;
    for (int step = size; step > 1; step /= 2) {
        int half = step / 2;
        // diamond: centers of squares
        for (int y = 0; y < size; y += step)
            for (int x = 0; x < size; x += step) {
                double avg = (at(y, x) + at(y, x + step) + at(y + step, x) +
                              at(y + step, x + step)) * 0.25;
                at(y + half, x + half) = avg + amp * (rng.uniform() - 0.5);
            }
        // square: edge midpoints
        for (int y = 0; y < size; y += half)
            for (int x = (y / half % 2 == 0) ? half : 0; x < size; x += step) {
                double avg = (at(y - half, x) + at(y + half, x) + at(y, x - half) +
                              at(y, x + half)) * 0.25;
                at(y, x) = avg + amp * (rng.uniform() - 0.5);
            }
        amp *= decay;
    }
    double lo = g[0], hi = g[0];
    for (double v : g) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double span = (hi > lo) ? hi - lo : 1.0;
    std::vector<double> out(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out[static_cast<size_t>(y) * w + x] = (g[static_cast<size_t>(y) * size + x] - lo) / span;
    return out;
}

}  // namespace

Tensor corrupt(const Tensor& x, CorruptionKind kind, int severity, uint64_t seed) {
    if (x.rank() != 3 || x.extent(0) != 3) throw ShapeError("corrupt: expected [3,H,W]");
    if (severity < 0 || severity > 5) throw ConfigError("corrupt: severity out of range 0..5");
    const int h = x.extent(1), w = x.extent(2);
    Tensor out = x.detach_copy();
    if (severity == 0) return out;  // exposed identity limit
    const int s = severity - 1;

    // Severity constants tuned for visible-but-learnable distortion at 32x32.
    static const double kNoiseSigma[5] = {0.04, 0.06, 0.08, 0.09, 0.10};
    static const double kBrightness[5] = {0.1, 0.2, 0.3, 0.4, 0.5};
    static const double kContrast[5] = {0.75, 0.5, 0.4, 0.3, 0.15};
    static const double kPixelate[5] = {1.25, 1.5, 2.0, 3.0, 4.0};
    static const double kFogMix[5] = {0.15, 0.25, 0.35, 0.45, 0.5};

    switch (kind) {
        case CorruptionKind::kGaussianNoise: {
            Rng rng(seed);
            for (int64_t i = 0; i < out.size(); ++i)
                out.data()[i] = clamp01(out.data()[i] + rng.normal(0.0, kNoiseSigma[s]));
            break;
        }
        case CorruptionKind::kBrightness: {
            for (int64_t i = 0; i < out.size(); ++i)
                out.data()[i] = clamp01(out.data()[i] + kBrightness[s]);
            break;
        }
        case CorruptionKind::kContrast: {
            for (int c = 0; c < 3; ++c) {
                double mean = 0.0;
                double* ch = out.data() + static_cast<int64_t>(c) * h * w;
                for (int i = 0; i < h * w; ++i) mean += ch[i];
                mean /= h * w;
                for (int i = 0; i < h * w; ++i)
                    ch[i] = clamp01((ch[i] - mean) * kContrast[s] + mean);
            }
            break;
        }
        case CorruptionKind::kPixelate: {
            int lh = std::max(1, static_cast<int>(std::lround(h / kPixelate[s])));
            int lw = std::max(1, static_cast<int>(std::lround(w / kPixelate[s])));
            Tensor small = bilinear_resize(out, lh, lw);
            Tensor up = nearest_resize(small, h, w);
            for (int64_t i = 0; i < out.size(); ++i) out.data()[i] = clamp01(up.data()[i]);
            break;
        }
        case CorruptionKind::kFog: {
            auto plasma = plasma_field(h, w, seed);
            double t = kFogMix[s];
            for (int c = 0; c < 3; ++c) {
                double* ch = out.data() + static_cast<int64_t>(c) * h * w;
                for (int i = 0; i < h * w; ++i)
                    ch[i] = clamp01(ch[i] * (1.0 - t) + t * plasma[i]);
            }
            break;
        }
    }
    return out;
}

void write_ppm(const Tensor& x, const std::string& path) {
    if (x.rank() != 3 || x.extent(0) != 3) throw ShapeError("write_ppm: expected [3,H,W]");
    const int h = x.extent(1), w = x.extent(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("write_ppm: cannot open " + path);
    out << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(static_cast<size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        for (int z = 0; z < w; ++z)
            for (int c = 0; c < 3; ++c) {
                double v = x.data()[(static_cast<int64_t>(c) * h + y) * w + z];
                row[static_cast<size_t>(z) * 3 + c] =
                    static_cast<unsigned char>(std::lround(clamp01(v) * 255.0));
            }
        out.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
    if (!out) throw DataError("write_ppm: write failed for " + path);
}

namespace {

int ppm_token(std::istream& in) {
    // Skips whitespace and # comments, then reads one unsigned integer.
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF || !std::isdigit(c)) throw DataError("read_ppm: malformed header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
    }
    return value;
}

}  // namespace

Tensor read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("read_ppm: cannot open " + path);
    char magic[2];
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '6') throw DataError("read_ppm: malformed header");
    int w = ppm_token(in);
    int h = ppm_token(in);
    int maxval = ppm_token(in);
    if (maxval != 255) throw DataError("read_ppm: only maxval 255 supported");
    std::vector<unsigned char> payload(static_cast<size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(payload.data()), payload.size());
    if (static_cast<size_t>(in.gcount()) != payload.size())
        throw DataError("read_ppm: truncated payload");
    Tensor t = Tensor::zeros({3, h, w});
    for (int y = 0; y < h; ++y)
        for (int z = 0; z < w; ++z)
            for (int c = 0; c < 3; ++c)
                t.data()[(static_cast<int64_t>(c) * h + y) * w + z] =
                    payload[(static_cast<size_t>(y) * w + z) * 3 + c] / 255.0;
    return t;
}

void save_set_ppm(const LabeledImageSet& set, const std::string& root) {
    fs::path dir = fs::path(root) / set.split / std::to_string(set.resolution);
    fs::create_directories(dir);
    for (size_t i = 0; i < set.images.size(); ++i) {
        std::string name = std::to_string(i) + "_" + std::to_string(set.labels[i]) + ".ppm";
        write_ppm(set.images[i], (dir / name).string());
    }
}

LabeledImageSet load_set_ppm(const std::string& root, const std::string& split, int resolution) {
    fs::path dir = fs::path(root) / split / std::to_string(resolution);
    if (!fs::exists(dir)) throw DataError("load_set_ppm: no such directory " + dir.string());
    std::vector<std::pair<int, fs::path>> entries;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() != ".ppm") continue;
        std::string stem = e.path().stem().string();
        size_t us = stem.find('_');
        if (us == std::string::npos) throw DataError("load_set_ppm: bad file name " + stem);
        entries.push_back({std::stoi(stem.substr(0, us)), e.path()});
    }
    std::sort(entries.begin(), entries.end());
    LabeledImageSet set;
    set.split = split;
    set.resolution = resolution;
    set.provenance = root;
    int max_label = -1;
    for (auto& [index, path] : entries) {
        std::string stem = path.stem().string();
        int label = std::stoi(stem.substr(stem.find('_') + 1));
        set.images.push_back(read_ppm(path.string()));
        set.labels.push_back(label);
        max_label = std::max(max_label, label);
    }
    set.class_count = max_label + 1;
    return set;
}

Tensor stack_batch(const LabeledImageSet& set, const std::vector<int>& indices,
                   std::vector<int>* labels_out) {
    if (indices.empty()) throw DataError("stack_batch: empty index list");
    const Tensor& first = set.images[indices[0]];
    int c = first.extent(0), h = first.extent(1), w = first.extent(2);
    Tensor out = Tensor::zeros({static_cast<int>(indices.size()), c, h, w});
    int64_t per = static_cast<int64_t>(c) * h * w;
    if (labels_out) labels_out->clear();
    for (size_t i = 0; i < indices.size(); ++i) {
        const Tensor& img = set.images[indices[i]];
        if (img.size() != per) throw ShapeError("stack_batch: non-uniform image shapes");
        std::memcpy(out.data() + static_cast<int64_t>(i) * per, img.data(), per * sizeof(double));
        if (labels_out) labels_out->push_back(set.labels[indices[i]]);
    }
    return out;
}

}  // namespace pacfno
