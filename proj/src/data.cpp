#include "sortpool/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace sortpool {

namespace {

constexpr std::uint32_t kImageMagic = 2051;
constexpr std::uint32_t kLabelMagic = 2049;

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

bool is_gzip(const std::vector<unsigned char>& bytes) {
    return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

std::vector<unsigned char> gunzip(const std::vector<unsigned char>& in, const std::string& path) {
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw Error("zlib init failed for " + path);
    std::vector<unsigned char> out;
    out.reserve(in.size() * 4);
    unsigned char buf[1 << 16];
    zs.next_in = const_cast<unsigned char*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = buf;
        zs.avail_out = sizeof(buf);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw Error("gzip decompression failed for " + path);
        }
        out.insert(out.end(), buf, buf + sizeof(buf) - zs.avail_out);
    }
    inflateEnd(&zs);
    return out;
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off, const std::string& path) {
    if (off + 4 > b.size()) throw Error("truncated IDX header in " + path);
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

void write_be32(std::vector<unsigned char>& b, std::uint32_t v) {
    b.push_back(static_cast<unsigned char>(v >> 24));
    b.push_back(static_cast<unsigned char>(v >> 16));
    b.push_back(static_cast<unsigned char>(v >> 8));
    b.push_back(static_cast<unsigned char>(v));
}

}  // namespace

Dataset Dataset::subset(const std::vector<std::size_t>& positions) const {
    std::size_t H = images.extent(2), W = images.extent(3);
    Dataset out;
    out.images = Tensor::zeros({positions.size(), 1, H, W});
    out.labels.reserve(positions.size());
    std::size_t plane = H * W;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        std::size_t p = positions[i];
        if (p >= size()) throw Error("dataset subset: position out of range");
        std::copy(images.data() + p * plane, images.data() + (p + 1) * plane,
                  out.images.data() + i * plane);
        out.labels.push_back(labels[p]);
    }
    return out;
}

Dataset Dataset::filter_classes(const std::vector<std::size_t>& classes) const {
    std::vector<std::size_t> keep;
    std::vector<std::size_t> relabel;
    for (std::size_t i = 0; i < size(); ++i) {
        auto it = std::find(classes.begin(), classes.end(), labels[i]);
        if (it != classes.end()) {
            keep.push_back(i);
            relabel.push_back(static_cast<std::size_t>(it - classes.begin()));
        }
    }
    Dataset out = subset(keep);
    out.labels = std::move(relabel);
    return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::vector<unsigned char> img = read_file(images_path);
    if (is_gzip(img)) img = gunzip(img, images_path);
    std::vector<unsigned char> lab = read_file(labels_path);
    if (is_gzip(lab)) lab = gunzip(lab, labels_path);

    std::uint32_t magic = read_be32(img, 0, images_path);
    if (magic != kImageMagic) {
        throw Error("bad image magic " + std::to_string(magic) + " in " + images_path +
                    " (expected 2051)");
    }
    std::uint32_t n = read_be32(img, 4, images_path);
    std::uint32_t rows = read_be32(img, 8, images_path);
    std::uint32_t cols = read_be32(img, 12, images_path);
    if (img.size() != 16 + std::size_t(n) * rows * cols) {
        throw Error("truncated image data in " + images_path);
    }

    std::uint32_t lmagic = read_be32(lab, 0, labels_path);
    if (lmagic != kLabelMagic) {
        throw Error("bad label magic " + std::to_string(lmagic) + " in " + labels_path +
                    " (expected 2049)");
    }
    std::uint32_t ln = read_be32(lab, 4, labels_path);
    if (lab.size() != 8 + std::size_t(ln)) throw Error("truncated label data in " + labels_path);
    if (ln != n) {
        throw Error("count mismatch: " + std::to_string(n) + " images vs " +
                    std::to_string(ln) + " labels");
    }

    Dataset ds;
    ds.images = Tensor::zeros({n, 1, rows, cols});
    std::size_t plane = std::size_t(rows) * cols;
    for (std::size_t i = 0; i < std::size_t(n) * plane; ++i) {
        ds.images[i] = static_cast<double>(img[16 + i]) / 255.0;
    }
    ds.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ds.labels.push_back(lab[8 + i]);
    return ds;
}

void save_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path) {
    std::size_t n = ds.size();
    std::size_t rows = ds.images.extent(2), cols = ds.images.extent(3);
    std::vector<unsigned char> img;
    img.reserve(16 + n * rows * cols);
    write_be32(img, kImageMagic);
    write_be32(img, static_cast<std::uint32_t>(n));
    write_be32(img, static_cast<std::uint32_t>(rows));
    write_be32(img, static_cast<std::uint32_t>(cols));
    for (std::size_t i = 0; i < n * rows * cols; ++i) {
        double v = ds.images[i];
        img.push_back(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    }
    std::vector<unsigned char> lab;
    lab.reserve(8 + n);
    write_be32(lab, kLabelMagic);
    write_be32(lab, static_cast<std::uint32_t>(n));
    for (std::size_t l : ds.labels) lab.push_back(static_cast<unsigned char>(l));

    std::ofstream oi(images_path, std::ios::binary);
    if (!oi) throw Error("cannot write " + images_path);
    oi.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
    std::ofstream ol(labels_path, std::ios::binary);
    if (!ol) throw Error("cannot write " + labels_path);
    ol.write(reinterpret_cast<const char*>(lab.data()), static_cast<std::streamsize>(lab.size()));
}

Dataset synthetic_dataset(std::uint64_t seed, std::size_t n, std::size_t classes) {
    if (n < 1 || classes < 1) throw Error("synthetic_dataset: n and classes must be >= 1");
    constexpr std::size_t H = 28, W = 28;
    Dataset ds;
    ds.images = Tensor::zeros({n, 1, H, W});
    ds.labels.reserve(n);
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t cls = i % classes;
        ds.labels.push_back(cls);
        double* img = ds.images.data() + i * H * W;

        // noise floor
        for (std::size_t p = 0; p < H * W; ++p) img[p] = rng.uniform(0.0, 0.15);

        // oriented bright band through a jittered center: the locally
        // consistent class feature
        double angle = 3.14159265358979323846 * static_cast<double>(cls) /
                       static_cast<double>(classes);
        double cx = 13.5 + rng.uniform(-3.0, 3.0);
        double cy = 13.5 + rng.uniform(-3.0, 3.0);
        double nx = std::sin(angle), ny = -std::cos(angle);  // band normal
        double half_len = 8.0 + rng.uniform(-1.5, 1.5);
        double amp = rng.uniform(0.55, 0.85);
        for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t x = 0; x < W; ++x) {
                double dx = static_cast<double>(x) - cx;
                double dy = static_cast<double>(y) - cy;
                double dist = std::abs(dx * nx + dy * ny);
                double along = std::abs(dx * std::cos(angle) + dy * std::sin(angle));
                if (dist < 2.0 && along < half_len) {
                    img[y * W + x] += amp * (1.0 - dist / 2.5) * rng.uniform(0.8, 1.0);
                }
            }
        }

        // isolated salt pixels: bright but locally inconsistent
        std::size_t salt = 6 + static_cast<std::size_t>(rng.next_below(6));
        for (std::size_t s = 0; s < salt; ++s) {
            std::size_t p = static_cast<std::size_t>(rng.next_below(H * W));
            img[p] = rng.uniform(0.85, 1.0);
        }

        for (std::size_t p = 0; p < H * W; ++p) img[p] = std::clamp(img[p], 0.0, 1.0);
    }
    return ds;
}

std::vector<std::size_t> epoch_permutation(const BatchPlan& plan, std::size_t epoch, std::size_t n) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    SplitMix64 rng(plan.seed + (static_cast<std::uint64_t>(epoch) + 1) * 0x9E3779B97F4A7C15ULL);
    rng.shuffle(perm);
    return perm;
}

Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& perm,
                 std::size_t start, std::size_t len) {
    std::vector<std::size_t> positions(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                       perm.begin() + static_cast<std::ptrdiff_t>(start + len));
    Dataset sub = ds.subset(positions);
    return Batch{std::move(sub.images), std::move(sub.labels)};
}

std::vector<Batch> batches(const Dataset& ds, const BatchPlan& plan, std::size_t epoch) {
    if (plan.batch_size < 1 || plan.batch_size > ds.size()) {
        throw Error("batches: batch_size must be in [1, dataset size]");
    }
    std::vector<std::size_t> perm = epoch_permutation(plan, epoch, ds.size());
    std::vector<Batch> out;
    for (std::size_t start = 0; start < ds.size(); start += plan.batch_size) {
        std::size_t len = std::min(plan.batch_size, ds.size() - start);
        out.push_back(make_batch(ds, perm, start, len));
    }
    return out;
}

}  // namespace sortpool
