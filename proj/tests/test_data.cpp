#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "sortpool/data.hpp"

using namespace sortpool;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() / "sortpool_data_test";
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

Dataset one_image_fixture(double value) {
    Dataset ds;
    ds.images = Tensor::full({1, 1, 28, 28}, value);
    ds.labels = {7};
    return ds;
}

void gzip_file(const std::string& src, const std::string& dst) {
    std::ifstream in(src, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    gzFile gz = gzopen(dst.c_str(), "wb");
    REQUIRE(gz != nullptr);
    gzwrite(gz, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(gz);
}

}  // namespace

TEST_CASE("IDX round-trip: all-255 pixels load as 1.0") {
    TempDir dir;
    save_idx(one_image_fixture(1.0), dir.file("img"), dir.file("lab"));
    Dataset ds = load_idx(dir.file("img"), dir.file("lab"));
    REQUIRE(ds.size() == 1);
    CHECK(ds.labels[0] == 7);
    CHECK(ds.images.shape() == std::vector<std::size_t>{1, 1, 28, 28});
    for (std::size_t i = 0; i < ds.images.size(); ++i) CHECK(ds.images[i] == 1.0);
}

TEST_CASE("IDX gzip files accepted") {
    TempDir dir;
    save_idx(one_image_fixture(0.5), dir.file("img"), dir.file("lab"));
    gzip_file(dir.file("img"), dir.file("img.gz"));
    gzip_file(dir.file("lab"), dir.file("lab.gz"));
    Dataset raw = load_idx(dir.file("img"), dir.file("lab"));
    Dataset gz = load_idx(dir.file("img.gz"), dir.file("lab.gz"));
    CHECK(raw.images.values() == gz.images.values());
    CHECK(raw.labels == gz.labels);
}

TEST_CASE("IDX magic numbers enforced") {
    TempDir dir;
    save_idx(one_image_fixture(1.0), dir.file("img"), dir.file("lab"));

    // corrupt the image magic
    {
        std::fstream f(dir.file("img"), std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(3);
        f.put(0x04);
    }
    CHECK_THROWS_WITH_AS(load_idx(dir.file("img"), dir.file("lab")),
                         doctest::Contains("magic"), Error);

    // labels passed where images are expected
    save_idx(one_image_fixture(1.0), dir.file("img"), dir.file("lab"));
    CHECK_THROWS_WITH_AS(load_idx(dir.file("lab"), dir.file("lab")),
                         doctest::Contains("magic"), Error);
}

TEST_CASE("IDX truncation and count mismatch rejected") {
    TempDir dir;
    Dataset two;
    two.images = Tensor::full({2, 1, 28, 28}, 0.1);
    two.labels = {1, 2};
    save_idx(two, dir.file("img"), dir.file("lab"));
    save_idx(one_image_fixture(1.0), dir.file("img1"), dir.file("lab1"));

    CHECK_THROWS_WITH_AS(load_idx(dir.file("img"), dir.file("lab1")),
                         doctest::Contains("count mismatch"), Error);

    std::filesystem::resize_file(dir.file("img"), 100);
    CHECK_THROWS_WITH_AS(load_idx(dir.file("img"), dir.file("lab")),
                         doctest::Contains("truncated"), Error);

    CHECK_THROWS_AS(load_idx(dir.file("missing"), dir.file("lab")), Error);
}

TEST_CASE("synthetic dataset determinism and coverage") {
    Dataset a = synthetic_dataset(123, 40, 10);
    Dataset b = synthetic_dataset(123, 40, 10);
    CHECK(a.images.values() == b.images.values());
    CHECK(a.labels == b.labels);

    Dataset c = synthetic_dataset(124, 40, 10);
    CHECK(a.images.values() != c.images.values());

    // n a multiple of classes: uniform label coverage
    std::map<std::size_t, std::size_t> counts;
    for (std::size_t l : a.labels) counts[l]++;
    CHECK(counts.size() == 10);
    for (auto& [l, n] : counts) CHECK(n == 4);

    // pixel range invariant
    for (std::size_t i = 0; i < a.images.size(); ++i) {
        CHECK(a.images[i] >= 0.0);
        CHECK(a.images[i] <= 1.0);
    }

    CHECK_THROWS_AS(synthetic_dataset(1, 0, 10), Error);
}

TEST_CASE("batching covers the dataset as a multiset") {
    Dataset ds = synthetic_dataset(9, 23, 5);
    BatchPlan plan{77, 4};
    auto bs = batches(ds, plan, 0);
    CHECK(bs.size() == 6);  // 5 full batches + partial of 3
    CHECK(bs.back().labels.size() == 3);

    // multiset equality via sorted first-pixel fingerprints + labels
    std::vector<std::pair<double, std::size_t>> got, want;
    for (const Batch& b : bs) {
        for (std::size_t i = 0; i < b.labels.size(); ++i) {
            got.emplace_back(b.images[i * 28 * 28], b.labels[i]);
        }
    }
    for (std::size_t i = 0; i < ds.size(); ++i) {
        want.emplace_back(ds.images[i * 28 * 28], ds.labels[i]);
    }
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    CHECK(got == want);
}

TEST_CASE("batching determinism and epoch variation") {
    Dataset ds = synthetic_dataset(9, 20, 5);
    BatchPlan plan{5, 20};
    auto a = batches(ds, plan, 0);
    auto b = batches(ds, plan, 0);
    REQUIRE(a.size() == 1);
    CHECK(a[0].images.values() == b[0].images.values());
    CHECK(a[0].labels == b[0].labels);

    auto c = batches(ds, plan, 1);
    CHECK(a[0].labels != c[0].labels);  // different epoch, different permutation

    CHECK_THROWS_AS(batches(ds, BatchPlan{5, 21}, 0), Error);
    CHECK_THROWS_AS(batches(ds, BatchPlan{5, 0}, 0), Error);
}

TEST_CASE("epoch permutation is a bijection") {
    BatchPlan plan{31, 8};
    auto perm = epoch_permutation(plan, 3, 100);
    std::vector<bool> seen(100, false);
    for (std::size_t p : perm) {
        REQUIRE(p < 100);
        CHECK(!seen[p]);
        seen[p] = true;
    }
}

TEST_CASE("filter_classes relabels") {
    Dataset ds = synthetic_dataset(4, 20, 10);
    Dataset f = ds.filter_classes({5, 6, 7, 8, 9});
    CHECK(f.size() == 10);
    for (std::size_t l : f.labels) CHECK(l < 5);
}
