#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "grif/binio.hpp"
#include "grif/checkpoint.hpp"
#include "grif/rng.hpp"

using namespace grif;

namespace {

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

NamedTensors random_params(Rng& rng, int n_tensors) {
    NamedTensors out;
    for (int i = 0; i < n_tensors; ++i) {
        const int rank = 1 + static_cast<int>(rng.below(3));
        std::vector<int> shape;
        int64_t numel = 1;
        for (int d = 0; d < rank; ++d) {
            shape.push_back(1 + static_cast<int>(rng.below(6)));
            numel *= shape.back();
        }
        std::vector<float> values(static_cast<size_t>(numel));
        for (auto& v : values) v = static_cast<float>(rng.normal());
        out.emplace_back("t" + std::to_string(i) + "." + std::to_string(rng.below(1000)),
                         tc::Tensor(std::move(shape), std::move(values)));
    }
    return out;
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("round-trip is bitwise identical (random shapes and names)") {
    Rng rng(2024);
    const std::string path = temp_path("grif_ckpt_roundtrip.ckpt");
    for (int trial = 0; trial < 25; ++trial) {
        NamedTensors params = random_params(rng, 1 + static_cast<int>(rng.below(6)));
        save_checkpoint(params, path);
        const NamedTensors loaded = load_checkpoint(path);
        REQUIRE(loaded.size() == params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            CHECK(loaded[i].first == params[i].first);
            CHECK(loaded[i].second.shape() == params[i].second.shape());
            const auto& a = params[i].second.data();
            const auto& b = loaded[i].second.data();
            REQUIRE(a.size() == b.size());
            for (size_t j = 0; j < a.size(); ++j)
                CHECK(std::bit_cast<uint32_t>(a[j]) == std::bit_cast<uint32_t>(b[j]));
        }
        // Re-saving the loaded params reproduces the file byte for byte.
        const std::string path2 = temp_path("grif_ckpt_roundtrip2.ckpt");
        save_checkpoint(loaded, path2);
        CHECK(bin::read_file(path) == bin::read_file(path2));
    }
}

TEST_CASE("empty parameter set is a valid file with count zero") {
    const std::string path = temp_path("grif_ckpt_empty.ckpt");
    save_checkpoint({}, path);
    CHECK(load_checkpoint(path).empty());
}

TEST_CASE("corrupting a length field fails with a truncation error") {
    Rng rng(7);
    const std::string path = temp_path("grif_ckpt_corrupt.ckpt");
    save_checkpoint(random_params(rng, 2), path);
    std::string bytes = bin::read_file(path);
    // Inflate the first name length (u16 right after magic+version+count).
    bytes[16] = static_cast<char>(0xff);
    bytes[17] = static_cast<char>(0x7f);
    bin::write_file(path, bytes);
    try {
        load_checkpoint(path);
        FAIL("expected throw");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
}

TEST_CASE("bad magic and duplicate names are rejected") {
    const std::string path = temp_path("grif_ckpt_bad.ckpt");
    bin::write_file(path, "NOTAMAGIC header etc");
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);

    NamedTensors dup;
    dup.emplace_back("same", tc::Tensor({1}, {1.0f}));
    dup.emplace_back("same", tc::Tensor({1}, {2.0f}));
    CHECK_THROWS_AS(save_checkpoint(dup, path), std::runtime_error);
}

TEST_CASE("non-finite tensors are not saved") {
    NamedTensors bad;
    bad.emplace_back("x", tc::Tensor({1}, {std::numeric_limits<float>::infinity()}));
    CHECK_THROWS_AS(save_checkpoint(bad, temp_path("grif_ckpt_inf.ckpt")), std::runtime_error);
}

TEST_CASE("params_hash changes with content") {
    NamedTensors a, b;
    a.emplace_back("x", tc::Tensor({2}, {1.0f, 2.0f}));
    b.emplace_back("x", tc::Tensor({2}, {1.0f, 2.00001f}));
    CHECK(params_hash(a) != params_hash(b));
    CHECK(params_hash(a) == params_hash(a));
}

}  // TEST_SUITE
