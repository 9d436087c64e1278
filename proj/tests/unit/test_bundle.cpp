#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "tap/bundle.hpp"
#include "tap/error.hpp"
#include "tap/io_util.hpp"
#include "temp_dir.hpp"

using namespace tap;

namespace {

EmbeddingBundle random_bundle(std::mt19937_64& rng) {
    const std::uint32_t d = 1 + static_cast<std::uint32_t>(rng() % 40);
    const std::size_t n = rng() % 30;
    std::vector<float> m(n * d);
    // Raw bit patterns cover subnormals, negative zero and extreme exponents;
    // non-finite patterns are redrawn.
    for (auto& x : m) {
        do {
            const auto bits = static_cast<std::uint32_t>(rng());
            std::memcpy(&x, &bits, sizeof x);
        } while (!std::isfinite(x));
    }
    std::optional<std::vector<int>> labels;
    std::vector<std::string> names;
    if (rng() % 2) {
        labels.emplace(n);
        for (auto& l : *labels) l = static_cast<int>(rng() % 7);
        names = {"a", "b", "c", "d", "e", "f", "g"};
    }
    BundleProvenance prov;
    if (rng() % 2) prov = {"enc-" + std::to_string(rng() % 100), "text", ""};
    return EmbeddingBundle(d, std::move(m), std::move(labels), prov, names);
}

ErrorKind decode_error(std::string_view bytes) {
    try {
        decode_bundle_matrix(bytes);
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::IoError;
}

}  // namespace

TEST_CASE("bundle round trip is lossless on random bundles") {
    std::mt19937_64 rng(99);
    testing::TempDir dir;
    for (int t = 0; t < 100; ++t) {
        const auto b = random_bundle(rng);
        const auto path = dir / ("b" + std::to_string(t) + ".tape");
        write_bundle(b, path);
        const auto back = read_bundle(path);
        CHECK(back == b);
        CHECK(std::memcmp(back.matrix().data(), b.matrix().data(), b.matrix().size_bytes()) == 0);
    }
}

TEST_CASE("binary layout") {
    const EmbeddingBundle b(2, {1.0f, -2.0f, 0.5f, 4.0f});
    const auto bytes = encode_bundle_matrix(b);
    REQUIRE(bytes.size() == kBundleHeaderSize + 16);
    CHECK(bytes.substr(0, 4) == "TAPE");
    CHECK(static_cast<unsigned char>(bytes[4]) == 1);
    CHECK(static_cast<unsigned char>(bytes[8]) == 2);
    CHECK(static_cast<unsigned char>(bytes[12]) == 2);
    float first;
    std::memcpy(&first, bytes.data() + kBundleHeaderSize, 4);
    CHECK(first == 1.0f);
}

TEST_CASE("malformed bundles") {
    const EmbeddingBundle b(3, std::vector<float>(30, 0.25f));
    const auto good = encode_bundle_matrix(b);

    auto bad_magic = good;
    bad_magic[0] = 'X';
    CHECK(decode_error(bad_magic) == ErrorKind::FormatError);

    auto bad_version = good;
    bad_version[4] = 2;
    CHECK(decode_error(bad_version) == ErrorKind::FormatError);

    // Header promises 10 rows, only 9 present.
    CHECK(decode_error(std::string_view(good).substr(0, good.size() - 12)) == ErrorKind::TruncatedFile);
    CHECK(decode_error(std::string_view(good).substr(0, good.size() - 1)) == ErrorKind::TruncatedFile);
    CHECK(decode_error(std::string_view(good).substr(0, 10)) == ErrorKind::TruncatedFile);
    CHECK(decode_error(std::string_view(good).substr(0, 2)) == ErrorKind::TruncatedFile);
    CHECK(decode_error(good + "x") == ErrorKind::FormatError);

    auto nan = good;
    const float q = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(nan.data() + kBundleHeaderSize + 8, &q, 4);
    CHECK(decode_error(nan) == ErrorKind::NonFiniteValue);

    testing::TempDir dir;
    write_text_file_atomic(dir / "bad.tape", bad_magic);
    try {
        read_bundle(dir / "bad.tape");
        FAIL("expected FormatError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::FormatError);
    }
    try {
        read_bundle(dir / "missing.tape");
        FAIL("expected MissingInput");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MissingInput);
    }
}

TEST_CASE("bundle invariants") {
    CHECK_THROWS_AS(EmbeddingBundle(3, std::vector<float>(7, 0.0f)), Error);
    CHECK_THROWS_AS(EmbeddingBundle(2, std::vector<float>(4, 0.0f), std::vector<int>{0}), Error);
    CHECK_THROWS_AS(EmbeddingBundle(1, {std::numeric_limits<float>::infinity()}), Error);
    const EmbeddingBundle unlabeled(2, {1, 2});
    try {
        (void)unlabeled.labels();
        FAIL("expected MissingLabels");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MissingLabels);
    }
}

TEST_CASE("sidecar manifest") {
    testing::TempDir dir;
    const EmbeddingBundle labeled(2, {1, 2, 3, 4}, std::vector<int>{1, 0}, {"enc", "image", ""}, {"x", "y"});
    write_bundle(labeled, dir / "l.tape");
    CHECK(std::filesystem::exists(manifest_path(dir / "l.tape")));
    CHECK(manifest_path(dir / "l.tape").filename() == "l.tape.manifest.json");
    // Overwriting with a bare bundle drops the stale manifest.
    write_bundle(EmbeddingBundle(2, {1, 2}), dir / "l.tape");
    CHECK_FALSE(std::filesystem::exists(manifest_path(dir / "l.tape")));
    CHECK_FALSE(read_bundle(dir / "l.tape").has_labels());
}
