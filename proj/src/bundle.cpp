#include "tap/bundle.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "tap/error.hpp"
#include "tap/io_util.hpp"

namespace tap {

namespace {

template <typename T>
void put_le(std::string& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t offset) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        value |= static_cast<T>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
    }
    return value;
}

void check_finite(std::span<const float> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw Error(ErrorKind::NonFiniteValue, "bundle value at flat index " + std::to_string(i) + " is not finite");
        }
    }
}

}  // namespace

EmbeddingBundle::EmbeddingBundle(std::uint32_t dimension, std::vector<float> matrix,
                                 std::optional<std::vector<int>> labels, BundleProvenance provenance,
                                 std::vector<std::string> class_names)
    : dimension_(dimension),
      matrix_(std::move(matrix)),
      labels_(std::move(labels)),
      provenance_(std::move(provenance)),
      class_names_(std::move(class_names)) {
    if (dimension_ == 0) throw Error(ErrorKind::ShapeMismatch, "bundle dimension must be >= 1");
    if (matrix_.size() % dimension_ != 0) {
        throw Error(ErrorKind::ShapeMismatch, "matrix of " + std::to_string(matrix_.size()) +
                                                  " values is not a multiple of dimension " +
                                                  std::to_string(dimension_));
    }
    if (labels_ && labels_->size() != count()) {
        throw Error(ErrorKind::ShapeMismatch, std::to_string(labels_->size()) + " labels for " +
                                                  std::to_string(count()) + " rows");
    }
    check_finite(matrix_);
}

EmbeddingBundle EmbeddingBundle::from_rows(const std::vector<Embedding>& rows, std::optional<std::vector<int>> labels,
                                           BundleProvenance provenance, std::vector<std::string> class_names) {
    if (rows.empty()) throw Error(ErrorKind::ShapeMismatch, "cannot infer the dimension of an empty row list");
    const std::size_t d = rows.front().size();
    std::vector<float> matrix;
    matrix.reserve(rows.size() * d);
    for (const auto& r : rows) {
        if (r.size() != d) throw Error(ErrorKind::ShapeMismatch, "rows differ in dimension");
        for (double x : r) matrix.push_back(static_cast<float>(x));
    }
    return EmbeddingBundle(static_cast<std::uint32_t>(d), std::move(matrix), std::move(labels), std::move(provenance),
                           std::move(class_names));
}

std::span<const float> EmbeddingBundle::row(std::size_t i) const {
    if (i >= count()) throw Error(ErrorKind::ShapeMismatch, "row " + std::to_string(i) + " out of range");
    return std::span<const float>(matrix_).subspan(i * dimension_, dimension_);
}

const std::vector<int>& EmbeddingBundle::labels() const {
    if (!labels_) throw Error(ErrorKind::MissingLabels, "bundle carries no labels");
    return *labels_;
}

bool EmbeddingBundle::operator==(const EmbeddingBundle& other) const {
    return dimension_ == other.dimension_ && matrix_.size() == other.matrix_.size() &&
           std::memcmp(matrix_.data(), other.matrix_.data(), matrix_.size() * sizeof(float)) == 0 &&
           labels_ == other.labels_ && provenance_ == other.provenance_ && class_names_ == other.class_names_;
}

std::string encode_bundle_matrix(const EmbeddingBundle& bundle) {
    std::string out;
    out.reserve(kBundleHeaderSize + bundle.matrix().size() * 4);
    out.append(kBundleMagic, 4);
    put_le<std::uint32_t>(out, kBundleVersion);
    put_le<std::uint32_t>(out, bundle.dimension());
    put_le<std::uint64_t>(out, bundle.count());
    for (float v : bundle.matrix()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

EmbeddingBundle decode_bundle_matrix(std::string_view bytes) {
    if (bytes.size() < 4) throw Error(ErrorKind::TruncatedFile, "file shorter than the magic number");
    if (std::memcmp(bytes.data(), kBundleMagic, 4) != 0) throw Error(ErrorKind::FormatError, "bad magic bytes");
    if (bytes.size() < kBundleHeaderSize) throw Error(ErrorKind::TruncatedFile, "header is incomplete");
    const auto version = get_le<std::uint32_t>(bytes, 4);
    if (version != kBundleVersion) {
        throw Error(ErrorKind::FormatError, "unsupported bundle version " + std::to_string(version));
    }
    const auto dimension = get_le<std::uint32_t>(bytes, 8);
    const auto count = get_le<std::uint64_t>(bytes, 12);
    if (dimension == 0) throw Error(ErrorKind::FormatError, "dimension is zero");

    const std::size_t available_rows = (bytes.size() - kBundleHeaderSize) / (4ULL * dimension);
    if (count > available_rows) {
        throw Error(ErrorKind::TruncatedFile, "header declares " + std::to_string(count) + " rows but file holds " +
                                                  std::to_string(available_rows));
    }
    const std::size_t expected = kBundleHeaderSize + count * dimension * 4ULL;
    if (bytes.size() != expected) {
        throw Error(ErrorKind::FormatError, "trailing bytes after " + std::to_string(count) + " rows");
    }
    std::vector<float> matrix(count * dimension);
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        matrix[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, kBundleHeaderSize + 4 * i));
    }
    check_finite(matrix);
    return EmbeddingBundle(dimension, std::move(matrix));
}

std::filesystem::path manifest_path(const std::filesystem::path& bundle_path) {
    auto p = bundle_path;
    p += ".manifest.json";
    return p;
}

void write_bundle(const EmbeddingBundle& bundle, const std::filesystem::path& path) {
    write_text_file_atomic(path, encode_bundle_matrix(bundle));
    const auto mpath = manifest_path(path);
    if (!bundle.has_labels() && bundle.class_names().empty() && bundle.provenance().empty()) {
        std::filesystem::remove(mpath);
        return;
    }
    nlohmann::ordered_json doc;
    doc["labels"] = bundle.has_labels() ? nlohmann::ordered_json(bundle.labels()) : nlohmann::ordered_json();
    doc["class_names"] = bundle.class_names();
    doc["encoder"] = bundle.provenance().encoder;
    doc["source"] = bundle.provenance().source;
    doc["created_at"] = bundle.provenance().created_at;
    write_text_file_atomic(mpath, doc.dump(1) + "\n");
}

EmbeddingBundle read_bundle(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw Error(ErrorKind::MissingInput, "bundle '" + path.string() + "' does not exist");
    }
    EmbeddingBundle core = decode_bundle_matrix(read_text_file(path));
    const auto mpath = manifest_path(path);
    if (!std::filesystem::exists(mpath)) return core;

    std::optional<std::vector<int>> labels;
    BundleProvenance prov;
    std::vector<std::string> names;
    try {
        const auto doc = nlohmann::json::parse(read_text_file(mpath));
        if (doc.contains("labels") && !doc["labels"].is_null()) labels = doc["labels"].get<std::vector<int>>();
        if (doc.contains("class_names")) names = doc["class_names"].get<std::vector<std::string>>();
        prov.encoder = doc.value("encoder", std::string());
        prov.source = doc.value("source", std::string());
        prov.created_at = doc.value("created_at", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::FormatError, mpath.string() + ": " + e.what());
    }
    if (labels && labels->size() != core.count()) {
        throw Error(ErrorKind::FormatError, "manifest has " + std::to_string(labels->size()) + " labels for " +
                                                std::to_string(core.count()) + " rows");
    }
    std::vector<float> matrix(core.matrix().begin(), core.matrix().end());
    return EmbeddingBundle(core.dimension(), std::move(matrix), std::move(labels), std::move(prov), std::move(names));
}

}  // namespace tap
