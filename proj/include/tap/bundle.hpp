#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tap/core_math.hpp"

namespace tap {

struct BundleProvenance {
    std::string encoder;
    std::string source;
    std::string created_at;

    bool empty() const noexcept { return encoder.empty() && source.empty() && created_at.empty(); }
    bool operator==(const BundleProvenance&) const = default;
};

// A count x dimension float32 matrix of embeddings with optional labels.
// Immutable once constructed.
class EmbeddingBundle {
public:
    EmbeddingBundle() = default;
    EmbeddingBundle(std::uint32_t dimension, std::vector<float> matrix, std::optional<std::vector<int>> labels = {},
                    BundleProvenance provenance = {}, std::vector<std::string> class_names = {});

    static EmbeddingBundle from_rows(const std::vector<Embedding>& rows, std::optional<std::vector<int>> labels = {},
                                     BundleProvenance provenance = {}, std::vector<std::string> class_names = {});

    std::uint32_t dimension() const noexcept { return dimension_; }
    std::uint64_t count() const noexcept { return dimension_ == 0 ? 0 : matrix_.size() / dimension_; }
    std::span<const float> matrix() const noexcept { return matrix_; }
    std::span<const float> row(std::size_t i) const;
    Embedding row_embedding(std::size_t i) const { return to_embedding(row(i)); }

    bool has_labels() const noexcept { return labels_.has_value(); }
    const std::vector<int>& labels() const;
    const std::optional<std::vector<int>>& maybe_labels() const noexcept { return labels_; }
    const BundleProvenance& provenance() const noexcept { return provenance_; }
    const std::vector<std::string>& class_names() const noexcept { return class_names_; }

    // Bytewise equality of the matrix plus equality of all metadata.
    bool operator==(const EmbeddingBundle& other) const;

private:
    std::uint32_t dimension_ = 0;
    std::vector<float> matrix_;
    std::optional<std::vector<int>> labels_;
    BundleProvenance provenance_;
    std::vector<std::string> class_names_;
};

inline constexpr char kBundleMagic[4] = {'T', 'A', 'P', 'E'};
inline constexpr std::uint32_t kBundleVersion = 1;
inline constexpr std::size_t kBundleHeaderSize = 4 + 4 + 4 + 8;

// Binary layout (all little-endian): "TAPE", u32 version, u32 dimension,
// u64 count, then count*dimension float32 values row-major.
std::string encode_bundle_matrix(const EmbeddingBundle& bundle);
EmbeddingBundle decode_bundle_matrix(std::string_view bytes);

std::filesystem::path manifest_path(const std::filesystem::path& bundle_path);

// Writes the binary file and, when there are labels, class names or
// provenance, the "<file>.manifest.json" sidecar.
void write_bundle(const EmbeddingBundle& bundle, const std::filesystem::path& path);
EmbeddingBundle read_bundle(const std::filesystem::path& path);

}  // namespace tap
