#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tap/bundle.hpp"
#include "tap/text_dataset.hpp"

namespace tap {

enum class Modality { Text, Image };

const char* to_string(Modality m);
Modality modality_from_string(std::string_view text);

// A toy shared text/image space: every class has a unit mean direction and
// images sit a constant modality gap away from the texts.
struct SyntheticSpaceConfig {
    int dimension = 128;
    int num_classes = 10;
    double sigma_intra = 0.1;
    double modality_gap = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
    std::string describe() const;
};

nlohmann::json to_json(const SyntheticSpaceConfig& cfg);
SyntheticSpaceConfig synthetic_space_from_json(const nlohmann::json& doc);

class SyntheticSpace {
public:
    explicit SyntheticSpace(SyntheticSpaceConfig config);

    const SyntheticSpaceConfig& config() const noexcept { return config_; }
    const Embedding& class_mean(int class_id) const;
    const Embedding& gap_direction() const noexcept { return gap_; }

    // text:  normalize(mu_c + sigma * eps)
    // image: normalize(mu_c + gap * g + sigma * eps)
    // eps is seeded from (seed, modality, text, class id), so an identical
    // input always encodes to the identical vector.
    Embedding encode(std::string_view text, int class_id, Modality modality) const;

    // Same as encode() but centred on an explicit mean; used to build
    // scenarios where a description drifts towards the wrong concept.
    Embedding encode_around(std::string_view text, int mean_class_id, Modality modality) const;

    EmbeddingBundle encode_all(const std::vector<TextItem>& items, Modality modality,
                               std::vector<std::string> class_names = {}) const;

private:
    SyntheticSpaceConfig config_;
    std::vector<Embedding> means_;
    Embedding gap_;
};

EmbeddingBundle synthetic_encode(const std::vector<TextItem>& items, const SyntheticSpaceConfig& config,
                                 Modality modality = Modality::Text);

// per_class anonymous items per class: "<tag>/<class>/<i>", class-major.
std::vector<TextItem> synthetic_items(int num_classes, int per_class, std::string_view tag);

}  // namespace tap
