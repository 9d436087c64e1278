#include "tap/synthetic_space.hpp"

#include <cmath>
#include <random>

#include "tap/error.hpp"
#include "tap/io_util.hpp"

namespace tap {

namespace {

Embedding gaussian_unit_vector(std::mt19937_64& rng, int dimension) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Embedding v(static_cast<std::size_t>(dimension));
    for (auto& x : v) x = normal(rng);
    return normalize(v);
}

}  // namespace

const char* to_string(Modality m) { return m == Modality::Text ? "text" : "image"; }

Modality modality_from_string(std::string_view text) {
    if (text == "text") return Modality::Text;
    if (text == "image") return Modality::Image;
    throw Error(ErrorKind::InvalidConfig, "unknown modality '" + std::string(text) + "'");
}

void SyntheticSpaceConfig::validate() const {
    if (dimension < 2) throw Error(ErrorKind::InvalidConfig, "synthetic dimension must be >= 2");
    if (num_classes < 1) throw Error(ErrorKind::InvalidConfig, "synthetic space needs at least one class");
    if (!(sigma_intra >= 0.0) || !std::isfinite(sigma_intra)) {
        throw Error(ErrorKind::InvalidConfig, "sigma_intra must be finite and >= 0");
    }
    if (!(modality_gap >= 0.0) || !std::isfinite(modality_gap)) {
        throw Error(ErrorKind::InvalidConfig, "modality_gap must be finite and >= 0");
    }
}

std::string SyntheticSpaceConfig::describe() const {
    return "synthetic(d=" + std::to_string(dimension) + ",K=" + std::to_string(num_classes) +
           ",sigma=" + format_double(sigma_intra) + ",gap=" + format_double(modality_gap) +
           ",seed=" + std::to_string(seed) + ")";
}

nlohmann::json to_json(const SyntheticSpaceConfig& cfg) {
    return nlohmann::json{{"dimension", cfg.dimension},     {"num_classes", cfg.num_classes},
                          {"sigma_intra", cfg.sigma_intra}, {"modality_gap", cfg.modality_gap},
                          {"seed", cfg.seed}};
}

SyntheticSpaceConfig synthetic_space_from_json(const nlohmann::json& doc) {
    SyntheticSpaceConfig cfg;
    try {
        cfg.dimension = doc.value("dimension", cfg.dimension);
        cfg.num_classes = doc.value("num_classes", cfg.num_classes);
        cfg.sigma_intra = doc.value("sigma_intra", cfg.sigma_intra);
        cfg.modality_gap = doc.value("modality_gap", cfg.modality_gap);
        cfg.seed = doc.value("seed", cfg.seed);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidConfig, std::string("synthetic space config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

SyntheticSpace::SyntheticSpace(SyntheticSpaceConfig config) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(splitmix64(config_.seed));
    means_.reserve(static_cast<std::size_t>(config_.num_classes));
    for (int c = 0; c < config_.num_classes; ++c) means_.push_back(gaussian_unit_vector(rng, config_.dimension));
    gap_ = gaussian_unit_vector(rng, config_.dimension);
}

const Embedding& SyntheticSpace::class_mean(int class_id) const {
    if (class_id < 0 || class_id >= config_.num_classes) {
        throw Error(ErrorKind::UnknownClassId, "class id " + std::to_string(class_id) + " outside synthetic space of " +
                                                   std::to_string(config_.num_classes));
    }
    return means_[static_cast<std::size_t>(class_id)];
}

Embedding SyntheticSpace::encode(std::string_view text, int class_id, Modality modality) const {
    return encode_around(text, class_id, modality);
}

Embedding SyntheticSpace::encode_around(std::string_view text, int mean_class_id, Modality modality) const {
    const auto& mean = class_mean(mean_class_id);
    std::uint64_t h = fnv1a64(text, fnv1a64(to_string(modality)));
    h = splitmix64(h ^ splitmix64(config_.seed) ^ (static_cast<std::uint64_t>(mean_class_id) * 0x9e3779b97f4a7c15ULL));
    std::mt19937_64 rng(h);
    std::normal_distribution<double> normal(0.0, 1.0);

    const double gap = modality == Modality::Image ? config_.modality_gap : 0.0;
    Embedding v(mean.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
        // Always draw, so sigma only scales the same realization.
        const double eps = normal(rng);
        v[j] = mean[j] + gap * gap_[j] + config_.sigma_intra * eps;
    }
    return normalize(v);
}

EmbeddingBundle SyntheticSpace::encode_all(const std::vector<TextItem>& items, Modality modality,
                                           std::vector<std::string> class_names) const {
    std::vector<float> matrix;
    matrix.reserve(items.size() * static_cast<std::size_t>(config_.dimension));
    std::vector<int> labels;
    labels.reserve(items.size());
    for (const auto& item : items) {
        const auto e = encode(item.text, item.class_id, modality);
        for (double x : e) matrix.push_back(static_cast<float>(x));
        labels.push_back(item.class_id);
    }
    BundleProvenance prov{config_.describe(), to_string(modality), ""};
    return EmbeddingBundle(static_cast<std::uint32_t>(config_.dimension), std::move(matrix), std::move(labels),
                           std::move(prov), std::move(class_names));
}

EmbeddingBundle synthetic_encode(const std::vector<TextItem>& items, const SyntheticSpaceConfig& config,
                                 Modality modality) {
    return SyntheticSpace(config).encode_all(items, modality);
}

std::vector<TextItem> synthetic_items(int num_classes, int per_class, std::string_view tag) {
    std::vector<TextItem> items;
    items.reserve(static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(std::max(per_class, 0)));
    for (int c = 0; c < num_classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            items.push_back(TextItem{std::string(tag) + "/" + std::to_string(c) + "/" + std::to_string(i), c});
        }
    }
    return items;
}

}  // namespace tap
