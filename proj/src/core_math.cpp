#include "tap/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tap/error.hpp"

namespace tap {

namespace {

void require_same_dimension(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "dimensions " + std::to_string(a.size()) + " and " + std::to_string(b.size()) + " differ");
    }
}

}  // namespace

void ZeroShotConfig::validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw Error(ErrorKind::InvalidConfig, "temperature must be positive and finite");
    }
}

ClassTextEmbeddings ClassTextEmbeddings::from_rows(const std::vector<Embedding>& rows) {
    ClassTextEmbeddings out;
    out.class_ids.reserve(rows.size());
    out.embeddings.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows.empty() && rows[i].size() != rows.front().size()) {
            throw Error(ErrorKind::DimensionMismatch, "class embedding rows differ in dimension");
        }
        out.class_ids.push_back(static_cast<int>(i));
        out.embeddings.push_back(normalize(rows[i]));
    }
    return out;
}

Embedding to_embedding(std::span<const float> values) {
    return Embedding(values.begin(), values.end());
}

void require_finite(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw Error(ErrorKind::NonFiniteValue, std::string(what) + " contains a non-finite value");
        }
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    require_same_dimension(a, b);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double l2_norm(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

Embedding normalize(std::span<const double> v) {
    if (v.empty()) throw Error(ErrorKind::EmptyVector, "cannot normalize an empty vector");
    require_finite(v, "embedding");
    const double norm = l2_norm(v);
    if (norm < kZeroNormThreshold) throw Error(ErrorKind::ZeroVector, "vector norm below 1e-12");
    Embedding out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / norm;
    return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    require_same_dimension(a, b);
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na < kZeroNormThreshold || nb < kZeroNormThreshold) {
        throw Error(ErrorKind::ZeroVector, "cosine similarity of a zero vector");
    }
    const double c = dot(a, b) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

std::vector<double> softmax(std::span<const double> logits, double temperature) {
    if (logits.empty()) throw Error(ErrorKind::EmptyVector, "softmax of an empty vector");
    if (!(temperature > 0.0)) throw Error(ErrorKind::InvalidConfig, "temperature must be positive");
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp((logits[i] - max_logit) / temperature);
        total += out[i];
    }
    for (double& p : out) p /= total;
    return out;
}

std::vector<double> log_softmax(std::span<const double> logits) {
    if (logits.empty()) throw Error(ErrorKind::EmptyVector, "log-softmax of an empty vector");
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double z : logits) total += std::exp(z - max_logit);
    const double log_z = max_logit + std::log(total);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_z;
    return out;
}

std::vector<double> zero_shot_probabilities(std::span<const double> image_embedding,
                                            const ClassTextEmbeddings& class_embeddings,
                                            const ZeroShotConfig& cfg) {
    cfg.validate();
    if (class_embeddings.size() == 0) throw Error(ErrorKind::EmptyVector, "no class embeddings");
    std::vector<double> sims(class_embeddings.size());
    for (std::size_t c = 0; c < class_embeddings.size(); ++c) {
        sims[c] = cosine_similarity(class_embeddings.embeddings[c], image_embedding);
    }
    return softmax(sims, cfg.temperature);
}

std::size_t predict_class(std::span<const double> probs) {
    if (probs.empty()) throw Error(ErrorKind::EmptyVector, "cannot take argmax of an empty vector");
    // max_element returns the first maximum, which is the tie-break we want.
    return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

}  // namespace tap
