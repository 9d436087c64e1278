#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tap {

// Embedding coordinates are stored single precision on disk but every
// computation in the library runs in double.
using Embedding = std::vector<double>;

inline constexpr double kZeroNormThreshold = 1e-12;

struct ZeroShotConfig {
    // CLIP's learned logit scale is ~100, i.e. tau ~ 0.01.
    double temperature = 0.01;

    void validate() const;
};

// One unit-norm text embedding per class, in vocabulary order.
struct ClassTextEmbeddings {
    std::vector<int> class_ids;
    std::vector<Embedding> embeddings;

    std::size_t size() const noexcept { return embeddings.size(); }
    std::size_t dimension() const noexcept { return embeddings.empty() ? 0 : embeddings.front().size(); }

    // Normalizes each row; row i becomes class i.
    static ClassTextEmbeddings from_rows(const std::vector<Embedding>& rows);
};

Embedding to_embedding(std::span<const float> values);

void require_finite(std::span<const double> v, const char* what);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

Embedding normalize(std::span<const double> v);
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Numerically stable softmax of logits / temperature.
std::vector<double> softmax(std::span<const double> logits, double temperature = 1.0);
std::vector<double> log_softmax(std::span<const double> logits);

std::vector<double> zero_shot_probabilities(std::span<const double> image_embedding,
                                            const ClassTextEmbeddings& class_embeddings,
                                            const ZeroShotConfig& cfg = {});

// Argmax with ties going to the lowest index.
std::size_t predict_class(std::span<const double> probs);

}  // namespace tap
