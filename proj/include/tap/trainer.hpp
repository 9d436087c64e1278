#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tap/bundle.hpp"
#include "tap/core_math.hpp"
#include "tap/text_dataset.hpp"
#include "tap/vocabulary.hpp"

namespace tap {

struct TrainConfig {
    double learning_rate = 1e-3;
    int steps = 500;
    double label_smoothing = 0.1;
    // Standard deviation of the Gaussian noise added to the normalized
    // embeddings; 1.0 is the literal N(0, I).
    double noise_sigma = 1.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;
    std::uint64_t seed = 0;
    // Start row c from the class-name text embedding instead of random init.
    bool init_from_class_embeddings = false;

    void validate() const;
};

nlohmann::ordered_json to_json(const TrainConfig& cfg);
// Missing keys keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig base = {});

struct TrainMeta {
    TrainConfig config;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    int steps_run = 0;
    std::size_t num_examples = 0;
    std::vector<std::string> warnings;
    // Set by pseudo-label refinement.
    std::optional<nlohmann::ordered_json> refinement;
    // Kept in memory only; not serialized.
    std::vector<double> loss_history;
};

// f(x) = W x + b with W stored row-major, K x d.
struct LinearClassifier {
    std::size_t dimension = 0;
    ClassVocabulary vocab;
    std::vector<double> weights;
    std::vector<double> bias;
    TrainMeta meta;

    std::size_t num_classes() const noexcept { return vocab.size(); }
    std::span<const double> weight_row(std::size_t c) const {
        return std::span<const double>(weights).subspan(c * dimension, dimension);
    }
    void validate() const;
    // Exact parameter equality (weights, bias, vocabulary, dimension).
    bool same_parameters(const LinearClassifier& other) const;
};

struct SmoothedCrossEntropy {
    double loss = 0.0;
    // d loss / d logits = softmax(logits) - q
    std::vector<double> grad;
};

// q = (1 - eps) * onehot(true_class) + eps / K; loss = -sum_c q_c log p_c.
SmoothedCrossEntropy smoothed_cross_entropy(std::span<const double> logits, int true_class, double smoothing);

// Row-major dense matrix in double precision.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    std::span<double> row(std::size_t i) { return std::span<double>(data).subspan(i * cols, cols); }
    std::span<const double> row(std::size_t i) const { return std::span<const double>(data).subspan(i * cols, cols); }
};

// Every bundle row divided by its L2 norm.
Matrix normalized_rows(const EmbeddingBundle& bundle);

struct Gradient {
    std::vector<double> weights;
    std::vector<double> bias;
};

// Mean smoothed cross-entropy of W x_i + b over the batch. When grad is set
// it receives the exact gradient with respect to W and b.
double batch_loss(std::span<const double> weights, std::span<const double> bias, const Matrix& inputs,
                  std::span<const int> labels, std::size_t num_classes, double smoothing, Gradient* grad = nullptr);

// Initial parameters as train_text_classifier would create them.
LinearClassifier initialize_classifier(const ClassVocabulary& vocab, std::size_t dimension, const TrainConfig& cfg,
                                       const ClassTextEmbeddings* class_embeddings = nullptr);

// Full-batch AdamW on the label-smoothed loss of normalize(E(t)) + n, with
// n ~ N(0, sigma^2 I) redrawn at every step. Deterministic for a given seed;
// accumulation runs row by row in a fixed order.
LinearClassifier train_text_classifier(const TextDataset& dataset, const EmbeddingBundle& text_embeddings,
                                       const TrainConfig& cfg, const ClassTextEmbeddings* class_embeddings = nullptr);

// Continues optimizing an existing classifier on already normalized inputs.
// Used by pseudo-label refinement; returns a new classifier.
LinearClassifier continue_training(const LinearClassifier& start, const Matrix& normalized_inputs,
                                   std::span<const int> labels, const TrainConfig& cfg);

std::vector<double> classifier_logits(const LinearClassifier& clf, std::span<const double> embedding,
                                      bool normalize_input = true);

nlohmann::ordered_json to_json(const LinearClassifier& clf);
LinearClassifier classifier_from_json(const nlohmann::json& doc);
void save_classifier(const LinearClassifier& clf, const std::filesystem::path& path);
LinearClassifier load_classifier(const std::filesystem::path& path);

}  // namespace tap
