#include "tap/trainer.hpp"

#include <cmath>
#include <random>

#include "tap/error.hpp"
#include "tap/io_util.hpp"

namespace tap {

namespace {

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
};

// PyTorch-style AdamW: decoupled decay, bias-corrected moments.
void adamw_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state, int t,
                const TrainConfig& cfg, bool decay) {
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (decay) params[i] -= cfg.learning_rate * cfg.weight_decay * params[i];
        state.m[i] = cfg.adam_beta1 * state.m[i] + (1.0 - cfg.adam_beta1) * grad[i];
        state.v[i] = cfg.adam_beta2 * state.v[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
}

void add_noise(const Matrix& clean, Matrix& noisy, double sigma, std::mt19937_64& rng) {
    if (sigma == 0.0) {
        noisy.data = clean.data;
        return;
    }
    std::normal_distribution<double> normal(0.0, sigma);
    for (std::size_t i = 0; i < clean.data.size(); ++i) noisy.data[i] = clean.data[i] + normal(rng);
}

void check_labels(std::span<const int> labels, std::size_t num_classes) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
            throw Error(ErrorKind::UnknownClassId, "label " + std::to_string(labels[i]) + " at row " +
                                                       std::to_string(i) + " outside " + std::to_string(num_classes) +
                                                       " classes");
        }
    }
}

// Shared optimization loop. loss_history[t] is the loss at the parameters
// reached after t updates, measured on the noise draw used for update t.
void optimize(LinearClassifier& clf, const Matrix& inputs, std::span<const int> labels, const TrainConfig& cfg) {
    const std::size_t k = clf.num_classes();
    std::mt19937_64 rng(sub_seed(cfg.seed, "noise"));
    Matrix noisy(inputs.rows, inputs.cols);
    AdamState w_state{std::vector<double>(clf.weights.size(), 0.0), std::vector<double>(clf.weights.size(), 0.0)};
    AdamState b_state{std::vector<double>(k, 0.0), std::vector<double>(k, 0.0)};
    Gradient grad;

    clf.meta.loss_history.clear();
    clf.meta.loss_history.reserve(static_cast<std::size_t>(cfg.steps) + 1);
    for (int t = 0; t <= cfg.steps; ++t) {
        add_noise(inputs, noisy, cfg.noise_sigma, rng);
        const bool update = t < cfg.steps;
        const double loss =
            batch_loss(clf.weights, clf.bias, noisy, labels, k, cfg.label_smoothing, update ? &grad : nullptr);
        if (!std::isfinite(loss)) throw NonFiniteLossError(t);
        clf.meta.loss_history.push_back(loss);
        if (!update) break;
        adamw_step(clf.weights, grad.weights, w_state, t + 1, cfg, true);
        adamw_step(clf.bias, grad.bias, b_state, t + 1, cfg, false);
    }
    clf.meta.config = cfg;
    clf.meta.initial_loss = clf.meta.loss_history.front();
    clf.meta.final_loss = clf.meta.loss_history.back();
    clf.meta.steps_run = cfg.steps;
    clf.meta.num_examples = inputs.rows;
    for (double p : clf.weights) {
        if (!std::isfinite(p)) throw NonFiniteLossError(cfg.steps);
    }
}

}  // namespace

void TrainConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); };
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
    if (steps < 0) fail("steps must be >= 0");
    if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
        throw Error(ErrorKind::InvalidSmoothing, "label_smoothing must lie in [0, 1)");
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) fail("noise_sigma must be >= 0");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) fail("adam_beta1 must lie in (0, 1)");
    if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) fail("adam_beta2 must lie in (0, 1)");
    if (!(adam_eps > 0.0)) fail("adam_eps must be positive");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) fail("weight_decay must be >= 0");
}

nlohmann::ordered_json to_json(const TrainConfig& cfg) {
    nlohmann::ordered_json doc;
    doc["learning_rate"] = cfg.learning_rate;
    doc["steps"] = cfg.steps;
    doc["label_smoothing"] = cfg.label_smoothing;
    doc["noise_sigma"] = cfg.noise_sigma;
    doc["adam_beta1"] = cfg.adam_beta1;
    doc["adam_beta2"] = cfg.adam_beta2;
    doc["adam_eps"] = cfg.adam_eps;
    doc["weight_decay"] = cfg.weight_decay;
    doc["seed"] = cfg.seed;
    doc["init_from_class_embeddings"] = cfg.init_from_class_embeddings;
    return doc;
}

TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig base) {
    try {
        base.learning_rate = doc.value("learning_rate", base.learning_rate);
        base.steps = doc.value("steps", base.steps);
        base.label_smoothing = doc.value("label_smoothing", base.label_smoothing);
        base.noise_sigma = doc.value("noise_sigma", base.noise_sigma);
        base.adam_beta1 = doc.value("adam_beta1", base.adam_beta1);
        base.adam_beta2 = doc.value("adam_beta2", base.adam_beta2);
        base.adam_eps = doc.value("adam_eps", base.adam_eps);
        base.weight_decay = doc.value("weight_decay", base.weight_decay);
        base.seed = doc.value("seed", base.seed);
        base.init_from_class_embeddings = doc.value("init_from_class_embeddings", base.init_from_class_embeddings);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidConfig, std::string("train config: ") + e.what());
    }
    return base;
}

void LinearClassifier::validate() const {
    if (dimension == 0) throw Error(ErrorKind::ShapeMismatch, "classifier dimension is zero");
    if (weights.size() != num_classes() * dimension || bias.size() != num_classes()) {
        throw Error(ErrorKind::ShapeMismatch, "classifier parameters do not match K x d");
    }
    require_finite(weights, "classifier weights");
    require_finite(bias, "classifier bias");
}

bool LinearClassifier::same_parameters(const LinearClassifier& other) const {
    return dimension == other.dimension && vocab == other.vocab && weights == other.weights && bias == other.bias;
}

SmoothedCrossEntropy smoothed_cross_entropy(std::span<const double> logits, int true_class, double smoothing) {
    const std::size_t k = logits.size();
    if (k < 2) throw Error(ErrorKind::InvalidConfig, "smoothed cross-entropy needs at least two classes");
    if (!(smoothing >= 0.0 && smoothing < 1.0)) {
        throw Error(ErrorKind::InvalidSmoothing, "smoothing must lie in [0, 1)");
    }
    if (true_class < 0 || static_cast<std::size_t>(true_class) >= k) {
        throw Error(ErrorKind::UnknownClassId, "true class " + std::to_string(true_class) + " out of range");
    }
    const auto logp = log_softmax(logits);
    const double off = smoothing / static_cast<double>(k);
    const double on = 1.0 - smoothing + off;
    SmoothedCrossEntropy out;
    out.grad.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        const double q = c == static_cast<std::size_t>(true_class) ? on : off;
        out.loss -= q * logp[c];
        out.grad[c] = std::exp(logp[c]) - q;
    }
    return out;
}

Matrix normalized_rows(const EmbeddingBundle& bundle) {
    Matrix m(bundle.count(), bundle.dimension());
    for (std::size_t i = 0; i < m.rows; ++i) {
        const auto n = normalize(bundle.row_embedding(i));
        std::copy(n.begin(), n.end(), m.row(i).begin());
    }
    return m;
}

double batch_loss(std::span<const double> weights, std::span<const double> bias, const Matrix& inputs,
                  std::span<const int> labels, std::size_t num_classes, double smoothing, Gradient* grad) {
    const std::size_t d = inputs.cols;
    const std::size_t n = inputs.rows;
    if (weights.size() != num_classes * d || bias.size() != num_classes) {
        throw Error(ErrorKind::ShapeMismatch, "parameters do not match K x d");
    }
    if (labels.size() != n) throw Error(ErrorKind::ShapeMismatch, "labels do not match batch rows");
    if (n == 0) throw Error(ErrorKind::EmptyDataset, "empty batch");
    if (grad) {
        grad->weights.assign(weights.size(), 0.0);
        grad->bias.assign(num_classes, 0.0);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> logits(num_classes);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = inputs.row(i);
        for (std::size_t c = 0; c < num_classes; ++c) {
            double z = bias[c];
            const double* w = weights.data() + c * d;
            for (std::size_t j = 0; j < d; ++j) z += w[j] * x[j];
            logits[c] = z;
        }
        const auto sce = smoothed_cross_entropy(logits, labels[i], smoothing);
        total += sce.loss;
        if (grad) {
            for (std::size_t c = 0; c < num_classes; ++c) {
                const double g = sce.grad[c] * inv_n;
                grad->bias[c] += g;
                double* gw = grad->weights.data() + c * d;
                for (std::size_t j = 0; j < d; ++j) gw[j] += g * x[j];
            }
        }
    }
    return total * inv_n;
}

LinearClassifier initialize_classifier(const ClassVocabulary& vocab, std::size_t dimension, const TrainConfig& cfg,
                                       const ClassTextEmbeddings* class_embeddings) {
    if (vocab.size() < 2) throw Error(ErrorKind::InvalidConfig, "a classifier needs at least two classes");
    if (dimension == 0) throw Error(ErrorKind::ShapeMismatch, "dimension must be >= 1");
    LinearClassifier clf;
    clf.dimension = dimension;
    clf.vocab = vocab;
    clf.weights.assign(vocab.size() * dimension, 0.0);
    clf.bias.assign(vocab.size(), 0.0);
    clf.meta.config = cfg;
    if (cfg.init_from_class_embeddings) {
        if (!class_embeddings) {
            throw Error(ErrorKind::MissingInput, "init_from_class_embeddings requires class text embeddings");
        }
        if (class_embeddings->size() != vocab.size() || class_embeddings->dimension() != dimension) {
            throw Error(ErrorKind::ShapeMismatch, "class embeddings do not match K x d");
        }
        for (std::size_t c = 0; c < vocab.size(); ++c) {
            std::copy(class_embeddings->embeddings[c].begin(), class_embeddings->embeddings[c].end(),
                      clf.weights.begin() + static_cast<std::ptrdiff_t>(c * dimension));
        }
        return clf;
    }
    std::mt19937_64 rng(sub_seed(cfg.seed, "init"));
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(dimension)));
    for (auto& w : clf.weights) w = normal(rng);
    return clf;
}

LinearClassifier train_text_classifier(const TextDataset& dataset, const EmbeddingBundle& text_embeddings,
                                       const TrainConfig& cfg, const ClassTextEmbeddings* class_embeddings) {
    cfg.validate();
    if (dataset.items.empty()) throw Error(ErrorKind::EmptyDataset, "text dataset is empty");
    if (dataset.size() != text_embeddings.count()) {
        throw Error(ErrorKind::ShapeMismatch, "dataset has " + std::to_string(dataset.size()) +
                                                  " items but the embedding bundle has " +
                                                  std::to_string(text_embeddings.count()) + " rows");
    }
    std::vector<int> labels;
    labels.reserve(dataset.size());
    for (const auto& item : dataset.items) labels.push_back(item.class_id);
    check_labels(labels, dataset.vocab.size());
    if (text_embeddings.has_labels() && text_embeddings.labels() != labels) {
        throw Error(ErrorKind::ShapeMismatch, "bundle labels disagree with the dataset order");
    }
    const Matrix inputs = normalized_rows(text_embeddings);
    LinearClassifier clf = initialize_classifier(dataset.vocab, text_embeddings.dimension(), cfg, class_embeddings);
    optimize(clf, inputs, labels, cfg);
    return clf;
}

LinearClassifier continue_training(const LinearClassifier& start, const Matrix& normalized_inputs,
                                   std::span<const int> labels, const TrainConfig& cfg) {
    cfg.validate();
    start.validate();
    if (normalized_inputs.cols != start.dimension) {
        throw Error(ErrorKind::DimensionMismatch, "inputs have dimension " + std::to_string(normalized_inputs.cols) +
                                                      ", classifier expects " + std::to_string(start.dimension));
    }
    check_labels(labels, start.num_classes());
    LinearClassifier clf = start;
    optimize(clf, normalized_inputs, labels, cfg);
    return clf;
}

std::vector<double> classifier_logits(const LinearClassifier& clf, std::span<const double> embedding,
                                      bool normalize_input) {
    if (embedding.size() != clf.dimension) {
        throw Error(ErrorKind::DimensionMismatch, "embedding has dimension " + std::to_string(embedding.size()) +
                                                      ", classifier expects " + std::to_string(clf.dimension));
    }
    Embedding x = normalize_input ? normalize(embedding) : Embedding(embedding.begin(), embedding.end());
    std::vector<double> logits(clf.num_classes());
    for (std::size_t c = 0; c < logits.size(); ++c) logits[c] = clf.bias[c] + dot(clf.weight_row(c), x);
    return logits;
}

nlohmann::ordered_json to_json(const LinearClassifier& clf) {
    nlohmann::ordered_json doc;
    doc["dimension"] = clf.dimension;
    doc["class_names"] = clf.vocab.names();
    doc["weights"] = clf.weights;
    doc["bias"] = clf.bias;
    nlohmann::ordered_json meta;
    meta["config"] = to_json(clf.meta.config);
    meta["initial_loss"] = clf.meta.initial_loss;
    meta["final_loss"] = clf.meta.final_loss;
    meta["steps_run"] = clf.meta.steps_run;
    meta["num_examples"] = clf.meta.num_examples;
    meta["warnings"] = clf.meta.warnings;
    if (clf.meta.refinement) meta["refinement"] = *clf.meta.refinement;
    doc["train_meta"] = meta;
    return doc;
}

LinearClassifier classifier_from_json(const nlohmann::json& doc) {
    LinearClassifier clf;
    try {
        clf.dimension = doc.at("dimension").get<std::size_t>();
        clf.vocab = ClassVocabulary(doc.at("class_names").get<std::vector<std::string>>());
        clf.weights = doc.at("weights").get<std::vector<double>>();
        clf.bias = doc.at("bias").get<std::vector<double>>();
        if (doc.contains("train_meta")) {
            const auto& meta = doc["train_meta"];
            if (meta.contains("config")) clf.meta.config = train_config_from_json(meta["config"]);
            clf.meta.initial_loss = meta.value("initial_loss", 0.0);
            clf.meta.final_loss = meta.value("final_loss", 0.0);
            clf.meta.steps_run = meta.value("steps_run", 0);
            clf.meta.num_examples = meta.value("num_examples", std::size_t{0});
            if (meta.contains("warnings")) clf.meta.warnings = meta["warnings"].get<std::vector<std::string>>();
            if (meta.contains("refinement")) clf.meta.refinement = nlohmann::ordered_json(meta["refinement"]);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::FormatError, std::string("classifier JSON: ") + e.what());
    }
    clf.validate();
    return clf;
}

void save_classifier(const LinearClassifier& clf, const std::filesystem::path& path) {
    write_text_file_atomic(path, to_json(clf).dump(1) + "\n");
}

LinearClassifier load_classifier(const std::filesystem::path& path) {
    const std::string content = read_text_file(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(content);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::FormatError, path.string() + ": " + e.what());
    }
    return classifier_from_json(doc);
}

}  // namespace tap
