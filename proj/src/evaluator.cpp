#include "tap/evaluator.hpp"

#include <cmath>

#include "tap/error.hpp"
#include "tap/io_util.hpp"

namespace tap {

namespace {

const std::vector<int>& require_labels(const EmbeddingBundle& images) {
    if (!images.has_labels()) throw Error(ErrorKind::MissingLabels, "image bundle carries no labels");
    if (images.count() == 0) throw Error(ErrorKind::EmptyDataset, "image bundle is empty");
    return images.labels();
}

EvalRow tally(std::string method, std::string dataset, const std::vector<int>& labels,
              const std::vector<std::size_t>& predictions, const std::vector<std::string>& class_names,
              std::size_t num_classes) {
    EvalRow row;
    row.method = std::move(method);
    row.dataset = std::move(dataset);
    row.per_class.resize(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) {
        row.per_class[c].class_id = static_cast<int>(c);
        if (c < class_names.size()) row.per_class[c].class_name = class_names[c];
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
            throw Error(ErrorKind::UnknownClassId, "image label " + std::to_string(labels[i]) + " outside " +
                                                       std::to_string(num_classes) + " classes");
        }
        auto& cell = row.per_class[static_cast<std::size_t>(labels[i])];
        ++cell.total;
        if (predictions[i] == static_cast<std::size_t>(labels[i])) {
            ++cell.correct;
            ++row.correct;
        }
    }
    row.sample_count = labels.size();
    row.accuracy = 100.0 * static_cast<double>(row.correct) / static_cast<double>(row.sample_count);
    return row;
}

}  // namespace

EvalRow evaluate_classifier(const LinearClassifier& clf, const EmbeddingBundle& images, std::string method,
                            std::string dataset, bool normalize_input) {
    const auto& labels = require_labels(images);
    if (images.dimension() != clf.dimension) {
        throw Error(ErrorKind::DimensionMismatch, "images have dimension " + std::to_string(images.dimension()) +
                                                      ", classifier expects " + std::to_string(clf.dimension));
    }
    std::vector<std::size_t> predictions(images.count());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        predictions[i] = predict_class(classifier_logits(clf, images.row_embedding(i), normalize_input));
    }
    return tally(std::move(method), std::move(dataset), labels, predictions, clf.vocab.names(), clf.num_classes());
}

EvalRow evaluate_zero_shot(const ClassTextEmbeddings& class_embeddings, const EmbeddingBundle& images,
                           const ZeroShotConfig& cfg, std::string method, std::string dataset,
                           const std::vector<std::string>& class_names) {
    cfg.validate();
    const auto& labels = require_labels(images);
    if (images.dimension() != class_embeddings.dimension()) {
        throw Error(ErrorKind::DimensionMismatch, "images have dimension " + std::to_string(images.dimension()) +
                                                      ", class embeddings have " +
                                                      std::to_string(class_embeddings.dimension()));
    }
    std::vector<std::size_t> predictions(images.count());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        predictions[i] = predict_class(zero_shot_probabilities(images.row_embedding(i), class_embeddings, cfg));
    }
    return tally(std::move(method), std::move(dataset), labels, predictions, class_names, class_embeddings.size());
}

ClassTextEmbeddings class_embeddings_from_bundle(const EmbeddingBundle& bundle, std::size_t num_classes) {
    const std::size_t d = bundle.dimension();
    std::vector<Embedding> sums(num_classes, Embedding(d, 0.0));
    std::vector<std::size_t> counts(num_classes, 0);
    if (!bundle.has_labels() && bundle.count() != num_classes) {
        throw Error(ErrorKind::ShapeMismatch, "an unlabeled class-embedding bundle needs exactly one row per class");
    }
    for (std::size_t i = 0; i < bundle.count(); ++i) {
        const int label = bundle.has_labels() ? bundle.labels()[i] : static_cast<int>(i);
        if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
            throw Error(ErrorKind::UnknownClassId, "class-embedding label " + std::to_string(label) + " out of range");
        }
        const auto unit = normalize(bundle.row_embedding(i));
        auto& sum = sums[static_cast<std::size_t>(label)];
        for (std::size_t j = 0; j < d; ++j) sum[j] += unit[j];
        ++counts[static_cast<std::size_t>(label)];
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (counts[c] == 0) {
            throw Error(ErrorKind::ShapeMismatch, "no text embedding for class " + std::to_string(c));
        }
        for (double& x : sums[c]) x /= static_cast<double>(counts[c]);
    }
    return ClassTextEmbeddings::from_rows(sums);
}

TextDataset tot_class_name_dataset(const ClassVocabulary& vocab) {
    TextDataset ds;
    ds.vocab = vocab;
    for (std::size_t c = 0; c < vocab.size(); ++c) ds.items.push_back(TextItem{vocab.names()[c], static_cast<int>(c)});
    return ds;
}

TextDataset tot_template_dataset(const ClassVocabulary& vocab, const std::vector<std::string>& templates) {
    const auto prompts = render_generic_prompts(vocab, templates, "dst");
    TextDataset ds;
    ds.vocab = vocab;
    for (const auto& p : prompts) ds.items.push_back(TextItem{p.rendered_text, p.class_id});
    return ds;
}

TotBaselines build_tot_baselines(const ClassVocabulary& vocab, const std::vector<std::string>& dst_templates,
                                 const EmbeddingBundle& class_name_embeddings,
                                 const EmbeddingBundle& template_embeddings, const TrainConfig& cfg) {
    TrainConfig cls_cfg = cfg;
    cls_cfg.seed = sub_seed(cfg.seed, "tot-cls");
    TrainConfig dst_cfg = cfg;
    dst_cfg.seed = sub_seed(cfg.seed, "tot-dst");
    return TotBaselines{
        train_text_classifier(tot_class_name_dataset(vocab), class_name_embeddings, cls_cfg),
        train_text_classifier(tot_template_dataset(vocab, dst_templates), template_embeddings, dst_cfg),
    };
}

void PseudoLabelConfig::validate() const {
    if (!(confidence_threshold > 0.0 && confidence_threshold <= 1.0)) {
        throw Error(ErrorKind::InvalidConfig, "confidence_threshold must lie in (0, 1]");
    }
    if (refine_steps < 1) throw Error(ErrorKind::InvalidConfig, "refine_steps must be >= 1");
    if (!(refine_lr > 0.0)) throw Error(ErrorKind::InvalidConfig, "refine_lr must be positive");
}

LinearClassifier pseudo_label_refine(const LinearClassifier& clf, const EmbeddingBundle& unlabeled_images,
                                     const PseudoLabelConfig& cfg) {
    cfg.validate();
    clf.validate();
    if (unlabeled_images.dimension() != clf.dimension) {
        throw Error(ErrorKind::DimensionMismatch, "unlabeled images have dimension " +
                                                      std::to_string(unlabeled_images.dimension()) +
                                                      ", classifier expects " + std::to_string(clf.dimension));
    }

    std::vector<std::size_t> kept;
    std::vector<int> pseudo_labels;
    for (std::size_t i = 0; i < unlabeled_images.count(); ++i) {
        const auto probs = softmax(classifier_logits(clf, unlabeled_images.row_embedding(i), true));
        const std::size_t top = predict_class(probs);
        if (probs[top] >= cfg.confidence_threshold) {
            kept.push_back(i);
            pseudo_labels.push_back(static_cast<int>(top));
        }
    }

    nlohmann::ordered_json info;
    info["confidence_threshold"] = cfg.confidence_threshold;
    info["refine_steps"] = cfg.refine_steps;
    info["refine_lr"] = cfg.refine_lr;
    info["unlabeled"] = unlabeled_images.count();
    info["retained"] = kept.size();

    if (kept.empty()) {
        LinearClassifier same = clf;
        same.meta.warnings.push_back("pseudo-label refinement skipped: no image reached confidence " +
                                     format_double(cfg.confidence_threshold));
        info["applied"] = false;
        same.meta.refinement = info;
        return same;
    }

    Matrix inputs(kept.size(), clf.dimension);
    for (std::size_t r = 0; r < kept.size(); ++r) {
        const auto unit = normalize(unlabeled_images.row_embedding(kept[r]));
        std::copy(unit.begin(), unit.end(), inputs.row(r).begin());
    }
    TrainConfig refine_cfg = clf.meta.config;
    refine_cfg.steps = cfg.refine_steps;
    refine_cfg.learning_rate = cfg.refine_lr;
    refine_cfg.seed = sub_seed(clf.meta.config.seed, "refine");

    LinearClassifier refined = continue_training(clf, inputs, pseudo_labels, refine_cfg);
    // Keep the original training config on record; the refinement block holds
    // what the second stage used.
    refined.meta.config = clf.meta.config;
    refined.meta.warnings = clf.meta.warnings;
    info["applied"] = true;
    info["initial_loss"] = refined.meta.initial_loss;
    info["final_loss"] = refined.meta.final_loss;
    refined.meta.initial_loss = clf.meta.initial_loss;
    refined.meta.final_loss = clf.meta.final_loss;
    refined.meta.steps_run = clf.meta.steps_run;
    refined.meta.num_examples = clf.meta.num_examples;
    refined.meta.refinement = info;
    return refined;
}

}  // namespace tap
