#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "tap/bundle.hpp"
#include "tap/core_math.hpp"
#include "tap/text_dataset.hpp"
#include "tap/trainer.hpp"

namespace tap {

struct ClassAccuracy {
    int class_id = 0;
    std::string class_name;
    std::size_t correct = 0;
    std::size_t total = 0;

    bool operator==(const ClassAccuracy&) const = default;
};

// One (method, dataset) cell of the accuracy table.
struct EvalRow {
    std::string method;
    std::string dataset;
    double accuracy = 0.0;  // percent
    std::size_t correct = 0;
    std::size_t sample_count = 0;
    std::vector<ClassAccuracy> per_class;

    bool operator==(const EvalRow&) const = default;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
};

// Accuracy is derived from an integer correct-count, so the result does not
// depend on evaluation order.
EvalRow evaluate_classifier(const LinearClassifier& clf, const EmbeddingBundle& images, std::string method = "tap",
                            std::string dataset = "dataset", bool normalize_input = true);

EvalRow evaluate_zero_shot(const ClassTextEmbeddings& class_embeddings, const EmbeddingBundle& images,
                           const ZeroShotConfig& cfg = {}, std::string method = "clip", std::string dataset = "dataset",
                           const std::vector<std::string>& class_names = {});

// Groups labeled rows by class and returns normalize(mean(normalize(row)))
// per class; with one row per class this is just the normalized row. Rows
// without labels are taken as one row per class in order.
ClassTextEmbeddings class_embeddings_from_bundle(const EmbeddingBundle& bundle, std::size_t num_classes);

// Training sets of the text-only baselines: one item per class name, or one
// item per (class, template) rendering.
TextDataset tot_class_name_dataset(const ClassVocabulary& vocab);
TextDataset tot_template_dataset(const ClassVocabulary& vocab, const std::vector<std::string>& templates);

struct TotBaselines {
    LinearClassifier class_names_only;
    LinearClassifier templates;
};

TotBaselines build_tot_baselines(const ClassVocabulary& vocab, const std::vector<std::string>& dst_templates,
                                 const EmbeddingBundle& class_name_embeddings,
                                 const EmbeddingBundle& template_embeddings, const TrainConfig& cfg);

struct PseudoLabelConfig {
    double confidence_threshold = 0.95;
    int refine_steps = 200;
    double refine_lr = 1e-3;

    void validate() const;
};

// Labels the unlabeled images once with the given classifier, keeps those
// whose top softmax probability reaches the threshold, and continues
// training the head on them. Smoothing, noise and decay come from the
// classifier's own training config. With nothing retained the parameters are
// returned untouched and a warning is recorded.
LinearClassifier pseudo_label_refine(const LinearClassifier& clf, const EmbeddingBundle& unlabeled_images,
                                     const PseudoLabelConfig& cfg = {});

enum class ReportFormat { Table, Json, Csv };

ReportFormat report_format_from_string(const std::string& text);

// Method x dataset matrix plus a Mean column; the best value in each column is
// flagged.
std::string render_report(const EvalReport& report, ReportFormat format);

nlohmann::ordered_json to_json(const EvalRow& row);
EvalRow eval_row_from_json(const nlohmann::json& doc);
EvalReport report_from_json(const nlohmann::json& doc);

}  // namespace tap
