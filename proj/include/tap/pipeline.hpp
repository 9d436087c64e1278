#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tap/error.hpp"
#include "tap/evaluator.hpp"
#include "tap/llm_client.hpp"
#include "tap/synthetic_space.hpp"
#include "tap/trainer.hpp"

namespace tap {

namespace fs = std::filesystem;

// 0 success, 2 configuration, 3 network, 4 numeric, 5 missing input.
int exit_code_for(ErrorKind kind);

inline constexpr std::string_view kSingleTemplate = "a photo of a {class}.";

// Synthetic-space flags shared by several subcommands. The space seed defaults
// to a sub-seed of the global seed so every stage sees the same space.
struct SyntheticFlags {
    std::optional<fs::path> space_file;
    int dimension = 128;
    int num_classes = 10;
    double sigma_intra = 0.1;
    double modality_gap = 0.0;
    std::optional<std::uint64_t> seed;

    SyntheticSpaceConfig resolve(std::uint64_t global_seed, std::optional<int> class_count = {}) const;
};

struct GenPromptsOptions {
    std::optional<fs::path> profile;
    fs::path classes;
    fs::path out;
    bool generic = false;
    std::vector<std::string> templates;
    std::string task_name = "generic";
};

std::size_t cmd_gen_prompts(const GenPromptsOptions& opts, std::ostream& log);

struct FetchCommandOptions {
    fs::path prompts;
    fs::path out;
    std::optional<std::string> endpoint;
    std::optional<fs::path> fixture;
    std::optional<fs::path> cache;
    SamplingParams sampling;
    int concurrency = 4;
    int retries = 3;
    int backoff_ms = 200;
    bool allow_partial = false;
    std::string model;
    std::string token_env = "TAP_LLM_API_KEY";
};

// transport, when given, replaces the endpoint/fixture selection.
FetchResult cmd_fetch(const FetchCommandOptions& opts, std::ostream& log, Transport* transport = nullptr);

struct TrainCommandOptions {
    std::optional<fs::path> classes;
    std::optional<fs::path> descriptions;
    std::optional<fs::path> dataset;
    std::optional<fs::path> text_bundle;
    std::optional<fs::path> class_embeddings;
    std::optional<fs::path> config;
    std::optional<fs::path> dataset_out;
    fs::path out;
    bool synthetic = false;
    SyntheticFlags synth;
    int per_class = 50;
    bool allow_empty_classes = false;
    std::uint64_t seed = 0;
    // Command-line overrides applied after the config file.
    std::optional<int> steps;
    std::optional<double> learning_rate;
    std::optional<double> label_smoothing;
    std::optional<double> noise_sigma;
    std::optional<double> weight_decay;
};

LinearClassifier cmd_train(const TrainCommandOptions& opts, std::ostream& log);

struct EvalCommandOptions {
    std::vector<std::string> methods{"tap"};
    std::optional<fs::path> images;
    std::optional<std::string> dataset_name;
    std::optional<fs::path> classes;
    std::optional<fs::path> classifier;
    std::optional<fs::path> single_embeddings;
    std::optional<fs::path> dst_embeddings;
    std::optional<fs::path> name_embeddings;
    std::optional<fs::path> config;
    std::vector<fs::path> merge;
    std::optional<fs::path> out;
    double temperature = 0.01;
    std::uint64_t seed = 0;
};

EvalReport cmd_eval(const EvalCommandOptions& opts, std::ostream& log);

struct RefineCommandOptions {
    std::optional<fs::path> classifier;
    std::optional<fs::path> unlabeled;
    std::optional<fs::path> eval_images;
    std::optional<fs::path> report;
    fs::path out;
    PseudoLabelConfig pseudo;
};

struct RefineSummary {
    LinearClassifier classifier;
    std::size_t retained = 0;
    std::optional<double> accuracy_before;
    std::optional<double> accuracy_after;
};

RefineSummary cmd_refine(const RefineCommandOptions& opts, std::ostream& log);

struct SynthSpaceOptions {
    fs::path out;
    Modality modality = Modality::Text;
    SyntheticFlags synth;
    std::optional<fs::path> dataset;
    std::optional<fs::path> descriptions;
    std::optional<fs::path> classes;
    std::vector<std::string> templates;
    std::optional<int> per_class;
    std::uint64_t seed = 0;
};

EmbeddingBundle cmd_synth_space(const SynthSpaceOptions& opts, std::ostream& log);

// Runs every stage described by a PipelineManifest JSON file. Relative paths
// resolve against the manifest's directory (or its "root" entry).
EvalReport cmd_run_all(const fs::path& manifest, std::optional<std::uint64_t> seed, std::ostream& out,
                       std::ostream& log);

// Full command-line entry point; returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tap
