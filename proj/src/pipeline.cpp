#include "tap/pipeline.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tap/io_util.hpp"

namespace tap {

namespace {

[[noreturn]] void missing(const std::string& what) { throw Error(ErrorKind::MissingInput, what); }

nlohmann::json read_json_file(const fs::path& path, ErrorKind kind_on_error) {
    const std::string content = read_text_file(path);
    try {
        return nlohmann::json::parse(content);
    } catch (const nlohmann::json::exception& e) {
        throw Error(kind_on_error, path.string() + ": " + e.what());
    }
}

ClassVocabulary numbered_vocabulary(std::size_t k) {
    std::vector<std::string> names;
    for (std::size_t c = 0; c < k; ++c) names.push_back("class_" + std::to_string(c));
    return ClassVocabulary(std::move(names));
}

TrainConfig resolve_train_config(const std::optional<fs::path>& config, std::uint64_t global_seed) {
    TrainConfig cfg;
    cfg.seed = sub_seed(global_seed, "train");
    if (config) cfg = train_config_from_json(read_json_file(*config, ErrorKind::InvalidConfig), cfg);
    return cfg;
}

// Labels carried by a bundle become a text dataset; texts are irrelevant for
// training on precomputed embeddings.
TextDataset dataset_from_bundle_labels(const ClassVocabulary& vocab, const EmbeddingBundle& bundle,
                                       const std::string& what) {
    if (!bundle.has_labels()) throw Error(ErrorKind::MissingLabels, what + " must carry labels");
    TextDataset ds;
    ds.vocab = vocab;
    for (int label : bundle.labels()) {
        if (!vocab.contains(label)) {
            throw Error(ErrorKind::UnknownClassId, what + " has label " + std::to_string(label) + " outside vocabulary");
        }
        ds.items.push_back(TextItem{vocab.names()[static_cast<std::size_t>(label)], label});
    }
    return ds;
}

std::vector<std::string> split_csv_list(const std::vector<std::string>& raw) {
    std::vector<std::string> out;
    for (const auto& entry : raw) {
        std::stringstream ss(entry);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(item);
        }
    }
    return out;
}

void write_report_file(const EvalReport& report, const fs::path& path) {
    write_text_file_atomic(path, render_report(report, ReportFormat::Json));
}

}  // namespace

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::EndpointUnreachable:
        case ErrorKind::MalformedResponse:
            return 3;
        case ErrorKind::ShapeMismatch:
        case ErrorKind::NonFiniteLoss:
        case ErrorKind::NonFiniteValue:
        case ErrorKind::ZeroVector:
        case ErrorKind::DimensionMismatch:
        case ErrorKind::EmptyVector:
            return 4;
        case ErrorKind::MissingInput:
        case ErrorKind::MissingLabels:
        case ErrorKind::EmptyReport:
            return 5;
        case ErrorKind::IoError:
            return 1;
        default:
            return 2;
    }
}

SyntheticSpaceConfig SyntheticFlags::resolve(std::uint64_t global_seed, std::optional<int> class_count) const {
    SyntheticSpaceConfig cfg;
    if (space_file) {
        auto doc = read_json_file(*space_file, ErrorKind::InvalidConfig);
        if (!doc.contains("seed")) doc["seed"] = sub_seed(global_seed, "space");
        cfg = synthetic_space_from_json(doc);
    } else {
        cfg.dimension = dimension;
        cfg.num_classes = num_classes;
        cfg.sigma_intra = sigma_intra;
        cfg.modality_gap = modality_gap;
        cfg.seed = seed.value_or(sub_seed(global_seed, "space"));
    }
    if (class_count) {
        if (space_file && cfg.num_classes != *class_count) {
            throw Error(ErrorKind::InvalidConfig, "synthetic space has " + std::to_string(cfg.num_classes) +
                                                      " classes but the vocabulary has " +
                                                      std::to_string(*class_count));
        }
        cfg.num_classes = *class_count;
    }
    cfg.validate();
    return cfg;
}

std::size_t cmd_gen_prompts(const GenPromptsOptions& opts, std::ostream& log) {
    const ClassVocabulary vocab = load_vocabulary(opts.classes);
    std::vector<TargetedPrompt> prompts;
    if (opts.generic) {
        const auto templates = opts.templates.empty() ? default_generic_templates() : opts.templates;
        prompts = render_generic_prompts(vocab, templates, opts.task_name);
    } else {
        if (!opts.profile) missing("gen-prompts needs --profile (or --generic)");
        prompts = render_prompts(load_task_profile(*opts.profile), vocab);
    }
    write_prompts(prompts, opts.out);
    const std::size_t per_class = vocab.empty() ? 0 : prompts.size() / vocab.size();
    log << "wrote " << prompts.size() << " prompts (" << vocab.size() << " classes x " << per_class << ") to "
        << opts.out.string() << "\n";
    return prompts.size();
}

FetchResult cmd_fetch(const FetchCommandOptions& opts, std::ostream& log, Transport* transport) {
    const auto prompts = read_prompts(opts.prompts);
    const auto requests = make_requests(prompts, opts.sampling);

    std::unique_ptr<Transport> owned;
    if (!transport) {
        if (opts.fixture) {
            owned = std::make_unique<FixtureTransport>(load_fixture_descriptions(*opts.fixture));
        } else if (opts.endpoint) {
            owned = std::make_unique<HttpTransport>(HttpTransportConfig{*opts.endpoint, opts.model, opts.token_env});
        } else {
            throw Error(ErrorKind::InvalidConfig, "fetch needs --endpoint or --fixture");
        }
        transport = owned.get();
    }

    FetchOptions fo;
    fo.cache_dir = opts.cache;
    fo.model = opts.model;
    fo.max_in_flight = opts.concurrency;
    fo.max_attempts = std::max(1, opts.retries);
    fo.initial_backoff = std::chrono::milliseconds(opts.backoff_ms);
    fo.allow_partial = opts.allow_partial;

    FetchResult result = fetch_descriptions(requests, *transport, fo);
    write_descriptions(result.descriptions, opts.out);
    for (const auto& f : result.failures) {
        log << "failed: " << f.prompt_id << " (" << to_string(f.kind) << "): " << f.message << "\n";
    }
    log << "wrote " << result.descriptions.size() << " descriptions to " << opts.out.string() << " ("
        << result.cache_hits << " cache hits, " << result.transport_calls << " transport calls, "
        << result.failures.size() << " failed prompts)\n";
    return result;
}

LinearClassifier cmd_train(const TrainCommandOptions& opts, std::ostream& log) {
    ClassVocabulary vocab;
    if (opts.classes) {
        vocab = load_vocabulary(*opts.classes);
    } else if (opts.synthetic) {
        vocab = numbered_vocabulary(static_cast<std::size_t>(opts.synth.resolve(opts.seed).num_classes));
    } else {
        missing("train needs --classes");
    }

    TextDataset dataset;
    if (opts.dataset) {
        dataset = read_text_dataset(*opts.dataset, vocab);
    } else if (opts.descriptions) {
        dataset = build_text_dataset(read_descriptions(*opts.descriptions), vocab,
                                     BuildOptions{opts.allow_empty_classes});
    } else if (opts.synthetic) {
        dataset.vocab = vocab;
        dataset.items = synthetic_items(static_cast<int>(vocab.size()), opts.per_class, "text");
    } else {
        missing("train needs --descriptions, --dataset or --synthetic");
    }
    if (opts.dataset_out) write_text_dataset(dataset, *opts.dataset_out);

    EmbeddingBundle text_bundle;
    if (opts.text_bundle) {
        text_bundle = read_bundle(*opts.text_bundle);
    } else if (opts.synthetic) {
        const SyntheticSpace space(opts.synth.resolve(opts.seed, static_cast<int>(vocab.size())));
        text_bundle = space.encode_all(dataset.items, Modality::Text, vocab.names());
    } else {
        missing("train needs --text-bundle or --synthetic");
    }

    TrainConfig cfg = resolve_train_config(opts.config, opts.seed);
    if (opts.steps) cfg.steps = *opts.steps;
    if (opts.learning_rate) cfg.learning_rate = *opts.learning_rate;
    if (opts.label_smoothing) cfg.label_smoothing = *opts.label_smoothing;
    if (opts.noise_sigma) cfg.noise_sigma = *opts.noise_sigma;
    if (opts.weight_decay) cfg.weight_decay = *opts.weight_decay;

    std::optional<ClassTextEmbeddings> init;
    if (cfg.init_from_class_embeddings) {
        if (!opts.class_embeddings) missing("init_from_class_embeddings needs --class-embeddings");
        init = class_embeddings_from_bundle(read_bundle(*opts.class_embeddings), vocab.size());
    }

    LinearClassifier clf = train_text_classifier(dataset, text_bundle, cfg, init ? &*init : nullptr);
    save_classifier(clf, opts.out);
    log << "trained on " << dataset.size() << " texts, " << vocab.size() << " classes, d=" << clf.dimension
        << ": initial loss " << format_double(clf.meta.initial_loss) << ", final loss " << format_double(clf.meta.final_loss)
        << " after " << clf.meta.steps_run << " steps; wrote " << opts.out.string() << "\n";
    return clf;
}

EvalReport cmd_eval(const EvalCommandOptions& opts, std::ostream& log) {
    const std::set<std::string> known{"tap", "clip-single", "clip-dst", "tot-cls", "tot-dst"};
    for (const auto& m : opts.methods) {
        if (!known.contains(m)) throw Error(ErrorKind::InvalidConfig, "unknown method '" + m + "'");
    }
    auto need = [](const std::optional<fs::path>& p, const std::string& method, const std::string& flag) {
        if (!p) missing(method + " requires " + flag);
        if (!fs::exists(*p)) missing(method + " input '" + p->string() + "' (" + flag + ") does not exist");
        return *p;
    };
    if (!opts.images) missing("eval requires --images");
    for (const auto& m : opts.methods) {
        if (m == "tap") need(opts.classifier, m, "--classifier");
        if (m == "clip-single") need(opts.single_embeddings, m, "--single-embeddings");
        if (m == "clip-dst" || m == "tot-dst") need(opts.dst_embeddings, m, "--dst-embeddings");
        if (m == "tot-cls") need(opts.name_embeddings, m, "--name-embeddings");
    }
    const EmbeddingBundle images = read_bundle(need(opts.images, "eval", "--images"));
    const std::string dataset_name = opts.dataset_name.value_or(opts.images->stem().string());

    std::optional<LinearClassifier> tap_clf;
    if (opts.classifier) tap_clf = load_classifier(*opts.classifier);

    ClassVocabulary vocab;
    if (opts.classes) {
        vocab = load_vocabulary(*opts.classes);
    } else if (tap_clf) {
        vocab = tap_clf->vocab;
    } else if (!images.class_names().empty()) {
        vocab = ClassVocabulary(images.class_names());
    } else {
        const auto& labels = images.labels();
        vocab = numbered_vocabulary(static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end()) + 1));
    }

    const ZeroShotConfig zs{opts.temperature};
    const TrainConfig tot_cfg = resolve_train_config(opts.config, opts.seed);

    EvalReport report;
    for (const auto& path : opts.merge) {
        auto prior = report_from_json(read_json_file(path, ErrorKind::FormatError));
        for (auto& row : prior.rows) report.rows.push_back(std::move(row));
    }
    for (const auto& m : opts.methods) {
        EvalRow row;
        if (m == "tap") {
            row = evaluate_classifier(*tap_clf, images, m, dataset_name);
        } else if (m == "clip-single" || m == "clip-dst") {
            const auto& path = m == "clip-single" ? *opts.single_embeddings : *opts.dst_embeddings;
            const auto class_embs = class_embeddings_from_bundle(read_bundle(path), vocab.size());
            row = evaluate_zero_shot(class_embs, images, zs, m, dataset_name, vocab.names());
        } else {
            const bool cls_only = m == "tot-cls";
            const auto bundle = read_bundle(cls_only ? *opts.name_embeddings : *opts.dst_embeddings);
            TrainConfig cfg = tot_cfg;
            cfg.seed = sub_seed(tot_cfg.seed, m);
            const auto clf = train_text_classifier(dataset_from_bundle_labels(vocab, bundle, m + " embeddings"),
                                                   bundle, cfg);
            row = evaluate_classifier(clf, images, m, dataset_name);
        }
        log << m << " on " << dataset_name << ": " << format_double(row.accuracy) << "% (" << row.correct << "/"
            << row.sample_count << ")\n";
        report.rows.push_back(std::move(row));
    }

    report.config["dataset"] = dataset_name;
    report.config["methods"] = opts.methods;
    report.config["temperature"] = opts.temperature;
    report.config["tot_train_config"] = to_json(tot_cfg);
    if (tap_clf) report.config["tap_train_config"] = to_json(tap_clf->meta.config);
    if (opts.out) write_report_file(report, *opts.out);
    return report;
}

RefineSummary cmd_refine(const RefineCommandOptions& opts, std::ostream& log) {
    if (!opts.classifier) missing("refine requires --classifier");
    if (!opts.unlabeled) missing("refine requires --unlabeled");
    if (!fs::exists(*opts.unlabeled)) missing("unlabeled bundle '" + opts.unlabeled->string() + "' does not exist");
    const LinearClassifier clf = load_classifier(*opts.classifier);
    const EmbeddingBundle unlabeled = read_bundle(*opts.unlabeled);

    RefineSummary summary;
    summary.classifier = pseudo_label_refine(clf, unlabeled, opts.pseudo);
    summary.retained = summary.classifier.meta.refinement->value("retained", std::size_t{0});
    save_classifier(summary.classifier, opts.out);

    nlohmann::ordered_json delta;
    delta["unlabeled"] = unlabeled.count();
    delta["retained"] = summary.retained;
    delta["confidence_threshold"] = opts.pseudo.confidence_threshold;
    if (opts.eval_images) {
        const auto images = read_bundle(*opts.eval_images);
        summary.accuracy_before = evaluate_classifier(clf, images).accuracy;
        summary.accuracy_after = evaluate_classifier(summary.classifier, images).accuracy;
        delta["accuracy_before"] = *summary.accuracy_before;
        delta["accuracy_after"] = *summary.accuracy_after;
        delta["delta"] = *summary.accuracy_after - *summary.accuracy_before;
    }
    if (opts.report) write_text_file_atomic(*opts.report, delta.dump(2) + "\n");

    log << "retained " << summary.retained << "/" << unlabeled.count() << " pseudo-labels at threshold "
        << format_double(opts.pseudo.confidence_threshold);
    if (summary.accuracy_before) {
        log << "; accuracy " << format_double(*summary.accuracy_before) << " -> "
            << format_double(*summary.accuracy_after) << " (delta "
            << format_double(*summary.accuracy_after - *summary.accuracy_before) << ")";
    }
    log << "; wrote " << opts.out.string() << "\n";
    return summary;
}

EmbeddingBundle cmd_synth_space(const SynthSpaceOptions& opts, std::ostream& log) {
    std::optional<ClassVocabulary> vocab;
    if (opts.classes) vocab = load_vocabulary(*opts.classes);
    const auto cfg = opts.synth.resolve(opts.seed, vocab ? std::optional<int>(static_cast<int>(vocab->size()))
                                                         : std::nullopt);
    const ClassVocabulary names = vocab ? *vocab : numbered_vocabulary(static_cast<std::size_t>(cfg.num_classes));

    std::vector<TextItem> items;
    if (opts.dataset) {
        items = read_text_dataset(*opts.dataset, names).items;
    } else if (opts.descriptions) {
        items = build_text_dataset(read_descriptions(*opts.descriptions), names).items;
    } else if (!opts.templates.empty()) {
        for (const auto& p : render_generic_prompts(names, opts.templates, "synth")) {
            items.push_back(TextItem{p.rendered_text, p.class_id});
        }
    } else if (opts.per_class) {
        items = synthetic_items(cfg.num_classes, *opts.per_class, to_string(opts.modality));
    } else {
        missing("synth-space needs --dataset, --descriptions, --template or --per-class");
    }

    const SyntheticSpace space(cfg);
    EmbeddingBundle bundle = space.encode_all(items, opts.modality, names.names());
    write_bundle(bundle, opts.out);
    log << "wrote " << bundle.count() << " " << to_string(opts.modality) << " embeddings (d=" << bundle.dimension()
        << ", " << cfg.describe() << ") to " << opts.out.string() << "\n";
    return bundle;
}

EvalReport cmd_run_all(const fs::path& manifest_file, std::optional<std::uint64_t> seed_override, std::ostream& out,
                       std::ostream& log) {
    const auto m = read_json_file(manifest_file, ErrorKind::InvalidConfig);
    fs::path root = manifest_file.parent_path();
    if (m.contains("root")) root = root / m["root"].get<std::string>();
    auto path_of = [&](const char* key) -> std::optional<fs::path> {
        if (!m.contains(key) || m[key].is_null()) return std::nullopt;
        return root / m[key].get<std::string>();
    };
    auto required = [&](const char* key) {
        auto p = path_of(key);
        if (!p) missing(std::string("manifest entry '") + key + "' is required");
        return *p;
    };
    const std::uint64_t seed = seed_override.value_or(m.value("seed", std::uint64_t{0}));
    const auto stages_file = fs::path(manifest_file.string() + ".stages.json");
    std::vector<std::string> done;
    auto mark = [&](const std::string& stage) {
        done.push_back(stage);
        write_text_file_atomic(stages_file, nlohmann::json{{"completed", done}}.dump(2) + "\n");
    };
    fs::remove(stages_file);

    const fs::path classes = required("classes");
    const ClassVocabulary vocab = load_vocabulary(classes);

    GenPromptsOptions gp;
    gp.classes = classes;
    gp.out = required("prompts");
    gp.generic = m.value("generic", false);
    gp.profile = path_of("task_profile");
    cmd_gen_prompts(gp, log);
    mark("gen-prompts");

    FetchCommandOptions fetch;
    fetch.prompts = gp.out;
    fetch.out = required("descriptions");
    fetch.fixture = path_of("fixture");
    if (m.contains("endpoint")) fetch.endpoint = m["endpoint"].get<std::string>();
    fetch.cache = path_of("cache");
    if (m.contains("sampling")) {
        const auto& s = m["sampling"];
        fetch.sampling.samples_per_prompt = s.value("samples_per_prompt", fetch.sampling.samples_per_prompt);
        fetch.sampling.max_tokens = s.value("max_tokens", fetch.sampling.max_tokens);
        fetch.sampling.temperature = s.value("temperature", fetch.sampling.temperature);
    }
    cmd_fetch(fetch, log);
    mark("fetch");

    const TextDataset dataset = build_text_dataset(read_descriptions(fetch.out), vocab);
    const fs::path dataset_path = path_of("dataset").value_or(root / "dataset.jsonl");
    write_text_dataset(dataset, dataset_path);
    mark("dataset");

    const std::vector<std::string> dst_templates =
        m.value("dst_templates", std::vector<std::string>{std::string(kSingleTemplate)});
    const fs::path text_bundle = required("text_bundle");
    const fs::path image_bundle = required("image_bundle");
    const auto single = path_of("single_embeddings");
    const auto dst = path_of("dst_embeddings");
    const auto names = path_of("name_embeddings");

    if (m.contains("synthetic")) {
        const auto& syn = m["synthetic"];
        SyntheticFlags flags;
        if (syn.contains("space")) {
            const auto cfg = synthetic_space_from_json([&] {
                auto doc = syn["space"];
                if (!doc.contains("seed")) doc["seed"] = sub_seed(seed, "space");
                if (!doc.contains("num_classes")) doc["num_classes"] = vocab.size();
                return doc;
            }());
            flags.dimension = cfg.dimension;
            flags.num_classes = cfg.num_classes;
            flags.sigma_intra = cfg.sigma_intra;
            flags.modality_gap = cfg.modality_gap;
            flags.seed = cfg.seed;
        }
        auto synth = [&](const fs::path& out_path, Modality modality) {
            SynthSpaceOptions so;
            so.out = out_path;
            so.modality = modality;
            so.synth = flags;
            so.classes = classes;
            so.seed = seed;
            return so;
        };
        auto text = synth(text_bundle, Modality::Text);
        text.dataset = dataset_path;
        cmd_synth_space(text, log);
        auto img = synth(image_bundle, Modality::Image);
        img.per_class = syn.value("images_per_class", 100);
        cmd_synth_space(img, log);
        if (single) {
            auto s = synth(*single, Modality::Text);
            s.templates = {std::string(kSingleTemplate)};
            cmd_synth_space(s, log);
        }
        if (dst) {
            auto s = synth(*dst, Modality::Text);
            s.templates = dst_templates;
            cmd_synth_space(s, log);
        }
        if (names) {
            auto s = synth(*names, Modality::Text);
            s.templates = {"{class}"};
            cmd_synth_space(s, log);
        }
        mark("synth-space");
    }

    std::optional<fs::path> train_config;
    if (m.contains("train")) {
        train_config = root / "train_config.json";
        auto cfg = m["train"];
        if (!cfg.contains("seed")) cfg["seed"] = sub_seed(seed, "train");
        write_text_file_atomic(*train_config, cfg.dump(2) + "\n");
    }

    TrainCommandOptions train;
    train.classes = classes;
    train.dataset = dataset_path;
    train.text_bundle = text_bundle;
    train.config = train_config;
    train.out = required("classifier");
    train.seed = seed;
    cmd_train(train, log);
    mark("train");

    EvalCommandOptions ev;
    ev.methods = m.value("methods", std::vector<std::string>{"tap", "clip-single", "clip-dst", "tot-cls", "tot-dst"});
    ev.images = image_bundle;
    ev.dataset_name = m.value("dataset_name", std::string("dataset"));
    ev.classes = classes;
    ev.classifier = train.out;
    ev.single_embeddings = single;
    ev.dst_embeddings = dst;
    ev.name_embeddings = names;
    ev.config = train_config;
    ev.out = path_of("report");
    ev.seed = seed;
    if (m.contains("temperature")) ev.temperature = m["temperature"].get<double>();
    EvalReport report = cmd_eval(ev, log);
    mark("eval");

    out << render_report(report, ReportFormat::Table);
    return report;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Targeted-prompting text-only classifier toolkit", "tap"};
    app.require_subcommand(1);
    std::uint64_t seed = 0;
    bool seed_given = false;
    app.add_option_function<std::uint64_t>(
           "--seed",
        [&](std::uint64_t s) {
            seed = s;
            seed_given = true;
        },
        "Global seed for every stage");

    auto add_synth_flags = [](CLI::App* sub, SyntheticFlags& f) {
        sub->add_option("--space", f.space_file, "Synthetic space config JSON");
        sub->add_option("--synth-dim", f.dimension, "Synthetic embedding dimension");
        sub->add_option("--synth-classes", f.num_classes, "Synthetic class count (without --classes)");
        sub->add_option("--synth-sigma", f.sigma_intra, "Intra-class noise");
        sub->add_option("--synth-gap", f.modality_gap, "Text/image modality gap");
        sub->add_option("--synth-seed", f.seed, "Space seed (default: derived from --seed)");
    };

    GenPromptsOptions gp;
    auto* gen = app.add_subcommand("gen-prompts", "Render targeted (or generic) LLM prompts");
    gen->add_option("--profile", gp.profile, "Task profile JSON");
    gen->add_option("--classes", gp.classes, "Class names (.json array or one per line)")->required();
    gen->add_option("--out", gp.out, "Output prompts JSON-lines")->required();
    gen->add_flag("--generic", gp.generic, "Generic prompting without task targeting");
    gen->add_option("--template", gp.templates, "Generic template(s) with {class}");
    gen->add_option("--task-name", gp.task_name, "Prompt id prefix for generic prompts");

    FetchCommandOptions fetch;
    auto* fe = app.add_subcommand("fetch", "Fetch class descriptions for prompts");
    fe->add_option("--prompts", fetch.prompts, "Prompts JSON-lines")->required();
    fe->add_option("--out", fetch.out, "Output descriptions JSON-lines")->required();
    fe->add_option("--endpoint", fetch.endpoint, "Completion endpoint URL");
    fe->add_option("--fixture", fetch.fixture, "Offline fixture descriptions JSON-lines");
    fe->add_option("--cache", fetch.cache, "Cache directory");
    fe->add_option("--samples", fetch.sampling.samples_per_prompt, "Descriptions per prompt");
    fe->add_option("--max-tokens", fetch.sampling.max_tokens, "Completion length");
    fe->add_option("--temperature", fetch.sampling.temperature, "Sampling temperature");
    fe->add_option("--concurrency", fetch.concurrency, "Requests in flight");
    fe->add_option("--retries", fetch.retries, "Attempts per request");
    fe->add_option("--backoff-ms", fetch.backoff_ms, "Initial retry backoff");
    fe->add_flag("--allow-partial", fetch.allow_partial, "Write what succeeded and exit 0");
    fe->add_option("--model", fetch.model, "Model name sent to the endpoint");
    fe->add_option("--token-env", fetch.token_env, "Environment variable holding the bearer token");

    TrainCommandOptions train;
    auto* tr = app.add_subcommand("train", "Train the text classifier");
    tr->add_option("--classes", train.classes, "Class names");
    tr->add_option("--descriptions", train.descriptions, "Descriptions JSON-lines");
    tr->add_option("--dataset", train.dataset, "Text dataset JSON-lines {text, class_id}");
    tr->add_option("--text-bundle", train.text_bundle, "Text embeddings aligned with the dataset");
    tr->add_option("--class-embeddings", train.class_embeddings, "Class-name embeddings for init");
    tr->add_option("--config", train.config, "Train config JSON");
    tr->add_option("--dataset-out", train.dataset_out, "Write the built text dataset here");
    tr->add_option("--out", train.out, "Output classifier JSON")->required();
    tr->add_flag("--synthetic", train.synthetic, "Encode texts with the synthetic space");
    tr->add_option("--per-class", train.per_class, "Synthetic texts per class without descriptions");
    tr->add_flag("--allow-empty-classes", train.allow_empty_classes, "Permit classes without descriptions");
    tr->add_option("--steps", train.steps, "Optimization steps");
    tr->add_option("--lr", train.learning_rate, "Learning rate");
    tr->add_option("--smoothing", train.label_smoothing, "Label smoothing");
    tr->add_option("--noise", train.noise_sigma, "Embedding noise sigma");
    tr->add_option("--weight-decay", train.weight_decay, "AdamW weight decay");
    add_synth_flags(tr, train.synth);

    EvalCommandOptions ev;
    std::vector<std::string> methods_raw;
    std::string format = "table";
    auto* eva = app.add_subcommand("eval", "Evaluate methods on an image bundle");
    eva->add_option("--methods", methods_raw, "Comma list of tap, clip-single, clip-dst, tot-cls, tot-dst");
    eva->add_option("--images", ev.images, "Labeled image embeddings");
    eva->add_option("--dataset-name", ev.dataset_name, "Column name in the report");
    eva->add_option("--classes", ev.classes, "Class names");
    eva->add_option("--classifier", ev.classifier, "Trained classifier (tap)");
    eva->add_option("--single-embeddings", ev.single_embeddings, "One text embedding per class (clip-single)");
    eva->add_option("--dst-embeddings", ev.dst_embeddings, "Labeled per-template embeddings (clip-dst, tot-dst)");
    eva->add_option("--name-embeddings", ev.name_embeddings, "Class-name embeddings (tot-cls)");
    eva->add_option("--config", ev.config, "Train config for the TOT baselines");
    eva->add_option("--merge", ev.merge, "Prior report JSON files to merge");
    eva->add_option("--out", ev.out, "Report JSON path");
    eva->add_option("--temperature", ev.temperature, "Zero-shot softmax temperature");
    eva->add_option("--format", format, "Stdout format: table, json or csv");

    RefineCommandOptions rf;
    auto* re = app.add_subcommand("refine", "Pseudo-label refinement of a trained classifier");
    re->add_option("--classifier", rf.classifier, "Classifier to refine");
    re->add_option("--unlabeled", rf.unlabeled, "Unlabeled image embeddings");
    re->add_option("--eval-images", rf.eval_images, "Labeled images for the before/after delta");
    re->add_option("--report", rf.report, "Delta report JSON path");
    re->add_option("--out", rf.out, "Output classifier JSON")->required();
    re->add_option("--threshold", rf.pseudo.confidence_threshold, "Confidence threshold");
    re->add_option("--refine-steps", rf.pseudo.refine_steps, "Refinement steps");
    re->add_option("--refine-lr", rf.pseudo.refine_lr, "Refinement learning rate");

    std::string manifest;
    auto* ra = app.add_subcommand("run-all", "Run every stage from a pipeline manifest");
    ra->add_option("--manifest", manifest, "Pipeline manifest JSON")->required();

    SynthSpaceOptions ss;
    std::string modality = "text";
    auto* sy = app.add_subcommand("synth-space", "Emit synthetic embedding bundles");
    sy->add_option("--out", ss.out, "Output bundle")->required();
    sy->add_option("--modality", modality, "text or image");
    sy->add_option("--dataset", ss.dataset, "Encode a text dataset");
    sy->add_option("--descriptions", ss.descriptions, "Encode descriptions");
    sy->add_option("--classes", ss.classes, "Class names");
    sy->add_option("--template", ss.templates, "Encode each class through these templates");
    sy->add_option("--per-class", ss.per_class, "Anonymous samples per class");
    add_synth_flags(sy, ss.synth);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    try {
        if (gen->parsed()) {
            cmd_gen_prompts(gp, err);
        } else if (fe->parsed()) {
            cmd_fetch(fetch, err);
        } else if (tr->parsed()) {
            train.seed = seed;
            cmd_train(train, err);
        } else if (eva->parsed()) {
            if (!methods_raw.empty()) ev.methods = split_csv_list(methods_raw);
            ev.seed = seed;
            const auto fmt = report_format_from_string(format);
            const auto report = cmd_eval(ev, err);
            out << render_report(report, fmt);
        } else if (re->parsed()) {
            cmd_refine(rf, err);
        } else if (ra->parsed()) {
            cmd_run_all(manifest, seed_given ? std::optional<std::uint64_t>(seed) : std::nullopt, out, err);
        } else if (sy->parsed()) {
            ss.modality = modality_from_string(modality);
            ss.seed = seed;
            cmd_synth_space(ss, err);
        }
    } catch (const FetchError& e) {
        err << "error: " << e.what() << "\n";
        err << "failed prompt ids:";
        for (const auto& id : e.failed_prompt_ids()) err << " " << id;
        err << "\n";
        return exit_code_for(e.kind());
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace tap
