#include <doctest.h>

#include <random>

#include "scenarios.hpp"
#include "tap/error.hpp"
#include "tap/evaluator.hpp"

using namespace tap;

namespace {

LinearClassifier blank_classifier(int k, int d) {
    LinearClassifier clf;
    clf.dimension = static_cast<std::size_t>(d);
    clf.vocab = scenarios::numbered_vocab(k);
    clf.weights.assign(static_cast<std::size_t>(k * d), 0.0);
    clf.bias.assign(static_cast<std::size_t>(k), 0.0);
    return clf;
}

LinearClassifier oracle_classifier(const SyntheticSpace& space) {
    const int k = space.config().num_classes;
    const int d = space.config().dimension;
    auto clf = blank_classifier(k, d);
    for (int c = 0; c < k; ++c) {
        const auto& m = space.class_mean(c);
        std::copy(m.begin(), m.end(), clf.weights.begin() + static_cast<long>(c) * d);
    }
    return clf;
}

// Minimal RFC 4180 reader: quoted fields, doubled quotes.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows(1);
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            rows.back().push_back(field);
            field.clear();
        } else if (c == '\n') {
            rows.back().push_back(field);
            field.clear();
            rows.emplace_back();
        } else {
            field += c;
        }
    }
    if (rows.back().empty()) rows.pop_back();
    return rows;
}

EvalRow row(std::string method, std::string dataset, double acc) {
    EvalRow r;
    r.method = std::move(method);
    r.dataset = std::move(dataset);
    r.accuracy = acc;
    r.sample_count = 100;
    r.correct = static_cast<std::size_t>(acc);
    return r;
}

}  // namespace

TEST_CASE("constant classifier scores 100/K on a balanced set") {
    const SyntheticSpace space({32, 10, 0.1, 0.0, 0});
    const auto images = scenarios::encode_images(space, 30);
    auto clf = blank_classifier(10, 32);
    clf.bias[0] = 1.0;
    const auto r = evaluate_classifier(clf, images);
    CHECK(r.accuracy == doctest::Approx(10.0));
    CHECK(r.sample_count == 300);
    REQUIRE(r.per_class.size() == 10);
    CHECK(r.per_class[0].correct == 30);
    CHECK(r.per_class[5].correct == 0);
    CHECK(r.per_class[5].total == 30);
}

TEST_CASE("trained classifier on noise-free image means is perfect") {
    scenarios::TransferSetup setup;
    const auto result = scenarios::cross_modal_transfer(setup);
    auto clean = setup.space;
    clean.sigma_intra = 0.0;
    const SyntheticSpace space(clean);
    const auto images = scenarios::encode_images(space, 3);
    CHECK(evaluate_classifier(result.classifier, images).accuracy == 100.0);
}

TEST_CASE("class-mean weights match brute-force nearest mean") {
    const SyntheticSpace space({128, 10, 0.1, 0.0, 0});
    const auto images = scenarios::encode_images(space, 100);
    const auto r = evaluate_classifier(oracle_classifier(space), images);
    CHECK(r.accuracy >= 99.0);

    std::size_t agree = 0;
    for (std::size_t i = 0; i < images.count(); ++i) {
        const auto x = images.row_embedding(i);
        int best = 0;
        for (int c = 1; c < 10; ++c) {
            if (cosine_similarity(x, space.class_mean(c)) > cosine_similarity(x, space.class_mean(best))) best = c;
        }
        agree += best == images.labels()[i];
    }
    CHECK(r.correct == agree);
}

TEST_CASE("evaluation errors") {
    const SyntheticSpace space({16, 3, 0.1, 0.0, 0});
    auto clf = blank_classifier(3, 16);
    const auto images = scenarios::encode_images(space, 2);
    const auto unlabeled = EmbeddingBundle(16, std::vector<float>(images.matrix().begin(), images.matrix().end()));
    CHECK_THROWS_AS(evaluate_classifier(clf, unlabeled), Error);
    try {
        evaluate_classifier(clf, unlabeled);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MissingLabels);
    }
    try {
        evaluate_classifier(blank_classifier(3, 8), images);
        FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DimensionMismatch);
    }
}

TEST_CASE("balanced random labels give accuracy near 100/K") {
    const SyntheticSpace space({32, 10, 0.1, 0.0, 0});
    const auto images = scenarios::encode_images(space, 1000);
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> pick(0, 9);
    std::vector<int> labels(images.count());
    for (auto& l : labels) l = pick(rng);
    const EmbeddingBundle shuffled(32, std::vector<float>(images.matrix().begin(), images.matrix().end()), labels);
    const auto r = evaluate_classifier(oracle_classifier(space), shuffled);
    CHECK(r.sample_count == 10000);
    CHECK(r.accuracy >= 7.0);
    CHECK(r.accuracy <= 13.0);
}

TEST_CASE("zero-shot evaluation") {
    const SyntheticSpace space({64, 5, 0.0, 0.0, 0});
    std::vector<Embedding> means;
    for (int c = 0; c < 5; ++c) means.push_back(space.class_mean(c));
    const auto classes = ClassTextEmbeddings::from_rows(means);

    SUBCASE("perfect alignment") {
        const auto images = scenarios::encode_images(space, 4);
        CHECK(evaluate_zero_shot(classes, images).accuracy == 100.0);
    }
    SUBCASE("orthogonal classes with small noise") {
        std::vector<Embedding> axes(5, Embedding(64, 0.0));
        for (int c = 0; c < 5; ++c) axes[c][static_cast<std::size_t>(c)] = 1.0;
        std::mt19937_64 rng(0);
        std::normal_distribution<double> n(0.0, 0.01);
        std::vector<Embedding> rows;
        std::vector<int> labels;
        for (int c = 0; c < 5; ++c) {
            for (int i = 0; i < 40; ++i) {
                auto v = axes[c];
                for (auto& x : v) x += n(rng);
                rows.push_back(v);
                labels.push_back(c);
            }
        }
        const auto images = EmbeddingBundle::from_rows(rows, labels);
        CHECK(evaluate_zero_shot(ClassTextEmbeddings::from_rows(axes), images).accuracy == 100.0);
    }
    SUBCASE("ensembling identical templates changes nothing") {
        std::vector<Embedding> rows;
        std::vector<int> labels;
        for (int c = 0; c < 5; ++c) {
            for (int t = 0; t < 4; ++t) {
                rows.push_back(means[c]);
                labels.push_back(c);
            }
        }
        const auto ensembled = class_embeddings_from_bundle(EmbeddingBundle::from_rows(rows, labels), 5);
        const auto single = class_embeddings_from_bundle(EmbeddingBundle::from_rows(means), 5);
        REQUIRE(ensembled.size() == 5);
        for (int c = 0; c < 5; ++c) {
            for (int j = 0; j < 64; ++j) CHECK(ensembled.embeddings[c][j] == doctest::Approx(single.embeddings[c][j]).epsilon(1e-12));
        }
    }
    SUBCASE("accuracy does not depend on temperature") {
        const SyntheticSpace noisy({64, 5, 0.5, 0.3, 1});
        const auto images = scenarios::encode_images(noisy, 50);
        const auto at = [&](double tau) {
            ZeroShotConfig cfg;
            cfg.temperature = tau;
            return evaluate_zero_shot(classes, images, cfg);
        };
        const auto a = at(0.01);
        CHECK(a.accuracy < 100.0);
        CHECK(at(0.07) == a);
        CHECK(at(1.0) == a);
    }
}

TEST_CASE("text-only baseline datasets and training") {
    const auto vocab = scenarios::numbered_vocab(6);
    const auto names = tot_class_name_dataset(vocab);
    CHECK(names.size() == 6);
    CHECK(names.items[3].class_id == 3);
    CHECK(names.items[3].text == "class_3");
    const auto dst = tot_template_dataset(vocab, {"a photo of a {class}.", "a sketch of a {class}.", "art of the {class}."});
    CHECK(dst.size() == 18);
    CHECK(dst.items[4].text == "a sketch of a class_1.");

    const SyntheticSpace space({32, 6, 0.0, 0.0, 0});
    std::vector<TextItem> name_items;
    for (const auto& it : names.items) name_items.push_back(TextItem{it.text, it.class_id});
    const auto name_bundle = space.encode_all(name_items, Modality::Text);
    std::vector<TextItem> dst_items(dst.items.begin(), dst.items.end());
    const auto dst_bundle = space.encode_all(dst_items, Modality::Text);
    TrainConfig cfg;
    cfg.noise_sigma = 0.0;
    const auto tot = build_tot_baselines(vocab, {"a photo of a {class}.", "a sketch of a {class}.", "art of the {class}."},
                                         name_bundle, dst_bundle, cfg);
    CHECK(evaluate_classifier(tot.class_names_only, name_bundle).accuracy == 100.0);
    CHECK(tot.class_names_only.meta.num_examples == 6);
    CHECK(tot.templates.meta.num_examples == 18);
}

TEST_CASE("pseudo-label refinement") {
    const SyntheticSpace space({32, 5, 0.05, 0.0, 0});
    const auto texts = scenarios::encode_texts(space, 20, "text");
    TrainConfig cfg;
    cfg.noise_sigma = 0.0;
    cfg.label_smoothing = 0.0;
    cfg.learning_rate = 1e-2;
    const auto clf = train_text_classifier(texts.dataset, texts.bundle, cfg);
    const auto unlabeled = scenarios::encode_images(space, 40, "unlabeled");
    const auto test = scenarios::encode_images(space, 100, "test");

    SUBCASE("nothing retained is an exact identity with a warning") {
        PseudoLabelConfig p;
        p.confidence_threshold = 1.0;
        const auto same = pseudo_label_refine(clf, unlabeled, p);
        CHECK(same.same_parameters(clf));
        CHECK(same.meta.warnings.size() == clf.meta.warnings.size() + 1);
        REQUIRE(same.meta.refinement);
        CHECK(same.meta.refinement->at("retained") == 0);
    }
    SUBCASE("correct pseudo-labels never hurt") {
        PseudoLabelConfig p;
        p.confidence_threshold = 0.99;
        const auto refined = pseudo_label_refine(clf, unlabeled, p);
        CHECK(refined.meta.refinement->at("retained").get<int>() > 0);
        CHECK(evaluate_classifier(refined, test).accuracy >= evaluate_classifier(clf, test).accuracy);
    }
    SUBCASE("dimension mismatch") {
        const SyntheticSpace other({16, 5, 0.05, 0.0, 0});
        CHECK_THROWS_AS(pseudo_label_refine(clf, scenarios::encode_images(other, 2), {}), Error);
    }
    SUBCASE("invalid config") {
        PseudoLabelConfig p;
        p.confidence_threshold = 0.0;
        CHECK_THROWS_AS(p.validate(), Error);
        p.confidence_threshold = 0.5;
        p.refine_steps = 0;
        CHECK_THROWS_AS(p.validate(), Error);
    }
}

TEST_CASE("weakened classifier recovers through pseudo-labels") {
    const auto r = scenarios::weakened_refinement();
    CHECK(r.unlabeled == 500);
    CHECK(r.initial_accuracy >= 70.0);
    CHECK(r.initial_accuracy <= 90.0);
    CHECK(r.refined_accuracy >= r.initial_accuracy + 5.0);
}

TEST_CASE("report rendering") {
    SUBCASE("single row") {
        EvalReport rep;
        rep.rows.push_back(row("tap", "dtd", 61.25));
        const auto table = render_report(rep, ReportFormat::Table);
        CHECK(table.find("Mean") != std::string::npos);
        const auto csv = parse_csv(render_report(rep, ReportFormat::Csv));
        REQUIRE(csv.size() == 2);
        CHECK(csv[0] == std::vector<std::string>{"method", "dtd", "Mean", "best"});
        CHECK(csv[1][1] == csv[1][2]);
    }
    SUBCASE("2x2 matrix with mean column") {
        EvalReport rep;
        rep.rows = {row("tap", "dtd", 60.0), row("tap", "eurosat", 71.5), row("clip-single", "dtd", 44.0),
                    row("clip-single", "eurosat", 80.25)};
        const auto doc = nlohmann::json::parse(render_report(rep, ReportFormat::Json));
        REQUIRE(doc.at("matrix").size() == 2);
        CHECK(doc["datasets"] == nlohmann::json{"dtd", "eurosat"});
        for (const auto& entry : doc["matrix"]) {
            const auto& acc = entry.at("accuracy");
            CHECK(acc.size() == 2);
            const double mean = (acc["dtd"].get<double>() + acc["eurosat"].get<double>()) / 2.0;
            CHECK(std::abs(entry.at("mean").get<double>() - mean) < 1e-9);
        }
        // tap mean 65.75 beats 62.125
        CHECK(doc["matrix"][0]["best"] == nlohmann::json{"dtd", "Mean"});
        CHECK(doc["matrix"][1]["best"] == nlohmann::json{"eurosat"});
    }
    SUBCASE("csv survives a real parser") {
        EvalReport rep;
        rep.rows = {row("tap", "a,b \"quoted\"", 12.5), row("tot-dst", "a,b \"quoted\"", 99.125)};
        const auto csv = parse_csv(render_report(rep, ReportFormat::Csv));
        REQUIRE(csv.size() == 3);
        CHECK(csv[0][1] == "a,b \"quoted\"");
        CHECK(std::stod(csv[1][1]) == 12.5);
        CHECK(std::stod(csv[2][1]) == 99.125);
        CHECK(csv[2][3] == "a,b \"quoted\";Mean");
    }
    SUBCASE("empty report") {
        try {
            render_report(EvalReport{}, ReportFormat::Table);
            FAIL("expected EmptyReport");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::EmptyReport);
        }
    }
    SUBCASE("rows round-trip through JSON") {
        auto r = row("tap", "dtd", 33.0);
        r.per_class = {{0, "a", 1, 3}, {1, "b", 0, 2}};
        CHECK(eval_row_from_json(to_json(r)) == r);
    }
}
