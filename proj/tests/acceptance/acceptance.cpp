// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "oracles.hpp"
#include "scenarios.hpp"
#include "tap/bundle.hpp"
#include "tap/error.hpp"
#include "tap/io_util.hpp"
#include "tap/pipeline.hpp"
#include "tap/prompt_engine.hpp"
#include "temp_dir.hpp"

using namespace tap;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

// 1
Outcome gradient_oracle() {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    double worst = 0.0;
    for (int point = 0; point < 20; ++point) {
        const std::size_t k = 2 + rng() % 6, d = 3 + rng() % 8, n = 4 + rng() % 12;
        // Inputs are normalize(embedding) + noise, as seen by the trainer.
        Matrix x(n, d);
        for (std::size_t i = 0; i < n; ++i) {
            Embedding e(d);
            for (auto& v : e) v = g(rng);
            e = normalize(e);
            for (std::size_t j = 0; j < d; ++j) x.row(i)[j] = e[j] + 0.5 * g(rng);
        }
        std::vector<int> labels(n);
        for (auto& l : labels) l = static_cast<int>(rng() % k);
        std::vector<double> params(k * d + k);
        for (auto& p : params) p = g(rng);
        const double eps = std::uniform_real_distribution<double>(0.0, 0.5)(rng);

        Gradient grad;
        const std::span<const double> all(params);
        batch_loss(all.first(k * d), all.subspan(k * d), x, labels, k, eps, &grad);
        std::vector<double> analytic = grad.weights;
        analytic.insert(analytic.end(), grad.bias.begin(), grad.bias.end());
        const auto numeric = oracle::central_difference(
            [&](const std::vector<double>& p) { return oracle::linear_loss(p, x.data, n, d, labels, k, eps); }, params,
            1e-5);
        worst = std::max(worst, oracle::relative_error(analytic, numeric));
    }
    return {worst <= 1e-4, fmt("max relative error %.2e over 20 points", worst)};
}

// 2
Outcome loss_oracle() {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0.0, 3.0);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t k = 2 + rng() % 15;
        std::vector<double> z(k);
        for (auto& v : z) v = g(rng);
        const int y = static_cast<int>(rng() % k);
        const double eps = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const double got = smoothed_cross_entropy(z, y, eps).loss;
        worst = std::max(worst, std::abs(got - oracle::smoothed_ce(z, y, eps)));
    }
    return {worst <= 1e-10, fmt("max abs difference %.2e over 1000 instances", worst)};
}

// 3
Outcome softmax_invariants() {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    double worst_sum = 0.0, worst_shift = 0.0;
    int argmax_breaks = 0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t k = 2 + rng() % 15, d = 8 + rng() % 24;
        std::vector<Embedding> rows(k, Embedding(d));
        for (auto& r : rows) for (auto& v : r) v = g(rng);
        Embedding image(d);
        for (auto& v : image) v = g(rng);
        const auto classes = ClassTextEmbeddings::from_rows(rows);

        std::size_t first = 0;
        for (double tau : {0.01, 0.07, 1.0}) {
            const auto p = zero_shot_probabilities(image, classes, ZeroShotConfig{tau});
            double s = 0.0;
            for (double v : p) s += v;
            worst_sum = std::max(worst_sum, std::abs(s - 1.0));
            const auto a = predict_class(p);
            if (tau == 0.01) first = a;
            argmax_breaks += a != first;
        }

        std::vector<double> z(k);
        for (auto& v : z) v = g(rng);
        const double c = std::uniform_real_distribution<double>(-50.0, 50.0)(rng);
        auto shifted = z;
        for (auto& v : shifted) v += c;
        const auto p = softmax(z), q = softmax(shifted);
        for (std::size_t i = 0; i < k; ++i) worst_shift = std::max(worst_shift, std::abs(p[i] - q[i]));
    }
    const bool ok = worst_sum <= 1e-6 && argmax_breaks == 0 && worst_shift <= 1e-9;
    return {ok, fmt("sum error %.1e, shift error %.1e, argmax changes %.0f", worst_sum, worst_shift, argmax_breaks)};
}

// 4
Outcome cross_modal() {
    const auto r = scenarios::cross_modal_transfer();
    return {r.image_accuracy >= 99.0, fmt("image accuracy %.2f%%", r.image_accuracy)};
}

// 5
Outcome targeting() {
    const auto r = scenarios::targeting_vs_generic();
    return {r.targeted_accuracy - r.generic_accuracy >= 20.0,
            fmt("targeted %.2f%% vs generic %.2f%%", r.targeted_accuracy, r.generic_accuracy)};
}

// 6
Outcome baselines() {
    const auto r = scenarios::tap_vs_tot();
    return {r.tap_accuracy >= r.tot_cls_accuracy + 2.0,
            fmt("tap %.2f%% vs tot-cls %.2f%%", r.tap_accuracy, r.tot_cls_accuracy)};
}

// 7
Outcome refinement() {
    const auto r = scenarios::weakened_refinement();
    return {r.refined_accuracy >= r.initial_accuracy + 5.0,
            fmt("%.2f%% -> %.2f%%, %.0f pseudo-labels kept", r.initial_accuracy, r.refined_accuracy,
                static_cast<double>(r.retained))};
}

bool throws_kind(const std::function<void()>& f, ErrorKind kind) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind() == kind;
    }
    return false;
}

// 8
Outcome determinism_and_formats() {
    testing::TempDir dir;
    std::ostringstream log;
    std::vector<std::string> files;
    for (int run = 0; run < 2; ++run) {
        // Same file names in separate directories; paths end up in the report.
        const auto run_dir = dir / ("run" + std::to_string(run));
        fs::create_directories(run_dir);
        TrainCommandOptions train;
        train.synthetic = true;
        train.seed = 0;
        train.out = run_dir / "clf.json";
        cmd_train(train, log);
        SynthSpaceOptions images;
        images.modality = Modality::Image;
        images.per_class = 20;
        images.out = run_dir / "img.tape";
        cmd_synth_space(images, log);
        EvalCommandOptions ev;
        ev.images = images.out;
        ev.classifier = train.out;
        ev.out = run_dir / "report.json";
        cmd_eval(ev, log);
        files.push_back(read_text_file(train.out) + read_text_file(*ev.out));
    }
    const bool same = files[0] == files[1];

    std::mt19937_64 rng(8);
    int roundtrip_failures = 0;
    for (int t = 0; t < 100; ++t) {
        const std::uint32_t d = 1 + rng() % 64;
        const std::size_t n = rng() % 20;
        std::vector<float> m(n * d);
        for (auto& v : m) v = std::uniform_real_distribution<float>(-10.0f, 10.0f)(rng);
        std::optional<std::vector<int>> labels;
        if (rng() % 2) labels = std::vector<int>(n);
        if (labels) for (auto& l : *labels) l = static_cast<int>(rng() % 7);
        const EmbeddingBundle b(d, std::move(m), labels, BundleProvenance{"synthetic", "test", ""});
        const auto path = dir / ("b" + std::to_string(t) + ".tape");
        write_bundle(b, path);
        roundtrip_failures += !(read_bundle(path) == b);
    }

    const auto good = encode_bundle_matrix(EmbeddingBundle(4, std::vector<float>(8, 0.5f)));
    auto bad_magic = good;
    bad_magic[0] = 'X';
    const bool magic = throws_kind([&] { decode_bundle_matrix(bad_magic); }, ErrorKind::FormatError);
    const bool trunc =
        throws_kind([&] { decode_bundle_matrix(std::string_view(good).substr(0, good.size() - 3)); },
                    ErrorKind::TruncatedFile) &&
        throws_kind([&] { decode_bundle_matrix(std::string_view(good).substr(0, 10)); }, ErrorKind::TruncatedFile);

    const bool ok = same && roundtrip_failures == 0 && magic && trunc;
    return {ok, std::string("repeat runs ") + (same ? "identical" : "DIFFER") + ", " +
                    std::to_string(100 - roundtrip_failures) + "/100 round trips, bad magic " +
                    (magic ? "rejected" : "ACCEPTED") + ", truncation " + (trunc ? "rejected" : "ACCEPTED")};
}

// 9
Outcome prompt_properties() {
    std::mt19937_64 rng(9);
    int violations = 0;
    for (int t = 0; t < 200; ++t) {
        std::vector<std::string> names;
        const std::size_t k = 1 + rng() % 10;
        for (std::size_t c = 0; c < k; ++c) names.push_back("c" + std::to_string(c) + "_" + std::to_string(rng() % 100));
        const ClassVocabulary vocab(names);
        TaskProfile p;
        p.task_name = "p" + std::to_string(t);
        const std::size_t m = 1 + rng() % 4;
        const bool cross = rng() % 2;
        p.shift_kind = cross ? ShiftKind::CrossDomain : ShiftKind::FineGrained;
        if (cross) {
            for (std::size_t i = 0, n = 1 + rng() % 4; i < n; ++i) p.domain_descriptors.push_back("in style " + std::to_string(i));
        } else {
            p.superclass_token = "thing";
        }
        for (std::size_t i = 0; i < m; ++i) {
            p.question_templates.push_back("Question " + std::to_string(i) + " about a {class}" +
                                           (cross ? " {domain}?" : " {superclass}?"));
        }
        const auto prompts = render_prompts(p, vocab);
        const std::size_t per = m * (cross ? p.domain_descriptors.size() : 1);
        violations += prompts.size() != k * per;
        std::vector<std::size_t> counts(k, 0);
        for (const auto& x : prompts) ++counts[static_cast<std::size_t>(x.class_id)];
        for (auto c : counts) violations += c != per;
    }

    const auto one = [](ShiftKind kind, std::optional<std::string> super, std::vector<std::string> domains,
                        std::string tmpl, std::string cls) {
        TaskProfile p;
        p.task_name = "golden";
        p.shift_kind = kind;
        p.superclass_token = std::move(super);
        p.domain_descriptors = std::move(domains);
        p.question_templates = {std::move(tmpl)};
        return render_prompts(p, ClassVocabulary({std::move(cls)})).at(0).rendered_text;
    };
    int golden_misses = 0;
    golden_misses += one(ShiftKind::FineGrained, "texture", {}, "Describe what a {class} {superclass} looks like.",
                         "banded") != "Describe what a banded texture looks like.";
    golden_misses += one(ShiftKind::FineGrained, "flower", {}, "How can you identify a {class} {superclass}?",
                         "fritillary") != "How can you identify a fritillary flower?";
    golden_misses += one(ShiftKind::CrossDomain, std::nullopt, {"from a satellite"},
                         "Describe what a {class} looks like {domain}.",
                         "forest") != "Describe what a forest looks like from a satellite.";
    golden_misses += one(ShiftKind::CrossDomain, std::nullopt, {"from a satellite"},
                         "How can you identify a {class} {domain}?",
                         "river") != "How can you identify a river from a satellite?";

    return {violations == 0 && golden_misses == 0,
            fmt("%.0f invariant violations over 200 profiles, %.0f/4 golden strings matched", violations,
                4 - golden_misses)};
}

// 10
Outcome quickstart() {
    testing::TempDir dir;
    const auto qs = dir.path() / "quickstart";
    fs::copy(fs::path(TAP_SOURCE_DIR) / "data" / "quickstart", qs, fs::copy_options::recursive);
    fs::remove_all(qs / "out");
    const auto manifest = qs / "manifest.json";
    const std::string cmd = std::string("\"") + TAP_CLI_PATH + "\" run-all --manifest \"" + manifest.string() +
                            "\" > \"" + (dir / "stdout.txt").string() + "\" 2> \"" + (dir / "stderr.txt").string() +
                            "\"";
    const int raw = std::system(cmd.c_str());
    const int code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    if (code != 0) return {false, "run-all exited with " + std::to_string(code)};
    const auto doc = nlohmann::json::parse(read_text_file(qs / "out" / "report.json"));
    const auto& matrix = doc.at("matrix");
    std::string methods;
    for (const auto& m : matrix) methods += (methods.empty() ? "" : ",") + m.at("method").get<std::string>();
    return {matrix.size() == 5, std::to_string(matrix.size()) + " methods (" + methods + ")"};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_seconds;  // 0 means no budget
        Outcome (*run)();
    };
    const Criterion criteria[] = {
        {1, "gradient oracle", 5.0, gradient_oracle},
        {2, "loss oracle", 1.0, loss_oracle},
        {3, "softmax and zero-shot invariants", 0.0, softmax_invariants},
        {4, "cross-modal transfer", 30.0, cross_modal},
        {5, "targeting beats generic", 30.0, targeting},
        {6, "baseline ordering", 0.0, baselines},
        {7, "pseudo-label refinement", 0.0, refinement},
        {8, "determinism and formats", 0.0, determinism_and_formats},
        {9, "prompt-engine properties", 0.0, prompt_properties},
        {10, "end-to-end quickstart", 60.0, quickstart},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::string timing = fmt("%.2fs", secs);
        if (c.budget_seconds > 0.0) {
            timing += fmt(" of %.0fs", c.budget_seconds);
            if (secs >= c.budget_seconds) o.pass = false;
        }
        failures += !o.pass;
        std::printf("[%s] criterion %d: %s: %s (%s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                    timing.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/10 criteria passed\n", 10 - failures);
    return failures == 0 ? 0 : 1;
}
