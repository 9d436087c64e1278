#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "tap/error.hpp"
#include "tap/prompt_engine.hpp"
#include "temp_dir.hpp"

using namespace tap;

namespace {

TaskProfile fine(std::string superclass, std::vector<std::string> templates) {
    TaskProfile p;
    p.task_name = "t";
    p.shift_kind = ShiftKind::FineGrained;
    p.superclass_token = std::move(superclass);
    p.question_templates = std::move(templates);
    return p;
}

TaskProfile cross(std::vector<std::string> descriptors, std::vector<std::string> templates) {
    TaskProfile p;
    p.task_name = "t";
    p.shift_kind = ShiftKind::CrossDomain;
    p.domain_descriptors = std::move(descriptors);
    p.question_templates = std::move(templates);
    return p;
}

std::string render_one(const TaskProfile& p, const std::string& cls) {
    const auto out = render_prompts(p, ClassVocabulary({cls}));
    REQUIRE(out.size() == 1);
    return out[0].rendered_text;
}

}  // namespace

TEST_CASE("targeted prompt strings") {
    const std::string describe = "Describe what a {class} {superclass} looks like.";
    const std::string identify = "How can you identify a {class} {superclass}?";
    CHECK(render_one(fine("texture", {describe}), "banded") == "Describe what a banded texture looks like.");
    CHECK(render_one(fine("texture", {describe}), "braided") == "Describe what a braided texture looks like.");
    CHECK(render_one(fine("flower", {"Describe what an {class} {superclass} looks like."}), "artichoke") ==
          "Describe what an artichoke flower looks like.");
    CHECK(render_one(fine("flower", {identify}), "fritillary") == "How can you identify a fritillary flower?");
    CHECK(render_one(cross({"from a satellite"}, {"Describe what a {class} looks like {domain}."}), "forest") ==
          "Describe what a forest looks like from a satellite.");
    CHECK(render_one(cross({"from a satellite"}, {"How can you identify a {class} {domain}?"}), "river") ==
          "How can you identify a river from a satellite?");
}

TEST_CASE("generic prompt strings") {
    auto one = [](const std::string& tmpl, const std::string& cls) {
        return render_generic_prompts(ClassVocabulary({cls}), {tmpl}).at(0).rendered_text;
    };
    CHECK(one("Describe what a {class} looks like.", "banded") == "Describe what a banded looks like.");
    CHECK(one("Describe what an {class} looks like.", "artichoke") == "Describe what an artichoke looks like.");
    CHECK(one("How can you identify a {class}?", "fritillary") == "How can you identify a fritillary?");
    CHECK(one("How can you identify a {class}?", "river") == "How can you identify a river?");
    CHECK(render_generic_prompts(ClassVocabulary({"a", "b"}), {}).empty());
    const auto ten = render_generic_prompts(ClassVocabulary({"a", "b", "c", "d", "e"}), default_generic_templates());
    CHECK(ten.size() == 10);
}

TEST_CASE("default templates") {
    CHECK(default_targeted_templates(ShiftKind::FineGrained) ==
          std::vector<std::string>{"Describe what a {class} {superclass} looks like.",
                                   "How can you identify a {class} {superclass}?"});
    CHECK(default_generic_templates() ==
          std::vector<std::string>{"Describe what a {class} looks like.", "How can you identify a {class}?"});
}

TEST_CASE("cartesian product cardinality and order") {
    const auto p = cross({"as a sketch", "in origami"}, {"A {class} {domain}.", "Draw a {class} {domain}."});
    const auto out = render_prompts(p, ClassVocabulary({"cat", "dog", "owl"}));
    REQUIRE(out.size() == 12);
    std::map<int, int> per_class;
    for (const auto& x : out) ++per_class[x.class_id];
    for (const auto& [c, n] : per_class) CHECK(n == 4);
    CHECK(out[0].prompt_id == "t/0/0/0");
    CHECK(out[1].prompt_id == "t/0/0/1");
    CHECK(out[2].prompt_id == "t/0/1/0");
    CHECK(out[4].prompt_id == "t/1/0/0");
    CHECK(out[1].rendered_text == "A cat in origami.");
    CHECK(make_prompt_id("dtd", 3, 1, std::nullopt) == "dtd/3/1/-");
}

TEST_CASE("invalid profiles name the template") {
    auto kind_and_message = [](const TaskProfile& p) -> std::pair<ErrorKind, std::string> {
        try {
            p.validate();
        } catch (const Error& e) {
            return {e.kind(), e.what()};
        }
        return {ErrorKind::IoError, ""};
    };
    const auto missing = kind_and_message(fine("texture", {"Describe a {class}.", "No placeholder here."}));
    CHECK(missing.first == ErrorKind::InvalidProfile);
    CHECK(missing.second.find("template 1") != std::string::npos);
    CHECK(kind_and_message(fine("texture", {"{class} and {class}"})).first == ErrorKind::InvalidProfile);
    CHECK(kind_and_message(cross({}, {"A {class} {domain}."})).first == ErrorKind::InvalidProfile);
    CHECK(kind_and_message(fine("", {"A {class}."})).first == ErrorKind::InvalidProfile);
    CHECK(kind_and_message(fine("texture", {"A {class} {mystery}."})).first == ErrorKind::InvalidProfile);
    CHECK_THROWS_AS(render_generic_prompts(ClassVocabulary({"a"}), {"no class"}), Error);
}

TEST_CASE("placeholder values are not re-expanded") {
    CHECK(render_one(fine("{class}", {"A {class} {superclass}."}), "x") == "A x {class}.");
}

TEST_CASE("random profiles are class balanced, deterministic and contain the class name") {
    std::mt19937_64 rng(2024);
    const std::vector<std::string> words{"striped", "oak", "heron", "river", "tulip", "violin", "kite", "moss"};
    for (int t = 0; t < 200; ++t) {
        const std::size_t k = 1 + rng() % 8;
        std::vector<std::string> names;
        for (std::size_t c = 0; c < k; ++c) names.push_back(words[c] + std::to_string(rng() % 1000));
        std::sort(names.begin(), names.end());
        names.erase(std::unique(names.begin(), names.end()), names.end());
        const ClassVocabulary vocab(names);

        const std::size_t m = 1 + rng() % 4;
        const bool is_cross = rng() % 2;
        std::vector<std::string> templates;
        for (std::size_t i = 0; i < m; ++i) {
            templates.push_back("Q" + std::to_string(i) + " {class}" + (is_cross ? " {domain}" : " {superclass}") + ".");
        }
        TaskProfile p;
        if (is_cross) {
            std::vector<std::string> descriptors;
            for (std::size_t i = 0, n = 1 + rng() % 3; i < n; ++i) descriptors.push_back("style" + std::to_string(i));
            p = cross(descriptors, templates);
        } else {
            p = fine("thing", templates);
        }
        const auto out = render_prompts(p, vocab);
        const std::size_t per = m * (is_cross ? p.domain_descriptors.size() : 1);
        REQUIRE(out.size() == vocab.size() * per);
        std::vector<std::size_t> counts(vocab.size(), 0);
        for (const auto& x : out) {
            ++counts[static_cast<std::size_t>(x.class_id)];
            CHECK(x.rendered_text.find(x.class_name) != std::string::npos);
            CHECK(x.rendered_text.find('{') == std::string::npos);
        }
        for (auto n : counts) CHECK(n == per);
        CHECK(render_prompts(p, vocab) == out);
    }
}

TEST_CASE("profile JSON and prompts JSON-lines round trip") {
    const auto p = cross({"from a satellite"}, default_targeted_templates(ShiftKind::CrossDomain));
    const auto back = task_profile_from_json(to_json(p));
    CHECK(back.question_templates == p.question_templates);
    CHECK(back.domain_descriptors == p.domain_descriptors);
    CHECK(back.shift_kind == ShiftKind::CrossDomain);

    const auto defaults = task_profile_from_json(nlohmann::json::parse(R"({"task_name":"dtd","shift_kind":"fine_grained","superclass_token":"texture"})"));
    CHECK(defaults.question_templates == default_targeted_templates(ShiftKind::FineGrained));

    testing::TempDir dir;
    const auto prompts = render_prompts(p, ClassVocabulary({"forest", "river"}));
    write_prompts(prompts, dir / "p.jsonl");
    const auto read = read_prompts(dir / "p.jsonl");
    REQUIRE(read.size() == prompts.size());
    for (std::size_t i = 0; i < read.size(); ++i) {
        CHECK(read[i].prompt_id == prompts[i].prompt_id);
        CHECK(read[i].rendered_text == prompts[i].rendered_text);
        CHECK(read[i].class_id == prompts[i].class_id);
    }
}
