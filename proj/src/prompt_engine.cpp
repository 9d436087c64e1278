#include "tap/prompt_engine.hpp"

#include "tap/error.hpp"
#include "tap/io_util.hpp"

namespace tap {

namespace {

constexpr std::string_view kClass = "{class}";
constexpr std::string_view kSuperclass = "{superclass}";
constexpr std::string_view kDomain = "{domain}";

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t count = 0;
    for (auto pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

[[noreturn]] void invalid_template(std::size_t index, const std::string& what) {
    throw Error(ErrorKind::InvalidProfile, "template " + std::to_string(index) + ": " + what);
}

void check_class_placeholder(const std::vector<std::string>& templates) {
    for (std::size_t i = 0; i < templates.size(); ++i) {
        const auto n = count_occurrences(templates[i], kClass);
        if (n != 1) {
            invalid_template(i, "must contain the {class} placeholder exactly once (found " + std::to_string(n) + ")");
        }
    }
}

// "{name}" tokens other than the three known placeholders would survive
// expansion verbatim.
void check_unknown_placeholders(const std::vector<std::string>& templates) {
    for (std::size_t i = 0; i < templates.size(); ++i) {
        const std::string_view t = templates[i];
        for (auto open = t.find('{'); open != std::string_view::npos; open = t.find('{', open + 1)) {
            const auto close = t.find('}', open);
            if (close == std::string_view::npos) break;
            const auto token = t.substr(open, close - open + 1);
            const bool word = token.size() > 2 && token.substr(1, token.size() - 2).find_first_not_of(
                                                      "abcdefghijklmnopqrstuvwxyz_") == std::string_view::npos;
            if (word && token != kClass && token != kSuperclass && token != kDomain) {
                invalid_template(i, "unknown placeholder " + std::string(token));
            }
        }
    }
}

struct Substitutions {
    std::string_view class_name;
    std::optional<std::string_view> superclass;
    std::optional<std::string_view> domain;
};

// Single left-to-right pass, so substituted values are never re-expanded.
std::string expand(std::string_view tmpl, const Substitutions& subs) {
    std::string out;
    out.reserve(tmpl.size() + subs.class_name.size() + 16);
    std::size_t i = 0;
    while (i < tmpl.size()) {
        const auto rest = tmpl.substr(i);
        if (rest.starts_with(kClass)) {
            out += subs.class_name;
            i += kClass.size();
        } else if (subs.superclass && rest.starts_with(kSuperclass)) {
            out += *subs.superclass;
            i += kSuperclass.size();
        } else if (subs.domain && rest.starts_with(kDomain)) {
            out += *subs.domain;
            i += kDomain.size();
        } else {
            out += tmpl[i];
            ++i;
        }
    }
    return out;
}

}  // namespace

const char* to_string(ShiftKind kind) {
    return kind == ShiftKind::FineGrained ? "fine_grained" : "cross_domain";
}

ShiftKind shift_kind_from_string(std::string_view text) {
    if (text == "fine_grained") return ShiftKind::FineGrained;
    if (text == "cross_domain") return ShiftKind::CrossDomain;
    throw Error(ErrorKind::InvalidProfile, "unknown shift_kind '" + std::string(text) + "'");
}

void TaskProfile::validate() const {
    if (task_name.empty()) throw Error(ErrorKind::InvalidProfile, "task_name is empty");
    if (question_templates.empty()) throw Error(ErrorKind::InvalidProfile, "profile has no question templates");
    check_class_placeholder(question_templates);
    check_unknown_placeholders(question_templates);

    const bool has_superclass = superclass_token.has_value() && !superclass_token->empty();
    if (shift_kind == ShiftKind::FineGrained && !has_superclass) {
        throw Error(ErrorKind::InvalidProfile, "fine_grained profiles need a nonempty superclass_token");
    }
    if (shift_kind == ShiftKind::CrossDomain && domain_descriptors.empty()) {
        throw Error(ErrorKind::InvalidProfile, "cross_domain profiles need at least one domain descriptor");
    }
    for (std::size_t d = 0; d < domain_descriptors.size(); ++d) {
        if (trim(domain_descriptors[d]).empty()) {
            throw Error(ErrorKind::InvalidProfile, "domain descriptor " + std::to_string(d) + " is empty");
        }
    }
    for (std::size_t i = 0; i < question_templates.size(); ++i) {
        const auto& t = question_templates[i];
        const bool uses_domain = count_occurrences(t, kDomain) > 0;
        const bool uses_superclass = count_occurrences(t, kSuperclass) > 0;
        if (uses_superclass && !has_superclass) invalid_template(i, "uses {superclass} but no superclass_token is set");
        if (shift_kind == ShiftKind::FineGrained && uses_domain) {
            invalid_template(i, "uses {domain} in a fine_grained profile");
        }
        if (shift_kind == ShiftKind::CrossDomain && !uses_domain) {
            invalid_template(i, "cross_domain templates must place the {domain} placeholder");
        }
    }
}

std::vector<std::string> default_targeted_templates(ShiftKind kind) {
    if (kind == ShiftKind::FineGrained) {
        return {"Describe what a {class} {superclass} looks like.", "How can you identify a {class} {superclass}?"};
    }
    return {"Describe what a {class} looks like {domain}.", "How can you identify a {class} {domain}?"};
}

std::vector<std::string> default_generic_templates() {
    return {"Describe what a {class} looks like.", "How can you identify a {class}?"};
}

std::string make_prompt_id(std::string_view task_name, int class_id, int template_index,
                           std::optional<int> descriptor_index) {
    std::string id(task_name);
    id += '/';
    id += std::to_string(class_id);
    id += '/';
    id += std::to_string(template_index);
    id += '/';
    id += descriptor_index ? std::to_string(*descriptor_index) : std::string("-");
    return id;
}

std::vector<TargetedPrompt> render_prompts(const TaskProfile& profile, const ClassVocabulary& vocab) {
    profile.validate();
    std::vector<TargetedPrompt> out;
    const auto& templates = profile.question_templates;
    const bool cross = profile.shift_kind == ShiftKind::CrossDomain;
    const std::size_t per_template = cross ? profile.domain_descriptors.size() : 1;
    out.reserve(vocab.size() * templates.size() * per_template);

    std::optional<std::string_view> superclass;
    if (profile.superclass_token && !profile.superclass_token->empty()) superclass = *profile.superclass_token;

    for (std::size_t c = 0; c < vocab.size(); ++c) {
        const int class_id = static_cast<int>(c);
        const auto& name = vocab.names()[c];
        for (std::size_t t = 0; t < templates.size(); ++t) {
            for (std::size_t d = 0; d < per_template; ++d) {
                TargetedPrompt p;
                p.class_id = class_id;
                p.class_name = name;
                p.template_index = static_cast<int>(t);
                Substitutions subs{name, superclass, std::nullopt};
                if (cross) {
                    p.descriptor_index = static_cast<int>(d);
                    subs.domain = profile.domain_descriptors[d];
                }
                p.rendered_text = expand(templates[t], subs);
                p.prompt_id = make_prompt_id(profile.task_name, class_id, p.template_index, p.descriptor_index);
                out.push_back(std::move(p));
            }
        }
    }
    return out;
}

std::vector<TargetedPrompt> render_generic_prompts(const ClassVocabulary& vocab,
                                                   const std::vector<std::string>& templates,
                                                   std::string_view task_name) {
    check_class_placeholder(templates);
    check_unknown_placeholders(templates);
    for (std::size_t i = 0; i < templates.size(); ++i) {
        if (count_occurrences(templates[i], kSuperclass) > 0 || count_occurrences(templates[i], kDomain) > 0) {
            invalid_template(i, "generic templates may only use {class}");
        }
    }
    std::vector<TargetedPrompt> out;
    out.reserve(vocab.size() * templates.size());
    for (std::size_t c = 0; c < vocab.size(); ++c) {
        for (std::size_t t = 0; t < templates.size(); ++t) {
            TargetedPrompt p;
            p.class_id = static_cast<int>(c);
            p.class_name = vocab.names()[c];
            p.template_index = static_cast<int>(t);
            p.rendered_text = expand(templates[t], Substitutions{p.class_name, std::nullopt, std::nullopt});
            p.prompt_id = make_prompt_id(task_name, p.class_id, p.template_index, std::nullopt);
            out.push_back(std::move(p));
        }
    }
    return out;
}

TaskProfile task_profile_from_json(const nlohmann::json& doc) {
    try {
        TaskProfile p;
        p.task_name = doc.at("task_name").get<std::string>();
        p.shift_kind = shift_kind_from_string(doc.at("shift_kind").get<std::string>());
        if (doc.contains("superclass_token") && !doc["superclass_token"].is_null()) {
            p.superclass_token = doc["superclass_token"].get<std::string>();
        }
        if (doc.contains("domain_descriptors")) {
            p.domain_descriptors = doc["domain_descriptors"].get<std::vector<std::string>>();
        }
        if (doc.contains("question_templates")) {
            p.question_templates = doc["question_templates"].get<std::vector<std::string>>();
        } else {
            p.question_templates = default_targeted_templates(p.shift_kind);
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidProfile, std::string("malformed task profile: ") + e.what());
    }
}

nlohmann::json to_json(const TaskProfile& profile) {
    nlohmann::json doc;
    doc["task_name"] = profile.task_name;
    doc["shift_kind"] = to_string(profile.shift_kind);
    doc["superclass_token"] = profile.superclass_token ? nlohmann::json(*profile.superclass_token) : nlohmann::json();
    doc["domain_descriptors"] = profile.domain_descriptors;
    doc["question_templates"] = profile.question_templates;
    return doc;
}

TaskProfile load_task_profile(const std::filesystem::path& path) {
    const std::string content = read_text_file(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(content);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidProfile, path.string() + ": " + e.what());
    }
    return task_profile_from_json(doc);
}

std::string prompts_to_jsonl(const std::vector<TargetedPrompt>& prompts) {
    std::string out;
    for (const auto& p : prompts) {
        nlohmann::ordered_json rec;
        rec["prompt_id"] = p.prompt_id;
        rec["class_id"] = p.class_id;
        rec["class_name"] = p.class_name;
        rec["text"] = p.rendered_text;
        out += rec.dump();
        out += '\n';
    }
    return out;
}

void write_prompts(const std::vector<TargetedPrompt>& prompts, const std::filesystem::path& path) {
    write_text_file_atomic(path, prompts_to_jsonl(prompts));
}

std::vector<TargetedPrompt> read_prompts(const std::filesystem::path& path) {
    const auto lines = split_lines(read_text_file(path));
    std::vector<TargetedPrompt> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        try {
            const auto rec = nlohmann::json::parse(lines[i]);
            TargetedPrompt p;
            p.prompt_id = rec.at("prompt_id").get<std::string>();
            p.class_id = rec.at("class_id").get<int>();
            p.class_name = rec.value("class_name", std::string());
            p.rendered_text = rec.at("text").get<std::string>();
            out.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(i + 1, e.what());
        }
    }
    return out;
}

}  // namespace tap
