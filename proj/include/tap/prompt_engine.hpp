#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tap/vocabulary.hpp"

namespace tap {

enum class ShiftKind { FineGrained, CrossDomain };

const char* to_string(ShiftKind kind);
ShiftKind shift_kind_from_string(std::string_view text);

// Describes what the downstream images look like so that the LLM prompts can
// be targeted at it. Templates use the placeholders {class}, {superclass}
// and {domain}.
struct TaskProfile {
    std::string task_name;
    ShiftKind shift_kind = ShiftKind::FineGrained;
    std::optional<std::string> superclass_token;
    std::vector<std::string> domain_descriptors;
    std::vector<std::string> question_templates;

    // Throws InvalidProfile naming the offending template index.
    void validate() const;
};

struct TargetedPrompt {
    std::string prompt_id;
    int class_id = 0;
    std::string class_name;
    std::string rendered_text;
    int template_index = 0;
    std::optional<int> descriptor_index;

    bool operator==(const TargetedPrompt&) const = default;
};

std::vector<std::string> default_targeted_templates(ShiftKind kind);
std::vector<std::string> default_generic_templates();

// "task/class_id/template_index/descriptor_index", with "-" for no descriptor.
std::string make_prompt_id(std::string_view task_name, int class_id, int template_index,
                           std::optional<int> descriptor_index);

// Every class gets every template (and, for cross-domain profiles, every
// descriptor). Output is class-major, then template, then descriptor.
std::vector<TargetedPrompt> render_prompts(const TaskProfile& profile, const ClassVocabulary& vocab);

std::vector<TargetedPrompt> render_generic_prompts(const ClassVocabulary& vocab,
                                                   const std::vector<std::string>& templates,
                                                   std::string_view task_name = "generic");

TaskProfile task_profile_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const TaskProfile& profile);
TaskProfile load_task_profile(const std::filesystem::path& path);

// JSON-lines records {prompt_id, class_id, class_name, text}.
std::string prompts_to_jsonl(const std::vector<TargetedPrompt>& prompts);
void write_prompts(const std::vector<TargetedPrompt>& prompts, const std::filesystem::path& path);
std::vector<TargetedPrompt> read_prompts(const std::filesystem::path& path);

}  // namespace tap
