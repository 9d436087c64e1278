#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "tap/llm_client.hpp"
#include "tap/vocabulary.hpp"

namespace tap {

struct TextItem {
    std::string text;
    int class_id = 0;

    bool operator==(const TextItem&) const = default;
};

struct TextDataset {
    std::vector<TextItem> items;
    ClassVocabulary vocab;

    std::size_t size() const noexcept { return items.size(); }
    std::vector<std::size_t> class_counts() const;
};

struct BuildOptions {
    // Classes without any description normally abort the build, since the
    // classifier row for such a class would never receive a positive example.
    bool allow_empty_classes = false;
};

// Labels come from the class_id stamped on each description when its prompt
// was rendered; description text is never searched for class names. Items are
// ordered class-major, then by prompt (first appearance), then by sample.
TextDataset build_text_dataset(const std::vector<Description>& descriptions, const ClassVocabulary& vocab,
                               const BuildOptions& options = {});

// JSON-lines {text, class_id}.
void write_text_dataset(const TextDataset& dataset, const std::filesystem::path& path);
TextDataset read_text_dataset(const std::filesystem::path& path, const ClassVocabulary& vocab);

}  // namespace tap
