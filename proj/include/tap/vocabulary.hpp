#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace tap {

// Ordered class names; class ids are the contiguous positions 0..K-1.
class ClassVocabulary {
public:
    ClassVocabulary() = default;
    explicit ClassVocabulary(std::vector<std::string> names);

    std::size_t size() const noexcept { return names_.size(); }
    bool empty() const noexcept { return names_.empty(); }
    bool contains(int class_id) const noexcept {
        return class_id >= 0 && static_cast<std::size_t>(class_id) < names_.size();
    }
    const std::string& name(int class_id) const;
    const std::vector<std::string>& names() const noexcept { return names_; }

    bool operator==(const ClassVocabulary&) const = default;

private:
    std::vector<std::string> names_;
};

// A ".json" file holds an array of names; anything else is one name per line.
ClassVocabulary load_vocabulary(const std::filesystem::path& path);
void save_vocabulary(const ClassVocabulary& vocab, const std::filesystem::path& path);

}  // namespace tap
