#include "tap/vocabulary.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "tap/error.hpp"
#include "tap/io_util.hpp"

namespace tap {

ClassVocabulary::ClassVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i].empty()) {
            throw Error(ErrorKind::InvalidConfig, "class name at index " + std::to_string(i) + " is empty");
        }
        if (!seen.insert(names_[i]).second) {
            throw Error(ErrorKind::InvalidConfig, "duplicate class name '" + names_[i] + "'");
        }
    }
}

const std::string& ClassVocabulary::name(int class_id) const {
    if (!contains(class_id)) {
        throw Error(ErrorKind::UnknownClassId, "class id " + std::to_string(class_id) + " outside vocabulary of " +
                                                   std::to_string(names_.size()));
    }
    return names_[static_cast<std::size_t>(class_id)];
}

ClassVocabulary load_vocabulary(const std::filesystem::path& path) {
    const std::string content = read_text_file(path);
    std::vector<std::string> names;
    if (path.extension() == ".json") {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(content);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
        }
        if (doc.is_object() && doc.contains("classes")) doc = doc["classes"];
        if (!doc.is_array()) throw Error(ErrorKind::ParseError, path.string() + ": expected an array of class names");
        for (const auto& item : doc) {
            if (!item.is_string()) throw Error(ErrorKind::ParseError, path.string() + ": class names must be strings");
            names.push_back(item.get<std::string>());
        }
    } else {
        for (const auto& line : split_lines(content)) {
            const std::string name = trim(line);
            if (!name.empty()) names.push_back(name);
        }
    }
    return ClassVocabulary(std::move(names));
}

void save_vocabulary(const ClassVocabulary& vocab, const std::filesystem::path& path) {
    std::string out;
    for (const auto& name : vocab.names()) out += name + "\n";
    write_text_file_atomic(path, out);
}

}  // namespace tap
