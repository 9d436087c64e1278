#include "tap/text_dataset.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include <json.hpp>

#include "tap/error.hpp"
#include "tap/io_util.hpp"

namespace tap {

std::vector<std::size_t> TextDataset::class_counts() const {
    std::vector<std::size_t> counts(vocab.size(), 0);
    for (const auto& item : items) {
        if (vocab.contains(item.class_id)) ++counts[static_cast<std::size_t>(item.class_id)];
    }
    return counts;
}

TextDataset build_text_dataset(const std::vector<Description>& descriptions, const ClassVocabulary& vocab,
                               const BuildOptions& options) {
    struct Keyed {
        int class_id;
        std::size_t prompt_rank;
        int sample_index;
        std::size_t input_pos;
    };
    std::map<std::string, std::size_t> prompt_rank;
    std::vector<Keyed> keyed;
    keyed.reserve(descriptions.size());
    for (std::size_t i = 0; i < descriptions.size(); ++i) {
        const auto& d = descriptions[i];
        if (!vocab.contains(d.class_id)) {
            throw Error(ErrorKind::UnknownClassId, "description '" + d.prompt_id + "' has class_id " +
                                                       std::to_string(d.class_id) + " outside a vocabulary of " +
                                                       std::to_string(vocab.size()));
        }
        if (trim(d.text).empty()) continue;
        const auto [it, inserted] = prompt_rank.emplace(d.prompt_id, prompt_rank.size());
        keyed.push_back(Keyed{d.class_id, it->second, d.sample_index, i});
    }
    if (keyed.empty()) throw Error(ErrorKind::EmptyDataset, "no valid descriptions to build a dataset from");

    std::stable_sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
        if (a.class_id != b.class_id) return a.class_id < b.class_id;
        if (a.prompt_rank != b.prompt_rank) return a.prompt_rank < b.prompt_rank;
        return a.sample_index < b.sample_index;
    });

    TextDataset ds;
    ds.vocab = vocab;
    ds.items.reserve(keyed.size());
    for (const auto& k : keyed) ds.items.push_back(TextItem{trim(descriptions[k.input_pos].text), k.class_id});

    if (!options.allow_empty_classes) {
        const auto counts = ds.class_counts();
        for (std::size_t c = 0; c < counts.size(); ++c) {
            if (counts[c] == 0) {
                throw Error(ErrorKind::EmptyDataset, "class '" + vocab.names()[c] + "' (id " + std::to_string(c) +
                                                         ") has no descriptions");
            }
        }
    }
    return ds;
}

void write_text_dataset(const TextDataset& dataset, const std::filesystem::path& path) {
    std::string out;
    for (const auto& item : dataset.items) {
        nlohmann::ordered_json rec;
        rec["text"] = item.text;
        rec["class_id"] = item.class_id;
        out += rec.dump();
        out += '\n';
    }
    write_text_file_atomic(path, out);
}

TextDataset read_text_dataset(const std::filesystem::path& path, const ClassVocabulary& vocab) {
    const auto lines = split_lines(read_text_file(path));
    TextDataset ds;
    ds.vocab = vocab;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        TextItem item;
        try {
            const auto rec = nlohmann::json::parse(lines[i]);
            item.text = rec.at("text").get<std::string>();
            item.class_id = rec.at("class_id").get<int>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(i + 1, e.what());
        }
        if (!vocab.contains(item.class_id)) {
            throw Error(ErrorKind::UnknownClassId, "line " + std::to_string(i + 1) + ": class_id " +
                                                       std::to_string(item.class_id) + " not in vocabulary");
        }
        ds.items.push_back(std::move(item));
    }
    if (ds.items.empty()) throw Error(ErrorKind::EmptyDataset, path.string() + " holds no items");
    return ds;
}

}  // namespace tap
