#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dec/jsonl.hpp"

namespace dec {

/// One evaluation question: gold answers, optional gold evidence ids and an
/// optional answerability label.
struct DatasetRecord {
    std::string id;
    std::string question;
    std::vector<std::string> answers;
    std::vector<std::string> gold_doc_ids;
    std::optional<bool> answerable;
};

inline ojson to_json(const DatasetRecord& r) {
    ojson j{{"id", r.id}, {"question", r.question}, {"answers", r.answers}};
    if (!r.gold_doc_ids.empty()) j["gold_doc_ids"] = r.gold_doc_ids;
    if (r.answerable) j["answerable"] = *r.answerable;
    return j;
}

inline DatasetRecord dataset_record_from_json(const ojson& j, const std::string& context) {
    DatasetRecord r;
    r.id = jsonv::str(j, "id", context);
    r.question = jsonv::str(j, "question", context);
    if (r.id.empty()) throw Error(ErrorKind::data, context + ": empty question id");
    if (r.question.empty()) throw Error(ErrorKind::data, context + ": empty question text");
    const ojson& answers = jsonv::member(j, "answers", context);
    if (!answers.is_array())
        throw Error(ErrorKind::data, context + ": field 'answers' must be an array");
    for (const auto& a : answers) r.answers.push_back(a.get<std::string>());
    if (j.contains("gold_doc_ids") && !j["gold_doc_ids"].is_null()) {
        for (const auto& g : j["gold_doc_ids"]) r.gold_doc_ids.push_back(g.get<std::string>());
    }
    if (j.contains("answerable") && !j["answerable"].is_null())
        r.answerable = j["answerable"].get<bool>();
    return r;
}

inline std::vector<DatasetRecord> load_dataset_jsonl(const std::filesystem::path& path) {
    std::vector<DatasetRecord> out;
    for_each_jsonl(path, [&](std::size_t line_no, const ojson& j) {
        out.push_back(dataset_record_from_json(j, path.string() + ":" + std::to_string(line_no)));
    });
    return out;
}

inline void save_dataset_jsonl(const std::filesystem::path& path,
                               const std::vector<DatasetRecord>& records) {
    std::vector<ojson> lines;
    lines.reserve(records.size());
    for (const auto& r : records) lines.push_back(to_json(r));
    write_jsonl(path, lines);
}

} // namespace dec
