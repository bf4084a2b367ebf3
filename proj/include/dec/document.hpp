#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dec/jsonl.hpp"
#include "dec/text.hpp"

namespace dec {

/// One corpus entry. `terms` is the cached normalized token stream derived
/// from title + body; keyword containment and scoring both read it.
struct Document {
    std::string id;
    std::string title;
    std::string text;
    std::vector<std::string> terms;
};

inline Document make_document(std::string id, std::string title, std::string text) {
    Document d;
    d.id = std::move(id);
    d.title = std::move(title);
    d.text = std::move(text);
    d.terms = text::tokenize(d.title + " " + d.text);
    return d;
}

inline ojson to_json(const Document& d) {
    return ojson{{"id", d.id}, {"title", d.title}, {"text", d.text}};
}

inline Document document_from_json(const ojson& j, const std::string& context) {
    Document d = make_document(jsonv::str(j, "id", context), jsonv::str_or(j, "title", ""),
                               jsonv::str(j, "text", context));
    if (d.id.empty()) throw Error(ErrorKind::data, context + ": empty document id");
    return d;
}

inline std::vector<Document> load_corpus_jsonl(const std::filesystem::path& path) {
    std::vector<Document> docs;
    for_each_jsonl(path, [&](std::size_t line_no, const ojson& j) {
        docs.push_back(document_from_json(j, path.string() + ":" + std::to_string(line_no)));
    });
    return docs;
}

inline void save_corpus_jsonl(const std::filesystem::path& path,
                              const std::vector<Document>& docs) {
    std::vector<ojson> lines;
    lines.reserve(docs.size());
    for (const auto& d : docs) lines.push_back(to_json(d));
    write_jsonl(path, lines);
}

} // namespace dec
