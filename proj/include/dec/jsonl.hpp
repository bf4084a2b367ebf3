#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dec/error.hpp"

namespace dec {

/// Insertion-ordered JSON keeps serialized field order stable, which the
/// determinism guarantees (byte-identical reruns) rely on.
using ojson = nlohmann::ordered_json;

inline void for_each_jsonl(const std::filesystem::path& path,
                           const std::function<void(std::size_t line_no, const ojson&)>& fn) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::data, "cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        ojson j;
        try {
            j = ojson::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::data,
                        path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        fn(line_no, j);
    }
}

inline std::vector<ojson> read_jsonl(const std::filesystem::path& path) {
    std::vector<ojson> out;
    for_each_jsonl(path, [&](std::size_t, const ojson& j) { out.push_back(j); });
    return out;
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<ojson>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::data, "cannot write " + path.string());
    for (const auto& r : records) out << r.dump() << "\n";
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::data, "cannot write " + path.string());
    out << content;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::data, "cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

namespace jsonv {

inline const ojson& member(const ojson& j, const char* key, const std::string& context) {
    auto it = j.find(key);
    if (it == j.end())
        throw Error(ErrorKind::data, context + ": missing field '" + key + "'");
    return *it;
}

inline std::string str(const ojson& j, const char* key, const std::string& context) {
    const ojson& v = member(j, key, context);
    if (!v.is_string())
        throw Error(ErrorKind::data, context + ": field '" + key + "' must be a string");
    return v.get<std::string>();
}

inline std::string str_or(const ojson& j, const char* key, const std::string& fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    return it->get<std::string>();
}

} // namespace jsonv

} // namespace dec
