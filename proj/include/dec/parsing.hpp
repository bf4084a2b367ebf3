#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dec/error.hpp"
#include "dec/text.hpp"

namespace dec {

namespace parse_detail {

inline std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : s) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty() && cur.back() == '\r') cur.pop_back();
    lines.push_back(cur);
    return lines;
}

inline bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    }
    return true;
}

/// Matches `label: value` at the start of a line, tolerating leading list
/// bullets, markdown emphasis and surrounding whitespace. Returns the value
/// part (possibly empty) on a match.
inline std::optional<std::string> match_label_line(std::string_view line, std::string_view label) {
    std::size_t i = 0;
    auto skip = [&](auto pred) {
        while (i < line.size() && pred(static_cast<unsigned char>(line[i]))) ++i;
    };
    skip([](unsigned char c) {
        return std::isspace(c) != 0 || c == '-' || c == '*' || c == '>' || c == '#' || c == '_';
    });
    if (i + label.size() > line.size()) return std::nullopt;
    if (!iequals(line.substr(i, label.size()), label)) return std::nullopt;
    i += label.size();
    skip([](unsigned char c) { return std::isspace(c) != 0 || c == '*' || c == '_'; });
    if (i >= line.size() || line[i] != ':') return std::nullopt;
    ++i;
    return text::trim(line.substr(i));
}

} // namespace parse_detail

/// Extracts `k. text` / `k) text` items from a numbered list, in ascending
/// enumeration order; interleaved prose and empty items are dropped.
inline std::vector<std::string> parse_numbered_list(const std::string& raw) {
    std::vector<std::string> items;
    long last = 0;
    for (const auto& line : parse_detail::split_lines(raw)) {
        std::size_t i = 0;
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])) != 0) ++i;
        std::size_t digits_begin = i;
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i])) != 0) ++i;
        if (i == digits_begin || i - digits_begin > 9 || i >= line.size()) continue;
        if (line[i] != '.' && line[i] != ')') continue;
        const long number = std::stol(line.substr(digits_begin, i - digits_begin));
        if (number <= last) continue;
        const std::string item = text::trim(std::string_view(line).substr(i + 1));
        if (item.empty()) continue;
        items.push_back(item);
        last = number;
    }
    if (items.empty())
        throw Error(ErrorKind::parse, "no numbered items found in model output", {}, raw);
    return items;
}

/// Splits model output into labeled fields. A field's value starts after
/// `label:` and continues over following lines until another known label
/// begins. When a label repeats, the last occurrence wins.
inline std::map<std::string, std::string> parse_labeled_fields(
    const std::string& raw, const std::vector<std::string>& labels) {
    std::map<std::string, std::string> fields;
    std::string current_label;
    std::string current_value;
    auto flush = [&] {
        if (!current_label.empty()) fields[current_label] = text::trim(current_value);
        current_label.clear();
        current_value.clear();
    };
    for (const auto& line : parse_detail::split_lines(raw)) {
        bool matched = false;
        for (const auto& label : labels) {
            if (auto value = parse_detail::match_label_line(line, label)) {
                flush();
                current_label = label;
                current_value = *value;
                matched = true;
                break;
            }
        }
        if (!matched && !current_label.empty()) {
            current_value += "\n" + line;
        }
    }
    flush();
    return fields;
}

struct RewriteFields {
    std::string inference_note;
    std::string modified_question;
};

inline RewriteFields parse_rewrite(const std::string& raw) {
    auto fields = parse_labeled_fields(raw, {"Inference_process", "Modified_question"});
    auto it = fields.find("Modified_question");
    if (it == fields.end() || it->second.empty())
        throw Error(ErrorKind::parse, "model output missing Modified_question field", {}, raw);
    RewriteFields r;
    r.modified_question = it->second;
    auto inf = fields.find("Inference_process");
    if (inf != fields.end()) r.inference_note = inf->second;
    return r;
}

struct SynthesisFields {
    std::string inference;
    std::string answer;
};

inline SynthesisFields parse_synthesis(const std::string& raw) {
    auto fields = parse_labeled_fields(raw, {"Inference_process", "Answer"});
    auto it = fields.find("Answer");
    if (it == fields.end() || it->second.empty())
        throw Error(ErrorKind::parse, "model output missing Answer field", {}, raw);
    SynthesisFields s;
    s.answer = it->second;
    auto inf = fields.find("Inference_process");
    if (inf != fields.end()) s.inference = inf->second;
    return s;
}

/// Judge verdict: yes -> true, no -> false. Anything else is a parse error.
inline bool parse_correctness(const std::string& raw) {
    auto fields = parse_labeled_fields(raw, {"Correctness"});
    auto it = fields.find("Correctness");
    if (it == fields.end())
        throw Error(ErrorKind::parse, "judge output missing Correctness field", {}, raw);
    std::string v;
    for (char c : it->second) {
        auto u = static_cast<unsigned char>(c);
        if (std::isalpha(u) != 0) {
            v.push_back(static_cast<char>(std::tolower(u)));
        } else if (!v.empty()) {
            break;
        }
    }
    if (v == "yes") return true;
    if (v == "no") return false;
    throw Error(ErrorKind::parse, "judge verdict is neither yes nor no", {}, raw);
}

/// Raw keyword items from a semicolon-delimited line. Tolerates a leading
/// `Keywords:` label; empty items are dropped. Normalization and
/// deduplication happen in the keyword module.
inline std::vector<std::string> parse_keyword_list(const std::string& raw) {
    std::string payload = raw;
    for (const auto& line : parse_detail::split_lines(raw)) {
        if (auto value = parse_detail::match_label_line(line, "Keywords")) payload = *value;
    }
    std::vector<std::string> items;
    std::string cur;
    for (char c : payload) {
        if (c == ';' || c == '\n') {
            const std::string item = text::trim(cur);
            if (!item.empty()) items.push_back(item);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    const std::string item = text::trim(cur);
    if (!item.empty()) items.push_back(item);
    return items;
}

} // namespace dec
