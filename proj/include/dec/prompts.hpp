#pragma once

#include <cctype>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dec/error.hpp"
#include "dec/jsonl.hpp"

namespace dec {

using Bindings = std::map<std::string, std::string>;

struct PromptTemplate {
    std::string name;
    std::string body;
};

namespace detail {
/// Matches `{identifier}` at position i; returns one past the closing brace
/// or npos. Identifiers start with a letter or underscore.
inline std::size_t placeholder_end(std::string_view body, std::size_t i) {
    if (body[i] != '{' || i + 1 >= body.size()) return std::string_view::npos;
    const auto first = static_cast<unsigned char>(body[i + 1]);
    if (std::isalpha(first) == 0 && first != '_') return std::string_view::npos;
    std::size_t j = i + 1;
    while (j < body.size() &&
           (std::isalnum(static_cast<unsigned char>(body[j])) != 0 || body[j] == '_')) {
        ++j;
    }
    if (j < body.size() && body[j] == '}') return j + 1;
    return std::string_view::npos;
}
} // namespace detail

/// Placeholder names appearing in a template body as `{identifier}`.
inline std::vector<std::string> placeholders(std::string_view body) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < body.size(); ++i) {
        const std::size_t end = detail::placeholder_end(body, i);
        if (end == std::string_view::npos) continue;
        names.emplace_back(body.substr(i + 1, end - i - 2));
        i = end - 1;
    }
    return names;
}

/// Substitutes every `{name}` with its binding. Unbound placeholders are an
/// error listing the offending names.
inline std::string render(const PromptTemplate& tmpl, const Bindings& bindings) {
    std::string missing;
    for (const auto& name : placeholders(tmpl.body)) {
        if (bindings.find(name) == bindings.end()) {
            if (!missing.empty()) missing += ", ";
            missing += name;
        }
    }
    if (!missing.empty()) {
        throw Error(ErrorKind::usage,
                    "template '" + tmpl.name + "': unbound placeholder(s): " + missing,
                    tmpl.name);
    }
    std::string out;
    out.reserve(tmpl.body.size());
    const std::string_view body = tmpl.body;
    for (std::size_t i = 0; i < body.size(); ++i) {
        const std::size_t end = detail::placeholder_end(body, i);
        if (end != std::string_view::npos) {
            out += bindings.at(std::string(body.substr(i + 1, end - i - 2)));
            i = end - 1;
            continue;
        }
        out += body[i];
    }
    return out;
}

namespace tmpl_names {
inline constexpr const char* decompose = "decompose";
inline constexpr const char* rewrite = "rewrite";
inline constexpr const char* keywords = "keywords";
inline constexpr const char* sub_answer = "sub_answer";
inline constexpr const char* synthesize = "synthesize";
inline constexpr const char* judge = "judge";
} // namespace tmpl_names

/// Task sentence of the keyword-extraction prompt. Kept separate because the
/// instruction-tuning dataset emits it verbatim as the `instruction` field.
inline constexpr std::string_view kKeywordInstruction =
    "Extract the most distinctive keywords from the query for document retrieval. "
    "Keywords must be exact substrings of the query that identify the evidence documents, "
    "such as entity names, titles, or rare phrases. Do not invent words that are not in "
    "the query. Output the keywords on a single line, separated by semicolons.";

/// Answer token that marks a question as unanswerable.
inline constexpr std::string_view kUnanswerableToken = "unanswerable";

namespace detail {

inline const char* decompose_body() {
    return
        "You are a question decomposition assistant. Your task is to parse a complex "
        "question into a logically coherent chain of atomic sub-questions.\n"
        "Follow these rules:\n"
        "1. Each sub-question must ask for exactly one fact.\n"
        "2. Order the sub-questions so that each one depends only on answers to earlier "
        "sub-questions.\n"
        "3. Together, the sub-questions must provide everything needed to answer the "
        "original question.\n"
        "4. If the question already asks for a single fact, output it unchanged as the "
        "only sub-question.\n"
        "### Format your output as a numbered list, one sub-question per line:\n"
        "1. <first sub-question>\n"
        "2. <second sub-question>\n"
        "##Example:\n"
        "Question: When was the founder of craigslist born?\n"
        "1. Who was the founder of craigslist?\n"
        "2. When was this founder born?\n"
        "Now decompose the following question. Please be sure to output in the agreed "
        "format.\n"
        "Question: {question}";
}

inline const char* rewrite_body() {
    return
        "You are an auxiliary query assistant who modifies queries to better find answers "
        "to solve problems.\n"
        "Follow these precise steps:\n"
        "1. **Dependency Check**: For each sub-question, identify if it depends on the "
        "answer to any previous sub-question.\n"
        "   - State the dependency reason if it exists, otherwise, state \"None\".\n"
        "2. **Dynamic Adjustment**: Modify the sub-question to include necessary "
        "information if a dependency is present.\n"
        "   - If no change is required, keep the original sub-question.\n"
        "### Input Data:\n"
        "- Key_Question:The key question that ultimately needs to be answered. The "
        "modified sub-questions should be queries that can provide crucial information "
        "for answering this question.\n"
        "- Previous_QA_History: \"The question-and-answer history of previous "
        "sub-questions, which provides crucial information for solving the key question "
        "and for the rewriting of subsequent sub-questions.\n"
        "- Modifiable_Question: The sub-questions that need to be modified.\n"
        "### Format your output as follows:\n"
        "Inference_process: Dependency reason or 'None' if not dependent\n"
        "Modified_question: Modified sub-question or original if no changes are required\n"
        "##Example:\n"
        "- Key_Question:When was the founder of craigslist born?\n"
        "- Previous_QA_History:\n"
        "sub_question_1:Who was the founder of craigslist?, sub_answer:Craigslist was "
        "founded by Craig Newmark.\n"
        "- Modifiable_Question:\"When was him born?\"\n"
        "Inference_process: The sub-question \"When was him born?\" depends on the answer "
        "to sub-question_1 because \"him\" refers to the previously identified founder, "
        "Craig Newmark.\n"
        "Modified_question: When was Craig Newmark born?\n"
        "Now analyze the following question. Please be sure to output in the agreed "
        "format.\n"
        "User input:\n"
        "- Key_Question:{question}\n"
        "- Previous_QA_History:{history}\n"
        "- Modifiable_Question:{sub_question}\n"
        "Model output:";
}

inline std::string keywords_body() {
    return std::string(kKeywordInstruction) + "\nQuery: {query}\nKeywords:";
}

inline const char* sub_answer_body() {
    return
        "Answer the following question briefly based on relevant information:\n"
        "Question: {sub_question}\n"
        "Context: {rel_text}";
}

inline const char* synthesize_body() {
    return
        "Synthesize an answer to the original question based on the answers to "
        "sub-questions:\n"
        "\"Your reasoning process should be separated into two fields from the answer. "
        "In the answer field, please provide the answer as concisely as possible. The "
        "answer should be given in the form of words or phrases as much as possible.\n"
        "If the evidence is insufficient to answer the original question, give exactly "
        "\"unanswerable\" in the answer field.\n"
        "### Input Data:\n"
        "- Original_Question:The key question that ultimately needs to be answered.\n"
        "- Evidence:Question-and-answer pairs of the sub-questions split from the "
        "original question, which are used to answer the final original question.\n"
        "### Format your output as follows:\n"
        "Inference_process: Your reasoning process\n"
        "Answer: Modified Provide answers as concisely as possible\n"
        "##Output Example:\n"
        "Inference_process: Based on the sub-questions and answers, I identified the "
        "series that matches the description as Animorphs, a science fantasy young adult "
        "series told in first person. The series has companion books that narrate the "
        "stories of enslaved worlds and alien species, which aligns with the nature of "
        "the companion books in the Square Enix series.\n"
        "Answer: Animorphs\n"
        "Now analyze the following question. Please be sure to output in the agreed "
        "format.\n"
        "User input:\n"
        "- Original_Question:{question}\n"
        "- Evidence:{history}\n"
        "Model output:";
}

inline const char* judge_body() {
    return
        "You are an experienced linguist who is responsible for evaluating the "
        "correctness of the generated responses.\n"
        "You are provided with question, the generated responses and the corresponding "
        "ground truth answer.\n"
        "Your task is to compare the generated responses with the ground truth responses "
        "and evaluate the correctness of the generated responses.\n"
        "##Example:\n"
        "Example_1:\n"
        "User input:\n"
        "-Question: The city where Alex Shevelev died is the capital of what region?\n"
        "-Ground-truth Answer: the Lazio region\n"
        "-Prediction: the answer is Lazio\n"
        "Model output:\n"
        "-Correctness: yes\n"
        "Example_2:\n"
        "User input:\n"
        "-Question: Which drink is larger, the Apple-Kneel or the Flaming volcano?\n"
        "-Ground-truth Answer: The flaming volcano\n"
        "-Prediction: The Apple-Kneel\n"
        "Model output:\n"
        "-Correctness: no\n"
        "Now analyze the following question.Please be sure to output in the agreed "
        "format.\n"
        "User input:\n"
        "-Question: {question}\n"
        "-Ground-truth Answer: {answer}\n"
        "-Prediction: {prediction}\n"
        "Model output:";
}

} // namespace detail

/// Named, frozen prompt templates for every pipeline stage. Bodies can be
/// overridden from a JSON file ({"templates": {name: body}}) for
/// experimentation; the built-in wording is the reference behavior.
class PromptCatalog {
public:
    static PromptCatalog builtin() {
        PromptCatalog c;
        c.put({tmpl_names::decompose, detail::decompose_body()});
        c.put({tmpl_names::rewrite, detail::rewrite_body()});
        c.put({tmpl_names::keywords, detail::keywords_body()});
        c.put({tmpl_names::sub_answer, detail::sub_answer_body()});
        c.put({tmpl_names::synthesize, detail::synthesize_body()});
        c.put({tmpl_names::judge, detail::judge_body()});
        return c;
    }

    const PromptTemplate& get(const std::string& name) const {
        auto it = templates_.find(name);
        if (it == templates_.end())
            throw Error(ErrorKind::usage, "unknown prompt template '" + name + "'", name);
        return it->second;
    }

    void put(PromptTemplate t) { templates_[t.name] = std::move(t); }

    void apply_overrides_file(const std::filesystem::path& path) {
        ojson j;
        try {
            j = ojson::parse(read_text_file(path));
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::data, path.string() + ": " + e.what());
        }
        auto it = j.find("templates");
        if (it == j.end() || !it->is_object())
            throw Error(ErrorKind::data, path.string() + ": expected object field 'templates'");
        for (const auto& [name, body] : it->items()) {
            if (!body.is_string())
                throw Error(ErrorKind::data,
                            path.string() + ": template '" + name + "' body must be a string");
            put({name, body.get<std::string>()});
        }
    }

    const std::map<std::string, PromptTemplate>& all() const { return templates_; }

private:
    std::map<std::string, PromptTemplate> templates_;
};

} // namespace dec
