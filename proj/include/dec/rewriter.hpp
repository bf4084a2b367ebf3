#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dec/decomposer.hpp"
#include "dec/gateway.hpp"
#include "dec/parsing.hpp"

namespace dec {

struct QaEntry {
    std::string query;  // the rewritten, retrievable form
    std::string answer;
};

/// Accumulated (rewritten query, answer) pairs; append-only within a run.
/// Step i sees exactly the i-1 prior entries.
struct QaHistory {
    std::vector<QaEntry> entries;

    void append(std::string query, std::string answer) {
        entries.push_back({std::move(query), std::move(answer)});
    }
    std::size_t size() const { return entries.size(); }
    bool empty() const { return entries.empty(); }
};

/// History as rendered into prompts, one `sub_question_k:..., sub_answer:...`
/// line per entry. "None" marks an empty history so the first step carries
/// an explicit no-context signal.
inline std::string format_history(const QaHistory& history) {
    if (history.empty()) return "None";
    std::string out;
    for (std::size_t i = 0; i < history.entries.size(); ++i) {
        if (i > 0) out += "\n";
        out += "sub_question_" + std::to_string(i + 1) + ":" + history.entries[i].query +
               ", sub_answer:" + history.entries[i].answer;
    }
    return out;
}

inline Bindings rewrite_bindings(const ComplexQuestion& question, const std::string& sub_text,
                                 const QaHistory& history) {
    return Bindings{{"question", question.text},
                    {"history", format_history(history)},
                    {"sub_question", sub_text}};
}

/// Self-contained, retrievable form of one sub-question plus the model's
/// stated dependency reasoning.
struct RewrittenQuery {
    int sub_index = 0;
    std::string text;
    std::string inference_note;

    friend bool operator==(const RewrittenQuery&, const RewrittenQuery&) = default;
};

struct RewriteOutcome {
    RewrittenQuery query;
    bool fallback = false; // model output stayed unparsable; original text used
};

/// Phase 2: context-aware rewriting of each sub-question against the QA
/// history.
class Rewriter {
public:
    Rewriter(Gateway& gateway, const PromptCatalog& catalog, CallOptions opts)
        : gateway_(&gateway), tmpl_(&catalog.get(tmpl_names::rewrite)), opts_(std::move(opts)) {}

    /// Strict form: throws after one retry when Modified_question is missing.
    RewrittenQuery rewrite(const ComplexQuestion& question, const SubQuestion& sub,
                           const QaHistory& history, TokenUsage* usage = nullptr) const {
        const ChatRequest request =
            make_request(*tmpl_, rewrite_bindings(question, sub.text, history), opts_);
        for (int attempt = 0;; ++attempt) {
            const ChatResponse response = gateway_->complete(request, usage);
            try {
                const RewriteFields fields = parse_rewrite(response.text);
                return {sub.index, fields.modified_question, fields.inference_note};
            } catch (const Error& e) {
                if (attempt >= 1)
                    throw Error(ErrorKind::parse,
                                "rewrite failed at step " + std::to_string(sub.index) + ": " +
                                    e.what(),
                                tmpl_->name, response.text);
            }
        }
    }

    /// Pipeline form: a degraded query beats an aborted chain, so rewrite
    /// failures fall back to the unrewritten sub-question and are flagged.
    RewriteOutcome rewrite_or_fallback(const ComplexQuestion& question, const SubQuestion& sub,
                                       const QaHistory& history,
                                       TokenUsage* usage = nullptr) const {
        try {
            return {rewrite(question, sub, history, usage), false};
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::parse) throw;
            return {{sub.index, sub.text, ""}, true};
        }
    }

private:
    Gateway* gateway_;
    const PromptTemplate* tmpl_;
    CallOptions opts_;
};

} // namespace dec
