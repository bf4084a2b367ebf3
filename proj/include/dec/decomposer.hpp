#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dec/gateway.hpp"
#include "dec/parsing.hpp"

namespace dec {

struct ComplexQuestion {
    std::string id;
    std::string text;
};

struct SubQuestion {
    int index = 0; // 1-based position in the chain
    std::string text;

    friend bool operator==(const SubQuestion&, const SubQuestion&) = default;
};

/// Ordered atomic sub-questions decomposed from one complex question.
struct ReasoningChain {
    std::string question_id;
    std::vector<SubQuestion> subs;

    friend bool operator==(const ReasoningChain&, const ReasoningChain&) = default;
};

inline Bindings decompose_bindings(const ComplexQuestion& q) {
    return Bindings{{"question", q.text}};
}

inline std::vector<SubQuestion> parse_chain(const std::string& raw) {
    std::vector<SubQuestion> subs;
    int index = 0;
    for (auto& item : parse_numbered_list(raw)) subs.push_back({++index, std::move(item)});
    return subs;
}

inline std::string format_chain(const ReasoningChain& chain) {
    std::string out;
    for (const auto& sub : chain.subs) {
        out += std::to_string(sub.index) + ". " + sub.text + "\n";
    }
    return out;
}

struct DecomposeResult {
    ReasoningChain chain;
    bool truncated = false;
};

/// Phase 1: one model call turning the question into a reasoning chain.
class Decomposer {
public:
    Decomposer(Gateway& gateway, const PromptCatalog& catalog, CallOptions opts,
               int max_chain_length = 6)
        : gateway_(&gateway),
          tmpl_(&catalog.get(tmpl_names::decompose)),
          opts_(std::move(opts)),
          max_chain_length_(max_chain_length) {}

    /// Parses a numbered list from the model output; retries the call once
    /// when no items parse. Chains longer than max_chain_length are
    /// truncated and flagged.
    DecomposeResult decompose(const ComplexQuestion& question, TokenUsage* usage = nullptr) const {
        const ChatRequest request = make_request(*tmpl_, decompose_bindings(question), opts_);
        std::vector<SubQuestion> subs;
        for (int attempt = 0;; ++attempt) {
            const ChatResponse response = gateway_->complete(request, usage);
            try {
                subs = parse_chain(response.text);
                break;
            } catch (const Error& e) {
                if (attempt >= 1)
                    throw Error(ErrorKind::parse,
                                "decomposition failed for question '" + question.id +
                                    "': " + e.what(),
                                tmpl_->name, response.text);
            }
        }
        DecomposeResult result;
        result.chain.question_id = question.id;
        if (static_cast<int>(subs.size()) > max_chain_length_) {
            subs.resize(static_cast<std::size_t>(max_chain_length_));
            result.truncated = true;
        }
        result.chain.subs = std::move(subs);
        return result;
    }

    int max_chain_length() const { return max_chain_length_; }

private:
    Gateway* gateway_;
    const PromptTemplate* tmpl_;
    CallOptions opts_;
    int max_chain_length_;
};

} // namespace dec
