#pragma once

#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dec/document.hpp"
#include "dec/gateway.hpp"
#include "dec/parsing.hpp"
#include "dec/text.hpp"

namespace dec {

/// Discriminative keywords extracted from one rewritten query. May be empty,
/// which downstream recall treats as "relevance backup only".
struct KeywordSet {
    std::vector<std::string> keywords;
    std::string source_query;

    bool empty() const { return keywords.empty(); }
};

inline Bindings keyword_bindings(const std::string& query_text) {
    return Bindings{{"query", query_text}};
}

/// Trims, collapses internal whitespace and drops duplicates (case-folded)
/// plus items with no word characters.
inline std::vector<std::string> normalize_keywords(const std::vector<std::string>& raw) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& item : raw) {
        const std::string cleaned = text::single_line(item);
        if (cleaned.empty()) continue;
        const std::string key = text::normalize_phrase(cleaned);
        if (key.empty()) continue;
        if (!seen.insert(key).second) continue;
        out.push_back(cleaned);
    }
    return out;
}

/// True when the keyword does not occur in its source query — the
/// hallucination signal of the extraction match-rate diagnostic.
inline bool keyword_hallucinated(const std::string& keyword, const std::string& query) {
    return !text::phrase_contained(keyword, text::tokenize(query));
}

class KeywordExtractor {
public:
    KeywordExtractor(Gateway& gateway, const PromptCatalog& catalog, CallOptions opts)
        : gateway_(&gateway),
          tmpl_(&catalog.get(tmpl_names::keywords)),
          opts_(std::move(opts)) {}

    /// One model call, one retry when the parsed list comes back empty.
    /// Still empty after the retry -> empty KeywordSet; recall falls back to
    /// pure relevance. Hallucinated keywords are kept: they match nothing at
    /// recall time but stay observable for diagnostics.
    KeywordSet extract(const std::string& query_text, TokenUsage* usage = nullptr) const {
        KeywordSet set;
        set.source_query = query_text;
        const ChatRequest request = make_request(*tmpl_, keyword_bindings(query_text), opts_);
        for (int attempt = 0; attempt < 2; ++attempt) {
            const ChatResponse response = gateway_->complete(request, usage);
            set.keywords = normalize_keywords(parse_keyword_list(response.text));
            if (!set.keywords.empty()) break;
        }
        return set;
    }

private:
    Gateway* gateway_;
    const PromptTemplate* tmpl_;
    CallOptions opts_;
};

struct MatchRate {
    double rate = 1.0;
    bool vacuous = false; // no keywords were seen at all
};

/// Fraction of keywords that occur as contiguous token subsequences of their
/// query. Zero keywords overall is vacuously 1.0.
inline MatchRate substring_match_rate(
    const std::vector<std::pair<std::string, KeywordSet>>& pairs) {
    long total = 0;
    long matched = 0;
    for (const auto& [query, set] : pairs) {
        const std::vector<std::string> query_tokens = text::tokenize(query);
        for (const auto& k : set.keywords) {
            ++total;
            if (text::phrase_contained(k, query_tokens)) ++matched;
        }
    }
    if (total == 0) return {1.0, true};
    return {static_cast<double>(matched) / static_cast<double>(total), false};
}

/// 1 iff some gold document contains the entire keyword set; an empty set is
/// never valid. Containment is the same phrase predicate used by hybrid
/// recall.
inline int validity_indicator(const KeywordSet& keywords, const std::vector<Document>& gold_docs) {
    if (keywords.empty()) return 0;
    for (const auto& doc : gold_docs) {
        bool all = true;
        for (const auto& k : keywords.keywords) {
            if (!text::phrase_contained(k, doc.terms)) {
                all = false;
                break;
            }
        }
        if (all) return 1;
    }
    return 0;
}

/// Canonical separator for serialized keyword lists.
inline constexpr std::string_view kKeywordDelimiter = "; ";

inline std::string join_keywords(const std::vector<std::string>& keywords) {
    std::string out;
    for (std::size_t i = 0; i < keywords.size(); ++i) {
        if (i > 0) out += kKeywordDelimiter;
        out += keywords[i];
    }
    return out;
}

/// One instruction-tuning example for the keyword-extraction model; emitted
/// only for pairs whose validity indicator is 1.
struct EkTrainingExample {
    std::string instruction;
    std::string input_query;
    std::vector<std::string> output_keywords;
};

inline ojson to_json(const EkTrainingExample& e) {
    return ojson{{"instruction", e.instruction},
                 {"input", e.input_query},
                 {"output", join_keywords(e.output_keywords)}};
}

} // namespace dec
