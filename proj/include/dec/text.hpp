#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace dec::text {

/// Tokenization used by the index, keyword matching and fidelity checks.
/// ASCII letters/digits are word characters (folded to lowercase); bytes of
/// multi-byte UTF-8 sequences pass through untouched so non-Latin words stay
/// whole; everything else separates tokens.
inline std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char raw : s) {
        auto c = static_cast<unsigned char>(raw);
        if (std::isalnum(c) != 0 || c >= 0x80) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep = " ") {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += sep;
        out += parts[i];
    }
    return out;
}

/// Canonical single-spaced lowercase form of a phrase.
inline std::string normalize_phrase(std::string_view s) {
    return join(tokenize(s));
}

/// True when the token sequence of `phrase` occurs contiguously in `tokens`.
/// A phrase with no tokens is vacuously contained.
inline bool phrase_contained(std::string_view phrase, const std::vector<std::string>& tokens) {
    const std::vector<std::string> p = tokenize(phrase);
    if (p.empty()) return true;
    if (p.size() > tokens.size()) return false;
    return std::search(tokens.begin(), tokens.end(), p.begin(), p.end()) != tokens.end();
}

inline std::vector<std::string> split_whitespace(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char raw : s) {
        auto c = static_cast<unsigned char>(raw);
        if (std::isspace(c) != 0) {
            if (!cur.empty()) {
                out.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            cur.push_back(raw);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

/// Number of whitespace-separated chunks; the fallback token estimate when a
/// provider reports no usage counts.
inline long whitespace_token_count(std::string_view s) {
    long n = 0;
    bool in_word = false;
    for (char raw : s) {
        auto c = static_cast<unsigned char>(raw);
        if (std::isspace(c) != 0) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++n;
        }
    }
    return n;
}

namespace detail {
inline std::string strip_punct_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char raw : s) {
        auto c = static_cast<unsigned char>(raw);
        if (c < 0x80 && std::ispunct(c) != 0) continue;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}
} // namespace detail

/// Answer normalization for exact-match style scoring: lowercase, drop
/// punctuation, drop the articles a/an/the, collapse whitespace.
inline std::string normalize_answer(std::string_view s) {
    const std::vector<std::string> words = split_whitespace(detail::strip_punct_lower(s));
    std::vector<std::string> kept;
    kept.reserve(words.size());
    for (const auto& w : words) {
        if (w == "a" || w == "an" || w == "the") continue;
        kept.push_back(w);
    }
    return join(kept);
}

/// Tokens for the overlap F1 metric: lowercase, punctuation dropped,
/// whitespace split. Articles are kept; only the exact-match normalization
/// strips them.
inline std::vector<std::string> overlap_tokens(std::string_view s) {
    return split_whitespace(detail::strip_punct_lower(s));
}

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    if (n == 0) return m;
    if (m == 0) return n;
    std::vector<std::size_t> prev(m + 1);
    std::vector<std::size_t> cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

/// Character-level similarity: 1 - edit_distance / max(len). Two empty
/// strings are identical (1.0).
inline double char_similarity(std::string_view a, std::string_view b) {
    const std::size_t longest = std::max(a.size(), b.size());
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(edit_distance(a, b)) / static_cast<double>(longest);
}

/// Fixed English stopword list used by the decomposition fidelity check.
inline const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> words = {
        "a", "about", "above", "after", "again", "against", "ain", "all", "am", "an",
        "and", "any", "are", "aren", "as", "at", "be", "because", "been", "before",
        "being", "below", "between", "both", "but", "by", "can", "could", "couldn",
        "d", "did", "didn", "do", "does", "doesn", "doing", "don", "down", "during",
        "each", "few", "for", "from", "further", "had", "hadn", "has", "hasn", "have",
        "haven", "having", "he", "her", "here", "hers", "herself", "him", "himself",
        "his", "how", "i", "if", "in", "into", "is", "isn", "it", "its", "itself",
        "just", "ll", "m", "ma", "me", "might", "mightn", "more", "most", "must",
        "mustn", "my", "myself", "needn", "no", "nor", "not", "now", "o", "of", "off",
        "on", "once", "only", "or", "other", "ought", "our", "ours", "ourselves",
        "out", "over", "own", "re", "s", "same", "shall", "shan", "she", "should",
        "shouldn", "so", "some", "such", "t", "than", "that", "the", "their",
        "theirs", "them", "themselves", "then", "there", "these", "they", "this",
        "those", "through", "to", "too", "under", "until", "up", "ve", "very", "was",
        "wasn", "we", "were", "weren", "what", "when", "where", "which", "while",
        "who", "whom", "whose", "why", "will", "with", "won", "would", "wouldn",
        "y", "you", "your", "yours", "yourself", "yourselves",
    };
    return words;
}

inline bool is_stopword(const std::string& token) {
    return stopwords().count(token) > 0;
}

/// Trims outer whitespace and folds internal newlines into single spaces,
/// producing a one-line answer string.
inline std::string single_line(std::string_view s) {
    return join(split_whitespace(s));
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b])) != 0) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])) != 0) --e;
    return std::string(s.substr(b, e - b));
}

} // namespace dec::text
