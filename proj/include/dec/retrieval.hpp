#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dec/document.hpp"
#include "dec/error.hpp"
#include "dec/jsonl.hpp"
#include "dec/keyword_ek.hpp"
#include "dec/text.hpp"

namespace dec {

struct ScoredDocument {
    const Document* doc = nullptr;
    double score = 0.0;
};

/// Ranks ScoredDocuments by descending score, ties broken by ascending id so
/// that every ranking in the system is deterministic.
inline bool ranked_before(const ScoredDocument& a, const ScoredDocument& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc->id < b.doc->id;
}

/// In-memory inverted index with BM25 scoring (k1=1.2, b=0.75). Read-only
/// after build; safe for unlimited concurrent readers.
class CorpusIndex {
public:
    static constexpr double kK1 = 1.2;
    static constexpr double kB = 0.75;

    static CorpusIndex build(std::vector<Document> docs) {
        CorpusIndex index;
        index.docs_ = std::move(docs);
        long total_len = 0;
        for (std::size_t i = 0; i < index.docs_.size(); ++i) {
            const Document& d = index.docs_[i];
            if (!index.by_id_.emplace(d.id, i).second)
                throw Error(ErrorKind::data, "duplicate document id '" + d.id + "'");
            total_len += static_cast<long>(d.terms.size());
            std::unordered_map<std::string, long> freqs;
            for (const auto& t : d.terms) ++freqs[t];
            for (const auto& [term, freq] : freqs) index.postings_[term].push_back({i, freq});
        }
        index.avg_len_ = index.docs_.empty()
                             ? 0.0
                             : static_cast<double>(total_len) / static_cast<double>(index.docs_.size());
        return index;
    }

    static CorpusIndex from_corpus_jsonl(const std::filesystem::path& path) {
        return build(load_corpus_jsonl(path));
    }

    /// Up to top_n documents by BM25, descending score, ascending-id ties.
    /// A query that normalizes to nothing returns an empty list.
    std::vector<ScoredDocument> retrieve(const std::string& query, int top_n) const {
        if (top_n <= 0) throw Error(ErrorKind::usage, "top_n must be positive");
        const std::vector<std::string> tokens = text::tokenize(query);
        if (tokens.empty() || docs_.empty()) return {};

        std::unordered_map<std::size_t, double> scores;
        for (const auto& token : tokens) {
            auto it = postings_.find(token);
            if (it == postings_.end()) continue;
            const auto& posting = it->second;
            const double df = static_cast<double>(posting.size());
            const double n = static_cast<double>(docs_.size());
            const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
            for (const auto& [doc_idx, freq] : posting) {
                const double f = static_cast<double>(freq);
                const double dl = static_cast<double>(docs_[doc_idx].terms.size());
                const double norm = kK1 * (1.0 - kB + kB * dl / avg_len_);
                scores[doc_idx] += idf * (f * (kK1 + 1.0)) / (f + norm);
            }
        }
        std::vector<ScoredDocument> ranked;
        ranked.reserve(scores.size());
        for (const auto& [doc_idx, score] : scores) ranked.push_back({&docs_[doc_idx], score});
        std::sort(ranked.begin(), ranked.end(), ranked_before);
        if (ranked.size() > static_cast<std::size_t>(top_n)) ranked.resize(static_cast<std::size_t>(top_n));
        return ranked;
    }

    const Document* doc_by_id(const std::string& id) const {
        auto it = by_id_.find(id);
        return it == by_id_.end() ? nullptr : &docs_[it->second];
    }

    std::size_t size() const { return docs_.size(); }
    double average_length() const { return avg_len_; }
    const std::vector<Document>& docs() const { return docs_; }

    void save(const std::filesystem::path& path) const {
        ojson j;
        j["format_version"] = 1;
        j["stats"] = ojson{{"documents", docs_.size()}, {"average_length", avg_len_}};
        ojson docs = ojson::array();
        for (const auto& d : docs_) docs.push_back(to_json(d));
        j["docs"] = std::move(docs);
        write_text_file(path, j.dump() + "\n");
    }

    static CorpusIndex load(const std::filesystem::path& path) {
        ojson j;
        try {
            j = ojson::parse(read_text_file(path));
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::data, path.string() + ": " + e.what());
        }
        if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
            throw Error(ErrorKind::data, path.string() + ": unsupported index format");
        std::vector<Document> docs;
        for (const auto& dj : jsonv::member(j, "docs", path.string()))
            docs.push_back(document_from_json(dj, path.string()));
        return build(std::move(docs));
    }

private:
    struct Posting {
        std::size_t doc_idx;
        long freq;
    };

    std::vector<Document> docs_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::unordered_map<std::string, std::size_t> by_id_;
    double avg_len_ = 0.0;
};

/// Retrieval abstraction; the pipeline sees the local index and a remote
/// dense retriever through the same surface.
class Retriever {
public:
    virtual ~Retriever() = default;
    virtual std::vector<ScoredDocument> retrieve(const std::string& query, int top_n) const = 0;
};

class LexicalRetriever final : public Retriever {
public:
    explicit LexicalRetriever(const CorpusIndex& index) : index_(&index) {}

    std::vector<ScoredDocument> retrieve(const std::string& query, int top_n) const override {
        return index_->retrieve(query, top_n);
    }

private:
    const CorpusIndex* index_;
};

/// Candidate documents for one step: retrieved docs that contain the whole
/// keyword set, united with the top-`backup_k` by score. Keyword matches
/// lead, backups follow, each section score-descending with ascending-id
/// ties.
struct EnhancedCandidateSet {
    std::vector<ScoredDocument> docs;
    std::vector<std::string> keyword_matched_ids; // ascending
    std::vector<std::string> backup_ids;          // ascending

    std::vector<std::string> ordered_ids() const {
        std::vector<std::string> ids;
        ids.reserve(docs.size());
        for (const auto& sd : docs) ids.push_back(sd.doc->id);
        return ids;
    }
};

inline bool contains_all_keywords(const Document& doc, const KeywordSet& keywords) {
    for (const auto& k : keywords.keywords) {
        if (!text::phrase_contained(k, doc.terms)) return false;
    }
    return true;
}

/// Keyword-enhanced recall over the retriever's top-N list. An empty keyword
/// set degenerates to the pure top-`backup_k`; the result is non-empty
/// whenever retrieval returned anything.
inline EnhancedCandidateSet hybrid_recall(const Retriever& retriever, const std::string& query_text,
                                          const KeywordSet& keywords, int top_n, int backup_k) {
    if (backup_k <= 0) throw Error(ErrorKind::usage, "backup_k must be positive");
    const std::vector<ScoredDocument> retrieved = retriever.retrieve(query_text, top_n);

    EnhancedCandidateSet out;
    if (retrieved.empty()) return out;

    std::vector<ScoredDocument> matched;
    if (!keywords.empty()) {
        for (const auto& sd : retrieved) {
            if (contains_all_keywords(*sd.doc, keywords)) matched.push_back(sd);
        }
    }
    std::vector<ScoredDocument> backups(
        retrieved.begin(),
        retrieved.begin() + std::min<std::size_t>(retrieved.size(), static_cast<std::size_t>(backup_k)));

    std::unordered_set<std::string> included;
    for (const auto& sd : matched) {
        out.keyword_matched_ids.push_back(sd.doc->id);
        if (included.insert(sd.doc->id).second) out.docs.push_back(sd);
    }
    for (const auto& sd : backups) {
        out.backup_ids.push_back(sd.doc->id);
        if (included.insert(sd.doc->id).second) out.docs.push_back(sd);
    }
    std::sort(out.keyword_matched_ids.begin(), out.keyword_matched_ids.end());
    std::sort(out.backup_ids.begin(), out.backup_ids.end());
    return out;
}

} // namespace dec
