#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "dec/dataset.hpp"
#include "dec/keyword_ek.hpp"
#include "dec/orchestrator.hpp"
#include "dec/retrieval.hpp"

namespace dec {

struct EkBuildResult {
    std::vector<EkTrainingExample> examples;
    long pairs_seen = 0;
    long runs_skipped = 0; // runs without usable gold documents
};

/// Collects (query, keywords) pairs from run traces and keeps the ones whose
/// keyword set is fully contained in some gold document of the question.
/// Gold ids come from the dataset and hydrate against the corpus index.
inline EkBuildResult build_ek_dataset(const std::vector<RunRecord>& runs,
                                      const std::vector<DatasetRecord>& dataset,
                                      const CorpusIndex& corpus) {
    std::unordered_map<std::string, const DatasetRecord*> by_id;
    for (const auto& d : dataset) by_id[d.id] = &d;

    EkBuildResult result;
    for (const auto& run : runs) {
        auto it = by_id.find(run.question.id);
        if (it == by_id.end() || it->second->gold_doc_ids.empty()) {
            ++result.runs_skipped;
            continue;
        }
        std::vector<Document> gold_docs;
        bool missing_doc = false;
        for (const auto& gold_id : it->second->gold_doc_ids) {
            const Document* doc = corpus.doc_by_id(gold_id);
            if (doc == nullptr) {
                missing_doc = true;
                break;
            }
            gold_docs.push_back(*doc);
        }
        if (missing_doc) {
            ++result.runs_skipped;
            continue;
        }
        for (const auto& step : run.steps) {
            ++result.pairs_seen;
            if (validity_indicator(step.keywords, gold_docs) != 1) continue;
            EkTrainingExample e;
            e.instruction = std::string(kKeywordInstruction);
            e.input_query = step.rewritten.text;
            e.output_keywords = step.keywords.keywords;
            result.examples.push_back(std::move(e));
        }
    }
    return result;
}

inline void save_ek_dataset_jsonl(const std::filesystem::path& path,
                                  const std::vector<EkTrainingExample>& examples) {
    std::vector<ojson> lines;
    lines.reserve(examples.size());
    for (const auto& e : examples) lines.push_back(to_json(e));
    write_jsonl(path, lines);
}

} // namespace dec
