#pragma once

#include <atomic>
#include <chrono>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dec/dataset.hpp"
#include "dec/decomposer.hpp"
#include "dec/gateway.hpp"
#include "dec/keyword_ek.hpp"
#include "dec/retrieval.hpp"
#include "dec/rewriter.hpp"
#include "dec/text.hpp"

namespace dec {

inline constexpr int kRunRecordVersion = 1;

/// One iteration of the loop: rewrite, keywords, recall, answer.
struct StepTrace {
    std::string sub_question;
    RewrittenQuery rewritten;
    KeywordSet keywords;
    std::vector<std::string> candidate_doc_ids; // in context order
    std::string sub_answer;
    TokenUsage step_tokens;
};

/// Full trace of one question through the pipeline. Serializes losslessly;
/// wall_time_ms is the only field excluded from determinism comparisons.
struct RunRecord {
    ComplexQuestion question;
    ReasoningChain chain;
    std::vector<StepTrace> steps;
    std::string final_inference;
    std::string final_answer;
    bool predicted_answerable = true;
    int sqa_count = 0;
    TokenUsage decompose_tokens;
    TokenUsage synthesis_tokens;
    TokenUsage total_tokens;
    std::vector<std::string> flags;
    bool failed = false;
    std::string error;
    std::string config_digest;
    double wall_time_ms = 0.0;
};

inline ojson to_json(const TokenUsage& u) {
    return ojson{{"prompt", u.prompt}, {"completion", u.completion}};
}

inline TokenUsage token_usage_from_json(const ojson& j) {
    TokenUsage u;
    u.prompt = j.value("prompt", 0L);
    u.completion = j.value("completion", 0L);
    return u;
}

inline ojson to_json(const StepTrace& s) {
    return ojson{
        {"sub_question", s.sub_question},
        {"rewritten",
         ojson{{"sub_index", s.rewritten.sub_index},
               {"text", s.rewritten.text},
               {"inference_note", s.rewritten.inference_note}}},
        {"keywords",
         ojson{{"keywords", s.keywords.keywords}, {"source_query", s.keywords.source_query}}},
        {"candidate_doc_ids", s.candidate_doc_ids},
        {"sub_answer", s.sub_answer},
        {"step_tokens", to_json(s.step_tokens)},
    };
}

inline ojson to_json(const RunRecord& r) {
    ojson chain{{"question_id", r.chain.question_id}, {"subs", ojson::array()}};
    for (const auto& sub : r.chain.subs)
        chain["subs"].push_back(ojson{{"index", sub.index}, {"text", sub.text}});
    ojson steps = ojson::array();
    for (const auto& s : r.steps) steps.push_back(to_json(s));
    return ojson{
        {"record_version", kRunRecordVersion},
        {"question", ojson{{"id", r.question.id}, {"text", r.question.text}}},
        {"chain", std::move(chain)},
        {"steps", std::move(steps)},
        {"final_inference", r.final_inference},
        {"final_answer", r.final_answer},
        {"predicted_answerable", r.predicted_answerable},
        {"sqa_count", r.sqa_count},
        {"decompose_tokens", to_json(r.decompose_tokens)},
        {"synthesis_tokens", to_json(r.synthesis_tokens)},
        {"total_tokens", to_json(r.total_tokens)},
        {"flags", r.flags},
        {"failed", r.failed},
        {"error", r.error},
        {"config_digest", r.config_digest},
        {"wall_time_ms", r.wall_time_ms},
    };
}

inline RunRecord run_record_from_json(const ojson& j, const std::string& context = "run record") {
    const int version = j.value("record_version", 0);
    if (version != kRunRecordVersion)
        throw Error(ErrorKind::data,
                    context + ": unsupported record_version " + std::to_string(version));
    RunRecord r;
    const ojson& q = jsonv::member(j, "question", context);
    r.question.id = jsonv::str(q, "id", context);
    r.question.text = jsonv::str(q, "text", context);
    const ojson& chain = jsonv::member(j, "chain", context);
    r.chain.question_id = jsonv::str(chain, "question_id", context);
    for (const auto& sub : jsonv::member(chain, "subs", context))
        r.chain.subs.push_back({sub.at("index").get<int>(), sub.at("text").get<std::string>()});
    for (const auto& sj : jsonv::member(j, "steps", context)) {
        StepTrace s;
        s.sub_question = jsonv::str(sj, "sub_question", context);
        const ojson& rw = jsonv::member(sj, "rewritten", context);
        s.rewritten.sub_index = rw.at("sub_index").get<int>();
        s.rewritten.text = jsonv::str(rw, "text", context);
        s.rewritten.inference_note = jsonv::str_or(rw, "inference_note", "");
        const ojson& kw = jsonv::member(sj, "keywords", context);
        for (const auto& k : jsonv::member(kw, "keywords", context))
            s.keywords.keywords.push_back(k.get<std::string>());
        s.keywords.source_query = jsonv::str_or(kw, "source_query", "");
        for (const auto& id : jsonv::member(sj, "candidate_doc_ids", context))
            s.candidate_doc_ids.push_back(id.get<std::string>());
        s.sub_answer = jsonv::str_or(sj, "sub_answer", "");
        s.step_tokens = token_usage_from_json(jsonv::member(sj, "step_tokens", context));
        r.steps.push_back(std::move(s));
    }
    r.final_inference = jsonv::str_or(j, "final_inference", "");
    r.final_answer = jsonv::str_or(j, "final_answer", "");
    r.predicted_answerable = j.value("predicted_answerable", true);
    r.sqa_count = j.value("sqa_count", 0);
    r.decompose_tokens = token_usage_from_json(jsonv::member(j, "decompose_tokens", context));
    r.synthesis_tokens = token_usage_from_json(jsonv::member(j, "synthesis_tokens", context));
    r.total_tokens = token_usage_from_json(jsonv::member(j, "total_tokens", context));
    for (const auto& f : jsonv::member(j, "flags", context)) r.flags.push_back(f.get<std::string>());
    r.failed = j.value("failed", false);
    r.error = jsonv::str_or(j, "error", "");
    r.config_digest = jsonv::str_or(j, "config_digest", "");
    r.wall_time_ms = j.value("wall_time_ms", 0.0);
    return r;
}

inline std::vector<RunRecord> load_run_records_jsonl(const std::filesystem::path& path) {
    std::vector<RunRecord> out;
    for_each_jsonl(path, [&](std::size_t line_no, const ojson& j) {
        out.push_back(run_record_from_json(j, path.string() + ":" + std::to_string(line_no)));
    });
    return out;
}

inline void save_run_records_jsonl(const std::filesystem::path& path,
                                   const std::vector<RunRecord>& records) {
    std::vector<ojson> lines;
    lines.reserve(records.size());
    for (const auto& r : records) lines.push_back(to_json(r));
    write_jsonl(path, lines);
}

/// Context block for the sub-answer prompt: candidate documents in candidate
/// order, each prefixed by its title.
inline std::string assemble_context(const EnhancedCandidateSet& candidates) {
    if (candidates.docs.empty()) return "No relevant documents found.";
    std::string out;
    for (std::size_t i = 0; i < candidates.docs.size(); ++i) {
        if (i > 0) out += "\n\n";
        out += candidates.docs[i].doc->title + "\n" + candidates.docs[i].doc->text;
    }
    return out;
}

inline Bindings sub_answer_bindings(const std::string& rewritten_text, const std::string& context) {
    return Bindings{{"sub_question", rewritten_text}, {"rel_text", context}};
}

inline Bindings synthesize_bindings(const ComplexQuestion& question, const QaHistory& history) {
    return Bindings{{"question", question.text}, {"history", format_history(history)}};
}

struct SynthesisResult {
    std::string inference;
    std::string answer;
    bool answerable = true;
};

struct PipelineOptions {
    CallOptions main;                 // decompose / rewrite / answer / synthesize
    CallOptions keyword;              // the EK role; may name a different model id
    int top_n = 10;
    int backup_k = 2;
    int max_chain_length = 6;
    std::string unanswerable_token = std::string(kUnanswerableToken);
    std::string config_digest;
};

/// The DEC loop: decompose once, then per sub-question rewrite against the
/// QA history, extract keywords, run hybrid recall and answer; finally
/// synthesize the answer to the original question.
class Orchestrator {
public:
    Orchestrator(Gateway& gateway, const Retriever& retriever, const PromptCatalog& catalog,
                 PipelineOptions options)
        : gateway_(&gateway),
          retriever_(&retriever),
          catalog_(&catalog),
          options_(std::move(options)),
          decomposer_(gateway, catalog, options_.main, options_.max_chain_length),
          rewriter_(gateway, catalog, options_.main),
          extractor_(gateway, catalog, options_.keyword) {}

    /// One model call answering a sub-question from the assembled context.
    std::string answer_sub_question(const RewrittenQuery& query,
                                    const EnhancedCandidateSet& candidates,
                                    TokenUsage* usage = nullptr) const {
        const ChatRequest request =
            make_request(catalog_->get(tmpl_names::sub_answer),
                         sub_answer_bindings(query.text, assemble_context(candidates)),
                         options_.main);
        try {
            return text::single_line(gateway_->complete(request, usage).text);
        } catch (const Error& e) {
            throw Error(e.kind(),
                        "sub-answer failed at step " + std::to_string(query.sub_index) + ": " +
                            e.what(),
                        e.template_name(), e.detail());
        }
    }

    /// Final synthesis over the complete history. The answer equal to the
    /// unanswerable token (after normalization) marks the question as
    /// predicted-unanswerable.
    SynthesisResult synthesize_final(const ComplexQuestion& question, const QaHistory& history,
                                     TokenUsage* usage = nullptr) const {
        const ChatRequest request = make_request(catalog_->get(tmpl_names::synthesize),
                                                 synthesize_bindings(question, history),
                                                 options_.main);
        for (int attempt = 0;; ++attempt) {
            const ChatResponse response = gateway_->complete(request, usage);
            try {
                const SynthesisFields fields = parse_synthesis(response.text);
                SynthesisResult result;
                result.inference = fields.inference;
                result.answer = fields.answer;
                result.answerable = text::normalize_answer(fields.answer) !=
                                    text::normalize_answer(options_.unanswerable_token);
                return result;
            } catch (const Error& e) {
                if (attempt >= 1)
                    throw Error(ErrorKind::parse,
                                "synthesis failed for question '" + question.id + "': " + e.what(),
                                tmpl_names::synthesize, response.text);
            }
        }
    }

    /// Runs the full pipeline. Degradations are flagged, never absorbed;
    /// unrecoverable failures produce a partial record with failed=true
    /// rather than throwing.
    RunRecord run(const ComplexQuestion& question) const {
        const auto t0 = std::chrono::steady_clock::now();
        RunRecord record;
        record.question = question;
        record.config_digest = options_.config_digest;
        try {
            run_inner(question, record);
        } catch (const Error& e) {
            record.failed = true;
            record.error = e.what();
            record.predicted_answerable = false;
            record.flags.push_back("failed");
        }
        record.sqa_count = static_cast<int>(record.steps.size());
        record.total_tokens = record.decompose_tokens;
        for (const auto& s : record.steps) record.total_tokens += s.step_tokens;
        record.total_tokens += record.synthesis_tokens;
        record.wall_time_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        return record;
    }

    /// One record per dataset row, in dataset order, independent questions
    /// running concurrently up to `parallelism`. Per-question failures stay
    /// inside their record; the batch always completes.
    std::vector<RunRecord> run_batch(const std::vector<DatasetRecord>& dataset,
                                     int parallelism) const {
        if (parallelism <= 0) throw Error(ErrorKind::usage, "parallelism must be positive");
        std::vector<RunRecord> records(dataset.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= dataset.size()) return;
                records[i] = run({dataset[i].id, dataset[i].question});
            }
        };
        const int thread_count =
            std::min<std::size_t>(static_cast<std::size_t>(parallelism), dataset.size());
        if (thread_count <= 1) {
            worker();
        } else {
            std::vector<std::thread> threads;
            threads.reserve(static_cast<std::size_t>(thread_count));
            for (int t = 0; t < thread_count; ++t) threads.emplace_back(worker);
            for (auto& t : threads) t.join();
        }
        return records;
    }

    const PipelineOptions& options() const { return options_; }

private:
    void run_inner(const ComplexQuestion& question, RunRecord& record) const {
        const DecomposeResult decomposed = decomposer_.decompose(question, &record.decompose_tokens);
        record.chain = decomposed.chain;
        if (decomposed.truncated) record.flags.push_back("chain_truncated");

        QaHistory history;
        for (const auto& sub : record.chain.subs) {
            StepTrace step;
            step.sub_question = sub.text;

            const RewriteOutcome rewritten =
                rewriter_.rewrite_or_fallback(question, sub, history, &step.step_tokens);
            step.rewritten = rewritten.query;
            if (rewritten.fallback)
                record.flags.push_back("rewrite_fallback:step_" + std::to_string(sub.index));

            step.keywords = extractor_.extract(step.rewritten.text, &step.step_tokens);
            if (step.keywords.empty())
                record.flags.push_back("empty_keywords:step_" + std::to_string(sub.index));
            for (const auto& k : step.keywords.keywords) {
                if (keyword_hallucinated(k, step.rewritten.text)) {
                    record.flags.push_back("hallucinated_keyword:step_" +
                                           std::to_string(sub.index));
                    break;
                }
            }

            const EnhancedCandidateSet candidates = hybrid_recall(
                *retriever_, step.rewritten.text, step.keywords, options_.top_n, options_.backup_k);
            step.candidate_doc_ids = candidates.ordered_ids();

            try {
                step.sub_answer =
                    answer_sub_question(step.rewritten, candidates, &step.step_tokens);
            } catch (const Error&) {
                // The chain has no abort semantics at step level: record the
                // miss and keep going.
                step.sub_answer = "no information found";
                record.flags.push_back("sub_answer_failed:step_" + std::to_string(sub.index));
            }

            history.append(step.rewritten.text, step.sub_answer);
            record.steps.push_back(std::move(step));
        }

        const SynthesisResult synthesis =
            synthesize_final(question, history, &record.synthesis_tokens);
        record.final_inference = synthesis.inference;
        record.final_answer = synthesis.answer;
        record.predicted_answerable = synthesis.answerable;
    }

    Gateway* gateway_;
    const Retriever* retriever_;
    const PromptCatalog* catalog_;
    PipelineOptions options_;
    Decomposer decomposer_;
    Rewriter rewriter_;
    KeywordExtractor extractor_;
};

} // namespace dec
