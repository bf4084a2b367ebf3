#pragma once

#include <algorithm>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dec/dataset.hpp"
#include "dec/gateway.hpp"
#include "dec/orchestrator.hpp"
#include "dec/parsing.hpp"
#include "dec/text.hpp"

namespace dec {

/// 1 iff some normalized gold answer occurs contiguously, on token
/// boundaries, inside the normalized prediction.
inline int cover_em(const std::string& prediction, const std::vector<std::string>& gold_answers) {
    const std::string pred = text::normalize_answer(prediction);
    const std::string padded_pred = " " + pred + " ";
    for (const auto& gold : gold_answers) {
        const std::string g = text::normalize_answer(gold);
        if (g.empty()) {
            if (pred.empty()) return 1;
            continue;
        }
        if (padded_pred.find(" " + g + " ") != std::string::npos) return 1;
    }
    return 0;
}

/// SQuAD-style token overlap F1, maximized over the gold answers. Overlap is
/// a multiset intersection; precision/recall are overlap over prediction and
/// gold token counts.
inline double token_f1(const std::string& prediction, const std::vector<std::string>& gold_answers) {
    const std::vector<std::string> pred_tokens = text::overlap_tokens(prediction);
    double best = 0.0;
    for (const auto& gold : gold_answers) {
        const std::vector<std::string> gold_tokens = text::overlap_tokens(gold);
        if (pred_tokens.empty() || gold_tokens.empty()) {
            best = std::max(best, pred_tokens.empty() && gold_tokens.empty() ? 1.0 : 0.0);
            continue;
        }
        std::unordered_map<std::string, long> counts;
        for (const auto& t : gold_tokens) ++counts[t];
        long overlap = 0;
        for (const auto& t : pred_tokens) {
            auto it = counts.find(t);
            if (it != counts.end() && it->second > 0) {
                --it->second;
                ++overlap;
            }
        }
        if (overlap == 0) continue;
        const double precision = static_cast<double>(overlap) / static_cast<double>(pred_tokens.size());
        const double recall = static_cast<double>(overlap) / static_cast<double>(gold_tokens.size());
        best = std::max(best, 2.0 * precision * recall / (precision + recall));
    }
    return best;
}

struct JudgeVerdict {
    int verdict = 0;     // 1 = semantically correct
    bool flagged = false; // verdict unusable after retry; scored 0
};

/// LLM-judged semantic accuracy. A judge that stays unparsable (or whose
/// backend fails) scores the item 0 with a flag; batch evaluation never
/// crashes on one bad verdict.
class Judge {
public:
    Judge(Gateway& gateway, const PromptCatalog& catalog, CallOptions opts)
        : gateway_(&gateway), tmpl_(&catalog.get(tmpl_names::judge)), opts_(std::move(opts)) {}

    static Bindings bindings(const std::string& question, const std::string& gold,
                             const std::string& prediction) {
        return Bindings{{"question", question}, {"answer", gold}, {"prediction", prediction}};
    }

    JudgeVerdict score(const std::string& question, const std::string& gold,
                       const std::string& prediction, TokenUsage* usage = nullptr) const {
        const ChatRequest request = make_request(*tmpl_, bindings(question, gold, prediction), opts_);
        for (int attempt = 0; attempt < 2; ++attempt) {
            try {
                const ChatResponse response = gateway_->complete(request, usage);
                return {parse_correctness(response.text) ? 1 : 0, false};
            } catch (const Error&) {
                // retry once, then fall through to the flagged zero
            }
        }
        return {0, true};
    }

private:
    Gateway* gateway_;
    const PromptTemplate* tmpl_;
    CallOptions opts_;
};

struct AnswerabilityReport {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double specificity = 0.0;
    double c_acc = 0.0; // correct answers among predicted-and-truly answerable
    double o_acc = 0.0; // (TN + correct TP) / n
    std::vector<std::string> flags;

    long n() const { return tp + fp + tn + fn; }
};

/// Confusion metrics with "answerable" as the positive class. `correctness`
/// aligns with the items; only true positives contribute correct answers.
/// FP items are truly unanswerable, so their correctness is excluded from
/// the conditional accuracy denominator.
inline AnswerabilityReport answerability_from_labels(const std::vector<bool>& predicted,
                                                     const std::vector<bool>& truly,
                                                     const std::vector<int>& correctness) {
    if (predicted.size() != truly.size() || predicted.size() != correctness.size())
        throw Error(ErrorKind::usage, "answerability inputs must have equal lengths");
    AnswerabilityReport r;
    long correct_tp = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] && truly[i]) {
            ++r.tp;
            if (correctness[i] == 1) ++correct_tp;
        } else if (predicted[i] && !truly[i]) {
            ++r.fp;
        } else if (!predicted[i] && !truly[i]) {
            ++r.tn;
        } else {
            ++r.fn;
        }
    }
    const double n = static_cast<double>(r.n());
    auto ratio = [&](long num, long den, const char* flag) {
        if (den == 0) {
            r.flags.push_back(flag);
            return 0.0;
        }
        return static_cast<double>(num) / static_cast<double>(den);
    };
    r.accuracy = n == 0 ? 0.0 : static_cast<double>(r.tp + r.tn) / n;
    r.precision = ratio(r.tp, r.tp + r.fp, "precision_undefined");
    r.recall = ratio(r.tp, r.tp + r.fn, "recall_undefined");
    r.f1 = (r.precision + r.recall) > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    r.specificity = ratio(r.tn, r.tn + r.fp, "specificity_undefined");
    r.c_acc = ratio(correct_tp, r.tp, "c_acc_undefined");
    r.o_acc = n == 0 ? 0.0 : static_cast<double>(r.tn + correct_tp) / n;
    return r;
}

inline AnswerabilityReport answerability_metrics(
    const std::vector<std::pair<const RunRecord*, const DatasetRecord*>>& items,
    const std::vector<int>& correctness) {
    std::vector<bool> predicted;
    std::vector<bool> truly;
    predicted.reserve(items.size());
    truly.reserve(items.size());
    for (const auto& [run, data] : items) {
        if (!data->answerable)
            throw Error(ErrorKind::data,
                        "dataset record '" + data->id + "' lacks the answerable flag");
        predicted.push_back(run->predicted_answerable);
        truly.push_back(*data->answerable);
    }
    return answerability_from_labels(predicted, truly, correctness);
}

struct AtcResult {
    std::optional<double> value;
    bool undefined = false; // zero correct answers
};

/// Average token consumption per correctly answered question: total tokens
/// over all records divided by the number of correct items.
inline AtcResult atc(const std::vector<RunRecord>& records, const std::vector<int>& correctness) {
    if (records.size() != correctness.size())
        throw Error(ErrorKind::usage, "atc: correctness must align with records");
    long total = 0;
    long correct = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        total += records[i].total_tokens.total();
        if (correctness[i] == 1) ++correct;
    }
    if (correct == 0) return {std::nullopt, true};
    return {static_cast<double>(total) / static_cast<double>(correct), false};
}

/// Bare formula form used for consistency fixtures.
inline double atc_value(long total_tokens, long correct_answers) {
    if (correct_answers <= 0) throw Error(ErrorKind::usage, "atc requires at least one correct answer");
    return static_cast<double>(total_tokens) / static_cast<double>(correct_answers);
}

struct FidelityResult {
    double rate = 1.0;
    bool vacuous = false; // chain had no core words
};

/// Share of the chain's core (non-stopword) words present in the original
/// question, where presence allows fuzzy matches with character similarity
/// above 0.8.
inline FidelityResult decomposition_fidelity(const ComplexQuestion& original,
                                             const ReasoningChain& chain) {
    constexpr double kThreshold = 0.8;
    const std::vector<std::string> original_words = text::tokenize(original.text);
    long core = 0;
    long matched = 0;
    for (const auto& sub : chain.subs) {
        for (const auto& word : text::tokenize(sub.text)) {
            if (text::is_stopword(word)) continue;
            ++core;
            for (const auto& ow : original_words) {
                if (text::char_similarity(word, ow) > kThreshold) {
                    ++matched;
                    break;
                }
            }
        }
    }
    if (core == 0) return {1.0, true};
    return {static_cast<double>(matched) / static_cast<double>(core), false};
}

/// Agreement rate between two verdict lists.
inline double judge_consistency(const std::vector<int>& verdicts_a,
                                const std::vector<int>& verdicts_b) {
    if (verdicts_a.size() != verdicts_b.size())
        throw Error(ErrorKind::usage, "judge_consistency: verdict lists differ in length");
    if (verdicts_a.empty()) return 1.0;
    long agree = 0;
    for (std::size_t i = 0; i < verdicts_a.size(); ++i) {
        if ((verdicts_a[i] != 0) == (verdicts_b[i] != 0)) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(verdicts_a.size());
}

struct PerQuestionRow {
    std::string id;
    int cover_em = 0;
    double token_f1 = 0.0;
    std::optional<int> acc_semantic;
    int sqa = 0;
    long tokens = 0;
    double decomposition_fidelity = 1.0;
    bool predicted_answerable = true;
    bool failed = false;
};

struct MetricReport {
    long n = 0;
    double cover_em = 0.0;
    double token_f1 = 0.0;
    std::optional<double> acc_semantic;
    double sqa_mean = 0.0;
    double decomposition_fidelity_mean = 1.0;
    std::optional<double> atc;
    std::optional<AnswerabilityReport> answerability;
    std::vector<PerQuestionRow> per_question;
    std::string config_digest;
    std::vector<std::string> flags;
};

struct GoldRecallReport {
    long questions_with_gold = 0;
    long total_gold_docs = 0;
    long matched_gold_docs = 0;
    long fully_recalled_questions = 0;
    double doc_match_ratio = 0.0;
    double fully_recalled_ratio = 0.0;
};

/// Share of gold documents that appeared among any step's candidates, plus
/// the share of questions whose gold set was fully recalled.
inline GoldRecallReport gold_recall(const std::vector<RunRecord>& runs,
                                    const std::vector<DatasetRecord>& dataset) {
    std::unordered_map<std::string, const DatasetRecord*> by_id;
    for (const auto& d : dataset) by_id[d.id] = &d;
    GoldRecallReport r;
    for (const auto& run : runs) {
        auto it = by_id.find(run.question.id);
        if (it == by_id.end() || it->second->gold_doc_ids.empty()) continue;
        ++r.questions_with_gold;
        std::unordered_set<std::string> seen;
        for (const auto& step : run.steps)
            seen.insert(step.candidate_doc_ids.begin(), step.candidate_doc_ids.end());
        long matched = 0;
        for (const auto& gold : it->second->gold_doc_ids) {
            ++r.total_gold_docs;
            if (seen.count(gold) > 0) ++matched;
        }
        r.matched_gold_docs += matched;
        if (matched == static_cast<long>(it->second->gold_doc_ids.size()))
            ++r.fully_recalled_questions;
    }
    if (r.total_gold_docs > 0)
        r.doc_match_ratio =
            static_cast<double>(r.matched_gold_docs) / static_cast<double>(r.total_gold_docs);
    if (r.questions_with_gold > 0)
        r.fully_recalled_ratio = static_cast<double>(r.fully_recalled_questions) /
                                 static_cast<double>(r.questions_with_gold);
    return r;
}

struct EvaluateOptions {
    const Judge* judge = nullptr;   // enables the semantic accuracy column and ATC
    bool with_answerability = false;
};

/// Aggregates the rule metrics (and, when a judge is supplied, semantic
/// accuracy, ATC and answerability) over run records matched to dataset
/// records by question id.
inline MetricReport evaluate(const std::vector<RunRecord>& runs,
                             const std::vector<DatasetRecord>& dataset,
                             const EvaluateOptions& opts = {}) {
    std::unordered_map<std::string, const DatasetRecord*> by_id;
    for (const auto& d : dataset) by_id[d.id] = &d;

    MetricReport report;
    report.n = static_cast<long>(runs.size());
    std::vector<int> correctness;
    std::vector<std::pair<const RunRecord*, const DatasetRecord*>> matched;
    double cover_sum = 0.0;
    double f1_sum = 0.0;
    double sqa_sum = 0.0;
    double acc_sum = 0.0;
    double fidelity_sum = 0.0;

    for (const auto& run : runs) {
        auto it = by_id.find(run.question.id);
        if (it == by_id.end())
            throw Error(ErrorKind::data,
                        "run record '" + run.question.id + "' has no dataset record");
        const DatasetRecord& data = *it->second;
        if (!run.config_digest.empty() && report.config_digest.empty())
            report.config_digest = run.config_digest;

        PerQuestionRow row;
        row.id = run.question.id;
        row.sqa = run.sqa_count;
        row.tokens = run.total_tokens.total();
        row.predicted_answerable = run.predicted_answerable;
        row.failed = run.failed;
        if (!data.answers.empty()) {
            row.cover_em = cover_em(run.final_answer, data.answers);
            row.token_f1 = token_f1(run.final_answer, data.answers);
        }
        row.decomposition_fidelity = decomposition_fidelity(run.question, run.chain).rate;
        if (opts.judge != nullptr) {
            const std::string gold = data.answers.empty() ? "" : data.answers.front();
            const JudgeVerdict v = opts.judge->score(data.question, gold, run.final_answer);
            row.acc_semantic = v.verdict;
            if (v.flagged) report.flags.push_back("judge_unparsable:" + run.question.id);
            acc_sum += v.verdict;
            correctness.push_back(v.verdict);
        }
        cover_sum += row.cover_em;
        f1_sum += row.token_f1;
        sqa_sum += row.sqa;
        fidelity_sum += row.decomposition_fidelity;
        matched.emplace_back(&run, &data);
        report.per_question.push_back(std::move(row));
    }

    if (report.n > 0) {
        const double n = static_cast<double>(report.n);
        report.cover_em = cover_sum / n;
        report.token_f1 = f1_sum / n;
        report.sqa_mean = sqa_sum / n;
        report.decomposition_fidelity_mean = fidelity_sum / n;
        if (opts.judge != nullptr) {
            report.acc_semantic = acc_sum / n;
            const AtcResult a = atc(runs, correctness);
            if (a.undefined) report.flags.push_back("atc_undefined");
            report.atc = a.value;
        }
    }

    if (opts.with_answerability) {
        std::vector<int> answer_correct;
        if (opts.judge != nullptr) {
            answer_correct = correctness;
        } else {
            // Without a judge, coverage stands in for answer correctness.
            report.flags.push_back("answerability_correctness_from_cover_em");
            for (const auto& row : report.per_question) answer_correct.push_back(row.cover_em);
        }
        report.answerability = answerability_metrics(matched, answer_correct);
    }
    return report;
}

inline ojson to_json(const AnswerabilityReport& r) {
    return ojson{{"tp", r.tp},
                 {"fp", r.fp},
                 {"tn", r.tn},
                 {"fn", r.fn},
                 {"accuracy", r.accuracy},
                 {"precision", r.precision},
                 {"recall", r.recall},
                 {"f1", r.f1},
                 {"specificity", r.specificity},
                 {"c_acc", r.c_acc},
                 {"o_acc", r.o_acc},
                 {"flags", r.flags}};
}

inline ojson to_json(const MetricReport& r) {
    ojson j{{"n", r.n},
            {"cover_em", r.cover_em},
            {"token_f1", r.token_f1},
            {"sqa_mean", r.sqa_mean},
            {"decomposition_fidelity_mean", r.decomposition_fidelity_mean},
            {"config_digest", r.config_digest},
            {"flags", r.flags}};
    j["acc_semantic"] = r.acc_semantic ? ojson(*r.acc_semantic) : ojson(nullptr);
    j["atc"] = r.atc ? ojson(*r.atc) : ojson(nullptr);
    j["answerability"] = r.answerability ? to_json(*r.answerability) : ojson(nullptr);
    ojson rows = ojson::array();
    for (const auto& q : r.per_question) {
        ojson row{{"id", q.id},
                  {"cover_em", q.cover_em},
                  {"token_f1", q.token_f1},
                  {"sqa", q.sqa},
                  {"tokens", q.tokens},
                  {"decomposition_fidelity", q.decomposition_fidelity},
                  {"predicted_answerable", q.predicted_answerable},
                  {"failed", q.failed}};
        row["acc_semantic"] = q.acc_semantic ? ojson(*q.acc_semantic) : ojson(nullptr);
        rows.push_back(std::move(row));
    }
    j["per_question"] = std::move(rows);
    return j;
}

inline ojson to_json(const GoldRecallReport& r) {
    return ojson{{"questions_with_gold", r.questions_with_gold},
                 {"total_gold_docs", r.total_gold_docs},
                 {"matched_gold_docs", r.matched_gold_docs},
                 {"fully_recalled_questions", r.fully_recalled_questions},
                 {"doc_match_ratio", r.doc_match_ratio},
                 {"fully_recalled_ratio", r.fully_recalled_ratio}};
}

inline void print_table(std::ostream& os, const MetricReport& r) {
    auto pct = [](double v) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(2) << v * 100.0;
        return s.str();
    };
    os << "questions        " << r.n << "\n";
    os << "cover_em         " << pct(r.cover_em) << "\n";
    os << "token_f1         " << pct(r.token_f1) << "\n";
    if (r.acc_semantic) os << "acc_semantic     " << pct(*r.acc_semantic) << "\n";
    os << "sqa_mean         " << std::fixed << std::setprecision(2) << r.sqa_mean << "\n";
    os << "decomp_fidelity  " << pct(r.decomposition_fidelity_mean) << "\n";
    if (r.atc) os << "atc              " << std::fixed << std::setprecision(2) << *r.atc << "\n";
    if (r.answerability) {
        const auto& a = *r.answerability;
        os << "answerability    acc " << pct(a.accuracy) << "  precision " << pct(a.precision)
           << "  recall " << pct(a.recall) << "  f1 " << pct(a.f1) << "  specificity "
           << pct(a.specificity) << "\n";
        os << "                 c_acc " << pct(a.c_acc) << "  o_acc " << pct(a.o_acc) << "  (tp "
           << a.tp << " fp " << a.fp << " tn " << a.tn << " fn " << a.fn << ")\n";
    }
    for (const auto& f : r.flags) os << "flag             " << f << "\n";
}

} // namespace dec
