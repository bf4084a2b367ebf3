#include <catch2/catch_amalgamated.hpp>

#include <memory>
#include <random>

#include "dec/evaluator.hpp"
#include "dec/fixtures.hpp"

using namespace dec;

TEST_CASE("cover_em credits containment of a normalized gold answer") {
    CHECK(cover_em("the answer is Lazio", {"Lazio"}) == 1);
    CHECK(cover_em("the answer is Lazio", {"the Lazio region"}) == 0);
    CHECK(cover_em("X", {"X"}) == 1);
    CHECK(cover_em("completely different", {"Lazio"}) == 0);
    CHECK(cover_em("pred", {"miss", "pred"}) == 1);
}

TEST_CASE("cover_em identity holds for any non-empty answer") {
    for (const std::string a : {"Lazio", "the answer", "A.B!", "...", "December 6, 1952"})
        CHECK(cover_em(a, {a}) == 1);
}

TEST_CASE("cover_em respects token boundaries") {
    CHECK(cover_em("scarlet letters", {"car"}) == 0);
    CHECK(cover_em("a car parked", {"car"}) == 1);
}

TEST_CASE("token_f1 matches the worked example exactly") {
    CHECK(token_f1("the lazio region", {"lazio"}) == Catch::Approx(0.5).margin(1e-9));
    CHECK(token_f1("exact match", {"exact match"}) == 1.0);
    CHECK(token_f1("alpha beta", {"gamma delta"}) == 0.0);
}

TEST_CASE("token_f1 edge cases for empty normalizations") {
    CHECK(token_f1("...", {"..."}) == 1.0);   // both empty after normalization
    CHECK(token_f1("...", {"word"}) == 0.0);
    CHECK(token_f1("word", {"..."}) == 0.0);
    CHECK(token_f1("pred", {"bad", "pred"}) == 1.0); // max over gold answers
}

TEST_CASE("token_f1 is permutation-invariant and bounded") {
    std::mt19937_64 rng(5);
    const std::vector<std::string> vocab = {"alpha", "beta", "gamma", "delta", "epsilon"};
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::string> pred, gold;
        const int np = 1 + static_cast<int>(rng() % 6);
        const int ng = 1 + static_cast<int>(rng() % 6);
        for (int i = 0; i < np; ++i) pred.push_back(vocab[rng() % vocab.size()]);
        for (int i = 0; i < ng; ++i) gold.push_back(vocab[rng() % vocab.size()]);
        const double f1 = token_f1(text::join(pred), {text::join(gold)});
        CHECK(f1 >= 0.0);
        CHECK(f1 <= 1.0);
        for (std::size_t i = pred.size(); i > 1; --i) std::swap(pred[i - 1], pred[rng() % i]);
        for (std::size_t i = gold.size(); i > 1; --i) std::swap(gold[i - 1], gold[rng() % i]);
        CHECK(token_f1(text::join(pred), {text::join(gold)}) == Catch::Approx(f1).margin(1e-12));
    }
}

TEST_CASE("cover implies positive overlap F1") {
    std::mt19937_64 rng(17);
    const std::vector<std::string> vocab = {"alpha", "beta", "gamma", "delta", "the", "an"};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> pred, gold;
        for (int i = 0; i < 1 + static_cast<int>(rng() % 5); ++i)
            pred.push_back(vocab[rng() % vocab.size()]);
        for (int i = 0; i < 1 + static_cast<int>(rng() % 3); ++i)
            gold.push_back(vocab[rng() % vocab.size()]);
        const std::string p = text::join(pred);
        const std::string g = text::join(gold);
        if (text::normalize_answer(g).empty()) continue;
        if (cover_em(p, {g}) == 1) CHECK(token_f1(p, {g}) > 0.0);
    }
}

TEST_CASE("scripted judge verdicts") {
    PromptCatalog catalog = PromptCatalog::builtin();
    auto entry = [&](const std::string& question, const std::string& gold,
                     const std::string& pred, const std::string& response) {
        return ScriptEntry{tmpl_names::judge,
                           digest_bindings(Judge::bindings(question, gold, pred)), response,
                           std::nullopt, std::nullopt};
    };
    auto backend = std::make_shared<ScriptedBackend>(std::vector<ScriptEntry>{
        entry("The city where Alex Shevelev died is the capital of what region?",
              "the Lazio region", "the answer is Lazio", "-Correctness: yes"),
        entry("Which drink is larger, the Apple-Kneel or the Flaming volcano?",
              "The flaming volcano", "The Apple-Kneel", "-Correctness: no"),
        entry("q3", "gold", "pred", "maybe"),
    });
    Gateway gateway(backend);
    const Judge judge(gateway, catalog, CallOptions{});

    const JudgeVerdict yes =
        judge.score("The city where Alex Shevelev died is the capital of what region?",
                    "the Lazio region", "the answer is Lazio");
    CHECK(yes.verdict == 1);
    CHECK_FALSE(yes.flagged);

    const JudgeVerdict no =
        judge.score("Which drink is larger, the Apple-Kneel or the Flaming volcano?",
                    "The flaming volcano", "The Apple-Kneel");
    CHECK(no.verdict == 0);
    CHECK_FALSE(no.flagged);

    const JudgeVerdict bad = judge.score("q3", "gold", "pred");
    CHECK(bad.verdict == 0);
    CHECK(bad.flagged);
    // "maybe" twice: one original call plus one retry.
    CHECK(backend->served().size() == 4);
}

TEST_CASE("judge survives a missing script entry by flagging") {
    PromptCatalog catalog = PromptCatalog::builtin();
    auto backend = std::make_shared<ScriptedBackend>(std::vector<ScriptEntry>{});
    Gateway gateway(backend);
    const Judge judge(gateway, catalog, CallOptions{});
    const JudgeVerdict v = judge.score("q", "gold", "pred");
    CHECK(v.verdict == 0);
    CHECK(v.flagged);
}

TEST_CASE("answerability metrics on the hand-built confusion fixture") {
    // 10 items: TP=4 (3 answered correctly), FP=2, TN=3, FN=1.
    const std::vector<bool> predicted = {true, true, true, true, true, true, false, false, false, false};
    const std::vector<bool> truly = {true, true, true, true, false, false, false, false, false, true};
    const std::vector<int> correctness = {1, 1, 1, 0, 0, 0, 0, 0, 0, 0};

    const AnswerabilityReport r = answerability_from_labels(predicted, truly, correctness);
    CHECK(r.tp == 4);
    CHECK(r.fp == 2);
    CHECK(r.tn == 3);
    CHECK(r.fn == 1);
    CHECK(r.n() == 10);
    CHECK(r.accuracy == Catch::Approx(0.7));
    CHECK(r.precision == Catch::Approx(4.0 / 6.0));
    CHECK(r.recall == Catch::Approx(4.0 / 5.0));
    CHECK(r.f1 == Catch::Approx(8.0 / 11.0));
    CHECK(r.specificity == Catch::Approx(3.0 / 5.0));
    CHECK(r.c_acc == Catch::Approx(3.0 / 4.0));
    CHECK(r.o_acc == Catch::Approx(0.6));
}

TEST_CASE("perfect answerability yields all ones") {
    const std::vector<bool> predicted = {true, true, true};
    const std::vector<bool> truly = {true, true, true};
    const std::vector<int> correctness = {1, 1, 1};
    const AnswerabilityReport r = answerability_from_labels(predicted, truly, correctness);
    CHECK(r.accuracy == 1.0);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.f1 == 1.0);
    CHECK(r.c_acc == 1.0);
    CHECK(r.o_acc == 1.0);
}

TEST_CASE("all-abstained degenerate class flags the undefined rates") {
    const std::vector<bool> predicted = {false, false};
    const std::vector<bool> truly = {false, false};
    const std::vector<int> correctness = {0, 0};
    const AnswerabilityReport r = answerability_from_labels(predicted, truly, correctness);
    CHECK(r.tn == 2);
    CHECK(r.o_acc == 1.0);
    CHECK(r.recall == 0.0);
    bool recall_flagged = false;
    for (const auto& f : r.flags) recall_flagged = recall_flagged || f == "recall_undefined";
    CHECK(recall_flagged);
}

TEST_CASE("answerability over records requires the dataset flag") {
    RunRecord run;
    run.question = {"q1", "text"};
    run.predicted_answerable = true;
    DatasetRecord data;
    data.id = "q1";
    data.question = "text";
    CHECK_THROWS_AS(
        answerability_metrics({{&run, &data}}, {1}), Error);
    data.answerable = true;
    const AnswerabilityReport r = answerability_metrics({{&run, &data}}, {1});
    CHECK(r.tp == 1);
}

TEST_CASE("atc divides total tokens by correct answers") {
    RunRecord a;
    a.total_tokens = {600, 150};
    RunRecord b;
    b.total_tokens = {200, 50};
    const AtcResult r = atc({a, b}, {1, 0});
    REQUIRE(r.value);
    CHECK(*r.value == 1000.0);

    const AtcResult none = atc({a, b}, {0, 0});
    CHECK_FALSE(none.value);
    CHECK(none.undefined);
}

TEST_CASE("atc formula reproduces self-consistent published rows") {
    CHECK(atc_value(4882838, 198) == Catch::Approx(24660.80).margin(0.01));
    CHECK(atc_value(2988310, 219) == Catch::Approx(13645.25).margin(0.01));
    CHECK(atc_value(5117786, 58) == Catch::Approx(88237.69).margin(0.01));
    CHECK(atc_value(2760014, 218) == Catch::Approx(12660.61).margin(0.01));
    CHECK(atc_value(4530000, 168) == Catch::Approx(26964.29).margin(0.01));
}

TEST_CASE("decomposition fidelity") {
    const ComplexQuestion q{"q", "When was the founder of craigslist born?"};

    ReasoningChain verbatim;
    verbatim.question_id = "q";
    verbatim.subs = {{1, "Who was the founder of craigslist?"}, {2, "When was the founder born?"}};
    CHECK(decomposition_fidelity(q, verbatim).rate == 1.0);

    // "founded" matches "founder" through the fuzzy threshold (6/7 > 0.8).
    ReasoningChain fuzzy;
    fuzzy.question_id = "q";
    fuzzy.subs = {{1, "Who founded craigslist?"}};
    CHECK(decomposition_fidelity(q, fuzzy).rate == 1.0);

    ReasoningChain injected;
    injected.question_id = "q";
    injected.subs = {{1, "Who founded craigslist in Mumbai?"}};
    const FidelityResult r = decomposition_fidelity(q, injected);
    CHECK(r.rate < 1.0);
    CHECK(r.rate == Catch::Approx(2.0 / 3.0));

    ReasoningChain stopwords_only;
    stopwords_only.question_id = "q";
    stopwords_only.subs = {{1, "who was the of?"}};
    const FidelityResult v = decomposition_fidelity(q, stopwords_only);
    CHECK(v.rate == 1.0);
    CHECK(v.vacuous);
}

TEST_CASE("judge consistency is the agreement fraction") {
    CHECK(judge_consistency({1, 0, 1}, {1, 0, 1}) == 1.0);
    CHECK(judge_consistency({1, 0}, {0, 1}) == 0.0);
    CHECK(judge_consistency({1, 1, 1, 1, 1, 1, 1, 1, 1, 0}, {1, 1, 1, 1, 1, 1, 1, 1, 1, 1}) ==
          Catch::Approx(0.9));
    CHECK_THROWS_AS(judge_consistency({1}, {1, 0}), Error);
}

TEST_CASE("evaluate aggregates per-question rows consistently") {
    fixtures::WorldOptions opts;
    opts.seed = 3;
    opts.n_questions = 6;
    auto world = fixtures::generate_world(opts);
    const CorpusIndex index = CorpusIndex::build(world.corpus);
    const LexicalRetriever retriever(index);
    auto backend = std::make_shared<ScriptedBackend>(world.script);
    Gateway gateway(backend);
    const PromptCatalog catalog = PromptCatalog::builtin();
    Orchestrator orch(gateway, retriever, catalog, {});
    const auto runs = orch.run_batch(world.dataset, 2);

    const MetricReport report = evaluate(runs, world.dataset);
    CHECK(report.n == 6);
    CHECK(report.cover_em == 1.0);
    CHECK(report.token_f1 == 1.0);
    CHECK(report.sqa_mean == 2.0);
    CHECK(report.decomposition_fidelity_mean == 1.0); // planted chains reuse question words
    CHECK_FALSE(report.acc_semantic.has_value());
    CHECK_FALSE(report.atc.has_value());
    REQUIRE(report.per_question.size() == 6);
    double cover_sum = 0.0;
    for (const auto& row : report.per_question) cover_sum += row.cover_em;
    CHECK(cover_sum / 6.0 == report.cover_em);

    // Unknown run id is a data error.
    std::vector<RunRecord> bad = runs;
    bad[0].question.id = "nope";
    CHECK_THROWS_AS(evaluate(bad, world.dataset), Error);
}

TEST_CASE("gold recall bookkeeping counts matched and fully recalled questions") {
    RunRecord run;
    run.question = {"q1", "t"};
    StepTrace s1;
    s1.candidate_doc_ids = {"g1", "x1"};
    StepTrace s2;
    s2.candidate_doc_ids = {"x2"};
    run.steps = {s1, s2};

    DatasetRecord data;
    data.id = "q1";
    data.question = "t";
    data.gold_doc_ids = {"g1", "g2"};

    const GoldRecallReport r = gold_recall({run}, {data});
    CHECK(r.questions_with_gold == 1);
    CHECK(r.total_gold_docs == 2);
    CHECK(r.matched_gold_docs == 1);
    CHECK(r.fully_recalled_questions == 0);
    CHECK(r.doc_match_ratio == 0.5);

    // Add the missing gold doc to a step: question becomes fully recalled.
    run.steps[1].candidate_doc_ids.push_back("g2");
    const GoldRecallReport full = gold_recall({run}, {data});
    CHECK(full.fully_recalled_questions == 1);
    CHECK(full.fully_recalled_ratio == 1.0);
}
