#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dec/dataset.hpp"
#include "dec/document.hpp"
#include "dec/gateway.hpp"
#include "dec/orchestrator.hpp"
#include "dec/retrieval.hpp"
#include "dec/rewriter.hpp"

namespace dec::fixtures {

struct WorldOptions {
    std::uint64_t seed = 7;
    int n_questions = 20;
    int hops = 2; // 2 or 3
    int top_n = 10;
    int backup_k = 2;
    /// Question indices whose final-hop gold document is removed from the
    /// corpus; used to exercise the gold-recall bookkeeping.
    std::vector<int> drop_gold_for;
};

/// Everything the generator knows about one question; doubles as the test
/// oracle for pipeline runs.
struct ExpectedRun {
    std::string question_id;
    std::string final_answer;
    std::vector<std::string> chain_texts;
    std::vector<std::string> rewritten;
    std::vector<std::vector<std::string>> keywords;
    std::vector<std::string> sub_answers;
    std::vector<std::string> gold_doc_ids;
};

/// A self-consistent miniature world: corpus, questions with gold evidence,
/// and a script covering every model call the pipeline will make.
struct SyntheticWorld {
    std::vector<Document> corpus;
    std::vector<DatasetRecord> dataset;
    std::vector<ScriptEntry> script;
    std::vector<ExpectedRun> expected;
};

class WorldBuilder {
public:
    explicit WorldBuilder(const WorldOptions& opts) : opts_(opts), rng_(opts.seed) {
        if (opts_.hops != 2 && opts_.hops != 3)
            throw Error(ErrorKind::usage, "hops must be 2 or 3");
        if (opts_.n_questions <= 0)
            throw Error(ErrorKind::usage, "n_questions must be positive");
    }

    SyntheticWorld build() {
        SyntheticWorld world;
        std::vector<Entity> entities;
        entities.reserve(static_cast<std::size_t>(opts_.n_questions));
        for (int k = 0; k < opts_.n_questions; ++k) entities.push_back(make_entity(k));

        for (int k = 0; k < opts_.n_questions; ++k)
            append_documents(world.corpus, entities[static_cast<std::size_t>(k)], k);

        // The recall simulation below must see exactly the corpus the
        // pipeline will search, so gold drops happen before indexing.
        for (int k : opts_.drop_gold_for) {
            const std::string victim = final_gold_id(k);
            std::erase_if(world.corpus, [&](const Document& d) { return d.id == victim; });
        }

        const CorpusIndex index = CorpusIndex::build(world.corpus);
        const LexicalRetriever retriever(index);
        for (int k = 0; k < opts_.n_questions; ++k) {
            const Entity& e = entities[static_cast<std::size_t>(k)];
            world.dataset.push_back(dataset_record(e, k));
            world.expected.push_back(script_question(world.script, retriever, e, k));
        }
        return world;
    }

private:
    struct Entity {
        std::string org;
        std::string person;
        std::string year;
        std::string city;
        std::string country;
        std::string other_last;   // distractor person surname
        std::string other_year;
        std::string other_city;
    };

    std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }

    template <typename T>
    std::vector<T> shuffled(std::vector<T> v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[pick(i)]);
        return v;
    }

    Entity make_entity(int k) {
        static const std::vector<std::string> kFirst = {
            "Alma", "Boris", "Carla", "Dmitri", "Eva", "Farid", "Greta", "Hiro", "Ingrid",
            "Jonas", "Kira", "Liam", "Mara", "Nadia", "Omar", "Petra", "Quinn", "Rosa",
            "Stefan", "Tilda"};
        static const std::vector<std::string> kLast = {
            "Abernathy", "Bergstrom", "Caldera", "Dubois", "Eklund", "Fontaine", "Grimaldi",
            "Hartwell", "Ivanov", "Jakobsen", "Keller", "Lindqvist", "Moravec", "Novak",
            "Ostrowski", "Paulsen", "Quintero", "Rasmussen", "Sorensen", "Tanaka"};
        static const std::vector<std::string> kOrgA = {
            "Aurora", "Basalt", "Cobalt", "Driftwood", "Emberline", "Fjordlight", "Granite",
            "Harborview", "Irisfield", "Juniper", "Kestrel", "Lumenware", "Meridian", "Nimbus",
            "Orchidbay", "Pinnacle", "Quartzline", "Ridgeline", "Saffron", "Thistledown"};
        static const std::vector<std::string> kOrgB = {
            "Labs", "Systems", "Works", "Dynamics", "Collective", "Industries", "Forge",
            "Analytics", "Robotics", "Studio"};
        static const std::vector<std::string> kCity = {
            "Arvendale", "Brightmoor", "Cinderfall", "Dunlowe", "Eastmarch", "Fennwick",
            "Glimmerton", "Hollowbrook", "Ironvale", "Jasperfield", "Kestwick", "Larkspur",
            "Misthaven", "Northgate", "Oakhurst", "Pinewall", "Quillford", "Ravenholm",
            "Stonebridge", "Thornfield"};
        static const std::vector<std::string> kCountry = {
            "Norland", "Vesteria", "Ardenia", "Bellmark", "Corvania", "Drystan", "Elmor",
            "Farhaven", "Galdria", "Hestland"};

        if (first_perm_.empty()) {
            first_perm_ = shuffled(kFirst);
            last_perm_ = shuffled(kLast);
            org_a_perm_ = shuffled(kOrgA);
            city_perm_ = shuffled(kCity);
        }
        auto cycle = [&](const std::vector<std::string>& pool, int i) {
            const int round = i / static_cast<int>(pool.size());
            std::string v = pool[static_cast<std::size_t>(i) % pool.size()];
            if (round > 0) v += " " + std::to_string(round + 1);
            return v;
        };

        Entity e;
        e.org = cycle(org_a_perm_, k) + " " + kOrgB[pick(kOrgB.size())];
        const std::string first = cycle(first_perm_, k);
        const std::string last = cycle(last_perm_, k);
        e.person = first + " " + last;
        e.year = std::to_string(1900 + static_cast<int>(pick(100)));
        e.city = cycle(city_perm_, k);
        e.country = kCountry[pick(kCountry.size())];
        e.other_last = cycle(last_perm_, k + 1);
        e.other_year = std::to_string(1900 + static_cast<int>(pick(100)));
        e.other_city = cycle(city_perm_, k + 1);
        if (e.other_last == last) e.other_last += " Jr";
        return e;
    }

    static std::string qid(int k) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "q%03d", k);
        return buf;
    }

    static std::string did(int k, const char* tag) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "d%03d_%s", k, tag);
        return buf;
    }

    std::string final_gold_id(int k) const {
        return did(k, opts_.hops == 2 ? "person" : "city");
    }

    void append_documents(std::vector<Document>& corpus, const Entity& e, int k) const {
        corpus.push_back(make_document(did(k, "org"), e.org,
                                       e.org + " was founded by " + e.person + "."));
        if (opts_.hops == 2) {
            corpus.push_back(make_document(did(k, "person"), e.person,
                                           e.person + " was born in " + e.year + "."));
        } else {
            corpus.push_back(make_document(did(k, "person"), e.person,
                                           e.person + " was born in " + e.city + "."));
            corpus.push_back(make_document(did(k, "city"), e.city,
                                           e.city + " is a city in " + e.country + "."));
        }
        // Distractors share surface terms with the gold evidence: the first
        // even keyword-matches, the second competes on relevance only.
        corpus.push_back(make_document(did(k, "x1"), e.org + " offices",
                                       e.org + " opened new offices in " + e.other_city + "."));
        const std::string first = e.person.substr(0, e.person.find(' '));
        corpus.push_back(make_document(did(k, "x2"), first + " " + e.other_last,
                                       first + " " + e.other_last + " was born in " +
                                           e.other_year + "."));
    }

    DatasetRecord dataset_record(const Entity& e, int k) const {
        DatasetRecord r;
        r.id = qid(k);
        r.answerable = true;
        if (opts_.hops == 2) {
            r.question = "When was the founder of " + e.org + " born?";
            r.answers = {e.year};
            r.gold_doc_ids = {did(k, "org"), did(k, "person")};
        } else {
            r.question = "In which country is the city where the founder of " + e.org +
                         " was born?";
            r.answers = {e.country};
            r.gold_doc_ids = {did(k, "org"), did(k, "person"), did(k, "city")};
        }
        return r;
    }

    struct Step {
        std::string sub;
        std::string rewritten;
        std::string inference;
        std::string keyword;
        std::string answer;
    };

    std::vector<Step> plan_steps(const Entity& e) const {
        std::vector<Step> steps;
        const std::string sub1 = "Who was the founder of " + e.org + "?";
        steps.push_back({sub1, sub1, "None", e.org, e.person});
        if (opts_.hops == 2) {
            steps.push_back({"When was this founder born?",
                             "When was " + e.person + " born?",
                             "The sub-question depends on the answer to sub_question_1 because "
                             "\"this founder\" refers to " + e.person + ".",
                             e.person, e.year});
        } else {
            steps.push_back({"In which city was this founder born?",
                             "In which city was " + e.person + " born?",
                             "The sub-question depends on the answer to sub_question_1 because "
                             "\"this founder\" refers to " + e.person + ".",
                             e.person, e.city});
            steps.push_back({"In which country is that city?",
                             "In which country is " + e.city + "?",
                             "The sub-question depends on the answer to sub_question_2 because "
                             "\"that city\" refers to " + e.city + ".",
                             e.city, e.country});
        }
        return steps;
    }

    /// Simulates the exact orchestrator flow for one question and emits a
    /// script entry at every point where the pipeline will call the model.
    /// Bindings, digests, recall and context assembly all go through the
    /// same code paths the pipeline uses, so the script cannot drift.
    ExpectedRun script_question(std::vector<ScriptEntry>& script, const Retriever& retriever,
                                const Entity& e, int k) const {
        const DatasetRecord data = dataset_record(e, k);
        const ComplexQuestion question{data.id, data.question};
        const std::vector<Step> steps = plan_steps(e);

        ExpectedRun expected;
        expected.question_id = data.id;
        expected.gold_doc_ids = data.gold_doc_ids;

        std::string chain_text;
        for (std::size_t i = 0; i < steps.size(); ++i) {
            chain_text += std::to_string(i + 1) + ". " + steps[i].sub + "\n";
            expected.chain_texts.push_back(steps[i].sub);
        }
        add_entry(script, tmpl_names::decompose, decompose_bindings(question), chain_text);

        QaHistory history;
        for (const auto& step : steps) {
            add_entry(script, tmpl_names::rewrite,
                      rewrite_bindings(question, step.sub, history),
                      "Inference_process: " + step.inference +
                          "\nModified_question: " + step.rewritten);
            add_entry(script, tmpl_names::keywords, keyword_bindings(step.rewritten),
                      step.keyword);

            KeywordSet keywords;
            keywords.keywords = {step.keyword};
            keywords.source_query = step.rewritten;
            const EnhancedCandidateSet candidates =
                hybrid_recall(retriever, step.rewritten, keywords, opts_.top_n, opts_.backup_k);
            add_entry(script, tmpl_names::sub_answer,
                      sub_answer_bindings(step.rewritten, assemble_context(candidates)),
                      step.answer);

            history.append(step.rewritten, step.answer);
            expected.rewritten.push_back(step.rewritten);
            expected.keywords.push_back({step.keyword});
            expected.sub_answers.push_back(step.answer);
        }

        const std::string final_answer = data.answers.front();
        add_entry(script, tmpl_names::synthesize, synthesize_bindings(question, history),
                  "Inference_process: Combining the answers to the sub-questions resolves the "
                  "original question.\nAnswer: " + final_answer);
        expected.final_answer = final_answer;
        return expected;
    }

    static void add_entry(std::vector<ScriptEntry>& script, const char* template_name,
                          const Bindings& bindings, const std::string& response) {
        ScriptEntry entry;
        entry.template_name = template_name;
        entry.digest = digest_bindings(bindings);
        entry.response_text = response;
        script.push_back(std::move(entry));
    }

    WorldOptions opts_;
    std::mt19937_64 rng_;
    std::vector<std::string> first_perm_;
    std::vector<std::string> last_perm_;
    std::vector<std::string> org_a_perm_;
    std::vector<std::string> city_perm_;
};

inline SyntheticWorld generate_world(const WorldOptions& opts) {
    return WorldBuilder(opts).build();
}

struct WorldPaths {
    std::filesystem::path corpus;
    std::filesystem::path dataset;
    std::filesystem::path script;
    std::filesystem::path expected;
};

inline WorldPaths world_paths(const std::filesystem::path& dir) {
    return {dir / "corpus.jsonl", dir / "dataset.jsonl", dir / "script.jsonl",
            dir / "expected.jsonl"};
}

inline WorldPaths write_world(const SyntheticWorld& world, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const WorldPaths paths = world_paths(dir);
    save_corpus_jsonl(paths.corpus, world.corpus);
    save_dataset_jsonl(paths.dataset, world.dataset);
    save_script_jsonl(paths.script, world.script);
    std::vector<ojson> expected;
    expected.reserve(world.expected.size());
    for (const auto& e : world.expected)
        expected.push_back(ojson{{"id", e.question_id}, {"final_answer", e.final_answer}});
    write_jsonl(paths.expected, expected);
    return paths;
}

} // namespace dec::fixtures
