#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "dec/retrieval.hpp"

using namespace dec;

namespace {

std::vector<Document> small_corpus() {
    return {
        make_document("d1", "Craigslist", "Craig Newmark founded craigslist in San Francisco."),
        make_document("d2", "Paris", "Paris is the capital of France."),
        make_document("d3", "Craig Newmark", "Craig Newmark was born in Morristown."),
    };
}

} // namespace

TEST_CASE("postings cover every document containing a term") {
    const CorpusIndex index = CorpusIndex::build(
        {make_document("a", "", "paris beta"), make_document("b", "", "gamma paris")});
    const auto hits = index.retrieve("paris", 10);
    REQUIRE(hits.size() == 2);
    std::set<std::string> ids{hits[0].doc->id, hits[1].doc->id};
    CHECK(ids == std::set<std::string>{"a", "b"});
}

TEST_CASE("empty corpus retrieves nothing") {
    const CorpusIndex index = CorpusIndex::build({});
    CHECK(index.retrieve("anything", 10).empty());
    CHECK(index.size() == 0);
}

TEST_CASE("duplicate document ids fail the build naming the id") {
    try {
        CorpusIndex::build({make_document("dup", "", "x"), make_document("dup", "", "y")});
        FAIL("expected duplicate id error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::data);
        CHECK(std::string(e.what()).find("dup") != std::string::npos);
    }
}

TEST_CASE("query matching both terms outranks single-term matches") {
    const CorpusIndex index = CorpusIndex::build(small_corpus());
    const auto hits = index.retrieve("craig newmark", 10);
    REQUIRE(!hits.empty());
    // d1 and d3 contain both terms; d2 neither.
    for (const auto& h : hits) CHECK(h.doc->id != "d2");
}

TEST_CASE("top_n larger than the corpus returns everything") {
    const CorpusIndex index = CorpusIndex::build(small_corpus());
    CHECK(index.retrieve("craig", 100).size() == 2);
}

TEST_CASE("query normalizing to empty returns the empty list") {
    const CorpusIndex index = CorpusIndex::build(small_corpus());
    CHECK(index.retrieve("?!...", 10).empty());
    CHECK(index.retrieve("", 10).empty());
}

TEST_CASE("retrieval is deterministic and matches an exhaustive scorer") {
    std::mt19937_64 rng(7);
    const std::vector<std::string> vocab = {"alpha", "beta", "gamma", "delta", "epsilon",
                                            "zeta",  "eta",  "theta"};
    auto random_text = [&](int words) {
        std::string t;
        for (int i = 0; i < words; ++i) {
            if (i > 0) t += " ";
            t += vocab[rng() % vocab.size()];
        }
        return t;
    };

    for (int trial = 0; trial < 30; ++trial) {
        std::vector<Document> docs;
        const int n = 2 + static_cast<int>(rng() % 20);
        for (int d = 0; d < n; ++d)
            docs.push_back(make_document("d" + std::to_string(d), "",
                                         random_text(2 + static_cast<int>(rng() % 10))));
        const CorpusIndex index = CorpusIndex::build(docs);
        const std::string query = random_text(1 + static_cast<int>(rng() % 3));

        const auto ranked = index.retrieve(query, 5);
        const auto again = index.retrieve(query, 5);
        REQUIRE(ranked.size() == again.size());
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            CHECK(ranked[i].doc->id == again[i].doc->id);
            CHECK(ranked[i].score == again[i].score);
        }

        // Oracle: score every document directly with the same formula.
        const auto tokens = text::tokenize(query);
        std::vector<std::pair<std::string, double>> oracle;
        for (const auto& d : docs) {
            double score = 0.0;
            for (const auto& t : tokens) {
                long freq = 0;
                for (const auto& term : d.terms) freq += term == t ? 1 : 0;
                if (freq == 0) continue;
                long df = 0;
                for (const auto& other : docs) {
                    bool has = false;
                    for (const auto& term : other.terms) has = has || term == t;
                    df += has ? 1 : 0;
                }
                const double idf = std::log(
                    1.0 + (static_cast<double>(n) - static_cast<double>(df) + 0.5) /
                              (static_cast<double>(df) + 0.5));
                const double dl = static_cast<double>(d.terms.size());
                const double norm =
                    CorpusIndex::kK1 * (1.0 - CorpusIndex::kB +
                                        CorpusIndex::kB * dl / index.average_length());
                score += idf * (static_cast<double>(freq) * (CorpusIndex::kK1 + 1.0)) /
                         (static_cast<double>(freq) + norm);
            }
            if (score > 0.0) oracle.emplace_back(d.id, score);
        }
        std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        if (oracle.size() > 5) oracle.resize(5);

        REQUIRE(ranked.size() == oracle.size());
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            CHECK(ranked[i].doc->id == oracle[i].first);
            CHECK(ranked[i].score == Catch::Approx(oracle[i].second).epsilon(1e-12));
        }
    }
}

TEST_CASE("exact ties order by ascending id") {
    // Identical documents guarantee bit-identical scores.
    const CorpusIndex index = CorpusIndex::build({
        make_document("b", "", "alpha beta"),
        make_document("a", "", "alpha beta"),
        make_document("c", "", "alpha beta"),
    });
    const auto hits = index.retrieve("alpha", 10);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].doc->id == "a");
    CHECK(hits[1].doc->id == "b");
    CHECK(hits[2].doc->id == "c");
}

TEST_CASE("index save/load is byte-stable and preserves retrieval") {
    namespace fs = std::filesystem;
    const CorpusIndex index = CorpusIndex::build(small_corpus());
    const fs::path p1 = fs::temp_directory_path() / "dec_index_1.json";
    const fs::path p2 = fs::temp_directory_path() / "dec_index_2.json";
    index.save(p1);
    const CorpusIndex loaded = CorpusIndex::load(p1);
    loaded.save(p2);
    CHECK(read_text_file(p1) == read_text_file(p2));

    const auto a = index.retrieve("craig newmark", 10);
    const auto b = loaded.retrieve("craig newmark", 10);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].doc->id == b[i].doc->id);
        CHECK(a[i].score == b[i].score);
    }
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("hybrid recall unions keyword matches with the top backups") {
    // Build a corpus where keyword and relevance disagree.
    std::vector<Document> docs = {
        make_document("d1", "", "query terms query terms query terms"),      // top by score
        make_document("d2", "", "query terms and more"),                     // second by score
        make_document("d3", "", "needle in a haystack with query"),          // keyword match
        make_document("d4", "", "another needle document mentioning query"), // keyword match
        make_document("d5", "", "irrelevant filler text"),
    };
    const CorpusIndex index = CorpusIndex::build(docs);
    const LexicalRetriever retriever(index);

    KeywordSet needle{{"needle"}, "q"};
    const EnhancedCandidateSet out = hybrid_recall(retriever, "query terms", needle, 10, 2);

    CHECK(out.keyword_matched_ids == std::vector<std::string>{"d3", "d4"});
    CHECK(out.backup_ids == std::vector<std::string>{"d1", "d2"});
    // Output: keyword matches first, then backups, no duplicates.
    const auto ids = out.ordered_ids();
    REQUIRE(ids.size() == 4);
    CHECK(std::set<std::string>(ids.begin(), ids.end()) ==
          std::set<std::string>{"d1", "d2", "d3", "d4"});
    CHECK((ids[0] == "d3" || ids[0] == "d4"));
    CHECK((ids[2] == "d1"));
}

TEST_CASE("empty keyword set degenerates to the pure top backups") {
    const CorpusIndex index = CorpusIndex::build(small_corpus());
    const LexicalRetriever retriever(index);
    const EnhancedCandidateSet out = hybrid_recall(retriever, "craig newmark", {}, 10, 2);
    CHECK(out.keyword_matched_ids.empty());
    CHECK(out.docs.size() == 2);
}

TEST_CASE("keywords matching nothing fall back to the backups") {
    const CorpusIndex index = CorpusIndex::build(small_corpus());
    const LexicalRetriever retriever(index);
    KeywordSet zebra{{"zebra"}, "q"};
    const EnhancedCandidateSet out = hybrid_recall(retriever, "craig newmark", zebra, 10, 2);
    CHECK(out.keyword_matched_ids.empty());
    CHECK(out.docs.size() == 2);
}

TEST_CASE("result is non-empty whenever retrieval is non-empty") {
    const CorpusIndex index = CorpusIndex::build(small_corpus());
    const LexicalRetriever retriever(index);
    KeywordSet zebra{{"zebra"}, "q"};
    CHECK(!hybrid_recall(retriever, "paris", zebra, 10, 2).docs.empty());
    CHECK(hybrid_recall(retriever, "zzz", zebra, 10, 2).docs.empty()); // retrieval itself empty
}

TEST_CASE("recall set equals the brute-force construction on random instances") {
    std::mt19937_64 rng(99);
    const std::vector<std::string> vocab = {"alpha", "beta", "gamma", "delta", "epsilon",
                                            "zeta",  "eta",  "theta", "iota",  "kappa"};
    auto random_text = [&](int words) {
        std::string t;
        for (int i = 0; i < words; ++i) {
            if (i > 0) t += " ";
            t += vocab[rng() % vocab.size()];
        }
        return t;
    };

    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Document> docs;
        const int n = 3 + static_cast<int>(rng() % 30);
        for (int d = 0; d < n; ++d)
            docs.push_back(make_document("d" + std::to_string(d), "",
                                         random_text(3 + static_cast<int>(rng() % 10))));
        const CorpusIndex index = CorpusIndex::build(docs);
        const LexicalRetriever retriever(index);
        const std::string query = random_text(2);
        KeywordSet keywords;
        keywords.source_query = query;
        const int n_kw = static_cast<int>(rng() % 3);
        for (int k = 0; k < n_kw; ++k) keywords.keywords.push_back(vocab[rng() % vocab.size()]);

        const int top_n = 5 + static_cast<int>(rng() % 6);
        const EnhancedCandidateSet out = hybrid_recall(retriever, query, keywords, top_n, 2);

        const auto retrieved = retriever.retrieve(query, top_n);
        std::set<std::string> expected;
        for (const auto& sd : retrieved) {
            bool all = !keywords.empty();
            for (const auto& k : keywords.keywords)
                all = all && text::phrase_contained(k, sd.doc->terms);
            if (all) expected.insert(sd.doc->id);
        }
        for (std::size_t i = 0; i < std::min<std::size_t>(2, retrieved.size()); ++i)
            expected.insert(retrieved[i].doc->id);

        const auto ids = out.ordered_ids();
        CHECK(std::set<std::string>(ids.begin(), ids.end()) == expected);
        if (!retrieved.empty()) CHECK(!ids.empty());
    }
}
