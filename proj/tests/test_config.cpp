#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "dec/config.hpp"

using namespace dec;

namespace fs = std::filesystem;

namespace {

fs::path write_config(const std::string& body) {
    const fs::path path = fs::temp_directory_path() / "dec_test_config.json";
    std::ofstream out(path, std::ios::trunc);
    out << body;
    return path;
}

} // namespace

TEST_CASE("defaults carry the published knobs") {
    const AppConfig cfg;
    CHECK(cfg.retrieval.top_n == 10);
    CHECK(cfg.retrieval.backup_k == 2);
    CHECK(cfg.orchestrator.max_chain_length == 6);
    CHECK(cfg.orchestrator.unanswerable_token == "unanswerable");
    CHECK(cfg.gateway.temperature == 0.0);
    CHECK(cfg.gateway.concurrency_limit == 4);
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("loading merges file values over defaults") {
    const fs::path path = write_config(R"({
        "gateway": {"model_main": "llama", "temperature": 0.5},
        "retrieval": {"top_n": 7},
        "orchestrator": {"max_chain_length": 4}
    })");
    const AppConfig cfg = load_config(path);
    CHECK(cfg.gateway.model_main == "llama");
    CHECK(cfg.gateway.temperature == 0.5);
    CHECK(cfg.retrieval.top_n == 7);
    CHECK(cfg.retrieval.backup_k == 2); // untouched default
    CHECK(cfg.orchestrator.max_chain_length == 4);
    fs::remove(path);
}

TEST_CASE("unknown keys are rejected with their path") {
    const fs::path path = write_config(R"({"retrieval": {"topn": 5}})");
    try {
        load_config(path);
        FAIL("expected usage error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::usage);
        CHECK(std::string(e.what()).find("retrieval.topn") != std::string::npos);
    }
    const fs::path top = write_config(R"({"gatway": {}})");
    CHECK_THROWS_AS(load_config(top), Error);
    fs::remove(path);
}

TEST_CASE("out-of-range values fail validation") {
    CHECK_THROWS_AS(load_config(write_config(R"({"gateway": {"temperature": 1.5}})")), Error);
    CHECK_THROWS_AS(load_config(write_config(R"({"retrieval": {"top_n": 0}})")), Error);
    CHECK_THROWS_AS(load_config(write_config(R"({"retrieval": {"mode": "psychic"}})")), Error);
    CHECK_THROWS_AS(load_config(write_config(R"({"retrieval": {"mode": "remote"}})")), Error);
    CHECK_THROWS_AS(
        load_config(write_config(R"({"orchestrator": {"unanswerable_token": ""}})")), Error);
    fs::remove(fs::temp_directory_path() / "dec_test_config.json");
}

TEST_CASE("digest is stable for equal configs and moves with any change") {
    AppConfig a;
    AppConfig b;
    CHECK(a.digest() == b.digest());
    b.retrieval.top_n = 11;
    CHECK(a.digest() != b.digest());
    CHECK(a.digest().size() == 16);
}

TEST_CASE("the api key resolves through the configured environment variable") {
    AppConfig cfg;
    cfg.gateway.api_key_env = "DEC_TEST_KEY_VAR";
    ::unsetenv("DEC_TEST_KEY_VAR");
    CHECK(cfg.api_key().empty());
    ::setenv("DEC_TEST_KEY_VAR", "sk-secret", 1);
    CHECK(cfg.api_key() == "sk-secret");
    // The secret never appears in the provenance form.
    CHECK(cfg.resolved().dump().find("sk-secret") == std::string::npos);
    ::unsetenv("DEC_TEST_KEY_VAR");
}
