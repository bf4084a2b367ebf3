#pragma once

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dec/digest.hpp"
#include "dec/error.hpp"
#include "dec/jsonl.hpp"
#include "dec/prompts.hpp"

namespace dec {

struct GatewaySettings {
    std::string base_url = "http://localhost:8000/v1";
    std::string api_key_env = "DEC_API_KEY";
    std::string model_main = "main";
    std::string model_ek = "main";
    std::string model_judge = "main";
    double temperature = 0.0;
    int max_output_tokens = 512;
    int concurrency_limit = 4;
};

struct RetrievalSettings {
    std::string mode = "local"; // local | remote
    std::string remote_url;     // retriever endpoint when mode == remote
    int top_n = 10;
    int backup_k = 2;
};

struct OrchestratorSettings {
    int max_chain_length = 6;
    std::string unanswerable_token = std::string(kUnanswerableToken);
};

struct PathSettings {
    std::string corpus;
    std::string index_cache;
    std::string prompt_overrides;
};

/// Resolved application configuration. Loading rejects unknown keys; the
/// digest of the fully resolved form (defaults included) is embedded into
/// run records and reports for provenance.
struct AppConfig {
    GatewaySettings gateway;
    RetrievalSettings retrieval;
    OrchestratorSettings orchestrator;
    PathSettings paths;

    ojson resolved() const {
        return ojson{
            {"gateway",
             ojson{{"base_url", gateway.base_url},
                   {"api_key_env", gateway.api_key_env},
                   {"model_main", gateway.model_main},
                   {"model_ek", gateway.model_ek},
                   {"model_judge", gateway.model_judge},
                   {"temperature", gateway.temperature},
                   {"max_output_tokens", gateway.max_output_tokens},
                   {"concurrency_limit", gateway.concurrency_limit}}},
            {"retrieval",
             ojson{{"mode", retrieval.mode},
                   {"remote_url", retrieval.remote_url},
                   {"top_n", retrieval.top_n},
                   {"backup_k", retrieval.backup_k}}},
            {"orchestrator",
             ojson{{"max_chain_length", orchestrator.max_chain_length},
                   {"unanswerable_token", orchestrator.unanswerable_token}}},
            {"paths",
             ojson{{"corpus", paths.corpus},
                   {"index_cache", paths.index_cache},
                   {"prompt_overrides", paths.prompt_overrides}}},
        };
    }

    std::string digest() const { return digest_text(resolved().dump()); }

    /// Secret resolution: the key itself never lives in the config file.
    std::string api_key() const {
        const char* v = std::getenv(gateway.api_key_env.c_str());
        return v == nullptr ? std::string() : std::string(v);
    }

    void validate() const {
        if (gateway.temperature < 0.0 || gateway.temperature > 1.0)
            throw Error(ErrorKind::usage, "config: gateway.temperature must be within [0,1]");
        if (gateway.max_output_tokens <= 0)
            throw Error(ErrorKind::usage, "config: gateway.max_output_tokens must be positive");
        if (gateway.concurrency_limit <= 0)
            throw Error(ErrorKind::usage, "config: gateway.concurrency_limit must be positive");
        if (retrieval.mode != "local" && retrieval.mode != "remote")
            throw Error(ErrorKind::usage, "config: retrieval.mode must be 'local' or 'remote'");
        if (retrieval.mode == "remote" && retrieval.remote_url.empty())
            throw Error(ErrorKind::usage, "config: retrieval.remote_url required in remote mode");
        if (retrieval.top_n <= 0)
            throw Error(ErrorKind::usage, "config: retrieval.top_n must be positive");
        if (retrieval.backup_k <= 0)
            throw Error(ErrorKind::usage, "config: retrieval.backup_k must be positive");
        if (orchestrator.max_chain_length <= 0)
            throw Error(ErrorKind::usage, "config: orchestrator.max_chain_length must be positive");
        if (orchestrator.unanswerable_token.empty())
            throw Error(ErrorKind::usage, "config: orchestrator.unanswerable_token must be non-empty");
    }
};

namespace config_detail {

inline void reject_unknown(const ojson& j, const std::vector<std::string>& allowed,
                           const std::string& context) {
    for (const auto& [key, _] : j.items()) {
        bool known = false;
        for (const auto& a : allowed) {
            if (key == a) {
                known = true;
                break;
            }
        }
        if (!known) throw Error(ErrorKind::usage, "config: unknown key '" + context + key + "'");
    }
}

template <typename T>
void read_into(const ojson& j, const char* key, T& out) {
    auto it = j.find(key);
    if (it != j.end()) out = it->get<T>();
}

} // namespace config_detail

inline AppConfig load_config(const std::filesystem::path& path) {
    ojson j;
    try {
        j = ojson::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::usage, path.string() + ": " + e.what());
    }
    using config_detail::read_into;
    using config_detail::reject_unknown;

    reject_unknown(j, {"gateway", "retrieval", "orchestrator", "paths"}, "");
    AppConfig cfg;
    if (j.contains("gateway")) {
        const ojson& g = j["gateway"];
        reject_unknown(g,
                       {"base_url", "api_key_env", "model_main", "model_ek", "model_judge",
                        "temperature", "max_output_tokens", "concurrency_limit"},
                       "gateway.");
        read_into(g, "base_url", cfg.gateway.base_url);
        read_into(g, "api_key_env", cfg.gateway.api_key_env);
        read_into(g, "model_main", cfg.gateway.model_main);
        read_into(g, "model_ek", cfg.gateway.model_ek);
        read_into(g, "model_judge", cfg.gateway.model_judge);
        read_into(g, "temperature", cfg.gateway.temperature);
        read_into(g, "max_output_tokens", cfg.gateway.max_output_tokens);
        read_into(g, "concurrency_limit", cfg.gateway.concurrency_limit);
    }
    if (j.contains("retrieval")) {
        const ojson& r = j["retrieval"];
        reject_unknown(r, {"mode", "remote_url", "top_n", "backup_k"}, "retrieval.");
        read_into(r, "mode", cfg.retrieval.mode);
        read_into(r, "remote_url", cfg.retrieval.remote_url);
        read_into(r, "top_n", cfg.retrieval.top_n);
        read_into(r, "backup_k", cfg.retrieval.backup_k);
    }
    if (j.contains("orchestrator")) {
        const ojson& o = j["orchestrator"];
        reject_unknown(o, {"max_chain_length", "unanswerable_token"}, "orchestrator.");
        read_into(o, "max_chain_length", cfg.orchestrator.max_chain_length);
        read_into(o, "unanswerable_token", cfg.orchestrator.unanswerable_token);
    }
    if (j.contains("paths")) {
        const ojson& p = j["paths"];
        reject_unknown(p, {"corpus", "index_cache", "prompt_overrides"}, "paths.");
        read_into(p, "corpus", cfg.paths.corpus);
        read_into(p, "index_cache", cfg.paths.index_cache);
        read_into(p, "prompt_overrides", cfg.paths.prompt_overrides);
    }
    cfg.validate();
    return cfg;
}

} // namespace dec
