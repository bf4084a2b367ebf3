#pragma once

#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "dec/gateway.hpp"
#include "dec/retrieval.hpp"
#include "dec/text.hpp"

namespace dec {

inline OpenAiClient::OpenAiClient(RemoteGatewayConfig cfg)
    : cfg_(std::move(cfg)), url_(detail::parse_base_url(cfg_.base_url)),
      slots_(cfg_.concurrency_limit) {
    if (url_.scheme_host_port.rfind("https://", 0) == 0)
        throw Error(ErrorKind::usage,
                    "https endpoints are not supported by this build; use http or a local proxy");
}

inline ChatResponse OpenAiClient::complete(const ChatRequest& request) const {
    SlotGuard guard(slots_);

    nlohmann::ordered_json body;
    body["model"] = request.model_id;
    body["messages"] = nlohmann::ordered_json::array(
        {nlohmann::ordered_json{{"role", "system"}, {"content", request.system_text}},
         nlohmann::ordered_json{{"role", "user"}, {"content", request.user_text}}});
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_output_tokens;

    httplib::Client client(url_.scheme_host_port);
    client.set_connection_timeout(cfg_.timeout_seconds, 0);
    client.set_read_timeout(cfg_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    const std::string path = url_.path_prefix + "/chat/completions";
    const std::string endpoint = url_.scheme_host_port + path;
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
        throw Error(ErrorKind::backend,
                    "transport failure POST " + endpoint + ": " + httplib::to_string(res.error()),
                    request.template_name, "", /*transient=*/true);
    }
    if (res->status != 200) {
        throw Error(ErrorKind::backend,
                    "provider error status " + std::to_string(res->status) + " from " + endpoint,
                    request.template_name, res->body);
    }

    ojson j;
    try {
        j = ojson::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::backend, "malformed provider response from " + endpoint + ": " + e.what(),
                    request.template_name, res->body);
    }
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
        throw Error(ErrorKind::backend, "provider response has no choices", request.template_name,
                    res->body);
    const auto& message = j["choices"][0]["message"];
    if (!message.contains("content") || !message["content"].is_string())
        throw Error(ErrorKind::backend, "provider response has no message content",
                    request.template_name, res->body);

    ChatResponse out;
    out.text = message["content"].get<std::string>();
    if (out.text.empty())
        throw Error(ErrorKind::backend, "provider returned empty content", request.template_name,
                    res->body);
    if (j.contains("usage") && j["usage"].is_object() && j["usage"].contains("prompt_tokens") &&
        j["usage"].contains("completion_tokens")) {
        out.prompt_tokens = j["usage"]["prompt_tokens"].get<long>();
        out.completion_tokens = j["usage"]["completion_tokens"].get<long>();
    } else {
        out.prompt_tokens = text::whitespace_token_count(request.system_text) +
                            text::whitespace_token_count(request.user_text);
        out.completion_tokens = text::whitespace_token_count(out.text);
        out.counts_estimated = true;
    }
    return out;
}

/// Client for a dense-retriever service: POST {query, top_k} to the endpoint,
/// read [{id, score}] and hydrate ids against the locally loaded documents.
class RemoteRetriever final : public Retriever {
public:
    RemoteRetriever(std::string endpoint_url, const CorpusIndex& doc_store,
                    int timeout_seconds = 60)
        : url_(detail::parse_base_url(std::move(endpoint_url))),
          store_(&doc_store),
          timeout_seconds_(timeout_seconds) {}

    std::vector<ScoredDocument> retrieve(const std::string& query, int top_n) const override {
        if (top_n <= 0) throw Error(ErrorKind::usage, "top_n must be positive");
        httplib::Client client(url_.scheme_host_port);
        client.set_connection_timeout(timeout_seconds_, 0);
        client.set_read_timeout(timeout_seconds_, 0);
        const std::string path = url_.path_prefix.empty() ? "/" : url_.path_prefix;
        const nlohmann::ordered_json body{{"query", query}, {"top_k", top_n}};
        auto res = client.Post(path, body.dump(), "application/json");
        if (!res)
            throw Error(ErrorKind::backend,
                        "transport failure POST " + url_.scheme_host_port + path + ": " +
                            httplib::to_string(res.error()),
                        "", "", /*transient=*/true);
        if (res->status != 200)
            throw Error(ErrorKind::backend,
                        "retriever error status " + std::to_string(res->status), "", res->body);
        ojson j;
        try {
            j = ojson::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::backend, std::string("malformed retriever response: ") + e.what());
        }
        const ojson& hits = j.is_array() ? j : jsonv::member(j, "results", "retriever response");
        std::vector<ScoredDocument> out;
        for (const auto& hit : hits) {
            const std::string id = hit.at("id").get<std::string>();
            const Document* doc = store_->doc_by_id(id);
            if (doc == nullptr)
                throw Error(ErrorKind::data,
                            "remote retriever returned unknown document id '" + id + "'");
            out.push_back({doc, hit.at("score").get<double>()});
        }
        std::sort(out.begin(), out.end(), ranked_before);
        if (out.size() > static_cast<std::size_t>(top_n)) out.resize(static_cast<std::size_t>(top_n));
        return out;
    }

private:
    detail::ParsedUrl url_;
    const CorpusIndex* store_;
    int timeout_seconds_;
};

} // namespace dec
