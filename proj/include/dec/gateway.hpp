#pragma once

#include <atomic>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dec/digest.hpp"
#include "dec/error.hpp"
#include "dec/jsonl.hpp"
#include "dec/prompts.hpp"
#include "dec/text.hpp"

namespace dec {

struct ChatRequest {
    std::string system_text;
    std::string user_text;
    std::string model_id;
    double temperature = 0.0;
    int max_output_tokens = 512;
    /// Identity of the rendered prompt: template name plus a digest of the
    /// placeholder bindings. Drives script lookup and error diagnosis.
    std::string template_name;
    std::string bindings_digest;
};

struct ChatResponse {
    std::string text;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    /// True when the provider reported no usage and counts were estimated
    /// from whitespace tokens.
    bool counts_estimated = false;
};

struct TokenUsage {
    long prompt = 0;
    long completion = 0;

    long total() const { return prompt + completion; }

    void add(const ChatResponse& r) {
        prompt += r.prompt_tokens;
        completion += r.completion_tokens;
    }

    TokenUsage& operator+=(const TokenUsage& o) {
        prompt += o.prompt;
        completion += o.completion;
        return *this;
    }

    friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

/// Process-wide token accounting. Supports concurrent additive updates.
class UsageLedger {
public:
    void add(const ChatResponse& r) {
        prompt_.fetch_add(r.prompt_tokens, std::memory_order_relaxed);
        completion_.fetch_add(r.completion_tokens, std::memory_order_relaxed);
        calls_.fetch_add(1, std::memory_order_relaxed);
    }

    long prompt_tokens() const { return prompt_.load(std::memory_order_relaxed); }
    long completion_tokens() const { return completion_.load(std::memory_order_relaxed); }
    long total_tokens() const { return prompt_tokens() + completion_tokens(); }
    long calls() const { return calls_.load(std::memory_order_relaxed); }

private:
    std::atomic<long> prompt_{0};
    std::atomic<long> completion_{0};
    std::atomic<long> calls_{0};
};

/// Counting semaphore with a runtime limit; bounds in-flight remote requests.
class BoundedSlots {
public:
    explicit BoundedSlots(int limit) : available_(limit > 0 ? limit : 1) {}

    void acquire() {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return available_ > 0; });
        --available_;
    }

    void release() {
        {
            std::lock_guard lk(mu_);
            ++available_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int available_;
};

class SlotGuard {
public:
    explicit SlotGuard(BoundedSlots& s) : slots_(s) { slots_.acquire(); }
    ~SlotGuard() { slots_.release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

private:
    BoundedSlots& slots_;
};

/// Chat-completion backend. Implementations are immutable after construction
/// and safe for concurrent use.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse complete(const ChatRequest& request) const = 0;
    virtual bool is_remote() const { return false; }
};

struct ScriptEntry {
    std::string template_name;
    std::string digest;
    std::string response_text;
    std::optional<long> prompt_tokens;
    std::optional<long> completion_tokens;
};

inline ojson to_json(const ScriptEntry& e) {
    ojson j{{"template", e.template_name}, {"digest", e.digest}, {"response_text", e.response_text}};
    if (e.prompt_tokens) j["prompt_tokens"] = *e.prompt_tokens;
    if (e.completion_tokens) j["completion_tokens"] = *e.completion_tokens;
    return j;
}

inline ScriptEntry script_entry_from_json(const ojson& j, const std::string& context) {
    ScriptEntry e;
    e.template_name = jsonv::str(j, "template", context);
    e.digest = jsonv::str(j, "digest", context);
    e.response_text = jsonv::str(j, "response_text", context);
    if (j.contains("prompt_tokens")) e.prompt_tokens = j["prompt_tokens"].get<long>();
    if (j.contains("completion_tokens")) e.completion_tokens = j["completion_tokens"].get<long>();
    return e;
}

inline void save_script_jsonl(const std::filesystem::path& path,
                              const std::vector<ScriptEntry>& entries) {
    std::vector<ojson> lines;
    lines.reserve(entries.size());
    for (const auto& e : entries) lines.push_back(to_json(e));
    write_jsonl(path, lines);
}

inline std::vector<ScriptEntry> load_script_jsonl(const std::filesystem::path& path) {
    std::vector<ScriptEntry> entries;
    for_each_jsonl(path, [&](std::size_t line_no, const ojson& j) {
        entries.push_back(script_entry_from_json(j, path.string() + ":" + std::to_string(line_no)));
    });
    return entries;
}

/// Deterministic backend: a pure function of (template name, bindings
/// digest). An unmatched request is an error naming the template, never a
/// silent empty answer. Served requests are logged for test inspection.
class ScriptedBackend final : public ChatBackend {
public:
    explicit ScriptedBackend(const std::vector<ScriptEntry>& entries) {
        for (const auto& e : entries) script_[{e.template_name, e.digest}] = e;
    }

    explicit ScriptedBackend(const std::filesystem::path& script_file)
        : ScriptedBackend(load_script_jsonl(script_file)) {}

    ChatResponse complete(const ChatRequest& request) const override {
        auto it = script_.find({request.template_name, request.bindings_digest});
        if (it == script_.end()) {
            throw Error(ErrorKind::backend,
                        "no scripted response for template '" + request.template_name +
                            "' digest " + request.bindings_digest,
                        request.template_name);
        }
        {
            std::lock_guard lk(mu_);
            served_.emplace_back(request.template_name, request.bindings_digest);
        }
        const ScriptEntry& e = it->second;
        ChatResponse r;
        r.text = e.response_text;
        r.prompt_tokens = e.prompt_tokens
                              ? *e.prompt_tokens
                              : text::whitespace_token_count(request.system_text) +
                                    text::whitespace_token_count(request.user_text);
        r.completion_tokens =
            e.completion_tokens ? *e.completion_tokens : text::whitespace_token_count(e.response_text);
        return r;
    }

    std::vector<std::pair<std::string, std::string>> served() const {
        std::lock_guard lk(mu_);
        return served_;
    }

    std::size_t size() const { return script_.size(); }

private:
    std::map<std::pair<std::string, std::string>, ScriptEntry> script_;
    mutable std::mutex mu_;
    mutable std::vector<std::pair<std::string, std::string>> served_;
};

struct RemoteGatewayConfig {
    std::string base_url;        // e.g. http://localhost:8000/v1
    std::string api_key;         // resolved from the environment, never logged
    int concurrency_limit = 4;   // bounded in-flight requests
    int timeout_seconds = 120;
};

namespace detail {
struct ParsedUrl {
    std::string scheme_host_port; // http://host:port
    std::string path_prefix;      // /v1 (possibly empty)
};

inline ParsedUrl parse_base_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorKind::usage, "base_url must start with http:// or https://: " + base_url);
    const auto path_start = base_url.find('/', scheme_end + 3);
    ParsedUrl p;
    if (path_start == std::string::npos) {
        p.scheme_host_port = base_url;
    } else {
        p.scheme_host_port = base_url.substr(0, path_start);
        p.path_prefix = base_url.substr(path_start);
        while (!p.path_prefix.empty() && p.path_prefix.back() == '/') p.path_prefix.pop_back();
    }
    return p;
}
} // namespace detail

/// Client for an OpenAI-compatible chat-completions endpoint. Declared here,
/// defined in remote.hpp to keep httplib out of translation units that never
/// talk to the network.
class OpenAiClient final : public ChatBackend {
public:
    explicit OpenAiClient(RemoteGatewayConfig cfg);
    ChatResponse complete(const ChatRequest& request) const override;
    bool is_remote() const override { return true; }

private:
    RemoteGatewayConfig cfg_;
    detail::ParsedUrl url_;
    mutable BoundedSlots slots_;
};

/// Uniform entry point for model calls: validates requests, applies the
/// transport retry policy (one retry on transient failures, none on
/// malformed content) and accounts tokens into the ledger plus an optional
/// per-call tally.
class Gateway {
public:
    explicit Gateway(std::shared_ptr<const ChatBackend> backend) : backend_(std::move(backend)) {}

    ChatResponse complete(const ChatRequest& request, TokenUsage* tally = nullptr) {
        validate(request);
        ChatResponse response;
        try {
            response = backend_->complete(request);
        } catch (const Error& e) {
            if (!e.transient()) throw;
            response = backend_->complete(request);
        }
        ledger_.add(response);
        if (tally != nullptr) tally->add(response);
        return response;
    }

    const UsageLedger& ledger() const { return ledger_; }
    const ChatBackend& backend() const { return *backend_; }

private:
    static void validate(const ChatRequest& r) {
        if (r.user_text.empty())
            throw Error(ErrorKind::usage, "chat request has empty user text", r.template_name);
        if (r.temperature < 0.0 || r.temperature > 1.0)
            throw Error(ErrorKind::usage, "temperature must be within [0,1]", r.template_name);
        if (r.max_output_tokens <= 0)
            throw Error(ErrorKind::usage, "max_output_tokens must be positive", r.template_name);
    }

    std::shared_ptr<const ChatBackend> backend_;
    UsageLedger ledger_;
};

/// Per-role decoding options. Temperature 0 everywhere: the pipeline is
/// deterministic in intent and the tests require reproducibility.
struct CallOptions {
    std::string model_id = "main";
    double temperature = 0.0;
    int max_output_tokens = 512;
};

inline ChatRequest make_request(const PromptTemplate& tmpl, const Bindings& bindings,
                                const CallOptions& opts, std::string system_text = {}) {
    ChatRequest r;
    r.system_text = std::move(system_text);
    r.user_text = render(tmpl, bindings);
    r.model_id = opts.model_id;
    r.temperature = opts.temperature;
    r.max_output_tokens = opts.max_output_tokens;
    r.template_name = tmpl.name;
    r.bindings_digest = digest_bindings(bindings);
    return r;
}

} // namespace dec
