#pragma once
// Model providers behind narrow interfaces: chat completion, text embedding,
// and NLI entailment scoring. Each interface has a deterministic in-process
// mock (the default for tests and offline runs) and an HTTP-backed client.
//
// Retry contract: chat() makes exactly min(transient failures, max_retries)+1
// attempts, each visible in the provider's call log, with exponential backoff
// between attempts. Fatal errors (4xx, malformed payloads) are not retried.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msrag/core.hpp"

namespace msrag {

// ---------------------------------------------------------------------------
// Requests and configuration

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string text;
};

struct GenParams {
    double temperature = 0.1;
    double top_p = 0.1;
    int max_tokens = 512;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    GenParams params;
};

// Canonical single-string form of a request, used as the mock script key and
// in call logs: one "role: text" line per message.
std::string render_messages(const ChatRequest& request);

struct RetryPolicy {
    int max_retries = 0;
    double backoff_s = 0.0;  // sleep backoff_s * 2^attempt between attempts
};

struct ProviderConfig {
    std::string endpoint;       // base URL, e.g. http://127.0.0.1:8089/v1
    std::string model;
    std::string auth_env;       // name of the env var holding the bearer token
    double timeout_s = 30.0;
    int max_retries = 2;
    double backoff_s = 0.5;
    double requests_per_sec = 0.0;  // 0 disables rate limiting
};

// ---------------------------------------------------------------------------
// Token-bucket rate limiter

class TokenBucket {
public:
    // rate <= 0 disables limiting; burst is the bucket capacity.
    explicit TokenBucket(double requests_per_sec, double burst = 1.0);

    // Blocks until a token is available, then consumes it.
    void acquire();

private:
    double rate_;
    double capacity_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Chat

struct ChatCall {
    std::string prompt;  // render_messages of the request
    int attempt;         // 0-based attempt index for this logical request
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;

    // Returns the assistant reply text. Retries transient failures per the
    // retry policy; throws ProviderError once retries are exhausted or on the
    // first fatal failure.
    std::string chat(const ChatRequest& request);

    // Every attempt made, in order. Shared across threads; thread safe.
    std::vector<ChatCall> call_log() const;
    std::size_t call_count() const;
    void clear_call_log();

protected:
    explicit ChatProvider(RetryPolicy retry = {}) : retry_(retry) {}
    virtual std::string chat_once(const ChatRequest& request) = 0;

private:
    RetryPolicy retry_;
    mutable std::mutex mu_;
    std::vector<ChatCall> log_;
};

// Deterministic mock keyed on the rendered prompt. Unscripted prompts get the
// default reply when one is set, otherwise a ProviderError.
class ScriptedChatProvider : public ChatProvider {
public:
    explicit ScriptedChatProvider(RetryPolicy retry = {}) : ChatProvider(retry) {}

    void script(const std::string& prompt, const std::string& reply);
    void set_default_reply(std::string reply) { default_reply_ = std::move(reply); }
    // The next n attempts fail before producing a reply.
    void fail_next(int n, bool transient = true);

private:
    std::string chat_once(const ChatRequest& request) override;

    std::map<std::string, std::string> script_;
    std::optional<std::string> default_reply_;
    int failures_pending_ = 0;
    bool failures_transient_ = true;
    std::mutex mu_;
};

// POST {endpoint}/chat/completions with the de-facto standard JSON shape.
class HttpChatProvider : public ChatProvider {
public:
    explicit HttpChatProvider(ProviderConfig config);

private:
    std::string chat_once(const ChatRequest& request) override;

    ProviderConfig config_;
    TokenBucket bucket_;
};

// ---------------------------------------------------------------------------
// Embeddings

struct EmbeddingVector {
    std::vector<double> values;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    // Embeds one text. Throws RangeError on empty input, ProviderError on
    // provider failure. Same text in one process => same vector.
    virtual EmbeddingVector embed(const std::string& text) = 0;
    virtual std::size_t dimension() const = 0;
};

// Seeded feature-hash embedding: character n-grams (n = 1..3) of the UTF-8
// bytes are hashed with FNV-1a (seed mixed in), bucketed modulo the
// dimension, signed by the hash's top bit, and L2-normalized. Deterministic
// across platforms and processes for a given (seed, dim).
class HashEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HashEmbeddingProvider(std::uint64_t seed = 0, std::size_t dim = 64);

    EmbeddingVector embed(const std::string& text) override;
    std::size_t dimension() const override { return dim_; }

private:
    std::uint64_t seed_;
    std::size_t dim_;
};

// POST {endpoint}/embeddings.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    HttpEmbeddingProvider(ProviderConfig config, std::size_t dim);

    EmbeddingVector embed(const std::string& text) override;
    std::size_t dimension() const override { return dim_; }

private:
    ProviderConfig config_;
    std::size_t dim_;
    TokenBucket bucket_;
};

// ---------------------------------------------------------------------------
// NLI

class NliProvider {
public:
    virtual ~NliProvider() = default;

    // P(premise entails hypothesis) in [0,1].
    virtual double entail(const std::string& premise, const std::string& hypothesis) = 0;
};

class ConstantNliProvider : public NliProvider {
public:
    explicit ConstantNliProvider(double value);
    double entail(const std::string&, const std::string&) override { return value_; }

private:
    double value_;
};

// Keyed on the exact (premise, hypothesis) pair.
class ScriptedNliProvider : public NliProvider {
public:
    explicit ScriptedNliProvider(std::optional<double> default_value = std::nullopt)
        : default_(default_value) {}

    void script(const std::string& premise, const std::string& hypothesis, double value);
    double entail(const std::string& premise, const std::string& hypothesis) override;

private:
    std::map<std::pair<std::string, std::string>, double> script_;
    std::optional<double> default_;
    std::mutex mu_;
};

// |unique tokens shared| / |unique hypothesis tokens|; 1.0 for identical
// texts, 0.0 for disjoint ones. Whitespace tokenization.
class OverlapNliProvider : public NliProvider {
public:
    double entail(const std::string& premise, const std::string& hypothesis) override;
};

// POST {endpoint}/nli with {"model", "premise", "hypothesis"}; the response
// carries {"entailment": p}. This wire shape is this project's own contract
// (no public standard exists); see README for the schema.
class HttpNliProvider : public NliProvider {
public:
    explicit HttpNliProvider(ProviderConfig config);

    double entail(const std::string& premise, const std::string& hypothesis) override;

private:
    ProviderConfig config_;
    TokenBucket bucket_;
};

// ---------------------------------------------------------------------------
// Bundle handed through the pipeline

struct ProviderHandles {
    ChatProvider* chat = nullptr;
    EmbeddingProvider* embedder = nullptr;
    NliProvider* nli = nullptr;
};

// Reads the bearer token from the env var named in the config; empty when the
// variable is unset or the name is empty. The value itself is never logged.
std::string auth_token(const ProviderConfig& config);

}  // namespace msrag
