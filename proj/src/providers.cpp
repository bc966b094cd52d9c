#include "msrag/providers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace msrag {

namespace {

using nlohmann::json;

// Splits a base URL into (scheme://host[:port], path-prefix).
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    std::size_t scheme = endpoint.find("://");
    std::size_t path_start = (scheme == std::string::npos)
                                 ? endpoint.find('/')
                                 : endpoint.find('/', scheme + 3);
    if (path_start == std::string::npos) {
        return {endpoint, ""};
    }
    std::string prefix = endpoint.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {endpoint.substr(0, path_start), prefix};
}

// One POST with auth, timeout, and status classification. Transient: network
// errors and 5xx. Fatal: everything else non-2xx.
json post_json(const ProviderConfig& config, TokenBucket& bucket, const std::string& route,
               const json& body) {
    bucket.acquire();
    auto [host, prefix] = split_endpoint(config.endpoint);
    httplib::Client client(host);
    int timeout_s = std::max(1, static_cast<int>(config.timeout_s));
    client.set_connection_timeout(timeout_s, 0);
    client.set_read_timeout(timeout_s, 0);
    client.set_write_timeout(timeout_s, 0);
    httplib::Headers headers;
    std::string token = auth_token(config);
    if (!token.empty()) {
        headers.emplace("Authorization", "Bearer " + token);
    }
    httplib::Result res = client.Post(prefix + route, headers, body.dump(), "application/json");
    if (!res) {
        throw ProviderError("request to " + route + " failed: " + httplib::to_string(res.error()),
                            /*transient=*/true);
    }
    if (res->status < 200 || res->status >= 300) {
        bool transient = res->status >= 500;
        throw ProviderError("request to " + route + " returned status " +
                                std::to_string(res->status),
                            transient);
    }
    try {
        return json::parse(res->body);
    } catch (const json::parse_error& e) {
        throw ProviderError(std::string("non-JSON response from ") + route + ": " + e.what(),
                            /*transient=*/false);
    }
}

// Shared retry loop for embedding/NLI clients (chat has its own in the base
// class so attempts land in the call log).
template <typename Fn>
auto with_retry(const RetryPolicy& retry, Fn&& fn) -> decltype(fn()) {
    for (int attempt = 0;; ++attempt) {
        try {
            return fn();
        } catch (const ProviderError& e) {
            if (!e.transient || attempt >= retry.max_retries) throw;
            if (retry.backoff_s > 0) {
                double sleep_s = retry.backoff_s * std::pow(2.0, attempt);
                std::this_thread::sleep_for(std::chrono::duration<double>(sleep_s));
            }
        }
    }
}

RetryPolicy policy_of(const ProviderConfig& config) {
    return {config.max_retries, config.backoff_s};
}

}  // namespace

std::string auth_token(const ProviderConfig& config) {
    if (config.auth_env.empty()) return "";
    const char* value = std::getenv(config.auth_env.c_str());
    return value == nullptr ? "" : value;
}

std::string render_messages(const ChatRequest& request) {
    std::string out;
    for (const ChatMessage& message : request.messages) {
        out += message.role;
        out += ": ";
        out += message.text;
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// TokenBucket

TokenBucket::TokenBucket(double requests_per_sec, double burst)
    : rate_(requests_per_sec),
      capacity_(std::max(burst, 1.0)),
      tokens_(capacity_),
      last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
    if (rate_ <= 0) return;
    std::unique_lock<std::mutex> lock(mu_);
    for (;;) {
        auto now = std::chrono::steady_clock::now();
        double elapsed = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        tokens_ = std::min(capacity_, tokens_ + elapsed * rate_);
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        double wait_s = (1.0 - tokens_) / rate_;
        lock.unlock();
        std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
        lock.lock();
    }
}

// ---------------------------------------------------------------------------
// ChatProvider

std::string ChatProvider::chat(const ChatRequest& request) {
    std::string prompt = render_messages(request);
    for (int attempt = 0;; ++attempt) {
        {
            std::lock_guard<std::mutex> lock(mu_);
            log_.push_back({prompt, attempt});
        }
        try {
            return chat_once(request);
        } catch (const ProviderError& e) {
            if (!e.transient || attempt >= retry_.max_retries) throw;
            if (retry_.backoff_s > 0) {
                double sleep_s = retry_.backoff_s * std::pow(2.0, attempt);
                std::this_thread::sleep_for(std::chrono::duration<double>(sleep_s));
            }
        }
    }
}

std::vector<ChatCall> ChatProvider::call_log() const {
    std::lock_guard<std::mutex> lock(mu_);
    return log_;
}

std::size_t ChatProvider::call_count() const {
    std::lock_guard<std::mutex> lock(mu_);
    return log_.size();
}

void ChatProvider::clear_call_log() {
    std::lock_guard<std::mutex> lock(mu_);
    log_.clear();
}

// ---------------------------------------------------------------------------
// ScriptedChatProvider

void ScriptedChatProvider::script(const std::string& prompt, const std::string& reply) {
    std::lock_guard<std::mutex> lock(mu_);
    script_[prompt] = reply;
}

void ScriptedChatProvider::fail_next(int n, bool transient) {
    std::lock_guard<std::mutex> lock(mu_);
    failures_pending_ = n;
    failures_transient_ = transient;
}

std::string ScriptedChatProvider::chat_once(const ChatRequest& request) {
    std::lock_guard<std::mutex> lock(mu_);
    if (failures_pending_ > 0) {
        --failures_pending_;
        throw ProviderError("injected failure", failures_transient_);
    }
    auto it = script_.find(render_messages(request));
    if (it != script_.end()) return it->second;
    if (default_reply_) return *default_reply_;
    throw ProviderError("no scripted reply for prompt:\n" + render_messages(request),
                        /*transient=*/false);
}

// ---------------------------------------------------------------------------
// HttpChatProvider

HttpChatProvider::HttpChatProvider(ProviderConfig config)
    : ChatProvider(policy_of(config)),
      config_(std::move(config)),
      bucket_(config_.requests_per_sec) {}

std::string HttpChatProvider::chat_once(const ChatRequest& request) {
    json body;
    body["model"] = config_.model;
    body["temperature"] = request.params.temperature;
    body["top_p"] = request.params.top_p;
    body["max_tokens"] = request.params.max_tokens;
    body["messages"] = json::array();
    for (const ChatMessage& message : request.messages) {
        body["messages"].push_back({{"role", message.role}, {"content", message.text}});
    }
    json response = post_json(config_, bucket_, "/chat/completions", body);
    if (!response.contains("choices") || !response["choices"].is_array() ||
        response["choices"].empty()) {
        throw ProviderError("chat response has no choices", /*transient=*/false);
    }
    const json& message = response["choices"][0];
    if (message.contains("message") && message["message"].contains("content")) {
        return message["message"]["content"].get<std::string>();
    }
    if (message.contains("text")) {
        return message["text"].get<std::string>();
    }
    throw ProviderError("chat response choice has no content", /*transient=*/false);
}

// ---------------------------------------------------------------------------
// HashEmbeddingProvider

HashEmbeddingProvider::HashEmbeddingProvider(std::uint64_t seed, std::size_t dim)
    : seed_(seed), dim_(dim) {
    if (dim_ == 0) throw ConfigError("embedding dimension must be positive");
}

EmbeddingVector HashEmbeddingProvider::embed(const std::string& text) {
    if (text.empty()) throw RangeError("cannot embed empty text");
    EmbeddingVector out;
    out.values.assign(dim_, 0.0);

    // FNV-1a over seed bytes then the n-gram bytes.
    auto hash_ngram = [&](std::size_t begin, std::size_t n) {
        std::uint64_t h = 14695981039346656037ull;
        auto mix = [&h](unsigned char byte) {
            h ^= byte;
            h *= 1099511628211ull;
        };
        for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(seed_ >> (8 * i)));
        for (std::size_t i = 0; i < n; ++i) mix(static_cast<unsigned char>(text[begin + i]));
        return h;
    };

    for (std::size_t n = 1; n <= 3; ++n) {
        if (text.size() < n) break;
        for (std::size_t i = 0; i + n <= text.size(); ++i) {
            std::uint64_t h = hash_ngram(i, n);
            std::size_t bucket = static_cast<std::size_t>(h % dim_);
            double sign = (h >> 63) ? -1.0 : 1.0;
            out.values[bucket] += sign;
        }
    }

    double norm = 0.0;
    for (double v : out.values) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (double& v : out.values) v /= norm;
    } else {
        // All n-gram contributions cancelled; fall back to a deterministic
        // unit vector so downstream cosine stays well-defined.
        out.values[hash_ngram(0, std::min<std::size_t>(1, text.size())) % dim_] = 1.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// HttpEmbeddingProvider

HttpEmbeddingProvider::HttpEmbeddingProvider(ProviderConfig config, std::size_t dim)
    : config_(std::move(config)), dim_(dim), bucket_(config_.requests_per_sec) {}

EmbeddingVector HttpEmbeddingProvider::embed(const std::string& text) {
    if (text.empty()) throw RangeError("cannot embed empty text");
    return with_retry(policy_of(config_), [&] {
        json body;
        body["model"] = config_.model;
        body["input"] = text;
        json response = post_json(config_, bucket_, "/embeddings", body);
        if (!response.contains("data") || !response["data"].is_array() ||
            response["data"].empty() || !response["data"][0].contains("embedding")) {
            throw ProviderError("embedding response has no data", /*transient=*/false);
        }
        EmbeddingVector out;
        for (const json& v : response["data"][0]["embedding"]) {
            out.values.push_back(v.get<double>());
        }
        if (out.values.empty()) {
            throw ProviderError("embedding response is empty", /*transient=*/false);
        }
        return out;
    });
}

// ---------------------------------------------------------------------------
// NLI providers

ConstantNliProvider::ConstantNliProvider(double value) : value_(value) {
    if (!(value >= 0.0 && value <= 1.0)) {
        throw RangeError("NLI constant outside [0,1]");
    }
}

void ScriptedNliProvider::script(const std::string& premise, const std::string& hypothesis,
                                 double value) {
    std::lock_guard<std::mutex> lock(mu_);
    script_[{premise, hypothesis}] = value;
}

double ScriptedNliProvider::entail(const std::string& premise, const std::string& hypothesis) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = script_.find({premise, hypothesis});
    if (it != script_.end()) return it->second;
    if (default_) return *default_;
    throw ProviderError("no scripted NLI value for pair", /*transient=*/false);
}

double OverlapNliProvider::entail(const std::string& premise, const std::string& hypothesis) {
    auto tokens_of = [](const std::string& text) {
        std::set<std::string> out;
        std::istringstream in(text);
        std::string token;
        while (in >> token) out.insert(token);
        return out;
    };
    std::set<std::string> p = tokens_of(premise);
    std::set<std::string> h = tokens_of(hypothesis);
    if (h.empty()) return 0.0;
    std::size_t shared = 0;
    for (const std::string& token : h) {
        if (p.count(token) != 0) ++shared;
    }
    return static_cast<double>(shared) / static_cast<double>(h.size());
}

HttpNliProvider::HttpNliProvider(ProviderConfig config)
    : config_(std::move(config)), bucket_(config_.requests_per_sec) {}

double HttpNliProvider::entail(const std::string& premise, const std::string& hypothesis) {
    return with_retry(policy_of(config_), [&] {
        json body;
        body["model"] = config_.model;
        body["premise"] = premise;
        body["hypothesis"] = hypothesis;
        json response = post_json(config_, bucket_, "/nli", body);
        if (!response.contains("entailment") || !response["entailment"].is_number()) {
            throw ProviderError("NLI response has no entailment field", /*transient=*/false);
        }
        double p = response["entailment"].get<double>();
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ProviderError("NLI entailment outside [0,1]", /*transient=*/false);
        }
        return p;
    });
}

}  // namespace msrag
