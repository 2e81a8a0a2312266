#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "krca/llm.hpp"

namespace krca {

// OpenAI-compatible chat-completions client. The API key comes from the
// environment variable named in the config, never from a file.
class HttpChatBackend : public LlmBackend {
public:
    explicit HttpChatBackend(const BackendConfig& config);
    Completion complete(const std::string& prompt, const CompletionParams& params) override;
    std::string name() const override { return "http"; }

private:
    std::string url_;
    std::string model_;
    std::string api_key_;
};

// Replays a response table loaded from JSON. Keys are looked up as
// "<stage>:<incident>", then "<stage>:*", then "*"; values are a string or an
// array of strings consumed in order (the last entry repeats).
class MockBackend : public LlmBackend {
public:
    explicit MockBackend(const Json& table);
    static Json load_table(const std::string& path);

    Completion complete(const std::string& prompt, const CompletionParams& params) override;
    std::string name() const override { return "mock"; }
    void begin_incident(const std::string& incident_id) override;

private:
    std::map<std::string, std::vector<std::string>> table_;
    std::map<std::string, std::size_t> cursor_;
    std::string incident_id_;
    mutable std::mutex mutex_;
};

// Deterministic stand-in for the LLM: answers every stage from lookup rules
// over the prompt content. Makes no network calls; used for reproducible
// end-to-end runs.
class RuleOracleBackend : public LlmBackend {
public:
    Completion complete(const std::string& prompt, const CompletionParams& params) override;
    std::string name() const override { return "oracle"; }

    std::size_t calls() const { return calls_.load(); }

private:
    std::string answer_locator(const std::string& prompt) const;
    std::string answer_cypher(const std::string& prompt) const;
    std::string answer_summarizer(const std::string& prompt) const;
    std::string answer_report(const std::string& prompt) const;
    std::string answer_estimator(const std::string& prompt) const;

    std::atomic<std::size_t> calls_{0};
};

// Wraps another backend and accumulates the usage it reports; lets callers
// cross-check per-stage accounting against backend totals.
class CountingBackend : public LlmBackend {
public:
    explicit CountingBackend(LlmBackend& inner) : inner_(inner) {}

    Completion complete(const std::string& prompt, const CompletionParams& params) override {
        Completion completion = inner_.complete(prompt, params);
        std::lock_guard<std::mutex> lock(mutex_);
        total_ += completion.usage;
        ++calls_;
        return completion;
    }
    std::string name() const override { return inner_.name(); }
    void begin_incident(const std::string& incident_id) override { inner_.begin_incident(incident_id); }

    TokenUsage total() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return total_;
    }
    std::size_t calls() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return calls_;
    }
    void reset() {
        std::lock_guard<std::mutex> lock(mutex_);
        total_ = {};
        calls_ = 0;
    }

private:
    LlmBackend& inner_;
    TokenUsage total_;
    std::size_t calls_ = 0;
    mutable std::mutex mutex_;
};

// "oracle" | "mock:<responses.json>" | "http"
std::unique_ptr<LlmBackend> make_backend(const std::string& spec, const BackendConfig& config);

// Rough token estimate used by offline backends (1 token per 4 characters).
std::int64_t estimate_tokens(const std::string& text);

}  // namespace krca
