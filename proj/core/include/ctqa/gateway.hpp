#pragma once

#include <chrono>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "ctqa/tokenizer.hpp"

namespace ctqa {

struct CompletionRequest {
    std::string prompt;
    std::string model_name;
    int max_generated_tokens = 512;
    double temperature = 0.0;
    std::vector<std::string> stop_sequences;
};

struct CompletionResult {
    std::string text;
    int prompt_tokens = 0;
    int generated_tokens = 0;
    std::string backend_id;
    int latency_ms = 0;
};

/// Content address of a request: hash of (model_name, temperature, prompt).
/// max_generated_tokens and stop sequences are deliberately excluded so
/// replay tolerates benign configuration drift.
std::string request_digest(const CompletionRequest& request);

/// Uniform completion interface. Implementations are safe for concurrent
/// calls.
class Gateway {
public:
    virtual ~Gateway() = default;
    virtual CompletionResult complete(const CompletionRequest& request) = 0;
    virtual std::string id() const = 0;
};

struct TranscriptEntry {
    std::string digest;
    CompletionRequest request;
    CompletionResult result;
};

/// Request/response history for one QA pair.
struct Transcript {
    std::string qa_id;
    std::vector<TranscriptEntry> entries;
};

/// Filename a transcript is stored under (qa_id sanitized for the
/// filesystem, ".jsonl" suffix).
std::string transcript_filename(const std::string& qa_id);

/// Writes one line-delimited record per entry; creates the directory if
/// needed and flushes before returning. Throws StorageError.
std::filesystem::path write_transcript(const std::filesystem::path& dir,
                                       const Transcript& transcript);

/// Per-pair recording wrapper: forwards to the inner gateway and appends
/// each successful request/response to the transcript.
class RecordingGateway final : public Gateway {
public:
    RecordingGateway(Gateway& inner, Transcript& sink) : inner_(inner), sink_(sink) {}
    CompletionResult complete(const CompletionRequest& request) override;
    std::string id() const override { return inner_.id(); }

private:
    Gateway& inner_;
    Transcript& sink_;
};

/// Scripted mock: returns the queued responses in order; scripted errors
/// are thrown in place of a result.
class MockGateway final : public Gateway {
public:
    enum class ErrorKind { ContextLength, RateLimited, Network, Storage };

    void script_text(std::string text);
    void script_error(ErrorKind kind);

    CompletionResult complete(const CompletionRequest& request) override;
    std::string id() const override { return "mock-script"; }
    int calls() const;

private:
    mutable std::mutex mutex_;
    std::deque<std::variant<std::string, ErrorKind>> script_;
    int calls_ = 0;
};

/// Deterministic offline responder: reads the prompt it is given and
/// answers from the tuples found inside it. Questions can steer it with
/// "r<row> c<col>" cell references, "(noanswer)" and "(freeform)" markers.
/// Mirrors the endpoint's context limit by throwing ContextLengthExceeded.
class EchoMockGateway final : public Gateway {
public:
    explicit EchoMockGateway(int context_limit = 4097,
                             std::shared_ptr<TokenCounter> counter = nullptr);

    CompletionResult complete(const CompletionRequest& request) override;
    std::string id() const override { return "mock-echo"; }

private:
    int context_limit_;
    std::shared_ptr<TokenCounter> counter_;
};

/// Replays recorded completions by request digest. Never falls through to
/// a live backend: absent digests raise ReplayMiss.
class ReplayGateway final : public Gateway {
public:
    static ReplayGateway load_directory(const std::filesystem::path& transcript_dir);

    CompletionResult complete(const CompletionRequest& request) override;
    std::string id() const override { return "replay"; }
    size_t size() const { return cache_.size(); }

private:
    std::map<std::string, CompletionResult> cache_;
};

struct LiveConfig {
    std::string url;      // full completions endpoint URL
    std::string api_key;  // bearer credential; empty sends no auth header
    std::string backend_label = "live";
    int max_attempts = 5;
    std::chrono::milliseconds initial_backoff{1000};
    double backoff_factor = 2.0;
    int concurrency_cap = 4;
    // Token-rate limiter: requests are paced so that approximate prompt +
    // generation tokens stay under this budget. 0 disables it.
    double max_tokens_per_minute = 0;
    std::chrono::seconds http_timeout{120};
};

/// Completions-style HTTP backend with exponential backoff on rate limits
/// and transient failures. Endpoint and credential normally come from the
/// CTQA_ENDPOINT / CTQA_API_KEY environment variables.
class LiveGateway final : public Gateway {
public:
    explicit LiveGateway(LiveConfig config);
    ~LiveGateway() override;

    static LiveConfig config_from_env();

    CompletionResult complete(const CompletionRequest& request) override;
    std::string id() const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace ctqa
