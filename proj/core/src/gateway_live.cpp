#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ctqa/errors.hpp"
#include "ctqa/gateway.hpp"

namespace ctqa {

using json = nlohmann::json;

namespace {

struct ParsedUrl {
    std::string scheme;
    std::string host_port;  // host[:port] as httplib expects
    std::string path;
};

ParsedUrl parse_url(const std::string& url) {
    ParsedUrl out;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw NetworkError("endpoint URL must start with http:// or https://: " + url);
    out.scheme = url.substr(0, scheme_end);
    auto rest = url.substr(scheme_end + 3);
    auto slash = rest.find('/');
    out.host_port = slash == std::string::npos ? rest : rest.substr(0, slash);
    out.path = slash == std::string::npos ? "/" : rest.substr(slash);
    return out;
}

bool looks_like_context_error(const std::string& body) {
    static const char* kNeedles[] = {"context length", "context_length", "maximum context",
                                     "too many tokens", "reduce your prompt"};
    for (const char* needle : kNeedles)
        if (body.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

struct LiveGateway::Impl {
    LiveConfig config;
    ParsedUrl url;
    std::unique_ptr<httplib::Client> client;
    std::mt19937 jitter_rng{std::random_device{}()};
    std::mutex mutex;
    std::condition_variable slot_available;
    int in_flight = 0;
    std::chrono::steady_clock::time_point next_allowed = std::chrono::steady_clock::now();

    explicit Impl(LiveConfig cfg) : config(std::move(cfg)), url(parse_url(config.url)) {
        client = std::make_unique<httplib::Client>(url.scheme + "://" + url.host_port);
        client->set_connection_timeout(config.http_timeout);
        client->set_read_timeout(config.http_timeout);
        client->set_write_timeout(config.http_timeout);
        if (!config.api_key.empty()) client->set_bearer_token_auth(config.api_key);
    }

    // Blocks until a concurrency slot and, when the token-rate limiter is
    // on, the next allowed send time. Pacing is proportional to the
    // request's token cost.
    void acquire_slot(int token_cost) {
        std::unique_lock lock(mutex);
        slot_available.wait(lock, [this] { return in_flight < config.concurrency_cap; });
        ++in_flight;
        if (config.max_tokens_per_minute > 0) {
            auto now = std::chrono::steady_clock::now();
            auto wait_until = std::max(now, next_allowed);
            double seconds = 60.0 * double(token_cost) / config.max_tokens_per_minute;
            next_allowed = wait_until + std::chrono::microseconds(int64_t(seconds * 1e6));
            lock.unlock();
            std::this_thread::sleep_until(wait_until);
        }
    }

    void release_slot() {
        {
            std::lock_guard lock(mutex);
            --in_flight;
        }
        slot_available.notify_one();
    }

    std::chrono::milliseconds backoff_delay(int attempt) {
        double base = double(config.initial_backoff.count());
        for (int i = 0; i < attempt; ++i) base *= config.backoff_factor;
        std::uniform_real_distribution<double> jitter(0.0, base * 0.25);
        double ms;
        {
            std::lock_guard lock(mutex);
            ms = base + jitter(jitter_rng);
        }
        return std::chrono::milliseconds(int64_t(ms));
    }
};

LiveGateway::LiveGateway(LiveConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
LiveGateway::~LiveGateway() = default;

std::string LiveGateway::id() const { return impl_->config.backend_label; }

LiveConfig LiveGateway::config_from_env() {
    LiveConfig config;
    if (const char* url = std::getenv("CTQA_ENDPOINT")) config.url = url;
    if (const char* key = std::getenv("CTQA_API_KEY")) config.api_key = key;
    return config;
}

CompletionResult LiveGateway::complete(const CompletionRequest& request) {
    json body{{"model", request.model_name},
              {"prompt", request.prompt},
              {"max_tokens", request.max_generated_tokens},
              {"temperature", request.temperature}};
    if (!request.stop_sequences.empty()) body["stop"] = request.stop_sequences;
    const std::string payload = body.dump();

    const int token_cost =
        int(request.prompt.size() / 3) + request.max_generated_tokens;

    std::string last_error;
    for (int attempt = 0; attempt < impl_->config.max_attempts; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(impl_->backoff_delay(attempt - 1));

        impl_->acquire_slot(token_cost);
        auto started = std::chrono::steady_clock::now();
        auto res = impl_->client->Post(impl_->url.path, payload, "application/json");
        auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);
        impl_->release_slot();

        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;  // connect/read failure: retry
        }
        if (res->status == 429) {
            last_error = "HTTP 429";
            if (attempt + 1 == impl_->config.max_attempts)
                throw RateLimited("rate limited after " +
                                  std::to_string(impl_->config.max_attempts) + " attempts");
            continue;
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status == 400 && looks_like_context_error(res->body))
            throw ContextLengthExceeded("endpoint rejected over-length prompt: " + res->body);
        if (res->status != 200)
            throw NetworkError("endpoint returned HTTP " + std::to_string(res->status) + ": " +
                               res->body);

        json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty())
            throw NetworkError("endpoint returned an unparseable completion body");
        CompletionResult result;
        result.text = parsed["choices"][0].value("text", "");
        if (parsed.contains("usage")) {
            result.prompt_tokens = parsed["usage"].value("prompt_tokens", 0);
            result.generated_tokens = parsed["usage"].value("completion_tokens", 0);
        }
        result.backend_id = id();
        result.latency_ms = int(elapsed.count());
        return result;
    }
    throw NetworkError("request failed after " + std::to_string(impl_->config.max_attempts) +
                       " attempts: " + last_error);
}

}  // namespace ctqa
