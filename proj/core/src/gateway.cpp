#include "ctqa/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "ctqa/errors.hpp"
#include "ctqa/sha256.hpp"

namespace ctqa {

using json = nlohmann::ordered_json;

namespace {

std::string format_temperature(double temperature) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", temperature);
    return buf;
}

json request_to_json(const CompletionRequest& r) {
    return json{{"model", r.model_name},
                {"prompt", r.prompt},
                {"max_tokens", r.max_generated_tokens},
                {"temperature", r.temperature},
                {"stop", r.stop_sequences}};
}

CompletionRequest request_from_json(const json& j) {
    CompletionRequest r;
    r.model_name = j.at("model").get<std::string>();
    r.prompt = j.at("prompt").get<std::string>();
    r.max_generated_tokens = j.at("max_tokens").get<int>();
    r.temperature = j.at("temperature").get<double>();
    r.stop_sequences = j.at("stop").get<std::vector<std::string>>();
    return r;
}

json result_to_json(const CompletionResult& r) {
    return json{{"text", r.text},
                {"prompt_tokens", r.prompt_tokens},
                {"generated_tokens", r.generated_tokens},
                {"backend_id", r.backend_id},
                {"latency_ms", r.latency_ms}};
}

CompletionResult result_from_json(const json& j) {
    CompletionResult r;
    r.text = j.at("text").get<std::string>();
    r.prompt_tokens = j.at("prompt_tokens").get<int>();
    r.generated_tokens = j.at("generated_tokens").get<int>();
    r.backend_id = j.at("backend_id").get<std::string>();
    r.latency_ms = j.at("latency_ms").get<int>();
    return r;
}

}  // namespace

std::string request_digest(const CompletionRequest& request) {
    std::string keyed = request.model_name;
    keyed.push_back('\x1f');
    keyed += format_temperature(request.temperature);
    keyed.push_back('\x1f');
    keyed += request.prompt;
    return sha256_hex(keyed);
}

std::string transcript_filename(const std::string& qa_id) {
    std::string stem;
    for (char c : qa_id) {
        bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
        stem.push_back(ok ? c : '_');
    }
    if (stem.empty()) stem = "pair";
    return stem + ".jsonl";
}

std::filesystem::path write_transcript(const std::filesystem::path& dir,
                                       const Transcript& transcript) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw StorageError("cannot create transcript directory " + dir.string());
    auto path = dir / transcript_filename(transcript.qa_id);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot open transcript file " + path.string());
    std::set<std::string> seen;
    for (const auto& entry : transcript.entries)
        if (!seen.insert(entry.digest).second)
            throw StorageError("duplicate request digest within transcript " +
                               transcript.qa_id + ": " + entry.digest);
    for (const auto& entry : transcript.entries) {
        json line{{"digest", entry.digest},
                  {"qa_id", transcript.qa_id},
                  {"request", request_to_json(entry.request)},
                  {"result", result_to_json(entry.result)}};
        out << line.dump() << '\n';
    }
    out.flush();
    if (!out) throw StorageError("failed writing transcript file " + path.string());
    return path;
}

CompletionResult RecordingGateway::complete(const CompletionRequest& request) {
    auto result = inner_.complete(request);
    sink_.entries.push_back({request_digest(request), request, result});
    return result;
}

void MockGateway::script_text(std::string text) {
    std::lock_guard lock(mutex_);
    script_.emplace_back(std::move(text));
}

void MockGateway::script_error(ErrorKind kind) {
    std::lock_guard lock(mutex_);
    script_.emplace_back(kind);
}

int MockGateway::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

CompletionResult MockGateway::complete(const CompletionRequest& request) {
    std::variant<std::string, ErrorKind> next;
    {
        std::lock_guard lock(mutex_);
        ++calls_;
        if (script_.empty()) throw GatewayError("mock script exhausted");
        next = std::move(script_.front());
        script_.pop_front();
    }
    if (auto* kind = std::get_if<ErrorKind>(&next)) {
        switch (*kind) {
            case ErrorKind::ContextLength:
                throw ContextLengthExceeded("scripted context length error");
            case ErrorKind::RateLimited:
                throw RateLimited("scripted rate limit");
            case ErrorKind::Network:
                throw NetworkError("scripted network error");
            case ErrorKind::Storage:
                throw StorageError("scripted storage error");
        }
    }
    CompletionResult result;
    result.text = std::get<std::string>(next);
    result.prompt_tokens = int((request.prompt.size() + 2) / 3);
    result.generated_tokens = int((result.text.size() + 2) / 3);
    result.backend_id = id();
    result.latency_ms = 0;
    return result;
}

ReplayGateway ReplayGateway::load_directory(const std::filesystem::path& transcript_dir) {
    ReplayGateway gateway;
    if (!std::filesystem::is_directory(transcript_dir))
        throw StorageError("transcript directory not found: " + transcript_dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(transcript_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        std::ifstream in(file, std::ios::binary);
        if (!in) throw StorageError("cannot open transcript file " + file.string());
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("digest") || !j.contains("result"))
                throw StorageError("malformed transcript line " + std::to_string(line_no) +
                                   " in " + file.string());
            gateway.cache_[j.at("digest").get<std::string>()] = result_from_json(j.at("result"));
        }
    }
    return gateway;
}

CompletionResult ReplayGateway::complete(const CompletionRequest& request) {
    auto digest = request_digest(request);
    auto it = cache_.find(digest);
    if (it == cache_.end()) throw ReplayMiss(digest);
    return it->second;
}

}  // namespace ctqa
