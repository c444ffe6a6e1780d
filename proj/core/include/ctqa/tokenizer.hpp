#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ctqa {

/// Pluggable token counter used for routing and budget checks.
class TokenCounter {
public:
    virtual ~TokenCounter() = default;
    virtual int count(std::string_view text) const = 0;
    virtual std::string id() const = 0;
    /// True when the counter is a documented approximation rather than a
    /// model vocabulary. Reports flag results produced under it.
    virtual bool approximate() const { return false; }
};

/// Fallback counter: ceil(bytes / 3). Deterministic, vocabulary-free.
class ApproxByteCounter final : public TokenCounter {
public:
    int count(std::string_view text) const override {
        return int((text.size() + 2) / 3);
    }
    std::string id() const override { return "approx-bytes/3"; }
    bool approximate() const override { return true; }
};

/// Byte-pair-encoding counter over a tiktoken-format vocabulary file
/// (base64 token + rank per line). Text is pre-split with a GPT-2 style
/// pattern (contractions, letter runs, digit runs, punctuation runs,
/// whitespace), then each piece is merged greedily by rank.
class BpeTokenCounter final : public TokenCounter {
public:
    static BpeTokenCounter load_tiktoken(const std::filesystem::path& vocab_file);

    int count(std::string_view text) const override;
    std::string id() const override { return "bpe:" + name_; }
    size_t vocab_size() const { return ranks_.size(); }

private:
    std::unordered_map<std::string, int> ranks_;
    std::string name_;

    int count_piece(std::string_view piece) const;
};

/// Splits text the way the BPE counter does; exposed for tests.
std::vector<std::string_view> bpe_pretokenize(std::string_view text);

std::shared_ptr<TokenCounter> make_approx_counter();

/// Counter selected by configuration: a BPE counter when `vocab_file` (or
/// the CTQA_TIKTOKEN_FILE environment variable) names a readable file,
/// the byte approximation otherwise.
std::shared_ptr<TokenCounter> make_counter(const std::string& vocab_file = "");

}  // namespace ctqa
