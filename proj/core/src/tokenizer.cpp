#include "ctqa/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <vector>

#include "ctqa/errors.hpp"

namespace ctqa {

namespace {

bool is_letter(unsigned char c) { return std::isalpha(c) || c >= 0x80; }
bool is_digit(unsigned char c) { return std::isdigit(c) != 0; }
bool is_space(unsigned char c) { return std::isspace(c) != 0; }

// Matches 's 't 're 've 'm 'll 'd at `i`; returns the matched length or 0.
size_t contraction_len(std::string_view text, size_t i) {
    if (text[i] != '\'' || i + 1 >= text.size()) return 0;
    char a = text[i + 1];
    if (a == 's' || a == 't' || a == 'm' || a == 'd') return 2;
    if (i + 2 < text.size()) {
        char b = text[i + 2];
        if ((a == 'r' && b == 'e') || (a == 'v' && b == 'e') || (a == 'l' && b == 'l')) return 3;
    }
    return 0;
}

std::string decode_base64(std::string_view in) {
    static const auto table = [] {
        std::array<int, 256> t;
        t.fill(-1);
        const char* alphabet =
            "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
        for (int i = 0; i < 64; ++i) t[size_t(static_cast<unsigned char>(alphabet[i]))] = i;
        return t;
    }();
    std::string out;
    int acc = 0;
    int bits = 0;
    for (char c : in) {
        if (c == '=') break;
        int v = table[size_t(static_cast<unsigned char>(c))];
        if (v < 0) throw SchemaError("invalid base64 character in vocabulary");
        acc = (acc << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(char((acc >> bits) & 0xff));
        }
    }
    return out;
}

}  // namespace

std::vector<std::string_view> bpe_pretokenize(std::string_view text) {
    std::vector<std::string_view> pieces;
    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        if (size_t len = contraction_len(text, i); len > 0) {
            pieces.push_back(text.substr(i, len));
            i += len;
            continue;
        }
        size_t start = i;
        size_t k = (text[i] == ' ' && i + 1 < n) ? i + 1 : i;
        unsigned char head = k < n ? static_cast<unsigned char>(text[k]) : 0;
        if (k < n && is_letter(head)) {
            size_t e = k;
            while (e < n && is_letter(static_cast<unsigned char>(text[e]))) ++e;
            pieces.push_back(text.substr(start, e - start));
            i = e;
        } else if (k < n && is_digit(head)) {
            size_t e = k;
            while (e < n && is_digit(static_cast<unsigned char>(text[e]))) ++e;
            pieces.push_back(text.substr(start, e - start));
            i = e;
        } else if (k < n && !is_space(head)) {
            size_t e = k;
            while (e < n) {
                unsigned char c = static_cast<unsigned char>(text[e]);
                if (is_space(c) || is_letter(c) || is_digit(c)) break;
                ++e;
            }
            pieces.push_back(text.substr(start, e - start));
            i = e;
        } else {
            // Whitespace run: keep the final space attached to the next
            // token when one follows.
            size_t e = i;
            while (e < n && is_space(static_cast<unsigned char>(text[e]))) ++e;
            size_t stop = (e < n && e - i > 1) ? e - 1 : e;
            if (stop == i) stop = i + 1;
            pieces.push_back(text.substr(i, stop - i));
            i = stop;
        }
    }
    return pieces;
}

BpeTokenCounter BpeTokenCounter::load_tiktoken(const std::filesystem::path& vocab_file) {
    std::ifstream in(vocab_file, std::ios::binary);
    if (!in) throw SchemaError("cannot open vocabulary file " + vocab_file.string());
    BpeTokenCounter counter;
    counter.name_ = vocab_file.stem().string();
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto space = line.find(' ');
        if (space == std::string::npos)
            throw SchemaError("malformed vocabulary line " + std::to_string(line_no) + " in " +
                              vocab_file.string());
        std::string token = decode_base64(std::string_view(line).substr(0, space));
        int rank = std::atoi(line.c_str() + space + 1);
        counter.ranks_.emplace(std::move(token), rank);
    }
    if (counter.ranks_.empty())
        throw SchemaError("empty vocabulary file " + vocab_file.string());
    return counter;
}

int BpeTokenCounter::count_piece(std::string_view piece) const {
    if (piece.empty()) return 0;
    if (ranks_.count(std::string(piece))) return 1;
    // Byte-level merge loop. Pieces are short after pre-tokenization; cap
    // the quadratic loop for pathological unbroken runs.
    constexpr size_t kChunk = 512;
    if (piece.size() > kChunk) {
        int total = 0;
        for (size_t i = 0; i < piece.size(); i += kChunk)
            total += count_piece(piece.substr(i, kChunk));
        return total;
    }
    std::vector<std::string> parts;
    parts.reserve(piece.size());
    for (char c : piece) parts.emplace_back(1, c);
    while (parts.size() > 1) {
        int best_rank = std::numeric_limits<int>::max();
        size_t best_i = 0;
        for (size_t i = 0; i + 1 < parts.size(); ++i) {
            auto it = ranks_.find(parts[i] + parts[i + 1]);
            if (it != ranks_.end() && it->second < best_rank) {
                best_rank = it->second;
                best_i = i;
            }
        }
        if (best_rank == std::numeric_limits<int>::max()) break;
        parts[best_i] += parts[best_i + 1];
        parts.erase(parts.begin() + long(best_i) + 1);
    }
    return int(parts.size());
}

int BpeTokenCounter::count(std::string_view text) const {
    int total = 0;
    for (auto piece : bpe_pretokenize(text)) total += count_piece(piece);
    return total;
}

std::shared_ptr<TokenCounter> make_approx_counter() {
    return std::make_shared<ApproxByteCounter>();
}

std::shared_ptr<TokenCounter> make_counter(const std::string& vocab_file) {
    std::string path = vocab_file;
    if (path.empty()) {
        if (const char* env = std::getenv("CTQA_TIKTOKEN_FILE")) path = env;
    }
    if (!path.empty() && std::filesystem::exists(path))
        return std::make_shared<BpeTokenCounter>(BpeTokenCounter::load_tiktoken(path));
    return make_approx_counter();
}

}  // namespace ctqa
