#include "ctqa/sha256.hpp"

#include <array>
#include <cstdint>
#include <algorithm>
#include <cstring>

namespace ctqa {

namespace {

constexpr std::array<uint32_t, 64> kRound = {
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
    0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
    0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
    0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
    0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
    0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
    0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
    0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
    0xc67178f2};

inline uint32_t rotr(uint32_t x, unsigned n) { return (x >> n) | (x << (32 - n)); }

struct Sha256 {
    std::array<uint32_t, 8> state = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                                     0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
    std::array<uint8_t, 64> buffer{};
    uint64_t total = 0;
    size_t fill = 0;

    void compress(const uint8_t* block) {
        std::array<uint32_t, 64> w;
        for (int i = 0; i < 16; ++i)
            w[size_t(i)] = uint32_t(block[i * 4]) << 24 | uint32_t(block[i * 4 + 1]) << 16 |
                           uint32_t(block[i * 4 + 2]) << 8 | uint32_t(block[i * 4 + 3]);
        for (int i = 16; i < 64; ++i) {
            uint32_t s0 = rotr(w[size_t(i - 15)], 7) ^ rotr(w[size_t(i - 15)], 18) ^
                          (w[size_t(i - 15)] >> 3);
            uint32_t s1 = rotr(w[size_t(i - 2)], 17) ^ rotr(w[size_t(i - 2)], 19) ^
                          (w[size_t(i - 2)] >> 10);
            w[size_t(i)] = w[size_t(i - 16)] + s0 + w[size_t(i - 7)] + s1;
        }
        auto [a, b, c, d, e, f, g, h] = state;
        for (int i = 0; i < 64; ++i) {
            uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
            uint32_t ch = (e & f) ^ (~e & g);
            uint32_t t1 = h + s1 + ch + kRound[size_t(i)] + w[size_t(i)];
            uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
            uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
            uint32_t t2 = s0 + maj;
            h = g;
            g = f;
            f = e;
            e = d + t1;
            d = c;
            c = b;
            b = a;
            a = t1 + t2;
        }
        state[0] += a;
        state[1] += b;
        state[2] += c;
        state[3] += d;
        state[4] += e;
        state[5] += f;
        state[6] += g;
        state[7] += h;
    }

    void update(const uint8_t* data, size_t len) {
        total += len;
        while (len > 0) {
            size_t take = std::min(len, buffer.size() - fill);
            std::memcpy(buffer.data() + fill, data, take);
            fill += take;
            data += take;
            len -= take;
            if (fill == buffer.size()) {
                compress(buffer.data());
                fill = 0;
            }
        }
    }

    std::array<uint8_t, 32> finish() {
        uint64_t bits = total * 8;
        uint8_t pad = 0x80;
        update(&pad, 1);
        uint8_t zero = 0;
        while (fill != 56) update(&zero, 1);
        std::array<uint8_t, 8> len_bytes;
        for (int i = 0; i < 8; ++i) len_bytes[size_t(i)] = uint8_t(bits >> (56 - 8 * i));
        update(len_bytes.data(), len_bytes.size());
        std::array<uint8_t, 32> digest;
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 4; ++j)
                digest[size_t(i * 4 + j)] = uint8_t(state[size_t(i)] >> (24 - 8 * j));
        return digest;
    }
};

}  // namespace

std::string sha256_hex(std::string_view data) {
    Sha256 hasher;
    hasher.update(reinterpret_cast<const uint8_t*>(data.data()), data.size());
    auto digest = hasher.finish();
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (uint8_t byte : digest) {
        out.push_back(hex[byte >> 4]);
        out.push_back(hex[byte & 0xf]);
    }
    return out;
}

}  // namespace ctqa
