#pragma once

#include <string>
#include <string_view>

namespace ctqa {

/// Hex-encoded SHA-256 digest of the input bytes.
std::string sha256_hex(std::string_view data);

}  // namespace ctqa
