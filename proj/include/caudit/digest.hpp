#pragma once

#include <string>
#include <string_view>

namespace caudit {

// Lowercase hex digests (OpenSSL-backed).
std::string sha1_hex(std::string_view data);
std::string sha256_hex(std::string_view data);
std::string sha256_hex_of_file(const std::string& path);

enum class Base64Alphabet { Standard, UrlSafe };

std::string base64_encode(std::string_view data,
                          Base64Alphabet alphabet = Base64Alphabet::Standard,
                          bool pad = true);

}  // namespace caudit
