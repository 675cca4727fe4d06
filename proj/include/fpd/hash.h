#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace fpd {

// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_file(const std::string& path);

}  // namespace fpd
