#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fpd::binio {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
void put_bytes(std::vector<std::uint8_t>& out, std::string_view bytes);

std::uint32_t get_u32(const std::uint8_t* p);
float get_f32(const std::uint8_t* p);

// Whole file; throws Error when it cannot be opened.
std::vector<std::uint8_t> read_file(const std::string& path);

// Writes to `path.tmp` then renames over `path`.
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace fpd::binio
