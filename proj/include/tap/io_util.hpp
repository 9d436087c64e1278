#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tap {

std::string read_text_file(const std::filesystem::path& path);

// Writes to a sibling temporary file, then renames over the target.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view content);

std::vector<std::string> split_lines(std::string_view text);
std::string trim(std::string_view text);

// Shortest decimal string that parses back to the same double.
std::string format_double(double value);

// Stable 64-bit string hash (FNV-1a); used for seeds, never for security.
std::uint64_t fnv1a64(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL);

std::uint64_t splitmix64(std::uint64_t x);

// Derives an independent seed for a named stage from the global run seed.
std::uint64_t sub_seed(std::uint64_t seed, std::string_view stage);

}  // namespace tap
