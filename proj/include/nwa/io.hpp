#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace nwa::io {

void append_u64(std::string& out, std::uint64_t v);
std::uint64_t read_u64(std::string_view bytes, std::size_t& at);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// FNV-1a over the bytes; used for reproducibility fingerprints.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 1469598103934665603ULL);
std::string hex64(std::uint64_t v);

}  // namespace nwa::io
