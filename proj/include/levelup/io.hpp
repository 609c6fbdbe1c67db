#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace levelup {

std::string read_text_file(const std::filesystem::path& path);

// Write-temp-then-rename so readers never observe a partial file and
// re-emission of identical content is byte-identical.
void write_text_file_atomic(const std::filesystem::path& path,
                            std::string_view content);

std::string fnv1a64_hex(std::string_view data);
std::string file_hash_hex(const std::filesystem::path& path);

// Shortest round-trip decimal representation of a double ("0.1", not
// "0.10000000000000001"); deterministic, used for CSV cells.
std::string double_repr(double value);

}  // namespace levelup
