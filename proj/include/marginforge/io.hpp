#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace marginforge {

std::string read_text_file(const std::string& path);

// Writes to `<path>.tmp.<pid>` then renames over `path`, so readers never
// observe a partially written file.
void write_text_file_atomic(const std::string& path, std::string_view content);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

std::string hex64(std::uint64_t value);

}  // namespace marginforge
