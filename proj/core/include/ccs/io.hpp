// Small filesystem and formatting helpers shared by the harness.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ccs::io {

void ensure_directory(const std::string& path);

// Write-temp-then-rename so readers never observe partial files.
void atomic_write(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

std::string format_double(double v);  // %.17g, locale-free

}  // namespace ccs::io
