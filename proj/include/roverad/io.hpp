#pragma once

#include <filesystem>
#include <string>

namespace roverad {

std::string read_text_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes: truncate, write, check.
void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace roverad
