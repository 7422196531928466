#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace cvr {

std::string read_text(const std::filesystem::path& path);  // IoError
void write_text(const std::filesystem::path& path, std::string_view text);
std::string file_digest(const std::filesystem::path& path);  // hex FNV-1a of the bytes

}  // namespace cvr
