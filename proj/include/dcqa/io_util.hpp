#pragma once

#include <string>

namespace dcqa {

/// Writes content to a temp file in the target directory, then renames it
/// into place, so readers never observe a half-written file.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace dcqa
