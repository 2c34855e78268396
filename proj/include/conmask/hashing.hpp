#pragma once

#include <filesystem>
#include <string>

namespace conmask {

// Hex SHA-1 of "blob <size>\0" + content, the same id git gives a file.
std::string git_blob_sha1(const std::string& content);
std::string git_blob_sha1_file(const std::filesystem::path& path);

}  // namespace conmask
