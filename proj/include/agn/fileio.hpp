#pragma once

#include <string>

namespace agn {

// Writes `<path>.partial`, then renames it over `path`, so readers never see a
// half-written file.
void write_file_atomic(const std::string& path, const std::string& data);
std::string read_file(const std::string& path);

}  // namespace agn
