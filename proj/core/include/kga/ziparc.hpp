#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace kga {

class ZipError : public std::runtime_error {
public:
    explicit ZipError(const std::string& what) : std::runtime_error(what) {}
};

struct ZipEntry {
    std::string name;    // forward-slash separated, relative
    std::string content; // empty for directories
    bool is_dir = false;
};

// Minimal ZIP reader: central-directory driven, methods 0 (stored) and
// 8 (deflate), CRC-checked. Rejects archives whose entry names are absolute,
// contain "..", or use backslashes, so extraction cannot escape its target.
std::vector<ZipEntry> read_zip(const std::string& path);

// Writer counterpart used to build fixtures; deflate when `compress`.
void write_zip(const std::string& path, const std::vector<ZipEntry>& entries,
               bool compress = false);

} // namespace kga
