#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace kga {

// Position-aware error shared by the query and script parsers.
// line/col are 1-based and derived from the byte offset into the source.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t offset, std::size_t line, std::size_t col,
               std::vector<std::string> expected, std::string found)
        : std::runtime_error(render(line, col, expected, found)),
          offset_(offset), line_(line), col_(col),
          expected_(std::move(expected)), found_(std::move(found)) {}

    std::size_t offset() const { return offset_; }
    std::size_t line() const { return line_; }
    std::size_t col() const { return col_; }
    const std::vector<std::string>& expected() const { return expected_; }
    const std::string& found() const { return found_; }

private:
    static std::string render(std::size_t line, std::size_t col,
                              const std::vector<std::string>& expected,
                              const std::string& found);

    std::size_t offset_;
    std::size_t line_;
    std::size_t col_;
    std::vector<std::string> expected_;
    std::string found_;
};

// Computes 1-based (line, col) for a byte offset into text.
std::pair<std::size_t, std::size_t> line_col_at(const std::string& text, std::size_t offset);

class GraphError : public std::runtime_error {
public:
    explicit GraphError(const std::string& what) : std::runtime_error(what) {}
};

class SnapshotError : public std::runtime_error {
public:
    explicit SnapshotError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace kga
