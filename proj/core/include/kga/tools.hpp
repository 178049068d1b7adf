#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace kga::tools {

class ToolError : public std::runtime_error {
public:
    explicit ToolError(const std::string& what) : std::runtime_error(what) {}
};

struct ArgSpec {
    std::string type; // "string", "integer", "number", "boolean"
    std::string description;
    bool required = true;
};

inline constexpr std::size_t kMaxDescriptionLength = 1024;

struct ToolSpec {
    std::string name;
    std::string description; // at most kMaxDescriptionLength characters
    std::map<std::string, ArgSpec> args;
};

struct ToolCall {
    std::string tool;
    nlohmann::json args = nlohmann::json::object();
    std::string call_id;
};

struct ToolResult {
    bool success = false;
    std::string content;
    int attempts = 0;
    std::chrono::milliseconds duration{0};
    std::vector<std::string> failure_log; // one entry per failed attempt
};

using ToolFn = std::function<std::string(const nlohmann::json& args)>;

// Named tool collection. Immutable once handed to a controller; duplicate
// names and over-long descriptions are rejected at registration.
class ToolRegistry {
public:
    void register_tool(ToolSpec spec, ToolFn fn);
    bool has(const std::string& name) const;
    const std::vector<ToolSpec>& specs() const { return specs_; } // registration order

    // Text block describing every tool, for inclusion in prompts.
    std::string render_specs_text() const;

    // Validates the call against the spec (unknown tool, missing/unknown
    // argument, wrong type gives a failed result with zero attempts), then
    // invokes with up to max_attempts tries, collecting failure reasons.
    ToolResult invoke_with_retry(const ToolCall& call, int max_attempts) const;

private:
    std::vector<ToolSpec> specs_;
    std::map<std::string, std::pair<std::size_t, ToolFn>> tools_;
};

struct BuiltinToolOptions {
    std::filesystem::path fixture_root; // read sandbox for file tools
    std::filesystem::path scratch_dir;  // archive extraction target
    std::filesystem::path corpus_path;  // search fixture (JSON)
};

// Registers the stock tools: calculator, text_inspector, archive_extract,
// and search. File tools only read under fixture_root and only write under
// scratch_dir.
void register_builtin_tools(ToolRegistry& registry, const BuiltinToolOptions& options);

} // namespace kga::tools
