// Out-of-process tools. A plugin is any executable that speaks a one-line
// JSON protocol on stdin/stdout: for each request line
//   {"call_id": "...", "tool": "...", "args": {...}}
// it must answer with exactly one line
//   {"call_id": "...", "success": true, "content": "..."}
// or {"call_id": "...", "success": false, "error": "..."}.
// The process is started once and reused across calls.
#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "kga/tools.hpp"

namespace kga::tools {

class PluginProcess {
  public:
    // Starts `command` (argv[0] is the executable path). Throws ToolError if
    // the process cannot be spawned.
    explicit PluginProcess(std::vector<std::string> command,
                           std::chrono::milliseconds reply_timeout =
                               std::chrono::milliseconds(5000));
    ~PluginProcess();

    PluginProcess(const PluginProcess&) = delete;
    PluginProcess& operator=(const PluginProcess&) = delete;

    // Sends one request and waits for the matching reply line. Throws
    // ToolError on timeout, a dead process, or a malformed reply.
    std::string call(const std::string& tool, const nlohmann::json& args);

    bool alive() const;

  private:
    void send_line(const std::string& line);
    std::string read_line();

    std::vector<std::string> command_;
    std::chrono::milliseconds reply_timeout_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
    long next_call_ = 0;
};

// Reads a plugin manifest of the form
//   {"name": ..., "description": ..., "command": [...], "args": {arg: {type, description, required?}}}
// and registers the described tool, routing every invocation through a
// shared PluginProcess.
void register_plugin_tool(ToolRegistry& registry, const nlohmann::json& manifest);
void register_plugin_tool_file(ToolRegistry& registry, const std::string& manifest_path);

} // namespace kga::tools
