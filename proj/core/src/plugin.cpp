#include "kga/plugin.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

namespace kga::tools {

PluginProcess::PluginProcess(std::vector<std::string> command,
                             std::chrono::milliseconds reply_timeout)
    : command_(std::move(command)), reply_timeout_(reply_timeout) {
    if (command_.empty()) throw ToolError("plugin command must not be empty");

    // A plugin that died must surface as EPIPE from write(), not as a fatal
    // SIGPIPE for the whole host process.
    static const bool sigpipe_ignored = [] {
        signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)sigpipe_ignored;

    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0) throw ToolError("pipe failed: " + std::string(strerror(errno)));
    if (pipe(from_child) != 0) {
        close(to_child[0]);
        close(to_child[1]);
        throw ToolError("pipe failed: " + std::string(strerror(errno)));
    }

    pid_ = fork();
    if (pid_ < 0) {
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        throw ToolError("fork failed: " + std::string(strerror(errno)));
    }
    if (pid_ == 0) {
        dup2(to_child[0], STDIN_FILENO);
        dup2(from_child[1], STDOUT_FILENO);
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        std::vector<char*> argv;
        argv.reserve(command_.size() + 1);
        for (auto& part : command_) argv.push_back(part.data());
        argv.push_back(nullptr);
        execvp(argv[0], argv.data());
        // Reached only when exec fails; the parent sees EOF and reports it.
        _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    to_child_ = to_child[1];
    from_child_ = from_child[0];
}

PluginProcess::~PluginProcess() {
    if (to_child_ >= 0) close(to_child_);
    if (from_child_ >= 0) close(from_child_);
    if (pid_ > 0) {
        int status = 0;
        // Give the child a moment to exit on stdin EOF, then force it.
        for (int i = 0; i < 50; ++i) {
            if (waitpid(pid_, &status, WNOHANG) == pid_) return;
            usleep(10000);
        }
        kill(pid_, SIGKILL);
        waitpid(pid_, &status, 0);
    }
}

bool PluginProcess::alive() const {
    if (pid_ <= 0) return false;
    int status = 0;
    return waitpid(pid_, &status, WNOHANG) == 0;
}

void PluginProcess::send_line(const std::string& line) {
    std::string payload = line + "\n";
    std::size_t written = 0;
    while (written < payload.size()) {
        ssize_t n = write(to_child_, payload.data() + written, payload.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ToolError("plugin '" + command_[0] +
                            "' is not accepting input: " + strerror(errno));
        }
        written += static_cast<std::size_t>(n);
    }
}

std::string PluginProcess::read_line() {
    auto deadline = std::chrono::steady_clock::now() + reply_timeout_;
    for (;;) {
        auto newline = buffer_.find('\n');
        if (newline != std::string::npos) {
            std::string line = buffer_.substr(0, newline);
            buffer_.erase(0, newline + 1);
            return line;
        }
        auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0)
            throw ToolError("plugin '" + command_[0] + "' timed out after " +
                            std::to_string(reply_timeout_.count()) + "ms");

        pollfd pfd{from_child_, POLLIN, 0};
        int ready = poll(&pfd, 1, static_cast<int>(remaining.count()));
        if (ready < 0) {
            if (errno == EINTR) continue;
            throw ToolError("poll failed: " + std::string(strerror(errno)));
        }
        if (ready == 0)
            throw ToolError("plugin '" + command_[0] + "' timed out after " +
                            std::to_string(reply_timeout_.count()) + "ms");

        char chunk[4096];
        ssize_t n = read(from_child_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ToolError("plugin '" + command_[0] +
                            "' read failed: " + strerror(errno));
        }
        if (n == 0)
            throw ToolError("plugin '" + command_[0] + "' exited without replying");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

std::string PluginProcess::call(const std::string& tool, const nlohmann::json& args) {
    nlohmann::json request = {
        {"call_id", std::to_string(next_call_++)},
        {"tool", tool},
        {"args", args},
    };
    send_line(request.dump());

    nlohmann::json reply = nlohmann::json::parse(read_line(), nullptr, false);
    if (reply.is_discarded())
        throw ToolError("plugin '" + command_[0] + "' sent a malformed reply");
    if (!reply.contains("call_id") || reply["call_id"] != request["call_id"])
        throw ToolError("plugin '" + command_[0] + "' replied to the wrong call");
    if (reply.value("success", false)) {
        if (!reply.contains("content") || !reply["content"].is_string())
            throw ToolError("plugin '" + command_[0] + "' reply lacks content");
        return reply["content"].get<std::string>();
    }
    std::string error = reply.value("error", "unspecified plugin error");
    throw ToolError(error);
}

void register_plugin_tool(ToolRegistry& registry, const nlohmann::json& manifest) {
    if (!manifest.is_object()) throw ToolError("plugin manifest must be a JSON object");
    for (const char* key : {"name", "description", "command"}) {
        if (!manifest.contains(key))
            throw ToolError("plugin manifest missing '" + std::string(key) + "'");
    }

    ToolSpec spec;
    spec.name = manifest.at("name").get<std::string>();
    spec.description = manifest.at("description").get<std::string>();
    if (manifest.contains("args")) {
        for (auto el = manifest.at("args").begin(); el != manifest.at("args").end(); ++el) {
            ArgSpec arg;
            arg.type = el.value().at("type").get<std::string>();
            arg.description = el.value().value("description", "");
            arg.required = el.value().value("required", true);
            spec.args.emplace(el.key(), std::move(arg));
        }
    }

    std::vector<std::string> command;
    for (const auto& part : manifest.at("command"))
        command.push_back(part.get<std::string>());

    std::chrono::milliseconds timeout(manifest.value("reply_timeout_ms", 5000));

    // The process starts lazily on first use so registering a manifest for a
    // missing binary only fails when the tool is actually invoked.
    auto process = std::make_shared<std::unique_ptr<PluginProcess>>();
    std::string name = spec.name;
    registry.register_tool(std::move(spec),
                           [process, command, timeout, name](const nlohmann::json& args) {
                               if (!*process || !(*process)->alive())
                                   *process = std::make_unique<PluginProcess>(command, timeout);
                               return (*process)->call(name, args);
                           });
}

void register_plugin_tool_file(ToolRegistry& registry, const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw ToolError("cannot open plugin manifest: " + manifest_path);
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::parse_error& e) {
        throw ToolError("corrupt plugin manifest " + manifest_path + ": " + e.what());
    }
    register_plugin_tool(registry, manifest);
}

} // namespace kga::tools
