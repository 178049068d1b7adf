#include "kga/tools.hpp"

#include <atomic>
#include <cctype>
#include <fstream>
#include <sstream>

#include "kga/script.hpp"
#include "kga/ziparc.hpp"

namespace kga::tools {

void ToolRegistry::register_tool(ToolSpec spec, ToolFn fn) {
    if (spec.name.empty()) throw ToolError("tool name must not be empty");
    if (tools_.count(spec.name))
        throw ToolError("tool '" + spec.name + "' is already registered");
    if (spec.description.size() > kMaxDescriptionLength)
        throw ToolError("tool '" + spec.name + "' description exceeds " +
                        std::to_string(kMaxDescriptionLength) + " characters");
    tools_.emplace(spec.name, std::make_pair(specs_.size(), std::move(fn)));
    specs_.push_back(std::move(spec));
}

bool ToolRegistry::has(const std::string& name) const { return tools_.count(name) > 0; }

std::string ToolRegistry::render_specs_text() const {
    std::string out;
    for (const auto& spec : specs_) {
        out += "- " + spec.name + ": " + spec.description + "\n";
        for (const auto& [arg, info] : spec.args) {
            out += "    " + arg + " (" + info.type +
                   (info.required ? ", required" : ", optional") + "): " +
                   info.description + "\n";
        }
    }
    return out;
}

namespace {

bool type_matches(const std::string& type, const nlohmann::json& v) {
    if (type == "string") return v.is_string();
    if (type == "integer") return v.is_number_integer() || v.is_number_unsigned();
    if (type == "number") return v.is_number();
    if (type == "boolean") return v.is_boolean();
    return true;
}

} // namespace

ToolResult ToolRegistry::invoke_with_retry(const ToolCall& call, int max_attempts) const {
    ToolResult result;
    auto it = tools_.find(call.tool);
    if (it == tools_.end()) {
        result.content = "unknown tool '" + call.tool + "'";
        result.failure_log.push_back(result.content);
        return result;
    }
    const ToolSpec& spec = specs_[it->second.first];
    if (!call.args.is_object()) {
        result.content = "tool '" + call.tool + "' arguments must be an object";
        result.failure_log.push_back(result.content);
        return result;
    }
    for (const auto& [name, arg] : spec.args) {
        if (!call.args.contains(name)) {
            if (!arg.required) continue;
            result.content = "tool '" + call.tool + "' missing argument '" + name + "'";
            result.failure_log.push_back(result.content);
            return result;
        }
        if (!type_matches(arg.type, call.args.at(name))) {
            result.content = "tool '" + call.tool + "' argument '" + name +
                             "' must be a " + arg.type;
            result.failure_log.push_back(result.content);
            return result;
        }
    }
    for (auto el = call.args.begin(); el != call.args.end(); ++el) {
        if (!spec.args.count(el.key())) {
            result.content = "tool '" + call.tool + "' has no argument '" + el.key() + "'";
            result.failure_log.push_back(result.content);
            return result;
        }
    }

    auto start = std::chrono::steady_clock::now();
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        result.attempts = attempt;
        try {
            result.content = it->second.second(call.args);
            result.success = true;
            break;
        } catch (const std::exception& e) {
            result.failure_log.push_back(e.what());
            result.content = e.what();
        }
    }
    result.duration = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    return result;
}

namespace {

namespace fs = std::filesystem;

// Resolves `relative` under `root`, refusing anything that lexically or
// physically escapes it.
fs::path resolve_under(const fs::path& root, const std::string& relative) {
    fs::path rel(relative);
    if (rel.is_absolute()) throw ToolError("path must be relative: " + relative);
    for (const auto& part : rel) {
        if (part == "..") throw ToolError("path may not contain '..': " + relative);
    }
    fs::path joined = root / rel;
    if (!fs::exists(joined)) throw ToolError("no such file: " + relative);
    fs::path canonical = fs::weakly_canonical(joined);
    fs::path canonical_root = fs::weakly_canonical(root);
    auto [rit, cit] = std::mismatch(canonical_root.begin(), canonical_root.end(),
                                    canonical.begin(), canonical.end());
    if (rit != canonical_root.end())
        throw ToolError("path escapes the fixture root: " + relative);
    return canonical;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ToolError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string lower_ext(const fs::path& path) {
    std::string ext = path.extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

const char* const kBinaryExts[] = {".png", ".jpg", ".jpeg", ".gif", ".bmp", ".pdf",
                                   ".mp3", ".mp4", ".wav", ".ogg", ".avi", ".mov",
                                   ".xls", ".xlsx", ".doc", ".docx", ".so", ".bin"};

// One CSV record per call; handles quoted fields with embedded commas,
// quotes, and newlines. Returns false at end of input.
bool read_csv_record(const std::string& text, std::size_t& pos,
                     std::vector<std::string>& fields) {
    fields.clear();
    if (pos >= text.size()) return false;
    std::string field;
    bool quoted = false;
    while (pos < text.size()) {
        char c = text[pos];
        if (quoted) {
            if (c == '"') {
                if (pos + 1 < text.size() && text[pos + 1] == '"') {
                    field += '"';
                    pos += 2;
                    continue;
                }
                quoted = false;
                ++pos;
                continue;
            }
            field += c;
            ++pos;
            continue;
        }
        if (c == '"' && field.empty()) {
            quoted = true;
            ++pos;
            continue;
        }
        if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            ++pos;
            continue;
        }
        if (c == '\n' || c == '\r') {
            if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
            ++pos;
            fields.push_back(std::move(field));
            return true;
        }
        field += c;
        ++pos;
    }
    fields.push_back(std::move(field));
    return true;
}

std::string csv_to_pipe_table(const std::string& text) {
    std::string out;
    std::size_t pos = 0;
    std::vector<std::string> fields;
    bool first = true;
    while (read_csv_record(text, pos, fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue; // blank line
        std::string row = "|";
        for (const auto& f : fields) {
            std::string cell = f;
            std::size_t at = 0;
            while ((at = cell.find('|', at)) != std::string::npos) {
                cell.replace(at, 1, "\\|");
                at += 2;
            }
            row += " " + cell + " |";
        }
        out += row + "\n";
        if (first) {
            out += "|";
            for (std::size_t i = 0; i < fields.size(); ++i) out += " --- |";
            out += "\n";
            first = false;
        }
    }
    return out;
}

std::string tool_calculator(const nlohmann::json& args) {
    std::string expr = args.at("expression").get<std::string>();
    try {
        return script::eval_math(expr).display();
    } catch (const ParseError& e) {
        throw ToolError(std::string("cannot parse expression: ") + e.what());
    } catch (const script::EvalError& e) {
        throw ToolError(std::string("evaluation failed: ") + e.what());
    }
}

std::string tool_text_inspector(const fs::path& root, const nlohmann::json& args) {
    std::string rel = args.at("path").get<std::string>();
    fs::path path = resolve_under(root, rel);
    if (fs::is_directory(path)) throw ToolError(rel + " is a directory");
    std::string ext = lower_ext(path);
    for (const char* bad : kBinaryExts) {
        if (ext == bad)
            throw ToolError("unsupported file type '" + ext + "' for " + rel);
    }
    std::string content = read_file(path);
    if (content.find('\0') != std::string::npos)
        throw ToolError(rel + " looks binary, cannot inspect");
    std::string out = "# " + fs::path(rel).filename().string() + "\n\n";
    if (ext == ".csv") return out + csv_to_pipe_table(content);
    return out + content;
}

std::string tool_archive_extract(const fs::path& root, const fs::path& scratch,
                                 const nlohmann::json& args) {
    static std::atomic<int> extraction_counter{0};
    std::string rel = args.at("path").get<std::string>();
    fs::path path = resolve_under(root, rel);

    std::vector<ZipEntry> entries;
    try {
        entries = read_zip(path.string());
    } catch (const ZipError& e) {
        throw ToolError(e.what());
    }

    int id = extraction_counter.fetch_add(1);
    fs::path target = scratch / ("extract-" + std::to_string(id));
    fs::create_directories(target);

    std::string listing = "Extracted " + rel + " to " + target.string() + ":\n";
    std::string texts;
    for (const auto& entry : entries) {
        fs::path dest = target / entry.name;
        if (entry.is_dir) {
            fs::create_directories(dest);
            listing += "  " + entry.name + "\n";
            continue;
        }
        fs::create_directories(dest.parent_path());
        std::ofstream out(dest, std::ios::binary | std::ios::trunc);
        out.write(entry.content.data(),
                  static_cast<std::streamsize>(entry.content.size()));
        listing += "  " + entry.name + " (" + std::to_string(entry.content.size()) +
                   " bytes)\n";
        if (entry.content.find('\0') == std::string::npos &&
            entry.content.size() <= 16384) {
            texts += "\n## " + entry.name + "\n" + entry.content + "\n";
        }
    }
    return listing + texts;
}

std::string tool_search(const fs::path& corpus_path, const nlohmann::json& args) {
    std::string query = args.at("query").get<std::string>();
    std::string lowered = query;
    for (char& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

    std::ifstream in(corpus_path);
    if (!in) throw ToolError("cannot open search corpus: " + corpus_path.string());
    nlohmann::json corpus;
    try {
        in >> corpus;
    } catch (const nlohmann::json::parse_error& e) {
        throw ToolError(std::string("corrupt search corpus: ") + e.what());
    }
    if (!corpus.is_array()) throw ToolError("search corpus must be a JSON array");

    std::vector<std::string> snippets;
    for (const auto& entry : corpus) {
        std::string pattern = entry.at("pattern").get<std::string>();
        for (char& c : pattern)
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (lowered.find(pattern) == std::string::npos) continue;
        for (const auto& s : entry.at("snippets"))
            snippets.push_back(s.get<std::string>());
    }
    if (snippets.empty()) return "0 results";
    std::string out = std::to_string(snippets.size()) + " result" +
                      (snippets.size() == 1 ? "" : "s") + ":\n";
    for (const auto& s : snippets) out += "- " + s + "\n";
    return out;
}

} // namespace

void register_builtin_tools(ToolRegistry& registry, const BuiltinToolOptions& options) {
    registry.register_tool(
        ToolSpec{"calculator",
                 "Evaluates an arithmetic expression or a small let/result "
                 "program and returns the value as text.",
                 {{"expression", {"string", "expression to evaluate", true}}}},
        [](const nlohmann::json& args) { return tool_calculator(args); });

    registry.register_tool(
        ToolSpec{"text_inspector",
                 "Reads a text or CSV file from the task fixtures and returns "
                 "its contents; CSV is rendered as a pipe table.",
                 {{"path", {"string", "file path relative to the fixture root", true}},
                  {"question", {"string", "optional focus question", false}}}},
        [root = options.fixture_root](const nlohmann::json& args) {
            return tool_text_inspector(root, args);
        });

    registry.register_tool(
        ToolSpec{"archive_extract",
                 "Unpacks a ZIP archive from the task fixtures into a scratch "
                 "directory and returns the listing plus extracted text files.",
                 {{"path", {"string", "archive path relative to the fixture root", true}}}},
        [root = options.fixture_root, scratch = options.scratch_dir](
            const nlohmann::json& args) {
            return tool_archive_extract(root, scratch, args);
        });

    registry.register_tool(
        ToolSpec{"search",
                 "Looks the query up in the offline search corpus and returns "
                 "matching snippets.",
                 {{"query", {"string", "search query", true}}}},
        [corpus = options.corpus_path](const nlohmann::json& args) {
            return tool_search(corpus, args);
        });
}

} // namespace kga::tools
