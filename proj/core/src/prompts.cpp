#include "kga/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace kga {

namespace {

bool slot_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

} // namespace

PromptTemplate PromptTemplate::from_string(std::string name, std::string body) {
    PromptTemplate t;
    t.name_ = std::move(name);
    t.body_ = std::move(body);
    const std::string& b = t.body_;
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (b[i] == '{' && i + 1 < b.size() && b[i + 1] == '{') {
            ++i;
            continue;
        }
        if (b[i] != '{') continue;
        std::size_t j = i + 1;
        while (j < b.size() && slot_char(b[j])) ++j;
        if (j > i + 1 && j < b.size() && b[j] == '}') {
            std::string slot = b.substr(i + 1, j - i - 1);
            if (std::find(t.slots_.begin(), t.slots_.end(), slot) == t.slots_.end())
                t.slots_.push_back(slot);
            i = j;
        }
    }
    return t;
}

PromptTemplate PromptTemplate::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PromptError("cannot open template: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(std::filesystem::path(path).stem().string(), ss.str());
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& slots) const {
    std::string out;
    out.reserve(body_.size());
    for (std::size_t i = 0; i < body_.size(); ++i) {
        char c = body_[i];
        if (c == '{' && i + 1 < body_.size() && body_[i + 1] == '{') {
            out += '{';
            ++i;
            continue;
        }
        if (c == '}' && i + 1 < body_.size() && body_[i + 1] == '}') {
            out += '}';
            ++i;
            continue;
        }
        if (c == '{') {
            std::size_t j = i + 1;
            while (j < body_.size() && slot_char(body_[j])) ++j;
            if (j > i + 1 && j < body_.size() && body_[j] == '}') {
                std::string slot = body_.substr(i + 1, j - i - 1);
                auto it = slots.find(slot);
                if (it == slots.end())
                    throw PromptError("template '" + name_ + "' slot '" + slot +
                                      "' was not filled");
                out += it->second;
                i = j;
                continue;
            }
        }
        out += c;
    }
    return out;
}

PromptLibrary PromptLibrary::from_directory(const std::string& dir) {
    namespace fs = std::filesystem;
    PromptLibrary lib;
    if (!fs::is_directory(dir)) throw PromptError("not a template directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        if (ext == ".xml" || ext == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        PromptTemplate t = PromptTemplate::from_file(path.string());
        lib.templates_.emplace(t.name(), std::move(t));
    }
    if (lib.templates_.empty())
        throw PromptError("no templates (*.xml, *.txt) in " + dir);
    return lib;
}

const PromptTemplate& PromptLibrary::get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw PromptError("no template named '" + name + "'");
    return it->second;
}

std::vector<std::string> PromptLibrary::names() const {
    std::vector<std::string> out;
    out.reserve(templates_.size());
    for (const auto& [name, _] : templates_) out.push_back(name);
    return out;
}

} // namespace kga
