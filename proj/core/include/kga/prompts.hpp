#pragma once

#include <map>
#include <string>
#include <vector>

#include "kga/error.hpp"

namespace kga {

class PromptError : public std::runtime_error {
public:
    explicit PromptError(const std::string& what) : std::runtime_error(what) {}
};

// Text template with {slot_name} placeholders. Doubled braces ({{ and }})
// escape literal braces, which keeps JSON inside few-shot examples intact.
// Templates live as plain files so they can be tuned without recompiling.
class PromptTemplate {
public:
    static PromptTemplate from_string(std::string name, std::string body);
    static PromptTemplate from_file(const std::string& path);

    // Every slot must be filled; a missing one raises PromptError naming it.
    // Keys in `slots` that the template does not mention are ignored.
    std::string render(const std::map<std::string, std::string>& slots) const;

    const std::string& name() const { return name_; }
    const std::vector<std::string>& slot_names() const { return slots_; }

private:
    std::string name_;
    std::string body_;
    std::vector<std::string> slots_; // unique, in first-appearance order
};

// All templates of a directory (*.xml and *.txt), addressed by basename.
class PromptLibrary {
public:
    static PromptLibrary from_directory(const std::string& dir);

    const PromptTemplate& get(const std::string& name) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, PromptTemplate> templates_;
};

} // namespace kga
