#pragma once

// Prompt templates are plain text files with {{name}} placeholders, loaded
// from a directory at runtime so wording can change without a rebuild.

#include <filesystem>
#include <map>
#include <string>

namespace icat {

class PromptTemplate {
public:
    PromptTemplate() = default;
    PromptTemplate(std::string name, std::string text) : name_(std::move(name)), text_(std::move(text)) {}

    /// Substitutes every placeholder in one pass; substituted values are not
    /// rescanned. A placeholder without a value is a ConfigError.
    std::string render(const std::map<std::string, std::string>& values) const;

    const std::string& name() const { return name_; }
    const std::string& text() const { return text_; }

private:
    std::string name_;
    std::string text_;
};

class PromptLibrary {
public:
    /// Loads every *.txt file in `dir`, keyed by file stem.
    static PromptLibrary load(const std::filesystem::path& dir);
    /// The prompts/ directory of the source tree, or $ICAT_PROMPT_DIR if set.
    static std::filesystem::path default_dir();
    static const PromptLibrary& shared();

    const PromptTemplate& get(const std::string& name) const;
    bool contains(const std::string& name) const { return templates_.count(name) != 0; }
    void set(const std::string& name, std::string text) { templates_[name] = PromptTemplate(name, std::move(text)); }
    std::string render(const std::string& name, const std::map<std::string, std::string>& values) const {
        return get(name).render(values);
    }

private:
    std::map<std::string, PromptTemplate> templates_;
};

}  // namespace icat
