#include "icat/prompts.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "icat/error.hpp"

#ifndef ICAT_PROMPT_DIR
#define ICAT_PROMPT_DIR "prompts"
#endif

namespace icat {

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
    std::string out;
    out.reserve(text_.size());
    std::size_t pos = 0;
    while (true) {
        const auto open = text_.find("{{", pos);
        if (open == std::string::npos) break;
        const auto close = text_.find("}}", open + 2);
        if (close == std::string::npos) break;
        const auto key = text_.substr(open + 2, close - open - 2);
        const auto it = values.find(key);
        if (it == values.end()) throw ConfigError("prompt '" + name_ + "' needs a value for {{" + key + "}}");
        out.append(text_, pos, open - pos);
        out += it->second;
        pos = close + 2;
    }
    out.append(text_, pos, std::string::npos);
    return out;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigError("prompt directory " + dir.string() + " not found");
    PromptLibrary lib;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream body;
        body << in.rdbuf();
        lib.set(entry.path().stem().string(), body.str());
    }
    return lib;
}

std::filesystem::path PromptLibrary::default_dir() {
    if (const char* env = std::getenv("ICAT_PROMPT_DIR"); env != nullptr && *env != '\0') return env;
    return ICAT_PROMPT_DIR;
}

const PromptLibrary& PromptLibrary::shared() {
    static const PromptLibrary lib = load(default_dir());
    return lib;
}

const PromptTemplate& PromptLibrary::get(const std::string& name) const {
    const auto it = templates_.find(name);
    if (it == templates_.end()) throw ConfigError("no prompt template named '" + name + "'");
    return it->second;
}

}  // namespace icat
