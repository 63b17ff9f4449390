#include "icat/claims.hpp"

#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "icat/error.hpp"
#include "icat/text.hpp"

namespace icat {

using nlohmann::json;

namespace {

// Length of the enumeration marker at the start of `line` (including the
// whitespace after it), or 0 if there is none.
std::size_t marker_length(std::string_view line) {
    std::size_t i = 0;
    if (line.substr(0, 3) == "\xE2\x80\xA2") {
        i = 3;
    } else if (!line.empty() && (line[0] == '-' || line[0] == '*')) {
        i = 1;
    } else {
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
        if (i == 0 || i >= line.size() || (line[i] != '.' && line[i] != ')')) return 0;
        ++i;
    }
    if (i == line.size()) return i;
    if (!std::isspace(static_cast<unsigned char>(line[i]))) return 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    return i;
}

std::optional<std::vector<std::string>> as_string_array(std::string_view text) {
    json parsed;
    try {
        parsed = json::parse(text);
    } catch (const json::parse_error&) {
        return std::nullopt;
    }
    if (!parsed.is_array()) return std::nullopt;
    std::vector<std::string> items;
    for (const auto& v : parsed) {
        if (!v.is_string()) return std::nullopt;
        auto item = std::string(trim(v.get<std::string>()));
        if (!item.empty()) items.push_back(std::move(item));
    }
    return items;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        lines.push_back(trim(text.substr(pos, end - pos)));
        pos = end + 1;
    }
    return lines;
}

std::string chat_with_context(ChatClient& chat, const std::string& prompt, const std::string& what) {
    try {
        return chat.chat(prompt);
    } catch (const BackendError& e) {
        throw BackendError(what + ": " + e.what(), e.transient(), e.status());
    }
}

}  // namespace

std::vector<std::string> request_list(ChatClient& chat, const std::string& prompt, const std::string& what,
                                      const PromptLibrary& prompts) {
    auto completion = chat_with_context(chat, prompt, what);
    try {
        return parse_claim_list(completion);
    } catch (const ParseError&) {
        spdlog::warn("{}: completion was not a list, re-prompting", what);
    }
    completion = chat_with_context(chat, prompt + prompts.get("list_format_reminder").text(), what);
    try {
        return parse_claim_list(completion);
    } catch (const ParseError&) {
        throw ParseError(what + ": completion is not a list after re-prompt", 0, completion);
    }
}

namespace {

std::optional<SyntheticExample> parse_example(const std::string& completion) {
    const auto open = completion.find('{');
    const auto close = completion.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
    json parsed;
    try {
        parsed = json::parse(completion.substr(open, close - open + 1));
    } catch (const json::parse_error&) {
        return std::nullopt;
    }
    if (!parsed.is_object() || !parsed.contains("paragraph") || !parsed["paragraph"].is_string() ||
        !parsed.contains("claims") || !parsed["claims"].is_array()) {
        return std::nullopt;
    }
    SyntheticExample ex;
    ex.paragraph = std::string(trim(parsed["paragraph"].get<std::string>()));
    for (const auto& c : parsed["claims"]) {
        if (!c.is_string()) return std::nullopt;
        auto claim = strip_list_marker(c.get<std::string>());
        if (!claim.empty()) ex.claims.push_back(std::move(claim));
    }
    if (ex.paragraph.empty() || ex.claims.empty()) return std::nullopt;
    return ex;
}

}  // namespace

std::string strip_list_marker(std::string_view line) {
    line = trim(line);
    return std::string(trim(line.substr(marker_length(line))));
}

std::vector<std::string> parse_claim_list(const std::string& completion) {
    const auto text = trim(completion);
    if (auto items = as_string_array(text)) return *items;

    const auto lines = split_lines(text);
    std::vector<std::string> marked;
    bool any_marker = false;
    for (const auto line : lines) {
        if (line.empty() || marker_length(line) == 0) continue;
        any_marker = true;
        auto item = strip_list_marker(line);
        if (!item.empty()) marked.push_back(std::move(item));
    }
    if (any_marker) return marked;

    const auto open = text.find('[');
    const auto close = text.rfind(']');
    if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
        if (auto items = as_string_array(text.substr(open, close - open + 1))) return *items;
    }

    std::vector<std::string> plain;
    for (const auto line : lines) {
        if (!line.empty()) plain.emplace_back(line);
    }
    if (plain.size() >= 2) return plain;
    throw ParseError("completion is neither a JSON array nor a line list", 0, completion);
}

std::string format_numbered_list(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        out += std::to_string(i + 1) + ". " + items[i] + "\n";
    }
    return out;
}

std::vector<AtomicClaim> extract_claims(const std::string& response_text, ChatClient& chat,
                                        const std::string& response_id, const PromptLibrary& prompts) {
    if (trim(response_text).empty()) return {};
    const auto prompt = prompts.render("claim_extraction", {{"response", response_text}});
    const auto items = request_list(chat, prompt, "claim extraction", prompts);
    std::vector<AtomicClaim> claims;
    claims.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        claims.push_back({static_cast<int>(i + 1), items[i], response_id});
    }
    return claims;
}

json to_json(const SyntheticExample& example) {
    return {{"topic", example.topic},
            {"entity", example.entity},
            {"paragraph", example.paragraph},
            {"claims", example.claims}};
}

std::vector<SyntheticExample> generate_synthetic_data(ChatClient& chat, std::size_t n_topics,
                                                      std::size_t entities_per_topic, const PromptLibrary& prompts) {
    if (n_topics == 0 || entities_per_topic == 0) throw ContractError("topic and entity counts must be positive");

    auto take = [](std::vector<std::string> items, std::size_t n, const std::string& stage) {
        if (items.size() < n) {
            throw ParseError(stage + ": expected " + std::to_string(n) + " items, got " + std::to_string(items.size()));
        }
        items.resize(n);
        return items;
    };

    const auto topics_prompt = prompts.render("synth_topics", {{"count", std::to_string(n_topics)}});
    const auto topics = take(request_list(chat, topics_prompt, "topic stage", prompts), n_topics, "topic stage");

    std::vector<SyntheticExample> out;
    out.reserve(n_topics * entities_per_topic);
    for (const auto& topic : topics) {
        const auto stage = "entity stage for topic '" + topic + "'";
        const auto entities_prompt =
            prompts.render("synth_entities", {{"count", std::to_string(entities_per_topic)}, {"topic", topic}});
        const auto entities = take(request_list(chat, entities_prompt, stage, prompts), entities_per_topic, stage);
        for (const auto& entity : entities) {
            const auto prompt = prompts.render("synth_example", {{"topic", topic}, {"entity", entity}});
            const auto what = "example stage for entity '" + entity + "'";
            auto completion = chat_with_context(chat, prompt, what);
            auto example = parse_example(completion);
            if (!example) {
                completion = chat_with_context(chat, prompt + prompts.get("json_format_reminder").text(), what);
                example = parse_example(completion);
            }
            if (!example) {
                throw ParseError(what + ": no paragraph and claims after re-prompt", 0, completion);
            }
            example->topic = topic;
            example->entity = entity;
            out.push_back(std::move(*example));
        }
    }
    return out;
}

void write_synthetic_jsonl(const std::vector<SyntheticExample>& examples, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& ex : examples) out << to_json(ex).dump() << '\n';
}

}  // namespace icat
