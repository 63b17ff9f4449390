#pragma once

// Atomic claim extraction and the synthetic distillation-data generator.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "icat/gateway.hpp"
#include "icat/prompts.hpp"
#include "icat/types.hpp"

namespace icat {

/// Reads a list from model output. Accepted shapes, tried in order:
///   1. the whole text is a JSON array of strings;
///   2. lines carrying an enumeration marker ("3.", "3)", "-", "*", "•");
///      unmarked lines such as a preamble are ignored;
///   3. a JSON array of strings embedded in surrounding prose;
///   4. two or more plain non-empty lines, one item each.
/// Items are trimmed and empty items dropped. Anything else is a ParseError.
std::vector<std::string> parse_claim_list(const std::string& completion);

/// Removes one leading enumeration marker, if present.
std::string strip_list_marker(std::string_view line);

/// Serialises in the numbered-line shape the parser reads back.
std::string format_numbered_list(const std::vector<std::string>& items);

/// Sends `prompt`, parses the reply as a list and re-prompts once with the
/// list format reminder on failure. `what` prefixes error messages.
std::vector<std::string> request_list(ChatClient& chat, const std::string& prompt, const std::string& what,
                                      const PromptLibrary& prompts = PromptLibrary::shared());

std::vector<AtomicClaim> extract_claims(const std::string& response_text, ChatClient& chat,
                                        const std::string& response_id = {},
                                        const PromptLibrary& prompts = PromptLibrary::shared());

struct SyntheticExample {
    std::string topic;
    std::string entity;
    std::string paragraph;
    std::vector<std::string> claims;

    bool operator==(const SyntheticExample&) const = default;
};

nlohmann::json to_json(const SyntheticExample& example);

/// Topics, then entities per topic, then one paragraph with its claims per
/// entity. Returns exactly n_topics * entities_per_topic examples.
std::vector<SyntheticExample> generate_synthetic_data(ChatClient& chat, std::size_t n_topics = 200,
                                                      std::size_t entities_per_topic = 5,
                                                      const PromptLibrary& prompts = PromptLibrary::shared());

void write_synthetic_jsonl(const std::vector<SyntheticExample>& examples, const std::filesystem::path& path);

}  // namespace icat
