#pragma once

// Query aspects (gold subtopics or generated) and claim-to-aspect alignment.

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "icat/gateway.hpp"
#include "icat/prompts.hpp"
#include "icat/types.hpp"

namespace icat {

inline constexpr std::size_t kMaxGeneratedAspects = 10;

struct Aspect {
    std::string id;
    std::string description;

    bool operator==(const Aspect&) const = default;
};

struct Topic {
    std::string query_id;
    std::string title;
    std::string description;  // the prompt text; falls back to the title
    std::vector<Aspect> subtopics;
};

/// Topics file: JSON Lines {query_id, title, description, subtopics: [{id, text}]}.
/// Numeric ids are read as their decimal string.
std::vector<Topic> load_topics(const std::filesystem::path& path);
const Topic& find_topic(const std::vector<Topic>& topics, const std::string& query_id);

enum class AspectProvenance { gold, generated };
std::string_view to_string(AspectProvenance p);

struct AspectSet {
    std::string query_id;
    std::vector<Aspect> aspects;
    AspectProvenance provenance = AspectProvenance::gold;

    std::set<std::string> ids() const;
    bool contains(const std::string& id) const;
};

/// Errors on zero subtopics or duplicate subtopic ids.
AspectSet gold_aspects(const Topic& topic);
AspectSet load_gold_aspects(const std::filesystem::path& topics_file, const std::string& query_id);

/// Asks the chat backend for up to `max_aspects` aspects; ids are "1".."n".
AspectSet generate_aspects(const std::string& query_id, const std::string& query_text, ChatClient& chat,
                           const PromptLibrary& prompts = PromptLibrary::shared(),
                           std::size_t max_aspects = kMaxGeneratedAspects);

/// Binary aspect-level judgments keyed by (query_id, aspect_id, doc_id).
class Qrels {
public:
    /// Grade >= 1 is relevant. A repeated key must agree on relevance.
    void add(const std::string& query_id, const std::string& aspect_id, const std::string& doc_id, int grade,
             std::size_t line = 0);

    bool relevant(const std::string& query_id, const std::string& aspect_id, const std::string& doc_id) const;
    /// Aspects for which `doc_id` is relevant under `query_id`.
    std::set<std::string> aspects_for(const std::string& query_id, const std::string& doc_id) const;
    std::size_t size() const { return entries_.size(); }

    struct Entry {
        std::string query_id;
        std::string aspect_id;
        std::string doc_id;
        bool relevant = false;
    };
    std::vector<Entry> entries() const;

private:
    std::map<std::tuple<std::string, std::string, std::string>, bool> entries_;
    std::map<std::pair<std::string, std::string>, std::set<std::string>> by_doc_;
};

/// Whitespace-separated `query_id aspect_id doc_id grade` lines; blank lines
/// and lines starting with '#' are skipped.
Qrels load_qrels(const std::filesystem::path& path);

enum class AlignmentMethod { manual, llm };
std::string_view to_string(AlignmentMethod m);

struct AlignmentMap {
    std::string query_id;
    std::map<int, std::set<std::string>> mapping;  // claim_id -> aspect ids
    AlignmentMethod method = AlignmentMethod::manual;
};

/// Each supported claim takes the relevant aspects of its first supporting
/// document (of every entailing document with `all_supporting`), restricted
/// to `aspects`. Unsupported claims are left out of the mapping.
AlignmentMap align_manual(const std::string& query_id, const std::vector<GroundingResult>& grounded,
                          const Qrels& qrels, const AspectSet& aspects, bool all_supporting = false);

/// One prompt per query listing every aspect and grounded claim. The reply
/// is read as a sequence of {"aspect_id", "claim_ids"} objects; unknown ids
/// are dropped with a warning.
AlignmentMap align_llm(const std::string& query_text, const AspectSet& aspects,
                       const std::vector<AtomicClaim>& grounded_claims, ChatClient& chat,
                       const PromptLibrary& prompts = PromptLibrary::shared());

/// Objects {aspect_id, claim_ids} found in `completion`, in order. Returns
/// false if no well-formed object is present.
struct AspectClaims {
    std::string aspect_id;
    std::vector<int> claim_ids;
};
bool parse_alignment_objects(const std::string& completion, std::vector<AspectClaims>& out);

std::set<std::string> covered_aspects(const AlignmentMap& map);

}  // namespace icat
