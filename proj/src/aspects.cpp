#include "icat/aspects.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "icat/claims.hpp"
#include "icat/error.hpp"
#include "icat/text.hpp"

namespace icat {

using nlohmann::json;

namespace {

std::string id_string(const json& v, const std::string& what, std::size_t line) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw ParseError(what + " must be a string or integer", line);
}

std::string require_string(const json& obj, const char* key, std::size_t line) {
    if (!obj.contains(key) || !obj[key].is_string()) throw ParseError(std::string("missing string field '") + key + "'", line);
    return obj[key].get<std::string>();
}

}  // namespace

std::vector<Topic> load_topics(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open topics file " + path.string());
    std::vector<Topic> topics;
    std::set<std::string> seen;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (trim(raw).empty()) continue;
        json obj;
        try {
            obj = json::parse(raw);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed topic record: ") + e.what(), line);
        }
        if (!obj.is_object()) throw ParseError("topic record must be an object", line);
        Topic t;
        if (!obj.contains("query_id")) throw ParseError("missing field 'query_id'", line);
        t.query_id = id_string(obj["query_id"], "query_id", line);
        t.title = require_string(obj, "title", line);
        t.description = obj.contains("description") && obj["description"].is_string()
                            ? obj["description"].get<std::string>()
                            : t.title;
        if (trim(t.description).empty()) t.description = t.title;
        if (obj.contains("subtopics")) {
            if (!obj["subtopics"].is_array()) throw ParseError("'subtopics' must be an array", line);
            for (const auto& s : obj["subtopics"]) {
                if (!s.is_object() || !s.contains("id")) throw ParseError("subtopic needs an id", line);
                t.subtopics.push_back({id_string(s["id"], "subtopic id", line), require_string(s, "text", line)});
            }
        }
        if (!seen.insert(t.query_id).second) throw ParseError("duplicate query_id '" + t.query_id + "'", line);
        topics.push_back(std::move(t));
    }
    return topics;
}

const Topic& find_topic(const std::vector<Topic>& topics, const std::string& query_id) {
    for (const auto& t : topics) {
        if (t.query_id == query_id) return t;
    }
    throw Error("query '" + query_id + "' not found in topics");
}

std::string_view to_string(AspectProvenance p) { return p == AspectProvenance::gold ? "gold" : "generated"; }

std::set<std::string> AspectSet::ids() const {
    std::set<std::string> out;
    for (const auto& a : aspects) out.insert(a.id);
    return out;
}

bool AspectSet::contains(const std::string& id) const {
    for (const auto& a : aspects) {
        if (a.id == id) return true;
    }
    return false;
}

AspectSet gold_aspects(const Topic& topic) {
    if (topic.subtopics.empty()) throw Error("query '" + topic.query_id + "' has no subtopics");
    std::set<std::string> seen;
    for (const auto& a : topic.subtopics) {
        if (!seen.insert(a.id).second) {
            throw Error("query '" + topic.query_id + "' has duplicate subtopic id '" + a.id + "'");
        }
    }
    return {topic.query_id, topic.subtopics, AspectProvenance::gold};
}

AspectSet load_gold_aspects(const std::filesystem::path& topics_file, const std::string& query_id) {
    return gold_aspects(find_topic(load_topics(topics_file), query_id));
}

AspectSet generate_aspects(const std::string& query_id, const std::string& query_text, ChatClient& chat,
                           const PromptLibrary& prompts, std::size_t max_aspects) {
    if (trim(query_text).empty()) throw ContractError("aspect generation needs a query text");
    const auto prompt =
        prompts.render("aspect_generation", {{"query", query_text}, {"max_aspects", std::to_string(max_aspects)}});
    auto items = request_list(chat, prompt, "aspect generation", prompts);
    if (items.empty()) throw Error("no aspects generated");
    if (items.size() > max_aspects) items.resize(max_aspects);
    AspectSet set{query_id, {}, AspectProvenance::generated};
    for (std::size_t i = 0; i < items.size(); ++i) set.aspects.push_back({std::to_string(i + 1), items[i]});
    return set;
}

void Qrels::add(const std::string& query_id, const std::string& aspect_id, const std::string& doc_id, int grade,
                std::size_t line) {
    const bool rel = grade >= 1;
    const auto key = std::make_tuple(query_id, aspect_id, doc_id);
    const auto [it, inserted] = entries_.emplace(key, rel);
    if (!inserted) {
        if (it->second != rel) {
            throw ParseError("conflicting judgments for " + query_id + " " + aspect_id + " " + doc_id, line);
        }
        return;
    }
    if (rel) by_doc_[{query_id, doc_id}].insert(aspect_id);
}

bool Qrels::relevant(const std::string& query_id, const std::string& aspect_id, const std::string& doc_id) const {
    const auto it = entries_.find(std::make_tuple(query_id, aspect_id, doc_id));
    return it != entries_.end() && it->second;
}

std::set<std::string> Qrels::aspects_for(const std::string& query_id, const std::string& doc_id) const {
    const auto it = by_doc_.find({query_id, doc_id});
    return it == by_doc_.end() ? std::set<std::string>{} : it->second;
}

std::vector<Qrels::Entry> Qrels::entries() const {
    std::vector<Entry> out;
    out.reserve(entries_.size());
    for (const auto& [key, rel] : entries_) out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), rel});
    return out;
}

Qrels load_qrels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open qrels file " + path.string());
    Qrels qrels;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto t = trim(raw);
        if (t.empty() || t.front() == '#') continue;
        const auto cols = tokenize_words(t);
        if (cols.size() != 4) throw ParseError("expected 4 columns, found " + std::to_string(cols.size()), line, raw);
        int grade = 0;
        const auto& g = cols[3];
        const auto res = std::from_chars(g.data(), g.data() + g.size(), grade);
        if (res.ec != std::errc{} || res.ptr != g.data() + g.size()) {
            throw ParseError("grade '" + g + "' is not an integer", line, raw);
        }
        qrels.add(cols[0], cols[1], cols[2], grade, line);
    }
    return qrels;
}

std::string_view to_string(AlignmentMethod m) { return m == AlignmentMethod::manual ? "manual" : "llm"; }

AlignmentMap align_manual(const std::string& query_id, const std::vector<GroundingResult>& grounded,
                          const Qrels& qrels, const AspectSet& aspects, bool all_supporting) {
    AlignmentMap map{query_id, {}, AlignmentMethod::manual};
    for (const auto& r : grounded) {
        if (r.source != RetrievalMode::corpus) throw ConfigError("ICAT-M requires corpus retrieval");
    }
    for (const auto& r : grounded) {
        if (!r.supported || !r.first_supporting_doc) continue;
        std::set<std::string> docs{*r.first_supporting_doc};
        if (all_supporting) {
            for (const auto& e : r.evidence) {
                if (e.nli_label == NliLabel::entailment) docs.insert(e.doc_id);
            }
        }
        auto& target = map.mapping[r.claim_id];
        for (const auto& doc : docs) {
            for (const auto& a : qrels.aspects_for(query_id, doc)) {
                if (aspects.contains(a)) target.insert(a);
            }
        }
    }
    return map;
}

bool parse_alignment_objects(const std::string& completion, std::vector<AspectClaims>& out) {
    out.clear();
    bool any = false;
    std::size_t pos = completion.find('{');
    while (pos != std::string::npos) {
        // Find the matching close brace, skipping string literals.
        int depth = 0;
        bool in_string = false;
        std::size_t end = std::string::npos;
        for (std::size_t i = pos; i < completion.size(); ++i) {
            const char c = completion[i];
            if (in_string) {
                if (c == '\\') ++i;
                else if (c == '"') in_string = false;
            } else if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}' && --depth == 0) {
                end = i;
                break;
            }
        }
        if (end == std::string::npos) break;
        try {
            const auto obj = json::parse(completion.substr(pos, end - pos + 1));
            if (obj.is_object() && obj.contains("aspect_id") && obj.contains("claim_ids") && obj["claim_ids"].is_array()) {
                AspectClaims ac;
                ac.aspect_id = id_string(obj["aspect_id"], "aspect_id", 0);
                for (const auto& c : obj["claim_ids"]) {
                    if (c.is_number_integer()) {
                        ac.claim_ids.push_back(c.get<int>());
                    } else if (c.is_string()) {
                        int v = 0;
                        const auto s = c.get<std::string>();
                        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
                        if (res.ec == std::errc{} && res.ptr == s.data() + s.size()) ac.claim_ids.push_back(v);
                        else spdlog::warn("alignment: ignoring non-integer claim id '{}'", s);
                    }
                }
                out.push_back(std::move(ac));
                any = true;
            } else {
                spdlog::warn("alignment: ignoring object without aspect_id/claim_ids");
            }
        } catch (const std::exception& e) {
            spdlog::warn("alignment: ignoring unreadable object: {}", e.what());
        }
        pos = completion.find('{', end + 1);
    }
    return any;
}

AlignmentMap align_llm(const std::string& query_text, const AspectSet& aspects,
                       const std::vector<AtomicClaim>& grounded_claims, ChatClient& chat,
                       const PromptLibrary& prompts) {
    AlignmentMap map{aspects.query_id, {}, AlignmentMethod::llm};
    if (grounded_claims.empty()) return map;
    if (aspects.aspects.empty()) throw ContractError("alignment needs at least one aspect");

    std::string aspect_lines;
    for (const auto& a : aspects.aspects) aspect_lines += "[" + a.id + "] " + a.description + "\n";
    std::string claim_lines;
    std::set<int> known_claims;
    for (const auto& c : grounded_claims) {
        claim_lines += "[" + std::to_string(c.claim_id) + "] " + c.text + "\n";
        known_claims.insert(c.claim_id);
    }
    const auto prompt =
        prompts.render("coverage_alignment", {{"query", query_text}, {"aspects", aspect_lines}, {"claims", claim_lines}});

    std::vector<AspectClaims> parsed;
    auto completion = chat.chat(prompt);
    if (!parse_alignment_objects(completion, parsed)) {
        spdlog::warn("alignment for query {}: no JSON Lines in reply, re-prompting", aspects.query_id);
        completion = chat.chat(prompt + prompts.get("jsonl_format_reminder").text());
        if (!parse_alignment_objects(completion, parsed)) {
            throw ParseError("alignment reply is not JSON Lines after re-prompt", 0, completion);
        }
    }

    for (const auto& line : parsed) {
        if (!aspects.contains(line.aspect_id)) {
            spdlog::warn("alignment for query {}: dropping unknown aspect id '{}'", aspects.query_id, line.aspect_id);
            continue;
        }
        for (int id : line.claim_ids) {
            if (!known_claims.count(id)) {
                spdlog::warn("alignment for query {}: dropping unknown claim id {}", aspects.query_id, id);
                continue;
            }
            map.mapping[id].insert(line.aspect_id);
        }
    }
    return map;
}

std::set<std::string> covered_aspects(const AlignmentMap& map) {
    std::set<std::string> out;
    for (const auto& [claim, set] : map.mapping) out.insert(set.begin(), set.end());
    return out;
}

}  // namespace icat
