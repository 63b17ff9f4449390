#include "icat/corpus.hpp"

#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "icat/error.hpp"
#include "icat/hashing.hpp"
#include "icat/text.hpp"

namespace icat {

using nlohmann::json;

namespace {

Document parse_document(const std::string& line, std::size_t line_no) {
    json record;
    try {
        record = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed corpus record: ") + e.what(), line_no);
    }
    if (!record.is_object()) throw ParseError("corpus record is not an object", line_no);
    const auto id = record.find("doc_id");
    const auto text = record.find("text");
    if (id == record.end() || !id->is_string() || id->get<std::string>().empty()) {
        throw ParseError("corpus record lacks a string doc_id", line_no);
    }
    if (text == record.end() || !text->is_string()) {
        throw ParseError("corpus record lacks a string text", line_no);
    }
    Document doc;
    doc.doc_id = id->get<std::string>();
    doc.text = text->get<std::string>();
    if (tokenize_words(doc.text).empty()) {
        throw ParseError("document '" + doc.doc_id + "' has empty text", line_no);
    }
    if (auto url = record.find("url"); url != record.end() && !url->is_null()) {
        if (!url->is_string()) throw ParseError("url must be a string", line_no);
        doc.url = url->get<std::string>();
    }
    if (auto spam = record.find("spam_percentile"); spam != record.end() && !spam->is_null()) {
        if (!spam->is_number_integer()) throw ParseError("spam_percentile must be an integer", line_no);
        const int value = spam->get<int>();
        if (value < 0 || value > 99) throw ParseError("spam_percentile must lie in [0, 99]", line_no);
        doc.spam_percentile = value;
    }
    return doc;
}

}  // namespace

std::vector<Document> load_corpus(const std::filesystem::path& path, int spam_threshold, LoadStats* stats) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open corpus file " + path.string());
    std::vector<Document> corpus;
    std::unordered_set<std::string> seen;
    LoadStats local;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto doc = parse_document(line, line_no);
        ++local.records;
        if (!seen.insert(doc.doc_id).second) {
            throw ParseError("duplicate doc_id '" + doc.doc_id + "'", line_no);
        }
        if (doc.spam_percentile && *doc.spam_percentile < spam_threshold) {
            ++local.spam_excluded;
            continue;
        }
        corpus.push_back(std::move(doc));
    }
    if (stats != nullptr) *stats = local;
    return corpus;
}

std::vector<Snippet> chunk_document(const Document& doc, std::size_t max_words, std::size_t overlap) {
    if (max_words == 0) throw ContractError("max_words must be positive");
    if (overlap >= max_words) throw ContractError("overlap must be smaller than max_words");
    const auto words = tokenize_words(doc.text);
    const std::size_t stride = max_words - overlap;
    std::vector<Snippet> snippets;
    for (std::size_t start = 0; start < words.size(); start += stride) {
        const std::size_t end = std::min(start + max_words, words.size());
        Snippet s;
        s.snippet_id = doc.doc_id + "#" + std::to_string(snippets.size());
        s.doc_id = doc.doc_id;
        s.word_start = start;
        s.word_end = end;
        s.text = join_words(words, start, end);
        snippets.push_back(std::move(s));
        if (end == words.size()) break;
    }
    return snippets;
}

std::vector<Snippet> chunk_corpus(const std::vector<Document>& corpus, std::size_t max_words,
                                  std::size_t overlap) {
    std::vector<Snippet> all;
    for (const auto& doc : corpus) {
        auto snippets = chunk_document(doc, max_words, overlap);
        all.insert(all.end(), std::make_move_iterator(snippets.begin()),
                   std::make_move_iterator(snippets.end()));
    }
    return all;
}

std::string corpus_fingerprint(const std::vector<Document>& corpus) {
    Sha256 hash;
    for (const auto& doc : corpus) hash.field(doc.doc_id).field(normalize_whitespace(doc.text));
    return hash.hex_digest();
}

}  // namespace icat
