#include "icat/index_store.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "icat/error.hpp"
#include "icat/text.hpp"

namespace icat {

using nlohmann::json;

namespace {

std::uint32_t to_le(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        v = ((v & 0xFFU) << 24) | ((v & 0xFF00U) << 8) | ((v >> 8) & 0xFF00U) | (v >> 24);
    }
    return v;
}

void write_u32(std::ofstream& out, std::uint32_t v) {
    v = to_le(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

bool read_u32(std::ifstream& in, std::uint32_t& v) {
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) return false;
    v = to_le(v);
    return true;
}

std::ofstream open_out(const std::filesystem::path& p, std::ios::openmode extra = {}) {
    std::ofstream out(p, std::ios::out | std::ios::trunc | extra);
    if (!out) throw Error("cannot write " + p.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& p, std::ios::openmode extra = {}) {
    std::ifstream in(p, std::ios::in | extra);
    if (!in) throw Error("cannot read " + p.string());
    return in;
}

template <typename Fn>
void for_each_json_line(const std::filesystem::path& p, Fn&& fn) {
    auto in = open_in(p);
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (trim(raw).empty()) continue;
        try {
            fn(json::parse(raw));
        } catch (const json::exception& e) {
            throw ParseError(p.filename().string() + ": " + e.what(), line);
        }
    }
}

json manifest_json(const IndexManifest& m) {
    json j = {
        {"format_version", m.format_version},
        {"corpus_fingerprint", m.corpus_fingerprint},
        {"documents", m.documents},
        {"snippets", m.snippets},
        {"spam_excluded", m.spam_excluded},
        {"ingest", {{"spam_threshold", m.ingest.spam_threshold}, {"max_words", m.ingest.max_words}, {"overlap", m.ingest.overlap}}},
        {"bm25", {{"k1", m.bm25_k1}, {"b", m.bm25_b}, {"docs", "bm25_docs.jsonl"}, {"postings", "bm25_postings.jsonl"}}},
        {"snippet_table", "snippets.jsonl"},
    };
    if (m.has_dense) {
        j["dense"] = {
            {"dimension", m.dimension},
            {"mode", to_string(m.dense.mode)},
            {"degree", m.dense.params.degree},
            {"construction_beam", m.dense.params.construction_beam},
            {"search_beam", m.dense.params.search_beam},
            {"embedding_model", m.embedding_model},
            {"vectors", "vectors.f32"},
            {"dtype", "float32-le"},
        };
        if (m.dense.mode == DenseMode::approximate) j["dense"]["graph"] = "graph.u32";
    }
    return j;
}

IndexManifest parse_manifest(const json& j) {
    IndexManifest m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kIndexFormatVersion) {
        throw ConfigError("unsupported index format version " + std::to_string(m.format_version));
    }
    m.corpus_fingerprint = j.at("corpus_fingerprint").get<std::string>();
    m.documents = j.at("documents").get<std::size_t>();
    m.snippets = j.at("snippets").get<std::size_t>();
    m.spam_excluded = j.value("spam_excluded", std::size_t{0});
    const auto& ing = j.at("ingest");
    m.ingest = {ing.at("spam_threshold").get<int>(), ing.at("max_words").get<std::size_t>(),
                ing.at("overlap").get<std::size_t>()};
    m.bm25_k1 = j.at("bm25").at("k1").get<double>();
    m.bm25_b = j.at("bm25").at("b").get<double>();
    if (j.contains("dense")) {
        const auto& d = j["dense"];
        m.has_dense = true;
        m.dimension = d.at("dimension").get<std::size_t>();
        m.dense.mode = parse_dense_mode(d.at("mode").get<std::string>());
        m.dense.params = {d.at("degree").get<std::size_t>(), d.at("construction_beam").get<std::size_t>(),
                          d.at("search_beam").get<std::size_t>()};
        m.embedding_model = d.value("embedding_model", std::string{});
    }
    return m;
}

}  // namespace

IndexBundle ingest_documents(const std::vector<Document>& input, const IngestOptions& options) {
    std::vector<Document> docs;
    std::size_t spam = 0;
    for (const auto& d : input) {
        if (d.spam_percentile && *d.spam_percentile < options.spam_threshold) ++spam;
        else docs.push_back(d);
    }
    if (docs.empty()) throw ContractError("corpus is empty after filtering");
    IndexBundle bundle;
    bundle.snippets = chunk_corpus(docs, options.max_words, options.overlap);
    std::sort(bundle.snippets.begin(), bundle.snippets.end(),
              [](const Snippet& a, const Snippet& b) { return a.snippet_id < b.snippet_id; });
    bundle.bm25 = Bm25Index::build(docs);
    auto& m = bundle.manifest;
    m.corpus_fingerprint = corpus_fingerprint(docs);
    m.documents = docs.size();
    m.snippets = bundle.snippets.size();
    m.spam_excluded = spam;
    m.ingest = options;
    m.bm25_k1 = bundle.bm25.k1();
    m.bm25_b = bundle.bm25.b();
    return bundle;
}

IndexBundle ingest_corpus(const std::filesystem::path& corpus, const IngestOptions& options) {
    LoadStats stats;
    const auto docs = load_corpus(corpus, options.spam_threshold, &stats);
    auto bundle = ingest_documents(docs, options);
    bundle.manifest.spam_excluded = stats.spam_excluded;
    spdlog::info("ingested {} documents ({} spam excluded) into {} snippets", docs.size(), stats.spam_excluded,
                 bundle.snippets.size());
    return bundle;
}

void build_dense(IndexBundle& bundle, EmbeddingClient& embedder, const DenseOptions& options) {
    std::vector<std::string> ids;
    std::vector<std::string> texts;
    ids.reserve(bundle.snippets.size());
    texts.reserve(bundle.snippets.size());
    for (const auto& s : bundle.snippets) {
        ids.push_back(s.snippet_id);
        texts.push_back(s.text);
    }
    if (texts.empty()) throw ContractError("no snippets to embed");
    const auto embedded = embedder.embed(texts);
    std::vector<std::vector<float>> vectors;
    vectors.reserve(embedded.size());
    for (const auto& v : embedded) vectors.emplace_back(v.begin(), v.end());
    auto index = DenseIndex::build(ids, std::move(vectors), options.mode, options.params);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (index.ids()[i] != bundle.snippets[i].snippet_id) throw Error("dense rows out of step with snippet table");
    }
    bundle.manifest.has_dense = true;
    bundle.manifest.dimension = index.dimension();
    bundle.manifest.dense = options;
    bundle.manifest.embedding_model = embedder.config().model_id;
    bundle.dense = std::move(index);
}

void save_index(const IndexBundle& bundle, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        auto out = open_out(dir / "snippets.jsonl");
        for (const auto& s : bundle.snippets) {
            out << json{{"snippet_id", s.snippet_id}, {"doc_id", s.doc_id}, {"word_start", s.word_start},
                        {"word_end", s.word_end}, {"text", s.text}}
                       .dump()
                << '\n';
        }
    }
    {
        auto out = open_out(dir / "bm25_docs.jsonl");
        const auto& ids = bundle.bm25.doc_ids();
        const auto& lengths = bundle.bm25.doc_lengths();
        for (std::size_t i = 0; i < ids.size(); ++i) out << json{{"doc_id", ids[i]}, {"length", lengths[i]}}.dump() << '\n';
    }
    {
        auto out = open_out(dir / "bm25_postings.jsonl");
        std::vector<const std::string*> terms;
        for (const auto& [term, list] : bundle.bm25.postings()) terms.push_back(&term);
        std::sort(terms.begin(), terms.end(), [](const auto* a, const auto* b) { return *a < *b; });
        for (const auto* term : terms) {
            json list = json::array();
            for (const auto& p : *bundle.bm25.postings_for(*term)) list.push_back({p.doc, p.tf});
            out << json{{"term", *term}, {"postings", list}}.dump() << '\n';
        }
    }
    if (bundle.dense) {
        const auto& flat = bundle.dense->flat();
        auto out = open_out(dir / "vectors.f32", std::ios::binary);
        for (float x : flat) {
            std::uint32_t bits = 0;
            std::memcpy(&bits, &x, sizeof bits);
            write_u32(out, bits);
        }
        if (bundle.dense->mode() == DenseMode::approximate) {
            auto g = open_out(dir / "graph.u32", std::ios::binary);
            for (const auto& links : bundle.dense->graph()) {
                write_u32(g, static_cast<std::uint32_t>(links.size()));
                for (auto n : links) write_u32(g, n);
            }
        }
    }
    auto out = open_out(dir / "manifest.json");
    out << manifest_json(bundle.manifest).dump(2) << '\n';
}

IndexBundle load_index(const std::filesystem::path& dir) {
    IndexBundle bundle;
    try {
        auto in = open_in(dir / "manifest.json");
        bundle.manifest = parse_manifest(json::parse(in));
    } catch (const json::exception& e) {
        throw ConfigError("invalid index manifest in " + dir.string() + ": " + e.what());
    }
    const auto& m = bundle.manifest;

    for_each_json_line(dir / "snippets.jsonl", [&](const json& j) {
        bundle.snippets.push_back({j.at("snippet_id").get<std::string>(), j.at("doc_id").get<std::string>(),
                                   j.at("word_start").get<std::size_t>(), j.at("word_end").get<std::size_t>(),
                                   j.at("text").get<std::string>()});
    });
    if (bundle.snippets.size() != m.snippets) throw Error("snippet table size disagrees with manifest");

    std::vector<std::string> doc_ids;
    std::vector<std::uint32_t> lengths;
    for_each_json_line(dir / "bm25_docs.jsonl", [&](const json& j) {
        doc_ids.push_back(j.at("doc_id").get<std::string>());
        lengths.push_back(j.at("length").get<std::uint32_t>());
    });
    std::unordered_map<std::string, std::vector<Posting>> postings;
    for_each_json_line(dir / "bm25_postings.jsonl", [&](const json& j) {
        auto& list = postings[j.at("term").get<std::string>()];
        for (const auto& p : j.at("postings")) list.push_back({p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>()});
    });
    bundle.bm25 = Bm25Index::from_parts(std::move(doc_ids), std::move(lengths), std::move(postings), m.bm25_k1, m.bm25_b);

    if (m.has_dense) {
        const auto count = m.snippets * m.dimension;
        std::vector<float> flat(count);
        auto in = open_in(dir / "vectors.f32", std::ios::binary);
        for (std::size_t i = 0; i < count; ++i) {
            std::uint32_t bits = 0;
            if (!read_u32(in, bits)) throw Error("vectors.f32 is shorter than the manifest says");
            std::memcpy(&flat[i], &bits, sizeof bits);
        }
        std::vector<std::vector<std::uint32_t>> graph;
        if (m.dense.mode == DenseMode::approximate) {
            auto g = open_in(dir / "graph.u32", std::ios::binary);
            graph.resize(m.snippets);
            for (auto& links : graph) {
                std::uint32_t n = 0;
                if (!read_u32(g, n)) throw Error("graph.u32 is truncated");
                links.resize(n);
                for (auto& v : links) {
                    if (!read_u32(g, v) || v >= m.snippets) throw Error("graph.u32 is truncated or corrupt");
                }
            }
        }
        std::vector<std::string> ids;
        ids.reserve(bundle.snippets.size());
        for (const auto& s : bundle.snippets) ids.push_back(s.snippet_id);
        bundle.dense = DenseIndex::from_parts(std::move(ids), std::move(flat), m.dimension, m.dense.mode, m.dense.params,
                                              std::move(graph));
    }
    return bundle;
}

}  // namespace icat
