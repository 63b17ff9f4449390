#pragma once

// Index directory: the snippet table, BM25 postings and (after embedding)
// dense vectors, described by a JSON manifest.
//
//   manifest.json        format version, parameters, corpus fingerprint, file names
//   snippets.jsonl       one snippet per dense row, rows ordered by snippet_id
//   bm25_docs.jsonl      {"doc_id", "length"} per document ordinal
//   bm25_postings.jsonl  {"term", "postings": [[doc_ordinal, tf], ...]}, terms sorted
//   vectors.f32          rows x dimension little-endian float32, row-major
//   graph.u32            approximate mode only: per row, a little-endian
//                        uint32 neighbour count followed by the neighbour rows

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "icat/bm25.hpp"
#include "icat/corpus.hpp"
#include "icat/dense_index.hpp"
#include "icat/gateway.hpp"

namespace icat {

inline constexpr int kIndexFormatVersion = 1;

struct IngestOptions {
    int spam_threshold = kDefaultSpamThreshold;
    std::size_t max_words = kDefaultMaxWords;
    std::size_t overlap = kDefaultOverlap;
};

struct DenseOptions {
    DenseMode mode = DenseMode::exact;
    GraphParams params;
};

struct IndexManifest {
    int format_version = kIndexFormatVersion;
    std::string corpus_fingerprint;
    std::size_t documents = 0;
    std::size_t snippets = 0;
    std::size_t spam_excluded = 0;
    IngestOptions ingest;
    double bm25_k1 = Bm25Index::kDefaultK1;
    double bm25_b = Bm25Index::kDefaultB;
    bool has_dense = false;
    std::size_t dimension = 0;
    DenseOptions dense;
    std::string embedding_model;
};

struct IndexBundle {
    IndexManifest manifest;
    std::vector<Snippet> snippets;  // sorted by snippet_id; row i of `dense`
    Bm25Index bm25;
    std::optional<DenseIndex> dense;
};

/// Drops spam below the threshold, chunks the rest and builds the BM25 index.
IndexBundle ingest_corpus(const std::filesystem::path& corpus, const IngestOptions& options = {});
IndexBundle ingest_documents(const std::vector<Document>& docs, const IngestOptions& options = {});

/// Embeds every snippet and builds the dense index.
void build_dense(IndexBundle& bundle, EmbeddingClient& embedder, const DenseOptions& options = {});

void save_index(const IndexBundle& bundle, const std::filesystem::path& dir);
IndexBundle load_index(const std::filesystem::path& dir);

}  // namespace icat
