#include <doctest.h>

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "icat/error.hpp"
#include "icat/index_store.hpp"
#include "oracles/fixture_paths.hpp"

using namespace icat;

namespace {

std::string long_text(const std::string& stem, std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + stem + std::to_string(i % 37);
    return s;
}

std::vector<Document> docs() {
    return {{"b", std::nullopt, long_text("bee", 300), std::nullopt},
            {"a", std::nullopt, long_text("ant", 50), std::nullopt},
            {"s", std::nullopt, "spam spam", 10},
            {"c", std::nullopt, long_text("cat", 140), 80}};
}

}  // namespace

TEST_SUITE("index_store") {

TEST_CASE("ingest filters spam, chunks and sorts snippets by id") {
    const auto bundle = ingest_documents(docs());
    CHECK(bundle.manifest.documents == 3);
    CHECK(bundle.manifest.spam_excluded == 1);
    CHECK(bundle.bm25.doc_count() == 3);
    // 300 words: 3 windows; 50: 1; 140: 2
    CHECK(bundle.snippets.size() == 6);
    CHECK(std::is_sorted(bundle.snippets.begin(), bundle.snippets.end(),
                         [](const Snippet& x, const Snippet& y) { return x.snippet_id < y.snippet_id; }));
    CHECK_FALSE(bundle.dense.has_value());
}

TEST_CASE("saved index loads back identically") {
    helpers::MockEmbedder emb;
    for (auto mode : {DenseMode::exact, DenseMode::approximate}) {
        auto bundle = ingest_documents(docs());
        build_dense(bundle, emb.client, {mode, {}});
        const auto dir = testing_paths::scratch(std::string("index-") + std::string(to_string(mode)));
        save_index(bundle, dir);
        const auto loaded = load_index(dir);
        CHECK(loaded.snippets == bundle.snippets);
        CHECK(loaded.manifest.corpus_fingerprint == bundle.manifest.corpus_fingerprint);
        CHECK(loaded.manifest.has_dense);
        CHECK(loaded.manifest.dimension == 64);
        REQUIRE(loaded.dense.has_value());
        CHECK(loaded.dense->flat() == bundle.dense->flat());
        CHECK(loaded.dense->mode() == mode);
        if (mode == DenseMode::approximate) CHECK(loaded.dense->graph() == bundle.dense->graph());
        CHECK(loaded.bm25.search("bee1 cat2", 5).entries == bundle.bm25.search("bee1 cat2", 5).entries);

        const auto floats = std::filesystem::file_size(dir / "vectors.f32");
        CHECK(floats == bundle.snippets.size() * 64 * sizeof(float));
        CHECK(std::filesystem::exists(dir / "graph.u32") == (mode == DenseMode::approximate));
    }
}

TEST_CASE("vector file is little-endian float32") {
    helpers::MockEmbedder emb;
    auto bundle = ingest_documents(docs());
    build_dense(bundle, emb.client);
    const auto dir = testing_paths::scratch("index-le");
    save_index(bundle, dir);
    std::ifstream in(dir / "vectors.f32", std::ios::binary);
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    float v;
    std::memcpy(&v, &bits, 4);
    CHECK(v == bundle.dense->flat()[0]);
}

TEST_CASE("BM25-only index round trips without vectors") {
    const auto bundle = ingest_documents(docs());
    const auto dir = testing_paths::scratch("index-bm25");
    save_index(bundle, dir);
    const auto loaded = load_index(dir);
    CHECK_FALSE(loaded.dense.has_value());
    CHECK_FALSE(std::filesystem::exists(dir / "vectors.f32"));
    const auto manifest = nlohmann::json::parse(std::ifstream(dir / "manifest.json"));
    CHECK(manifest["format_version"] == kIndexFormatVersion);
}

TEST_CASE("missing or foreign index directories are errors") {
    CHECK_THROWS(load_index("/nonexistent/index"));
    const auto dir = testing_paths::scratch("index-bad");
    std::ofstream(dir / "manifest.json") << R"({"format_version": 99})";
    CHECK_THROWS(load_index(dir));
}

TEST_CASE("fixture corpus ingest") {
    const auto bundle = ingest_corpus(testing_paths::e2e() / "corpus.jsonl");
    CHECK(bundle.manifest.documents == 20);
    CHECK(bundle.manifest.spam_excluded == 1);
}

}  // TEST_SUITE
