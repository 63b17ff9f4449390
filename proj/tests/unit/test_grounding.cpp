#include <doctest.h>

#include "helpers.hpp"
#include "icat/error.hpp"
#include "icat/grounding.hpp"

using namespace icat;

namespace {

std::vector<Document> bee_docs() {
    return {
        {"d1", std::nullopt, "Honeybees pollinate almond orchards in California.", std::nullopt},
        {"d2", std::nullopt, "Varroa mites spread viruses between colonies.", std::nullopt},
        {"d3", std::nullopt, "Honeybees pollinate almond orchards in California. They also pollinate apples.", std::nullopt},
        {"d4", std::nullopt, "Quantum computers use qubits.", std::nullopt},
    };
}

/// Fixed candidate list, ignoring the claim.
class ListRetriever : public EvidenceRetriever {
public:
    explicit ListRetriever(std::vector<RetrievedSnippet> s) : snippets_(std::move(s)) {}
    std::vector<RetrievedSnippet> retrieve(const std::string&, std::size_t k) override {
        auto out = snippets_;
        if (out.size() > k) out.resize(k);
        return out;
    }
    RetrievalMode mode() const override { return RetrievalMode::corpus; }

private:
    std::vector<RetrievedSnippet> snippets_;
};

/// Fixed probabilities for every pair.
class ConstantNli : public NliBackend {
public:
    explicit ConstantNli(std::array<double, 3> p) : p_(p) {}
    NliVerdict classify(const std::string&, const std::string&) override { return NliVerdict::from_probabilities(p_); }

private:
    std::array<double, 3> p_;
};

}  // namespace

TEST_SUITE("grounding") {

TEST_CASE("claim found verbatim in the corpus is supported") {
    helpers::MockEmbedder emb;
    helpers::MockNli nli;
    const auto idx = helpers::small_index(bee_docs(), emb.client);
    CorpusRetriever retriever(*idx.dense, idx.snippets, emb.client);
    const auto r = ground_claim({1, "Varroa mites spread viruses between colonies.", "q"}, retriever, nli.client,
                                {.k = 3});
    CHECK(r.supported);
    CHECK(r.first_supporting_doc == std::optional<std::string>("d2"));
    CHECK(r.evidence.size() == 3);
    for (std::size_t i = 0; i < r.evidence.size(); ++i) CHECK(r.evidence[i].rank == i + 1);
}

TEST_CASE("claim absent from the corpus is unsupported") {
    helpers::MockEmbedder emb;
    helpers::MockNli nli;
    const auto idx = helpers::small_index(bee_docs(), emb.client);
    CorpusRetriever retriever(*idx.dense, idx.snippets, emb.client);
    const auto r = ground_claim({1, "Bees were domesticated on the moon.", "q"}, retriever, nli.client);
    CHECK_FALSE(r.supported);
    CHECK_FALSE(r.first_supporting_doc.has_value());
    CHECK(r.evidence.size() == 4);
}

TEST_CASE("first supporting document is the best ranked entailing snippet") {
    helpers::MockNli nli;
    ListRetriever retriever({{"x#0", "x", "Unrelated."},
                             {"b#0", "b", "Honeybees pollinate almond orchards in California."},
                             {"a#0", "a", "Honeybees pollinate almond orchards in California."}});
    const auto r = ground_claim({1, "Honeybees pollinate almond orchards", "q"}, retriever, nli.client);
    CHECK(r.first_supporting_doc == std::optional<std::string>("b"));
    CHECK(r.evidence[0].nli_label == NliLabel::neutral);
    CHECK(r.evidence[1].nli_label == NliLabel::entailment);
    CHECK(r.evidence[2].nli_label == NliLabel::entailment);
}

TEST_CASE("early exit stops at the first entailment") {
    helpers::MockNli nli;
    ListRetriever retriever({{"x#0", "x", "Unrelated."}, {"b#0", "b", "Cats purr."}, {"a#0", "a", "Cats purr."}});
    const auto r = ground_claim({1, "cats purr", "q"}, retriever, nli.client, {.early_exit = true});
    CHECK(r.evidence.size() == 2);
    CHECK(nli.backend->stats().calls() == 2);
}

TEST_CASE("blank snippets are skipped and k bounds the judged snippets") {
    helpers::MockNli nli;
    ListRetriever retriever({{"a", "a", "  "}, {"b", "b", "Cats purr."}, {"c", "c", "Dogs bark."}});
    const auto r = ground_claim({1, "dogs bark", "q"}, retriever, nli.client, {.k = 2});
    CHECK(r.evidence.size() == 1);
    CHECK_FALSE(r.supported);
}

TEST_CASE("entailment threshold decides the label") {
    auto cache = std::make_shared<ResponseCache>(std::nullopt, false);
    NliClient nli(helpers::config(BackendRole::nli), std::make_shared<ConstantNli>(std::array<double, 3>{0.3, 0.31, 0.39}), cache);
    ListRetriever retriever({{"a", "a", "text"}});
    CHECK_FALSE(ground_claim({1, "c", "q"}, retriever, nli).supported);
    GroundingOptions lenient;
    lenient.entail_threshold = 0.25;
    const auto yes = ground_claim({1, "c", "q"}, retriever, nli, lenient);
    CHECK(yes.supported);
    CHECK(yes.evidence[0].entail_probability == doctest::Approx(0.3));
    GroundingOptions strict;
    strict.entail_threshold = 0.5;
    const auto no = ground_claim({1, "c", "q"}, retriever, nli, strict);
    CHECK_FALSE(no.supported);
    CHECK(no.evidence[0].nli_label == NliLabel::contradiction);
}

TEST_CASE("empty index grounds nothing") {
    helpers::MockNli nli;
    ListRetriever retriever({});
    const auto r = ground_claim({1, "anything", "q"}, retriever, nli.client);
    CHECK_FALSE(r.supported);
    CHECK(r.evidence.empty());
}

TEST_CASE("ground_all keeps input order and returns the supported subset") {
    helpers::MockEmbedder emb;
    helpers::MockNli nli;
    const auto idx = helpers::small_index(bee_docs(), emb.client);
    CorpusRetriever retriever(*idx.dense, idx.snippets, emb.client);
    std::vector<AtomicClaim> claims{{1, "Quantum computers use qubits.", "r"},
                                    {2, "The moon is cheese.", "r"},
                                    {3, "Honeybees pollinate almond orchards in California.", "r"}};
    const auto out = ground_all(claims, retriever, nli.client, {.workers = 3});
    REQUIRE(out.results.size() == 3);
    CHECK(out.grounded.size() <= claims.size());
    REQUIRE(out.grounded.size() == 2);
    CHECK(out.grounded[0].claim_id == 1);
    CHECK(out.grounded[1].claim_id == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(out.results[i].claim_id == claims[i].claim_id);
    CHECK(ground_all({}, retriever, nli.client).grounded.empty());
}

TEST_CASE("candidate pool restricts corpus retrieval") {
    helpers::MockEmbedder emb;
    helpers::MockNli nli;
    const auto idx = helpers::small_index(bee_docs(), emb.client);
    CorpusRetriever pooled(*idx.dense, idx.snippets, emb.client, std::unordered_set<std::string>{"d4"});
    const auto hits = pooled.retrieve("Varroa mites spread viruses", 10);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].doc_id == "d4");
    const auto r = ground_claim({1, "Varroa mites spread viruses between colonies.", "q"}, pooled, nli.client);
    CHECK_FALSE(r.supported);
}

TEST_CASE("web retriever labels snippets by rank and url") {
    auto backend = std::make_shared<FixtureWebSearchBackend>();
    backend->add("cats purr", {{"Cats purr loudly.", "https://a"}, {"Dogs bark.", "https://b"}});
    WebSearchClient web(helpers::config(BackendRole::websearch), backend, std::make_shared<ResponseCache>());
    WebRetriever retriever(web);
    helpers::MockNli nli;
    const auto r = ground_claim({1, "cats purr", "q"}, retriever, nli.client);
    CHECK(r.source == RetrievalMode::web);
    REQUIRE(r.evidence.size() == 2);
    CHECK(r.evidence[0].snippet_id == "web:1");
    CHECK(r.evidence[0].doc_id == "https://a");
    CHECK(r.first_supporting_doc == std::optional<std::string>("https://a"));
}

TEST_CASE("backend failures name the claim") {
    helpers::MockNli nli;
    auto backend = std::make_shared<FixtureWebSearchBackend>();
    WebSearchClient web(helpers::config(BackendRole::websearch), backend, std::make_shared<ResponseCache>());
    WebRetriever retriever(web);
    CHECK_THROWS_WITH_AS(ground_all({{7, "unknown query", "r"}}, retriever, nli.client), doctest::Contains("7"),
                         BackendError);
}

}  // TEST_SUITE
