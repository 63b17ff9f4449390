#include <doctest.h>

#include "icat/error.hpp"
#include "icat/prompts.hpp"
#include "oracles/fixture_paths.hpp"

#include <fstream>

using namespace icat;

TEST_SUITE("prompts") {

TEST_CASE("render substitutes placeholders once") {
    const PromptTemplate t("t", "Q: {{query}} / {{query}} / {{n}}");
    CHECK(t.render({{"query", "{{n}}"}, {"n", "3"}}) == "Q: {{n}} / {{n}} / 3");
}

TEST_CASE("missing values are configuration errors") {
    const PromptTemplate t("t", "a {{b}} c");
    CHECK_THROWS_AS(t.render({}), ConfigError);
    CHECK(PromptTemplate("t", "no placeholders").render({}) == "no placeholders");
}

TEST_CASE("the shipped library has every template the engine uses") {
    const auto& lib = PromptLibrary::shared();
    for (const char* name : {"claim_extraction", "list_format_reminder", "aspect_generation", "coverage_alignment",
                             "jsonl_format_reminder", "synth_topics", "synth_entities", "synth_example",
                             "json_format_reminder"}) {
        CHECK_MESSAGE(lib.contains(name), name);
    }
    CHECK(lib.render("claim_extraction", {{"response", "XYZ"}}).find("XYZ") != std::string::npos);
    CHECK_THROWS_AS(lib.get("nope"), ConfigError);
}

TEST_CASE("load reads txt files by stem") {
    const auto dir = testing_paths::scratch("prompts");
    std::ofstream(dir / "hello.txt") << "Hi {{name}}";
    std::ofstream(dir / "ignored.md") << "x";
    auto lib = PromptLibrary::load(dir);
    CHECK(lib.render("hello", {{"name", "Ann"}}) == "Hi Ann");
    CHECK_FALSE(lib.contains("ignored"));
    lib.set("hello", "Bye");
    CHECK(lib.get("hello").text() == "Bye");
}

}  // TEST_SUITE
