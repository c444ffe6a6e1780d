#include <doctest.h>

#include <fstream>
#include <sstream>

#include "ctqa/errors.hpp"
#include "ctqa/prompts.hpp"
#include "ctqa/reconstructor.hpp"
#include "../support/table_fixtures.hpp"

#ifndef CTQA_SOURCE_DIR
#error "CTQA_SOURCE_DIR must point at the repository root"
#endif

using namespace ctqa;
using namespace ctqa::testing;

namespace {

// Shipped template assets are pinned by checksum; any edit is a contract
// change and must be deliberate.
struct PinnedAsset {
    TemplateId id;
    const char* sha256;
};
const PinnedAsset kPinned[] = {
    {TemplateId::SingleTurn, "5398e3263ac752fb3308ca25ed944e68cb81657bcf56fb45ef28416ef515de90"},
    {TemplateId::MultiTurn1, "6e62d701dac07a1b843d451eef069c7642a03b7f2223093eac58162c4629efaf"},
    {TemplateId::MultiTurn2, "aa9fec88ba50fd6625dbcf0820dd6f3c7377ee47d4767e1dfb473d9eba0163cb"},
    {TemplateId::MultiTurn3, "d13d9f49e9e9182dbf8ba810b2b47d13f745a8db831afa451965c2e86ae65aad"},
    {TemplateId::Simple, "badf9ecd41fa3effa24fd5fc99c594027e60076cf84a356c742107da0bbba65c"},
};

SlotBindings bindings_for_fixture(const std::string& question) {
    auto st = serialize_table(reconstruct(make_compensation_table()));
    return {{"TABLE_TITLE_HERE", "tab-102"},
            {"TABLE_COLUMN_HEADER_HERE", st.column_header_text},
            {"TABLE_ROW_HEADER_HERE", st.row_header_text},
            {"TABLE_NON_HEADER_HERE", st.non_header_text},
            {"QUESTION_HERE", question}};
}

}  // namespace

TEST_CASE("embedded templates match the shipped files and pinned checksums") {
    PromptEngine embedded;
    auto from_files = PromptEngine::from_directory(
        std::string(CTQA_SOURCE_DIR) + "/core/assets/prompts");
    for (const auto& pinned : kPinned) {
        const auto& a = embedded.get(pinned.id);
        const auto& b = from_files.get(pinned.id);
        CHECK(a.body == b.body);
        CHECK(a.sha256() == pinned.sha256);
    }
}

TEST_CASE("template bodies carry the fixed wording") {
    PromptEngine engine;
    const auto& single = engine.get(TemplateId::SingleTurn).body;
    CHECK(single.find("Suppose you are an expert in statistical analysis.") != std::string::npos);
    CHECK(single.find("The tuple (T, 1, 0, 0, g) denotes a column header with level 1") !=
          std::string::npos);
    CHECK(single.find("The tuple (L, 0, 6, 6, karlsruher sc) denotes a row header with level 0") !=
          std::string::npos);
    CHECK(single.find("The tuple (C, 7, 0, 416) represents a non-header cell at row 7") !=
          std::string::npos);
    CHECK(single.find("5. Answer: your answer (A number, noun, phrase, or set of data).") !=
          std::string::npos);
    CHECK(single.find("say \"I don't know\"") != std::string::npos);
    CHECK(single.find("[QUSTION_HERE]") != std::string::npos);

    const auto& turn1 = engine.get(TemplateId::MultiTurn1).body;
    CHECK(turn1.find("Extract the key words in the question.") != std::string::npos);
    CHECK(turn1.find("[QUESTION_HERE]") != std::string::npos);

    const auto& turn2 = engine.get(TemplateId::MultiTurn2).body;
    CHECK(turn2.find("please try to locate the lowest level of headers") != std::string::npos);
    CHECK(turn2.find("You MUST output your selection in the following format:") !=
          std::string::npos);

    const auto& turn3 = engine.get(TemplateId::MultiTurn3).body;
    CHECK(turn3.find("Here are all the tuples relevant to the question:") != std::string::npos);
    CHECK(turn3.find("Non-header: [OUTPUT_OF_CODE]") != std::string::npos);
    CHECK(turn3.find("You must output non-header tuples that are valid in the above tuples.") !=
          std::string::npos);

    const auto& simple = engine.get(TemplateId::Simple).body;
    CHECK(simple.find("describes a table in json format") != std::string::npos);
    CHECK(simple.find("don't omit the decimal point") != std::string::npos);
}

TEST_CASE("fill keeps the brackets and substitutes inside them") {
    PromptEngine engine;
    auto filled = engine.fill(TemplateId::SingleTurn,
                              bindings_for_fixture("how much was the total compensation cost?"));
    CHECK(filled.text.find("Title: [tab-102]") != std::string::npos);
    CHECK(filled.text.find("Q: [how much was the total compensation cost?]") !=
          std::string::npos);
    CHECK(filled.text.find("_HERE]") == std::string::npos);
    CHECK(filled.token_count > 0);
}

TEST_CASE("multi-turn-1 fill ends with the question and answer cue") {
    PromptEngine engine;
    auto filled = engine.fill(TemplateId::MultiTurn1, {{"QUESTION_HERE", "how many goals?"}});
    CHECK(filled.text.find("Extract the key words in the question.") != std::string::npos);
    std::string tail = "Q: [how many goals?]\nA:";
    REQUIRE(filled.text.size() >= tail.size());
    CHECK(filled.text.substr(filled.text.size() - tail.size()) == tail);
}

TEST_CASE("fill slot errors") {
    PromptEngine engine;
    auto bindings = bindings_for_fixture("q");
    bindings.erase("TABLE_NON_HEADER_HERE");
    CHECK_THROWS_AS(engine.fill(TemplateId::SingleTurn, bindings), MissingSlotError);

    bindings = bindings_for_fixture("q");
    bindings["UNKNOWN_SLOT"] = "x";
    CHECK_THROWS_AS(engine.fill(TemplateId::SingleTurn, bindings), ExtraSlotError);

    bindings = bindings_for_fixture("q");
    bindings["QUESTION_HERE"] = "what about [TABLE_TITLE_HERE]?";
    CHECK_THROWS_AS(engine.fill(TemplateId::SingleTurn, bindings), PromptError);
}

TEST_CASE("routing boundaries at the default budget") {
    TokenBudget budget;  // 4097 / 512
    auto prompt_with = [](int tokens) {
        FilledPrompt p;
        p.token_count = tokens;
        return p;
    };
    CHECK(PromptEngine::route(prompt_with(1000), budget) == Route::Single);
    CHECK(PromptEngine::route(prompt_with(3585), budget) == Route::Single);
    CHECK(PromptEngine::route(prompt_with(3586), budget) == Route::Multi);
    CHECK(PromptEngine::route(prompt_with(4000), budget) == Route::Multi);
}

TEST_CASE("routing is monotone in the token count") {
    TokenBudget budget;
    std::mt19937 rng(8);
    bool seen_multi = false;
    FilledPrompt p;
    std::vector<int> counts;
    for (int i = 0; i < 1000; ++i) counts.push_back(int(rng() % 6000));
    std::sort(counts.begin(), counts.end());
    for (int count : counts) {
        p.token_count = count;
        auto route = PromptEngine::route(p, budget);
        if (route == Route::Multi) seen_multi = true;
        if (seen_multi) CHECK(route == Route::Multi);
    }
    CHECK(seen_multi);
}

TEST_CASE("routing over real fills under the fallback counter") {
    PromptEngine engine;
    auto filled = engine.fill(TemplateId::SingleTurn, bindings_for_fixture("short question"));
    // Same text, same count: deterministic.
    CHECK(engine.count_tokens(filled.text) == filled.token_count);
    CHECK(PromptEngine::route(filled, TokenBudget{4097, 512}) == Route::Single);
    CHECK(PromptEngine::route(filled, TokenBudget{filled.token_count + 10, 100}) == Route::Multi);
}
