#include <benchmark/benchmark.h>

#include <random>

#include "ctqa/evaluator.hpp"
#include "ctqa/prompts.hpp"
#include "ctqa/reconstructor.hpp"
#include "ctqa/retrieval.hpp"
#include "support/table_fixtures.hpp"

using namespace ctqa;
using namespace ctqa::testing;

namespace {

SourceTable big_table() {
    std::mt19937 rng(7);
    RandomTableOptions options;
    options.max_extent = 40;
    options.spicy_values = false;
    return random_table(rng, options);
}

}  // namespace

static void BM_Reconstruct(benchmark::State& state) {
    auto table = big_table();
    for (auto _ : state) {
        auto rt = reconstruct(table);
        benchmark::DoNotOptimize(rt);
    }
}
BENCHMARK(BM_Reconstruct);

static void BM_SerializeTable(benchmark::State& state) {
    auto rt = reconstruct(big_table());
    for (auto _ : state) {
        auto st = serialize_table(rt);
        benchmark::DoNotOptimize(st);
    }
}
BENCHMARK(BM_SerializeTable);

static void BM_ParseTuples(benchmark::State& state) {
    auto st = serialize_table(reconstruct(big_table()));
    for (auto _ : state) {
        auto parsed = parse_tuples(st.non_header_text);
        benchmark::DoNotOptimize(parsed);
    }
}
BENCHMARK(BM_ParseTuples);

static void BM_SelectCells(benchmark::State& state) {
    auto table = big_table();
    auto rt = reconstruct(table);
    std::mt19937 rng(11);
    auto rows = random_header_subset(rng, Axis::Row, table.grid.rows());
    auto cols = random_header_subset(rng, Axis::Column, table.grid.cols());
    for (auto _ : state) {
        auto selected = select_cells(rows, cols, rt.data_tuples);
        benchmark::DoNotOptimize(selected);
    }
}
BENCHMARK(BM_SelectCells);

static void BM_CountTokensApprox(benchmark::State& state) {
    auto st = serialize_table(reconstruct(big_table()));
    ApproxByteCounter counter;
    for (auto _ : state) benchmark::DoNotOptimize(counter.count(st.non_header_text));
}
BENCHMARK(BM_CountTokensApprox);

static void BM_FillSingleTurn(benchmark::State& state) {
    PromptEngine engine;
    auto st = serialize_table(reconstruct(big_table()));
    SlotBindings bindings = {{"TABLE_TITLE_HERE", st.title_text},
                             {"TABLE_COLUMN_HEADER_HERE", st.column_header_text},
                             {"TABLE_ROW_HEADER_HERE", st.row_header_text},
                             {"TABLE_NON_HEADER_HERE", st.non_header_text},
                             {"QUESTION_HERE", "what is the value at r2 c1?"}};
    for (auto _ : state) {
        auto filled = engine.fill(TemplateId::SingleTurn, bindings);
        benchmark::DoNotOptimize(filled);
    }
}
BENCHMARK(BM_FillSingleTurn);

static void BM_NormalizeAnswer(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(normalize_answer("The total was 9,280.5% units, roughly."));
}
BENCHMARK(BM_NormalizeAnswer);

BENCHMARK_MAIN();
