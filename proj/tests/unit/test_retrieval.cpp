#include <doctest.h>

#include <random>

#include "ctqa/reconstructor.hpp"
#include "ctqa/retrieval.hpp"
#include "../support/table_fixtures.hpp"

using namespace ctqa;
using namespace ctqa::testing;

TEST_CASE("parse_tuples accepts the worked examples") {
    auto parsed = parse_tuples("(L, 0, 6, 6, karlsruher sc)");
    REQUIRE(parsed.headers.size() == 1);
    CHECK(parsed.headers[0] == HeaderTuple{Axis::Row, 0, 6, 6, "karlsruher sc"});
    CHECK(parsed.rejects.empty());

    parsed = parse_tuples("(C, 7, 0, 416)");
    REQUIRE(parsed.cells.size() == 1);
    CHECK(parsed.cells[0] == DataTuple{7, 0, "416"});
}

TEST_CASE("parse_tuples on empty input") {
    auto parsed = parse_tuples("");
    CHECK(parsed.tuple_count() == 0);
    CHECK(parsed.rejects.empty());
}

TEST_CASE("malformed candidates are rejected with reasons") {
    auto parsed = parse_tuples("(T, one, 0, 0, g) and (C, 7, 0, 416)");
    REQUIRE(parsed.rejects.size() == 1);
    CHECK(parsed.rejects[0].reason.find("integer") != std::string::npos);
    REQUIRE(parsed.cells.size() == 1);
    CHECK(parsed.cells[0] == DataTuple{7, 0, "416"});
    CHECK(parsed.headers.empty());
}

TEST_CASE("parse_tuples is lenient about case, spacing, quoting, prose") {
    auto parsed = parse_tuples(
        "The relevant tuples are (t,1,0,0,g) and (L, 0, 2, 2, \"a, b\") (see above).");
    REQUIRE(parsed.headers.size() == 2);
    CHECK(parsed.headers[0].axis == Axis::Column);
    CHECK(parsed.headers[1].value == "a, b");
    REQUIRE(parsed.rejects.size() == 1);  // "(see above)"
}

TEST_CASE("unquoted commas in the value are stitched back together") {
    auto parsed = parse_tuples("(L, 0, 0, 3, Compensation, cost)");
    REQUIRE(parsed.headers.size() == 1);
    CHECK(parsed.headers[0].value == "Compensation, cost");
}

TEST_CASE("select_cells worked examples") {
    std::vector<DataTuple> data = {{7, 0, "416"}, {6, 0, "12"}};
    std::vector<HeaderTuple> rows = {{Axis::Row, 0, 6, 6, "karlsruher sc"}};
    std::vector<HeaderTuple> cols = {{Axis::Column, 1, 0, 0, "g"}};

    auto selected = select_cells(rows, cols, data);
    REQUIRE(selected.size() == 1);
    CHECK(selected[0] == DataTuple{6, 0, "12"});

    CHECK(select_cells({}, cols, data).empty());
    CHECK(select_cells(rows, {}, data).empty());

    std::vector<HeaderTuple> all_rows = {{Axis::Row, 0, 0, 10, "all"}};
    std::vector<HeaderTuple> all_cols = {{Axis::Column, 0, 0, 10, "all"}};
    CHECK(select_cells(all_rows, all_cols, data).size() == 2);
}

TEST_CASE("wrong-axis headers are filtered with notes") {
    std::vector<DataTuple> data = {{0, 0, "x"}};
    std::vector<HeaderTuple> rows = {{Axis::Column, 0, 0, 0, "not a row"}};
    std::vector<HeaderTuple> cols = {{Axis::Column, 0, 0, 0, "c"}};
    std::vector<std::string> notes;
    CHECK(select_cells(rows, cols, data, &notes).empty());
    REQUIRE(notes.size() == 1);
    CHECK(notes[0].find("wrong-axis") != std::string::npos);
}

TEST_CASE("oracle equivalence on random tables and header subsets") {
    std::mt19937 rng(424242);
    for (int trial = 0; trial < 300; ++trial) {
        auto table = random_table(rng);
        auto rt = reconstruct(table);
        auto rows = random_header_subset(rng, Axis::Row, table.grid.rows());
        auto cols = random_header_subset(rng, Axis::Column, table.grid.cols());
        auto expected = brute_force_select(rows, cols, rt.data_tuples);
        auto actual = select_cells(rows, cols, rt.data_tuples);
        REQUIRE(actual == expected);
    }
}

TEST_CASE("monotonicity: adding headers never shrinks the selection") {
    std::mt19937 rng(5150);
    for (int trial = 0; trial < 100; ++trial) {
        auto table = random_table(rng);
        auto rt = reconstruct(table);
        auto rows = random_header_subset(rng, Axis::Row, table.grid.rows());
        auto cols = random_header_subset(rng, Axis::Column, table.grid.cols());
        auto base = select_cells(rows, cols, rt.data_tuples);
        rows.push_back({Axis::Row, 0, 0, table.grid.rows() - 1, "extra"});
        auto grown = select_cells(rows, cols, rt.data_tuples);
        CHECK(grown.size() >= base.size());
        for (const auto& cell : base)
            CHECK(std::find(grown.begin(), grown.end(), cell) != grown.end());
    }
}

TEST_CASE("full leaf coverage selects everything") {
    std::mt19937 rng(31337);
    for (int trial = 0; trial < 40; ++trial) {
        auto table = random_table(rng);
        auto rt = reconstruct(table);
        std::vector<HeaderTuple> rows;
        std::vector<HeaderTuple> cols;
        for (const auto* leaf : header_leaves(table.row_tree))
            rows.push_back({Axis::Row, leaf->level, leaf->span_start, leaf->span_end, leaf->value});
        for (const auto* leaf : header_leaves(table.column_tree))
            cols.push_back(
                {Axis::Column, leaf->level, leaf->span_start, leaf->span_end, leaf->value});
        auto selected = select_cells(rows, cols, rt.data_tuples);
        CHECK(selected == rt.data_tuples);  // data already row-major and unique
    }
}
