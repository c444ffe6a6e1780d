#pragma once

#include <random>
#include <string>
#include <vector>

#include "ctqa/reconstructor.hpp"
#include "ctqa/table_model.hpp"

namespace ctqa::testing {

/// Financial-statement style fixture: one level-0 column parent over the
/// three year leaves, one level-0 row section spanning four detail rows.
SourceTable make_compensation_table();

/// Soccer-statistics style fixture: level-1 column leaf "g", row leaf
/// "karlsruher sc" at row 6, data value "416" at (7, 0).
SourceTable make_soccer_table();

SourceTable make_single_cell_table();

struct RandomTableOptions {
    int max_extent = 8;
    int max_depth = 3;
    bool with_merges = true;
    bool spicy_values = true;  // inject commas, colons, parens, quotes
};

SourceTable random_table(std::mt19937& rng, const RandomTableOptions& options = {});

/// Random header tuples for retrieval tests: mixes in-range, out-of-range
/// and wrong-axis spans.
std::vector<HeaderTuple> random_header_subset(std::mt19937& rng, Axis axis, int extent);

/// Reference implementation of cell retrieval: the naive double loop over
/// headers and data. Kept independent of select_cells.
std::vector<DataTuple> brute_force_select(const std::vector<HeaderTuple>& row_headers,
                                          const std::vector<HeaderTuple>& col_headers,
                                          const std::vector<DataTuple>& data);

}  // namespace ctqa::testing
