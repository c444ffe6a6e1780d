#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ctqa/table_model.hpp"

namespace ctqa {

/// Five-element header encoding: tag (T = column, L = row), level,
/// span start, span end, value.
struct HeaderTuple {
    Axis axis = Axis::Column;
    int level = 0;
    int span_start = 0;
    int span_end = 0;
    std::string value;

    bool operator==(const HeaderTuple&) const = default;
};

/// Four-element data-cell encoding: tag C, row, column, value.
struct DataTuple {
    int row = 0;
    int col = 0;
    std::string value;

    bool operator==(const DataTuple&) const = default;
};

struct ReconstructedTable {
    std::string title;
    std::vector<HeaderTuple> column_tuples;  // ordered by (level, span_start)
    std::vector<HeaderTuple> row_tuples;     // ordered by (level, span_start)
    std::vector<DataTuple> data_tuples;      // row-major, merged cells expanded
};

/// Blocks ready for prompt slot filling: each is the comma-space joined
/// serialization of its tuple list.
struct SerializedTable {
    std::string title_text;
    std::string column_header_text;
    std::string row_header_text;
    std::string non_header_text;
};

/// Converts a valid table into tuples: one HeaderTuple per tree node of
/// both trees (virtual roots excluded), one DataTuple per data-region
/// coordinate with merged regions expanded. Throws IntegrityError when
/// the table fails validation.
ReconstructedTable reconstruct(const SourceTable& table);

/// True when the value must be wrapped in double quotes to survive the
/// tuple grammar (commas, parentheses, quotes, colons, leading/trailing
/// whitespace, empty).
bool tuple_value_needs_quoting(std::string_view value);

std::string serialize_tuple(const HeaderTuple& tuple);
std::string serialize_tuple(const DataTuple& tuple);

SerializedTable serialize_table(const ReconstructedTable& table);

}  // namespace ctqa
