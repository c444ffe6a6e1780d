#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctqa/reconstructor.hpp"

namespace ctqa {

struct TupleReject {
    std::string fragment;
    std::string reason;
};

/// Result of lenient tuple extraction over free text. Every parenthesized
/// candidate in the input lands either in headers/cells or in rejects.
struct TupleParse {
    std::vector<HeaderTuple> headers;
    std::vector<DataTuple> cells;
    std::vector<TupleReject> rejects;

    size_t tuple_count() const { return headers.size() + cells.size(); }
};

/// Extracts tuples from raw model output. Accepts a leading tag T/L/C
/// (case-insensitive), integer position fields, and a trailing value with
/// optional surrounding double quotes. Malformed candidates are rejected
/// with a reason. Total: never throws.
TupleParse parse_tuples(std::string_view text);

/// Deterministic cell retrieval: returns exactly the data tuples whose row
/// lies in some row-header span and whose column lies in some column-header
/// span. Wrong-axis headers are dropped (optionally noted), an empty header
/// list on either axis selects nothing. Output is row-major with duplicates
/// removed.
std::vector<DataTuple> select_cells(std::span<const HeaderTuple> row_headers,
                                    std::span<const HeaderTuple> col_headers,
                                    std::span<const DataTuple> data,
                                    std::vector<std::string>* notes = nullptr);

}  // namespace ctqa
