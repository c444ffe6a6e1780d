#pragma once

#include <string>
#include <vector>

namespace ctqa {

enum class Axis { Column, Row };

/// One header cell in a header tree. Spans index the data region
/// (0-based, inclusive) along the tree's axis; header rows/columns are
/// never part of the span coordinates. Root children sit at level 0.
struct HeaderNode {
    std::string value;
    int level = 0;
    int span_start = 0;
    int span_end = 0;
    std::vector<HeaderNode> children;

    bool leaf() const { return children.empty(); }
};

/// Header hierarchy for one axis. The virtual root is implicit: `roots`
/// are its children. Every node has a unique parent by construction.
struct HeaderTree {
    Axis axis = Axis::Column;
    std::vector<HeaderNode> roots;

    int node_count() const;
};

struct MergedRegion {
    int row_start = 0;
    int row_end = 0;
    int col_start = 0;
    int col_end = 0;

    bool contains(int row, int col) const {
        return row >= row_start && row <= row_end && col >= col_start && col <= col_end;
    }
    bool overlaps(const MergedRegion& other) const {
        return row_start <= other.row_end && other.row_start <= row_end &&
               col_start <= other.col_end && other.col_start <= col_end;
    }

    bool operator==(const MergedRegion&) const = default;
};

/// Data region of a table: rows x cols cell values, headers excluded.
/// Merged regions are recorded once; every covered coordinate resolves to
/// the region's single value.
class CellGrid {
public:
    CellGrid() = default;
    CellGrid(int rows, int cols) : rows_(rows), cols_(cols), cells_(size_t(rows) * cols) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool in_range(int row, int col) const {
        return row >= 0 && row < rows_ && col >= 0 && col < cols_;
    }

    const std::string& at(int row, int col) const { return cells_[size_t(row) * cols_ + col]; }
    void set(int row, int col, std::string value) {
        cells_[size_t(row) * cols_ + col] = std::move(value);
    }

    /// Records the region and writes `value` into every covered cell.
    /// Range errors are left for validate_table to report.
    void add_merged_region(const MergedRegion& region, std::string value);

    const std::vector<MergedRegion>& merged_regions() const { return regions_; }

    bool operator==(const CellGrid&) const = default;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<std::string> cells_;
    std::vector<MergedRegion> regions_;
};

struct SourceTable {
    std::string table_id;
    std::string title;
    HeaderTree column_tree{Axis::Column, {}};
    HeaderTree row_tree{Axis::Row, {}};
    CellGrid grid;

    /// The document this table was loaded from, in its source format.
    /// Used by the simple prompt mode and token statistics; empty for
    /// tables built in memory.
    std::string original_text;
};

struct Violation {
    std::string code;    // e.g. "COVERAGE", "LEAF_SPAN"
    std::string where;   // node / coordinate location
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool valid() const { return violations.empty(); }
    std::string to_string() const;
};

/// Checks every table invariant and reports all violations with their
/// locations. Total: never throws on malformed input.
ValidationReport validate_table(const SourceTable& table);

/// Leaves of a header tree in span order. For a valid tree the spans
/// partition [0, extent-1] of the data region along the tree's axis.
std::vector<const HeaderNode*> header_leaves(const HeaderTree& tree);

/// Data-region extent along one axis (cols for Column, rows for Row).
int axis_extent(const SourceTable& table, Axis axis);

}  // namespace ctqa
