#include "ctqa/table_model.hpp"

#include <algorithm>
#include <sstream>

namespace ctqa {

namespace {

int count_nodes(const std::vector<HeaderNode>& nodes) {
    int n = 0;
    for (const auto& node : nodes) n += 1 + count_nodes(node.children);
    return n;
}

const char* axis_name(Axis axis) { return axis == Axis::Column ? "column" : "row"; }
const char* position_name(Axis axis) { return axis == Axis::Column ? "column" : "row"; }

struct Validator {
    std::vector<Violation>& out;

    void add(std::string code, std::string where, std::string detail) {
        out.push_back({std::move(code), std::move(where), std::move(detail)});
    }

    std::string node_where(Axis axis, const HeaderNode& node) const {
        std::ostringstream os;
        os << axis_name(axis) << " header '" << node.value << "' (level " << node.level
           << ", span " << node.span_start << "-" << node.span_end << ")";
        return os.str();
    }

    void check_node(Axis axis, const HeaderNode& node, int depth, const HeaderNode* parent,
                    int extent) {
        auto where = node_where(axis, node);
        if (node.span_start > node.span_end)
            add("SPAN_ORDER", where, "span start exceeds span end");
        if (node.span_start < 0 || node.span_end >= extent)
            add("SPAN_RANGE", where, "span outside [0, " + std::to_string(extent - 1) + "]");
        if (node.level != depth)
            add("LEVEL", where, "level " + std::to_string(node.level) +
                                    " does not match tree depth " + std::to_string(depth));
        if (node.leaf() && node.span_start != node.span_end)
            add("LEAF_SPAN", where, "leaf spans more than one " +
                                        std::string(position_name(axis)));
        if (parent &&
            !(parent->span_start <= node.span_start && node.span_end <= parent->span_end))
            add("NESTING", where,
                "span not nested within parent '" + parent->value + "' span " +
                    std::to_string(parent->span_start) + "-" + std::to_string(parent->span_end));
        check_siblings(axis, node.children);
        for (const auto& child : node.children) check_node(axis, child, depth + 1, &node, extent);
    }

    void check_siblings(Axis axis, const std::vector<HeaderNode>& siblings) {
        for (size_t i = 1; i < siblings.size(); ++i) {
            const auto& prev = siblings[i - 1];
            const auto& cur = siblings[i];
            if (cur.span_start <= prev.span_end)
                add("SIBLING_ORDER", node_where(axis, cur),
                    "overlaps or precedes sibling '" + prev.value + "'");
        }
    }

    void check_tree(const HeaderTree& tree, Axis axis, int extent) {
        check_siblings(axis, tree.roots);
        for (const auto& root : tree.roots) check_node(axis, root, 0, nullptr, extent);

        // Leaf coverage of the data region.
        std::vector<int> cover(size_t(std::max(extent, 0)), 0);
        int leaf_count = 0;
        count_cover(tree.roots, extent, cover, leaf_count);
        for (int i = 0; i < extent; ++i) {
            std::string pos = std::string(position_name(axis)) + " " + std::to_string(i);
            if (cover[size_t(i)] == 0)
                add("COVERAGE", pos, std::string(axis_name(axis)) + " tree leaves leave a gap");
            else if (cover[size_t(i)] > 1)
                add("LEAF_OVERLAP", pos, "covered by " + std::to_string(cover[size_t(i)]) +
                                             " leaves of the " + axis_name(axis) + " tree");
        }
        if (leaf_count != extent)
            add("LEAF_COUNT", std::string(axis_name(axis)) + " tree",
                "leaf count " + std::to_string(leaf_count) + " != " +
                    (axis == Axis::Column ? "grid cols " : "grid rows ") + std::to_string(extent));
    }

    static void count_cover(const std::vector<HeaderNode>& nodes, int extent,
                            std::vector<int>& cover, int& leaf_count) {
        for (const auto& node : nodes) {
            if (node.leaf()) {
                ++leaf_count;
                if (node.span_start <= node.span_end) {
                    int lo = std::max(node.span_start, 0);
                    int hi = std::min(node.span_end, extent - 1);
                    for (int i = lo; i <= hi; ++i) ++cover[size_t(i)];
                }
            } else {
                count_cover(node.children, extent, cover, leaf_count);
            }
        }
    }

    void check_grid(const CellGrid& grid) {
        const auto& regions = grid.merged_regions();
        for (size_t i = 0; i < regions.size(); ++i) {
            const auto& r = regions[i];
            std::ostringstream os;
            os << "merged region [" << r.row_start << "," << r.row_end << "]x[" << r.col_start
               << "," << r.col_end << "]";
            auto where = os.str();
            bool in_range = r.row_start >= 0 && r.col_start >= 0 && r.row_start <= r.row_end &&
                            r.col_start <= r.col_end && r.row_end < grid.rows() &&
                            r.col_end < grid.cols();
            if (!in_range) {
                add("MERGE_RANGE", where, "outside the data region");
                continue;
            }
            for (size_t j = 0; j < i; ++j) {
                if (regions[j].overlaps(r)) {
                    add("MERGE_OVERLAP", where, "overlaps an earlier merged region");
                    break;
                }
            }
            const std::string& value = grid.at(r.row_start, r.col_start);
            for (int row = r.row_start; row <= r.row_end; ++row)
                for (int col = r.col_start; col <= r.col_end; ++col)
                    if (grid.at(row, col) != value) {
                        add("MERGE_VALUE", where,
                            "cell (" + std::to_string(row) + "," + std::to_string(col) +
                                ") does not carry the region value");
                    }
        }
    }
};

}  // namespace

void CellGrid::add_merged_region(const MergedRegion& region, std::string value) {
    regions_.push_back(region);
    for (int row = std::max(region.row_start, 0); row <= std::min(region.row_end, rows_ - 1);
         ++row)
        for (int col = std::max(region.col_start, 0); col <= std::min(region.col_end, cols_ - 1);
             ++col)
            set(row, col, value);
}

int HeaderTree::node_count() const { return count_nodes(roots); }

std::string ValidationReport::to_string() const {
    std::ostringstream os;
    for (size_t i = 0; i < violations.size(); ++i) {
        if (i) os << "; ";
        os << violations[i].code << " at " << violations[i].where << ": "
           << violations[i].detail;
    }
    return os.str();
}

ValidationReport validate_table(const SourceTable& table) {
    ValidationReport report;
    Validator v{report.violations};
    if (table.column_tree.axis != Axis::Column)
        v.add("AXIS", "column tree", "axis tag is not COLUMN");
    if (table.row_tree.axis != Axis::Row) v.add("AXIS", "row tree", "axis tag is not ROW");
    v.check_tree(table.column_tree, Axis::Column, table.grid.cols());
    v.check_tree(table.row_tree, Axis::Row, table.grid.rows());
    v.check_grid(table.grid);
    return report;
}

namespace {
void collect_leaves(const std::vector<HeaderNode>& nodes, std::vector<const HeaderNode*>& out) {
    for (const auto& node : nodes) {
        if (node.leaf())
            out.push_back(&node);
        else
            collect_leaves(node.children, out);
    }
}
}  // namespace

std::vector<const HeaderNode*> header_leaves(const HeaderTree& tree) {
    std::vector<const HeaderNode*> leaves;
    collect_leaves(tree.roots, leaves);
    std::stable_sort(leaves.begin(), leaves.end(), [](const HeaderNode* a, const HeaderNode* b) {
        return a->span_start < b->span_start;
    });
    return leaves;
}

int axis_extent(const SourceTable& table, Axis axis) {
    return axis == Axis::Column ? table.grid.cols() : table.grid.rows();
}

}  // namespace ctqa
