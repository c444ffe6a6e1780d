#include "ctqa/reconstructor.hpp"

#include <algorithm>
#include <cctype>

#include "ctqa/errors.hpp"

namespace ctqa {

namespace {

void collect_header_tuples(const std::vector<HeaderNode>& nodes, Axis axis,
                           std::vector<HeaderTuple>& out) {
    for (const auto& node : nodes) {
        out.push_back({axis, node.level, node.span_start, node.span_end, node.value});
        collect_header_tuples(node.children, axis, out);
    }
}

void sort_header_tuples(std::vector<HeaderTuple>& tuples) {
    std::stable_sort(tuples.begin(), tuples.end(), [](const HeaderTuple& a, const HeaderTuple& b) {
        if (a.level != b.level) return a.level < b.level;
        return a.span_start < b.span_start;
    });
}

std::string render_value(const std::string& value) {
    if (!tuple_value_needs_quoting(value)) return value;
    std::string out;
    out.reserve(value.size() + 2);
    out.push_back('"');
    for (char c : value) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

bool tuple_value_needs_quoting(std::string_view value) {
    if (value.empty()) return true;
    if (std::isspace(static_cast<unsigned char>(value.front())) ||
        std::isspace(static_cast<unsigned char>(value.back())))
        return true;
    return value.find_first_of(",()\":") != std::string_view::npos;
}

ReconstructedTable reconstruct(const SourceTable& table) {
    auto report = validate_table(table);
    if (!report.valid()) throw IntegrityError("invalid table: " + report.to_string());

    ReconstructedTable out;
    out.title = table.title;
    collect_header_tuples(table.column_tree.roots, Axis::Column, out.column_tuples);
    collect_header_tuples(table.row_tree.roots, Axis::Row, out.row_tuples);
    sort_header_tuples(out.column_tuples);
    sort_header_tuples(out.row_tuples);

    out.data_tuples.reserve(size_t(table.grid.rows()) * table.grid.cols());
    for (int row = 0; row < table.grid.rows(); ++row)
        for (int col = 0; col < table.grid.cols(); ++col)
            out.data_tuples.push_back({row, col, table.grid.at(row, col)});
    return out;
}

std::string serialize_tuple(const HeaderTuple& tuple) {
    std::string out = "(";
    out += tuple.axis == Axis::Column ? 'T' : 'L';
    out += ", " + std::to_string(tuple.level);
    out += ", " + std::to_string(tuple.span_start);
    out += ", " + std::to_string(tuple.span_end);
    out += ", " + render_value(tuple.value) + ")";
    return out;
}

std::string serialize_tuple(const DataTuple& tuple) {
    return "(C, " + std::to_string(tuple.row) + ", " + std::to_string(tuple.col) + ", " +
           render_value(tuple.value) + ")";
}

SerializedTable serialize_table(const ReconstructedTable& table) {
    SerializedTable out;
    out.title_text = table.title;
    auto join = [](const auto& tuples) {
        std::string text;
        for (size_t i = 0; i < tuples.size(); ++i) {
            if (i) text += ", ";
            text += serialize_tuple(tuples[i]);
        }
        return text;
    };
    out.column_header_text = join(table.column_tuples);
    out.row_header_text = join(table.row_tuples);
    out.non_header_text = join(table.data_tuples);
    return out;
}

}  // namespace ctqa
