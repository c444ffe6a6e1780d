#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ctqa/dataset.hpp"
#include "ctqa/errors.hpp"

// HiTab release mapping notes, resolved in favor of the rendered table:
//  - header levels come from tree depth (top_root / left_root children are
//    level 0), not from row offsets;
//  - a left-tree node's own matrix row is dropped from the data region when
//    it carries no data (pure section headers), and kept via a synthetic
//    self-leaf when it does;
//  - matrix rows not covered by the left tree fail ingestion unless they
//    are entirely empty;
//  - childless header cells merged across several rows/columns become one
//    leaf per covered position, keeping leaf spans single-width.

namespace ctqa {

using json = nlohmann::json;

namespace {

struct Matrix {
    std::vector<std::vector<std::string>> cells;

    int rows() const { return int(cells.size()); }
    int cols() const { return cells.empty() ? 0 : int(cells[0].size()); }
    const std::string& at(int r, int c) const { return cells[size_t(r)][size_t(c)]; }
};

struct RawRegion {
    int first_row, last_row, first_col, last_col;
};

std::string scalar_text(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_null()) return "";
    return value.dump();
}

Matrix read_texts(const json& j) {
    if (!j.contains("texts") || !j.at("texts").is_array())
        throw SchemaError("hitab table: missing field 'texts'");
    Matrix m;
    size_t width = 0;
    for (const auto& row : j.at("texts")) {
        if (!row.is_array()) throw SchemaError("hitab table: 'texts' rows must be arrays");
        std::vector<std::string> cells;
        for (const auto& cell : row) cells.push_back(scalar_text(cell));
        width = std::max(width, cells.size());
        m.cells.push_back(std::move(cells));
    }
    for (auto& row : m.cells) row.resize(width);
    return m;
}

std::vector<RawRegion> read_regions(const json& j) {
    std::vector<RawRegion> regions;
    if (!j.contains("merged_regions")) return regions;
    for (const auto& r : j.at("merged_regions")) {
        regions.push_back({r.at("first_row").get<int>(), r.at("last_row").get<int>(),
                           r.at("first_column").get<int>(), r.at("last_column").get<int>()});
    }
    return regions;
}

const RawRegion* region_containing(const std::vector<RawRegion>& regions, int row, int col) {
    for (const auto& r : regions)
        if (row >= r.first_row && row <= r.last_row && col >= r.first_col && col <= r.last_col)
            return &r;
    return nullptr;
}

struct TreeNode {
    int row = -1;
    int col = -1;
    std::vector<TreeNode> children;
};

TreeNode read_tree(const json& j, const char* key) {
    if (!j.contains(key)) throw SchemaError(std::string("hitab table: missing field '") + key + "'");
    std::function<TreeNode(const json&)> rec = [&rec, key](const json& node) {
        TreeNode out;
        out.row = node.value("row_index", -1);
        out.col = node.value("column_index", -1);
        if (node.contains("children"))
            for (const auto& child : node.at("children")) out.children.push_back(rec(child));
        return out;
    };
    return rec(j.at(key));
}

int max_coord(const TreeNode& node, bool row_coord) {
    int best = row_coord ? node.row : node.col;
    for (const auto& child : node.children) best = std::max(best, max_coord(child, row_coord));
    return best;
}

// Replaces a childless node spanning several positions with per-position
// leaves so leaf spans stay single-width.
void append_leaves(std::vector<HeaderNode>& out, const std::string& value, int level, int lo,
                   int hi) {
    for (int i = lo; i <= hi; ++i) out.push_back({value, level, i, i, {}});
}

// --- column tree -----------------------------------------------------------

std::vector<HeaderNode> build_column_nodes(const std::vector<TreeNode>& nodes,
                                           const Matrix& texts,
                                           const std::vector<RawRegion>& regions, int left_cols,
                                           int level) {
    std::vector<HeaderNode> out;
    for (const auto& node : nodes) {
        if (node.row < 0 || node.row >= texts.rows() || node.col < 0 ||
            node.col >= texts.cols())
            throw SchemaError("hitab table: top tree node outside the matrix");
        int lo = node.col;
        int hi = node.col;
        if (const auto* region = region_containing(regions, node.row, node.col)) {
            lo = region->first_col;
            hi = region->last_col;
        }
        lo = std::max(lo - left_cols, 0);
        hi = hi - left_cols;
        std::string value = texts.at(node.row, node.col);
        if (node.children.empty()) {
            append_leaves(out, value, level, lo, hi);
            continue;
        }
        HeaderNode header{value, level, lo, hi, build_column_nodes(node.children, texts, regions,
                                                                   left_cols, level + 1)};
        for (const auto& child : header.children) {
            header.span_start = std::min(header.span_start, child.span_start);
            header.span_end = std::max(header.span_end, child.span_end);
        }
        out.push_back(std::move(header));
    }
    std::sort(out.begin(), out.end(),
              [](const HeaderNode& a, const HeaderNode& b) { return a.span_start < b.span_start; });
    return out;
}

// --- row tree --------------------------------------------------------------

struct RowNode {
    std::string value;
    std::vector<int> own_rows;  // matrix rows of the header cell itself
    std::vector<RowNode> children;
    bool self_leaf = false;  // own rows carry data: keep them as a leaf
};

RowNode build_row_node(const TreeNode& node, const Matrix& texts,
                       const std::vector<RawRegion>& regions, int left_cols) {
    if (node.row < 0 || node.row >= texts.rows() || node.col < 0 || node.col >= texts.cols())
        throw SchemaError("hitab table: left tree node outside the matrix");
    RowNode out;
    out.value = texts.at(node.row, node.col);
    int lo = node.row;
    int hi = node.row;
    if (const auto* region = region_containing(regions, node.row, node.col)) {
        lo = region->first_row;
        hi = region->last_row;
    }
    for (int r = lo; r <= hi; ++r) out.own_rows.push_back(r);
    for (const auto& child : node.children)
        out.children.push_back(build_row_node(child, texts, regions, left_cols));
    if (!out.children.empty()) {
        bool own_has_data = false;
        for (int r : out.own_rows)
            for (int c = left_cols; c < texts.cols() && !own_has_data; ++c)
                if (!texts.at(r, c).empty()) own_has_data = true;
        out.self_leaf = own_has_data;
    }
    return out;
}

void collect_leaf_rows(const RowNode& node, std::vector<int>& rows) {
    if (node.children.empty() || node.self_leaf)
        rows.insert(rows.end(), node.own_rows.begin(), node.own_rows.end());
    for (const auto& child : node.children) collect_leaf_rows(child, rows);
}

HeaderNode lower_row_node(const RowNode& node, const std::map<int, int>& row_map, int level) {
    if (node.children.empty()) {
        // Merged multi-row leaves become one leaf per covered row.
        HeaderNode placeholder{node.value, level, 0, -1, {}};
        std::vector<HeaderNode> leaves;
        for (int r : node.own_rows) {
            int mapped = row_map.at(r);
            leaves.push_back({node.value, level, mapped, mapped, {}});
        }
        if (leaves.size() == 1) return leaves.front();
        // Caller flattens via the returned children.
        placeholder.children = std::move(leaves);
        placeholder.span_start = placeholder.children.front().span_start;
        placeholder.span_end = placeholder.children.back().span_end;
        return placeholder;
    }
    HeaderNode header{node.value, level, 0, -1, {}};
    if (node.self_leaf)
        for (int r : node.own_rows) {
            int mapped = row_map.at(r);
            header.children.push_back({node.value, level + 1, mapped, mapped, {}});
        }
    for (const auto& child : node.children) {
        auto lowered = lower_row_node(child, row_map, level + 1);
        if (lowered.span_end < lowered.span_start) continue;
        if (!lowered.children.empty() && lowered.children.front().level == lowered.level) {
            // Flattened multi-row leaf: splice the per-row leaves in.
            for (auto& leaf : lowered.children) header.children.push_back(std::move(leaf));
        } else {
            header.children.push_back(std::move(lowered));
        }
    }
    std::sort(header.children.begin(), header.children.end(),
              [](const HeaderNode& a, const HeaderNode& b) { return a.span_start < b.span_start; });
    header.span_start = header.children.front().span_start;
    header.span_end = header.children.back().span_end;
    return header;
}

}  // namespace

std::pair<SourceTable, std::vector<QAPair>> adapt_hitab(
    const std::string& table_document,
    const std::vector<std::pair<std::string, Split>>& sample_records) {
    json j = json::parse(table_document, nullptr, false);
    if (j.is_discarded()) throw SchemaError("hitab table document is not valid JSON");

    Matrix texts = read_texts(j);
    auto regions = read_regions(j);
    TreeNode top = read_tree(j, "top_root");
    TreeNode left = read_tree(j, "left_root");

    int top_rows = j.value("top_header_rows_num", max_coord(top, true) + 1);
    int left_cols = j.value("left_header_columns_num", max_coord(left, false) + 1);
    if (top_rows <= 0 || top_rows > texts.rows() || left_cols <= 0 || left_cols > texts.cols())
        throw SchemaError("hitab table: header extents are inconsistent with 'texts'");

    SourceTable table;
    table.table_id = j.contains("table_id") ? scalar_text(j.at("table_id"))
                                            : j.value("id", std::string());
    table.title = j.value("title", std::string());
    table.original_text = table_document;

    table.column_tree = {
        Axis::Column, build_column_nodes(top.children, texts, regions, left_cols, 0)};

    // Row tree: leaves claim matrix rows; claimed rows map to data rows in
    // ascending order.
    std::vector<RowNode> row_roots;
    for (const auto& child : left.children)
        row_roots.push_back(build_row_node(child, texts, regions, left_cols));
    std::vector<int> leaf_rows;
    for (const auto& root : row_roots) collect_leaf_rows(root, leaf_rows);
    std::sort(leaf_rows.begin(), leaf_rows.end());
    std::map<int, int> row_map;
    for (int r : leaf_rows) {
        if (row_map.count(r))
            throw SchemaError("hitab table: matrix row " + std::to_string(r) +
                              " claimed by two left-tree leaves");
        row_map.emplace(r, int(row_map.size()));
    }
    for (int r = top_rows; r < texts.rows(); ++r) {
        if (row_map.count(r)) continue;
        for (int c = left_cols; c < texts.cols(); ++c)
            if (!texts.at(r, c).empty())
                throw SchemaError("hitab table: data row " + std::to_string(r) +
                                  " is not covered by the left header tree");
    }

    std::vector<HeaderNode> row_nodes;
    for (const auto& root : row_roots) {
        auto lowered = lower_row_node(root, row_map, 0);
        if (lowered.span_end < lowered.span_start) continue;
        if (!lowered.children.empty() && lowered.children.front().level == lowered.level) {
            for (auto& leaf : lowered.children) row_nodes.push_back(std::move(leaf));
        } else {
            row_nodes.push_back(std::move(lowered));
        }
    }
    std::sort(row_nodes.begin(), row_nodes.end(),
              [](const HeaderNode& a, const HeaderNode& b) { return a.span_start < b.span_start; });
    table.row_tree = {Axis::Row, std::move(row_nodes)};

    // Data grid over leaf-mapped rows.
    int data_rows = int(row_map.size());
    int data_cols = texts.cols() - left_cols;
    table.grid = CellGrid(data_rows, data_cols);
    for (const auto& [matrix_row, data_row] : row_map)
        for (int c = 0; c < data_cols; ++c)
            table.grid.set(data_row, c, texts.at(matrix_row, left_cols + c));

    // Merged regions fully inside the data area, mapped through the row map.
    for (const auto& r : regions) {
        if (r.first_row < top_rows || r.first_col < left_cols) continue;
        int lo_row = texts.rows(), hi_row = -1;
        for (int row = r.first_row; row <= r.last_row; ++row) {
            auto it = row_map.find(row);
            if (it == row_map.end()) continue;
            lo_row = std::min(lo_row, it->second);
            hi_row = std::max(hi_row, it->second);
        }
        if (hi_row < 0) continue;
        MergedRegion mapped{lo_row, hi_row, r.first_col - left_cols, r.last_col - left_cols};
        table.grid.add_merged_region(mapped, texts.at(r.first_row, r.first_col));
    }

    auto report = validate_table(table);
    if (!report.valid())
        throw IntegrityError("hitab table " + table.table_id + ": " + report.to_string());

    std::vector<QAPair> pairs;
    for (const auto& [record, split] : sample_records) {
        json s = json::parse(record, nullptr, false);
        if (s.is_discarded()) throw SchemaError("hitab sample is not valid JSON");
        QAPair pair;
        if (s.contains("id"))
            pair.qa_id = scalar_text(s.at("id"));
        else if (s.contains("sample_id"))
            pair.qa_id = scalar_text(s.at("sample_id"));
        else
            throw SchemaError("hitab sample: missing field 'id'");
        pair.table_id = s.value("table_id", table.table_id);
        if (!s.contains("question") || !s.at("question").is_string() ||
            s.at("question").get<std::string>().empty())
            throw SchemaError("hitab sample " + pair.qa_id + ": missing or empty 'question'");
        pair.question = s.at("question").get<std::string>();
        if (!s.contains("answer"))
            throw SchemaError("hitab sample " + pair.qa_id + ": missing field 'answer'");
        if (s.at("answer").is_array())
            for (const auto& part : s.at("answer")) pair.gold_answers.push_back(scalar_text(part));
        else
            pair.gold_answers.push_back(scalar_text(s.at("answer")));
        if (pair.gold_answers.empty())
            throw SchemaError("hitab sample " + pair.qa_id + ": empty 'answer'");
        pair.split = split;
        pairs.push_back(std::move(pair));
    }
    return {std::move(table), std::move(pairs)};
}

Dataset load_hitab(const std::filesystem::path& release_dir) {
    namespace fs = std::filesystem;
    Dataset dataset;
    dataset.name = "hitab";

    fs::path tables_dir;
    for (const char* candidate : {"tables/raw", "tables/hmt", "tables", "raw"}) {
        if (fs::is_directory(release_dir / candidate)) {
            tables_dir = release_dir / candidate;
            break;
        }
    }
    if (tables_dir.empty())
        throw SchemaError("hitab release: no tables directory under " + release_dir.string());

    // Samples grouped by table id, keyed to the split of their file.
    std::map<std::string, std::vector<std::pair<std::string, Split>>> samples_by_table;
    const std::pair<const char*, Split> sample_files[] = {
        {"train_samples.jsonl", Split::Train},
        {"dev_samples.jsonl", Split::Dev},
        {"test_samples.jsonl", Split::Test}};
    for (const auto& [filename, split] : sample_files) {
        fs::path path = release_dir / filename;
        if (!fs::exists(path)) path = release_dir / "data" / filename;
        if (!fs::exists(path)) continue;
        std::ifstream in(path, std::ios::binary);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json s = json::parse(line, nullptr, false);
            if (s.is_discarded() || !s.contains("table_id"))
                throw SchemaError("hitab sample without table_id in " + path.string());
            samples_by_table[scalar_text(s.at("table_id"))].emplace_back(line, split);
        }
    }

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(tables_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        std::ifstream in(file, std::ios::binary);
        std::ostringstream os;
        os << in.rdbuf();
        std::string stem = file.stem().string();
        auto it = samples_by_table.find(stem);
        auto [table, pairs] =
            adapt_hitab(os.str(), it == samples_by_table.end()
                                      ? std::vector<std::pair<std::string, Split>>{}
                                      : it->second);
        if (table.table_id.empty()) table.table_id = stem;
        for (auto& pair : pairs) pair.table_id = table.table_id;
        dataset.tables.emplace(table.table_id, std::move(table));
        for (auto& pair : pairs) dataset.pairs.push_back(std::move(pair));
    }
    check_dataset(dataset);
    return dataset;
}

}  // namespace ctqa
