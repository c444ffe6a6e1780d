#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ctqa/dataset.hpp"
#include "ctqa/errors.hpp"

namespace ctqa {

using json = nlohmann::ordered_json;

namespace {

const std::set<std::string> kTableFields = {"id",   "title", "column_tree",   "row_tree",
                                            "rows", "cols",  "cells",         "merged_regions"};
const std::set<std::string> kNodeFields = {"value", "span", "children"};
const std::set<std::string> kQaFields = {"qa_id", "table_id",  "question",
                                         "gold_answers", "split", "subset_tags"};

void check_fields(const json& object, const std::set<std::string>& allowed,
                  const std::string& where) {
    for (const auto& [key, value] : object.items())
        if (!allowed.count(key)) throw SchemaError("unexpected field '" + key + "' in " + where);
}

std::string require_string(const json& object, const char* key, const std::string& where) {
    if (!object.contains(key)) throw SchemaError("missing field '" + std::string(key) + "' in " + where);
    if (!object.at(key).is_string())
        throw SchemaError("field '" + std::string(key) + "' must be a string in " + where);
    return object.at(key).get<std::string>();
}

int require_int(const json& object, const char* key, const std::string& where) {
    if (!object.contains(key)) throw SchemaError("missing field '" + std::string(key) + "' in " + where);
    if (!object.at(key).is_number_integer())
        throw SchemaError("field '" + std::string(key) + "' must be an integer in " + where);
    return object.at(key).get<int>();
}

std::string cell_text(const json& value, const std::string& where) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_number() || value.is_boolean() || value.is_null()) return value.dump();
    throw SchemaError("cell value must be a scalar in " + where);
}

HeaderNode node_from_json(const json& j, int depth, const std::string& where) {
    if (!j.is_object()) throw SchemaError("tree node must be an object in " + where);
    check_fields(j, kNodeFields, where);
    HeaderNode node;
    node.value = require_string(j, "value", where);
    node.level = depth;
    if (!j.contains("span") || !j.at("span").is_array() || j.at("span").size() != 2 ||
        !j.at("span")[0].is_number_integer() || !j.at("span")[1].is_number_integer())
        throw SchemaError("node '" + node.value + "' needs span [start, end] in " + where);
    node.span_start = j.at("span")[0].get<int>();
    node.span_end = j.at("span")[1].get<int>();
    if (j.contains("children")) {
        if (!j.at("children").is_array())
            throw SchemaError("children must be an array in " + where);
        for (const auto& child : j.at("children"))
            node.children.push_back(node_from_json(child, depth + 1, where));
    }
    return node;
}

json node_to_json(const HeaderNode& node) {
    json j{{"value", node.value}, {"span", json::array({node.span_start, node.span_end})}};
    if (!node.children.empty()) {
        json children = json::array();
        for (const auto& child : node.children) children.push_back(node_to_json(child));
        j["children"] = children;
    }
    return j;
}

std::vector<HeaderNode> tree_from_json(const json& array, const std::string& where) {
    if (!array.is_array()) throw SchemaError(where + " must be an array of nodes");
    std::vector<HeaderNode> roots;
    for (const auto& node : array) roots.push_back(node_from_json(node, 0, where));
    return roots;
}

}  // namespace

std::string_view split_name(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Dev: return "dev";
        case Split::Test: return "test";
        case Split::Unsplit: return "unsplit";
    }
    return "unsplit";
}

Split split_from_name(std::string_view name) {
    if (name == "train") return Split::Train;
    if (name == "dev") return Split::Dev;
    if (name == "test") return Split::Test;
    if (name == "unsplit") return Split::Unsplit;
    throw SchemaError("unknown split '" + std::string(name) + "'");
}

const SourceTable& Dataset::table_for(const QAPair& pair) const {
    auto it = tables.find(pair.table_id);
    if (it == tables.end())
        throw IntegrityError("qa pair " + pair.qa_id + " references unknown table " +
                             pair.table_id);
    return it->second;
}

void check_dataset(const Dataset& dataset) {
    for (const auto& pair : dataset.pairs) dataset.table_for(pair);
}

SourceTable load_canonical(const std::string& document) {
    json j = json::parse(document, nullptr, false);
    if (j.is_discarded()) throw SchemaError("canonical table document is not valid JSON");
    if (!j.is_object()) throw SchemaError("canonical table document must be an object");
    check_fields(j, kTableFields, "table document");

    SourceTable table;
    table.table_id = require_string(j, "id", "table document");
    const std::string where = "table " + table.table_id;
    table.title = require_string(j, "title", where);
    for (const char* key : {"column_tree", "row_tree", "cells"})
        if (!j.contains(key))
            throw SchemaError("missing field '" + std::string(key) + "' in " + where);
    table.column_tree = {Axis::Column, tree_from_json(j.at("column_tree"), where + " column_tree")};
    table.row_tree = {Axis::Row, tree_from_json(j.at("row_tree"), where + " row_tree")};
    int rows = require_int(j, "rows", where);
    int cols = require_int(j, "cols", where);
    if (rows < 0 || cols < 0) throw SchemaError("negative extent in " + where);
    table.grid = CellGrid(rows, cols);

    if (!j.contains("cells") || !j.at("cells").is_array() || int(j.at("cells").size()) != rows)
        throw SchemaError("cells must be a " + std::to_string(rows) + "-row array in " + where);
    for (int r = 0; r < rows; ++r) {
        const auto& row = j.at("cells")[size_t(r)];
        if (!row.is_array() || int(row.size()) != cols)
            throw SchemaError("cells row " + std::to_string(r) + " must have " +
                              std::to_string(cols) + " entries in " + where);
        for (int c = 0; c < cols; ++c) table.grid.set(r, c, cell_text(row[size_t(c)], where));
    }
    if (j.contains("merged_regions")) {
        if (!j.at("merged_regions").is_array())
            throw SchemaError("merged_regions must be an array in " + where);
        for (const auto& region : j.at("merged_regions")) {
            if (!region.is_array() || region.size() != 4)
                throw SchemaError("merged region must be [r0, r1, c0, c1] in " + where);
            MergedRegion m{region[0].get<int>(), region[1].get<int>(), region[2].get<int>(),
                           region[3].get<int>()};
            std::string value =
                table.grid.in_range(m.row_start, m.col_start) ? table.grid.at(m.row_start, m.col_start) : "";
            table.grid.add_merged_region(m, value);
        }
    }
    table.original_text = document;

    auto report = validate_table(table);
    if (!report.valid()) throw IntegrityError("table " + table.table_id + ": " + report.to_string());
    return table;
}

std::string serialize_canonical(const SourceTable& table) {
    json j;
    j["id"] = table.table_id;
    j["title"] = table.title;
    json column_tree = json::array();
    for (const auto& node : table.column_tree.roots) column_tree.push_back(node_to_json(node));
    j["column_tree"] = column_tree;
    json row_tree = json::array();
    for (const auto& node : table.row_tree.roots) row_tree.push_back(node_to_json(node));
    j["row_tree"] = row_tree;
    j["rows"] = table.grid.rows();
    j["cols"] = table.grid.cols();
    json cells = json::array();
    for (int r = 0; r < table.grid.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < table.grid.cols(); ++c) row.push_back(table.grid.at(r, c));
        cells.push_back(row);
    }
    j["cells"] = cells;
    if (!table.grid.merged_regions().empty()) {
        json regions = json::array();
        for (const auto& m : table.grid.merged_regions())
            regions.push_back(json::array({m.row_start, m.row_end, m.col_start, m.col_end}));
        j["merged_regions"] = regions;
    }
    return j.dump(2);
}

SourceTable load_canonical_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open table file " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return load_canonical(os.str());
}

QAPair parse_qa_record(const std::string& json_line) {
    json j = json::parse(json_line, nullptr, false);
    if (j.is_discarded()) throw SchemaError("qa record is not valid JSON");
    check_fields(j, kQaFields, "qa record");
    QAPair pair;
    pair.qa_id = require_string(j, "qa_id", "qa record");
    pair.table_id = require_string(j, "table_id", "qa record " + pair.qa_id);
    pair.question = require_string(j, "question", "qa record " + pair.qa_id);
    if (pair.question.empty())
        throw SchemaError("empty question in qa record " + pair.qa_id);
    if (!j.contains("gold_answers") || !j.at("gold_answers").is_array() ||
        j.at("gold_answers").empty())
        throw SchemaError("gold_answers must be a non-empty array in qa record " + pair.qa_id);
    for (const auto& answer : j.at("gold_answers"))
        pair.gold_answers.push_back(cell_text(answer, "qa record " + pair.qa_id));
    pair.split = split_from_name(require_string(j, "split", "qa record " + pair.qa_id));
    if (j.contains("subset_tags"))
        for (const auto& tag : j.at("subset_tags"))
            pair.subset_tags.insert(tag.get<std::string>());
    return pair;
}

std::string serialize_qa_record(const QAPair& pair) {
    json j{{"qa_id", pair.qa_id},
           {"table_id", pair.table_id},
           {"question", pair.question},
           {"gold_answers", pair.gold_answers},
           {"split", std::string(split_name(pair.split))},
           {"subset_tags", pair.subset_tags}};
    return j.dump();
}

Dataset load_canonical_dataset(const std::filesystem::path& dir, const std::string& name) {
    Dataset dataset;
    dataset.name = name.empty() ? dir.filename().string() : name;
    auto tables_dir = dir / "tables";
    if (!std::filesystem::is_directory(tables_dir))
        throw SchemaError("missing tables directory " + tables_dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(tables_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        auto table = load_canonical_file(file);
        dataset.tables.emplace(table.table_id, std::move(table));
    }
    auto qa_path = dir / "qa.jsonl";
    std::ifstream in(qa_path, std::ios::binary);
    if (!in) throw SchemaError("cannot open qa file " + qa_path.string());
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        dataset.pairs.push_back(parse_qa_record(line));
    }
    check_dataset(dataset);
    return dataset;
}

}  // namespace ctqa
