#include <algorithm>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "ctqa/dataset.hpp"
#include "ctqa/errors.hpp"

// AIT-QA release mapping notes:
//  - column_header is read levels-major (one inner list per header row),
//    row_header rows-major (one inner list per data row); the other
//    orientation is auto-detected from the data dimensions;
//  - hierarchy is recovered by grouping adjacent equal values per level
//    within the parent's span, the flat format's merge convention;
//  - a group whose deeper levels are all empty ends in per-position leaves.

namespace ctqa {

using json = nlohmann::json;

namespace {

std::string scalar_text(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_null()) return "";
    return value.dump();
}

using LevelMatrix = std::vector<std::vector<std::string>>;  // [level][position]

LevelMatrix read_matrix(const json& field, const std::string& where) {
    if (!field.is_array()) throw SchemaError(where + " must be an array");
    LevelMatrix m;
    for (const auto& row : field) {
        if (!row.is_array()) throw SchemaError(where + " entries must be arrays");
        std::vector<std::string> cells;
        for (const auto& cell : row) cells.push_back(scalar_text(cell));
        m.push_back(std::move(cells));
    }
    return m;
}

LevelMatrix transpose(const LevelMatrix& m) {
    size_t width = 0;
    for (const auto& row : m) width = std::max(width, row.size());
    LevelMatrix out(width, std::vector<std::string>(m.size()));
    for (size_t r = 0; r < m.size(); ++r)
        for (size_t c = 0; c < m[r].size(); ++c) out[c][r] = m[r][c];
    return out;
}

bool uniform_width(const LevelMatrix& m, size_t width) {
    return std::all_of(m.begin(), m.end(),
                       [width](const auto& row) { return row.size() == width; });
}

bool any_nonempty(const LevelMatrix& levels, size_t from_level, size_t lo, size_t hi) {
    for (size_t l = from_level; l < levels.size(); ++l)
        for (size_t i = lo; i < hi; ++i)
            if (!levels[l][i].empty()) return true;
    return false;
}

std::vector<HeaderNode> group_levels(const LevelMatrix& levels, size_t level, size_t lo,
                                     size_t hi, int depth) {
    std::vector<HeaderNode> out;
    if (level >= levels.size()) return out;
    size_t a = lo;
    while (a < hi) {
        size_t b = a + 1;
        while (b < hi && levels[level][b] == levels[level][a]) ++b;
        const std::string& value = levels[level][a];
        if (any_nonempty(levels, level + 1, a, b)) {
            HeaderNode node{value, depth, int(a), int(b - 1),
                            group_levels(levels, level + 1, a, b, depth + 1)};
            out.push_back(std::move(node));
        } else {
            for (size_t i = a; i < b; ++i)
                out.push_back({value, depth, int(i), int(i), {}});
        }
        a = b;
    }
    return out;
}

std::string find_table_id(const json& j) {
    for (const char* key : {"id", "table_id"})
        if (j.contains(key)) return scalar_text(j.at(key));
    throw SchemaError("aitqa table: missing field 'id'");
}

bool truthy(const json& value) {
    if (value.is_boolean()) return value.get<bool>();
    if (value.is_number()) return value.get<double>() != 0;
    if (value.is_string()) {
        std::string s = value.get<std::string>();
        std::transform(s.begin(), s.end(), s.begin(),
                       [](unsigned char c) { return char(std::tolower(c)); });
        return s == "yes" || s == "true" || s == "1" || s == "y";
    }
    return false;
}

}  // namespace

std::pair<SourceTable, std::vector<QAPair>> adapt_aitqa(
    const std::string& table_record, const std::vector<std::string>& question_records) {
    json j = json::parse(table_record, nullptr, false);
    if (j.is_discarded()) throw SchemaError("aitqa table record is not valid JSON");

    SourceTable table;
    table.table_id = find_table_id(j);
    const std::string where = "aitqa table " + table.table_id;
    table.title = j.contains("title") ? scalar_text(j.at("title")) : table.table_id;
    table.original_text = table_record;

    if (!j.contains("data")) throw SchemaError(where + ": missing field 'data'");
    auto data = read_matrix(j.at("data"), where + " data");
    size_t data_rows = data.size();
    size_t data_cols = data.empty() ? 0 : data[0].size();
    if (!uniform_width(data, data_cols)) throw SchemaError(where + ": ragged data rows");

    if (!j.contains("column_header")) throw SchemaError(where + ": missing field 'column_header'");
    auto column_levels = read_matrix(j.at("column_header"), where + " column_header");
    if (!uniform_width(column_levels, data_cols)) {
        auto transposed = transpose(column_levels);
        if (!uniform_width(transposed, data_cols))
            throw SchemaError(where + ": column_header does not match data width");
        column_levels = std::move(transposed);
    }

    if (!j.contains("row_header")) throw SchemaError(where + ": missing field 'row_header'");
    auto row_paths = read_matrix(j.at("row_header"), where + " row_header");
    LevelMatrix row_levels;  // [level][data row]
    if (row_paths.size() == data_rows) {
        row_levels = transpose(row_paths);
    } else if (uniform_width(row_paths, data_rows)) {
        row_levels = std::move(row_paths);
    } else {
        throw SchemaError(where + ": row_header does not match data height");
    }

    table.column_tree = {Axis::Column, group_levels(column_levels, 0, 0, data_cols, 0)};
    table.row_tree = {Axis::Row, group_levels(row_levels, 0, 0, data_rows, 0)};

    table.grid = CellGrid(int(data_rows), int(data_cols));
    for (size_t r = 0; r < data_rows; ++r)
        for (size_t c = 0; c < data_cols; ++c) table.grid.set(int(r), int(c), data[r][c]);

    auto report = validate_table(table);
    if (!report.valid()) throw IntegrityError(where + ": " + report.to_string());

    std::vector<QAPair> pairs;
    for (const auto& record : question_records) {
        json q = json::parse(record, nullptr, false);
        if (q.is_discarded()) throw SchemaError("aitqa question record is not valid JSON");
        QAPair pair;
        for (const char* key : {"id", "question_id", "qa_id"})
            if (q.contains(key)) {
                pair.qa_id = scalar_text(q.at(key));
                break;
            }
        if (pair.qa_id.empty()) throw SchemaError("aitqa question: missing field 'id'");
        pair.table_id = q.value("table_id", table.table_id);
        if (!q.contains("question") || scalar_text(q.at("question")).empty())
            throw SchemaError("aitqa question " + pair.qa_id + ": missing or empty 'question'");
        pair.question = scalar_text(q.at("question"));
        const char* answer_key = q.contains("answers") ? "answers" : "answer";
        if (!q.contains(answer_key))
            throw SchemaError("aitqa question " + pair.qa_id + ": missing field 'answers'");
        if (q.at(answer_key).is_array())
            for (const auto& part : q.at(answer_key))
                pair.gold_answers.push_back(scalar_text(part));
        else
            pair.gold_answers.push_back(scalar_text(q.at(answer_key)));
        if (pair.gold_answers.empty())
            throw SchemaError("aitqa question " + pair.qa_id + ": empty 'answers'");
        pair.split = Split::Unsplit;

        if (q.contains("type")) {
            std::string type = scalar_text(q.at("type"));
            std::transform(type.begin(), type.end(), type.begin(),
                           [](unsigned char c) { return char(std::tolower(c)); });
            if (type.find("kpi") != std::string::npos)
                pair.subset_tags.insert("kpi-driven");
            else if (type.find("table") != std::string::npos)
                pair.subset_tags.insert("table-driven");
        }
        for (const char* key :
             {"row_header_hierarchy", "row_hierarchy", "hierarchy", "hierarchical"})
            if (q.contains(key)) {
                pair.subset_tags.insert(truthy(q.at(key)) ? "row-header-hierarchy"
                                                          : "no-row-header-hierarchy");
                break;
            }
        pairs.push_back(std::move(pair));
    }
    return {std::move(table), std::move(pairs)};
}

Dataset load_aitqa(const std::filesystem::path& release_dir) {
    namespace fs = std::filesystem;
    Dataset dataset;
    dataset.name = "aitqa";

    auto find_file = [&release_dir](std::initializer_list<const char*> names) -> fs::path {
        const fs::path bases[] = {release_dir, release_dir / "data"};
        for (const char* name : names)
            for (const auto& base : bases)
                if (fs::exists(base / name)) return base / name;
        return {};
    };
    fs::path tables_path = find_file({"aitqa_clean_tables.jsonl", "tables.jsonl"});
    fs::path questions_path = find_file({"aitqa_clean_questions.jsonl", "questions.jsonl"});
    if (tables_path.empty() || questions_path.empty())
        throw SchemaError("aitqa release: tables/questions jsonl not found under " +
                          release_dir.string());

    std::map<std::string, std::vector<std::string>> questions_by_table;
    {
        std::ifstream in(questions_path, std::ios::binary);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json q = json::parse(line, nullptr, false);
            if (q.is_discarded() || !q.contains("table_id"))
                throw SchemaError("aitqa question without table_id in " +
                                  questions_path.string());
            questions_by_table[scalar_text(q.at("table_id"))].push_back(line);
        }
    }
    std::ifstream in(tables_path, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json probe = json::parse(line, nullptr, false);
        if (probe.is_discarded()) throw SchemaError("malformed table record in " + tables_path.string());
        auto id = find_table_id(probe);
        auto it = questions_by_table.find(id);
        auto [table, pairs] = adapt_aitqa(
            line, it == questions_by_table.end() ? std::vector<std::string>{} : it->second);
        dataset.tables.emplace(table.table_id, std::move(table));
        for (auto& pair : pairs) dataset.pairs.push_back(std::move(pair));
    }
    check_dataset(dataset);
    return dataset;
}

}  // namespace ctqa
