#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ctqa/table_model.hpp"

namespace ctqa {

enum class Split { Train, Dev, Test, Unsplit };
std::string_view split_name(Split split);
Split split_from_name(std::string_view name);  // throws SchemaError

struct QAPair {
    std::string qa_id;
    std::string table_id;
    std::string question;
    std::vector<std::string> gold_answers;  // multi-part golds: all parts required
    Split split = Split::Unsplit;
    std::set<std::string> subset_tags;
};

struct Dataset {
    std::string name;
    std::map<std::string, SourceTable> tables;
    std::vector<QAPair> pairs;

    const SourceTable& table_for(const QAPair& pair) const;  // throws IntegrityError
};

/// Referential integrity between pairs and tables; throws IntegrityError.
void check_dataset(const Dataset& dataset);

// --- canonical table format ---------------------------------------------
//
// One JSON document per table: {id, title, column_tree, row_tree, rows,
// cols, cells, merged_regions?}. Tree nodes are {value, span: [start,end],
// children?}; levels are implied by depth. Cells is a rows x cols array;
// merged_regions entries are [row_start, row_end, col_start, col_end].

SourceTable load_canonical(const std::string& document);
std::string serialize_canonical(const SourceTable& table);
SourceTable load_canonical_file(const std::filesystem::path& path);

/// QA records are line-delimited JSON: {qa_id, table_id, question,
/// gold_answers, split, subset_tags}.
QAPair parse_qa_record(const std::string& json_line);
std::string serialize_qa_record(const QAPair& pair);

/// Loads dir/tables/*.json and dir/qa.jsonl.
Dataset load_canonical_dataset(const std::filesystem::path& dir, const std::string& name = "");

// --- dataset adapters ----------------------------------------------------

/// HiTab release format: table documents carrying texts, merged_regions,
/// top_root/left_root trees and header extents; samples are line-delimited
/// records with id/table_id/question/answer. Sample records are paired
/// with the split of the file they came from.
std::pair<SourceTable, std::vector<QAPair>> adapt_hitab(
    const std::string& table_document,
    const std::vector<std::pair<std::string, Split>>& sample_records = {});

/// Release layout: tables under <dir>/tables (or tables/raw, tables/hmt)
/// and {train,dev,test}_samples.jsonl at the top level.
Dataset load_hitab(const std::filesystem::path& release_dir);

/// AIT-QA release format: one JSON record per table with stacked
/// column_header / row_header matrices and a data grid; question records
/// carry answers plus the KPI/table-driven and row-hierarchy subset flags.
std::pair<SourceTable, std::vector<QAPair>> adapt_aitqa(
    const std::string& table_record, const std::vector<std::string>& question_records = {});

/// Release layout: <dir>/aitqa_clean_tables.jsonl and
/// <dir>/aitqa_clean_questions.jsonl.
Dataset load_aitqa(const std::filesystem::path& release_dir);

}  // namespace ctqa
