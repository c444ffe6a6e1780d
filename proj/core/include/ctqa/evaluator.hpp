#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctqa/dataset.hpp"
#include "ctqa/orchestrator.hpp"

namespace ctqa {

/// Normal form used for answer equivalence: lowercased, trimmed,
/// whitespace-collapsed text with surrounding quotes, terminal punctuation
/// and thousands separators removed; percent signs are stripped without
/// rescaling. `numeric` is set when the string is or starts with a number.
struct NormalizedAnswer {
    std::string text;
    std::optional<double> numeric;
    bool percent = false;
};

NormalizedAnswer normalize_answer(std::string_view raw);

/// Equivalence of a generated answer with gold parts: some part matches by
/// numeric agreement (relative tolerance 1e-6), normalized string equality,
/// or whole-token containment of the gold in the answer. Multi-part golds
/// require every part matched, order-insensitive.
bool answer_matches(std::string_view answer, const std::vector<std::string>& gold_answers);

/// Scoring entry point: failures and "I don't know" count as incorrect.
bool is_correct(const Prediction& prediction, const std::vector<std::string>& gold_answers);

struct PairOutcome {
    std::string qa_id;
    bool correct = false;
    RouteTaken route = RouteTaken::Single;
    bool idn = false;
    bool failed = false;
};

struct EvalReport {
    int n_total = 0;
    int n_correct = 0;
    int n_failed = 0;
    int n_idn = 0;
    double overall_accuracy = 0;
    double idn_rate = 0;
    std::map<std::string, double> by_split;
    std::map<std::string, double> by_subset;
    std::map<std::string, double> by_route;
    std::vector<PairOutcome> per_pair;  // dataset order
};

/// Scores predictions against the dataset's gold answers and computes the
/// per-split / per-subset / per-route breakdowns. With `strict`, a dataset
/// pair without a prediction raises MissingPairError; otherwise such pairs
/// are skipped.
EvalReport evaluate(const std::vector<Prediction>& predictions, const Dataset& dataset,
                    bool strict = false);

struct ErrorSample {
    std::string qa_id;
    std::vector<std::string> gold_answers;
    std::string answer;
    std::string route;
};

/// Reproducible, route-stratified sample of incorrect pairs. Returns all
/// errors when fewer than `n` exist.
std::vector<ErrorSample> error_sample(const EvalReport& report,
                                      const std::vector<Prediction>& predictions,
                                      const Dataset& dataset, int n, uint64_t seed);

/// Structured report document (JSON) and human-readable rendering.
std::string report_to_json(const EvalReport& report);
std::string render_report(const EvalReport& report);

/// Optional comparison scorer: asks a gateway whether the candidate answer
/// is equivalent to the gold. Returns nullopt when the verdict cannot be
/// parsed. Never feeds the default report; callers keep its results in a
/// side channel.
std::optional<bool> judge_answer(Gateway& gateway, const std::string& question,
                                 const std::vector<std::string>& gold_answers,
                                 const std::string& answer,
                                 const std::string& model_name = "text-davinci-003");

}  // namespace ctqa
