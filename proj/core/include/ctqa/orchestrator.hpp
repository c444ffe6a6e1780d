#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "ctqa/gateway.hpp"
#include "ctqa/prompts.hpp"
#include "ctqa/reconstructor.hpp"
#include "ctqa/retrieval.hpp"
#include "ctqa/table_model.hpp"

namespace ctqa {

/// The five labeled fields the prompts require, parsed from raw model
/// output. Tuple lists hold whatever parse_tuples accepted from the
/// corresponding labeled lines.
struct StructuredAnswer {
    std::vector<HeaderTuple> column_headers;
    std::vector<HeaderTuple> row_headers;
    std::vector<DataTuple> cells;
    std::string operation;
    std::string answer;
    bool idn = false;  // "I don't know"
    std::string raw_text;
    std::vector<std::string> notes;  // format violations, dropped tuples, truncation
};

/// Total, order-insensitive parse of a model response. Lines are matched
/// against the labeled prefixes (numbering- and case-tolerant); when no
/// "Answer:" line exists the whole text becomes the answer and a
/// format-violation note is recorded.
StructuredAnswer parse_structured_answer(std::string_view text);

enum class RouteTaken { Single, Multi, Simple };
std::string_view route_name(RouteTaken route);

struct Prediction {
    std::string qa_id;
    RouteTaken route_taken = RouteTaken::Single;
    std::optional<StructuredAnswer> structured;
    std::string transcript_ref;
    std::optional<std::string> failure;  // short tag, e.g. "turn2:network"
    std::string failure_detail;
    bool truncated = false;  // simple mode tail truncation

    bool failed() const { return failure.has_value(); }
};

enum class SchemeMode { Auto, SingleOnly, MultiOnly, Simple };

struct OrchestratorOptions {
    TokenBudget budget;
    SchemeMode mode = SchemeMode::Auto;
    std::string model_name = "text-davinci-003";
    int max_generated_tokens = 512;
    double temperature = 0.0;
    std::vector<std::string> stop_sequences;
    std::chrono::milliseconds per_question_timeout{120000};
};

/// Runs the full flow for one question: reconstruct, route, drive the
/// selected dialogue scheme, parse the structured answer. The code
/// assistant step never calls the gateway: exactly one completion on the
/// single-turn route, three on the multi-turn route, one in simple mode.
class Orchestrator {
public:
    Orchestrator(const PromptEngine& engine, OrchestratorOptions options)
        : engine_(engine), options_(std::move(options)) {}

    /// Routes by mode and token budget. When `transcript` is given, every
    /// completion is appended to it.
    Prediction answer(const SourceTable& table, const std::string& question,
                      const std::string& qa_id, Gateway& gateway,
                      Transcript* transcript = nullptr) const;

    Prediction answer_single_turn(const SourceTable& table, const std::string& question,
                                  const std::string& qa_id, Gateway& gateway,
                                  Transcript* transcript = nullptr) const;
    Prediction answer_multi_turn(const SourceTable& table, const std::string& question,
                                 const std::string& qa_id, Gateway& gateway,
                                 Transcript* transcript = nullptr) const;
    Prediction answer_simple(const SourceTable& table, const std::string& question,
                             const std::string& qa_id, Gateway& gateway,
                             Transcript* transcript = nullptr) const;

    const OrchestratorOptions& options() const { return options_; }

private:
    struct Flow;

    const PromptEngine& engine_;
    OrchestratorOptions options_;
};

/// Line-delimited serialization of predictions.
std::string serialize_prediction(const Prediction& prediction);
Prediction parse_prediction(const std::string& json_line);

}  // namespace ctqa
