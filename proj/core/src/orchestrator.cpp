#include "ctqa/orchestrator.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include <nlohmann/json.hpp>

#include "ctqa/errors.hpp"

namespace ctqa {

using json = nlohmann::ordered_json;

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// "I don't know" detection, tolerant of the curly apostrophe.
bool contains_idn(std::string_view answer) {
    std::string lowered = to_lower(answer);
    size_t pos;
    while ((pos = lowered.find("\xe2\x80\x99")) != std::string::npos)
        lowered.replace(pos, 3, "'");
    return lowered.find("i don't know") != std::string::npos ||
           lowered.find("i dont know") != std::string::npos;
}

enum Field { kColumnHeader = 0, kRowHeader, kCell, kOperation, kAnswer, kFieldCount };

const char* field_label(int field) {
    static const char* kLabels[] = {"column header", "row header", "cell", "operation", "answer"};
    return kLabels[field];
}

// Matches an optional "3." / "3)" numbering followed by a known label and
// a colon; returns the field index and the content start.
std::optional<std::pair<int, size_t>> match_label(std::string_view line) {
    size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    size_t digits = i;
    while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits])))
        ++digits;
    if (digits > i && digits < line.size() && (line[digits] == '.' || line[digits] == ')')) {
        i = digits + 1;
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    }
    std::string lowered = to_lower(line.substr(i));
    for (int f = 0; f < kFieldCount; ++f) {
        std::string label = field_label(f);
        for (const std::string& variant : {label, label + "s"}) {
            if (lowered.rfind(variant, 0) == 0) {
                size_t after = i + variant.size();
                while (after < line.size() &&
                       std::isspace(static_cast<unsigned char>(line[after])))
                    ++after;
                if (after < line.size() && line[after] == ':')
                    return std::make_pair(f, after + 1);
            }
        }
    }
    return std::nullopt;
}

}  // namespace

StructuredAnswer parse_structured_answer(std::string_view text) {
    StructuredAnswer sa;
    sa.raw_text = std::string(text);

    std::array<std::string, kFieldCount> bodies;
    std::array<bool, kFieldCount> seen{};
    int current = -1;

    size_t start = 0;
    while (start <= text.size()) {
        size_t end = text.find('\n', start);
        auto line = text.substr(start, end == std::string_view::npos ? end : end - start);
        if (auto m = match_label(line)) {
            current = m->first;
            seen[size_t(current)] = true;
            bodies[size_t(current)] = trim(line.substr(m->second));
        } else if (current >= 0 && !trim(line).empty()) {
            bodies[size_t(current)] += "\n" + std::string(line);
        }
        if (end == std::string_view::npos) break;
        start = end + 1;
    }

    bool any_seen = std::any_of(seen.begin(), seen.end(), [](bool b) { return b; });
    if (!any_seen) {
        sa.answer = trim(text);
        sa.notes.push_back("format violation: no labeled lines; raw text taken as answer");
    } else {
        sa.column_headers = parse_tuples(bodies[kColumnHeader]).headers;
        sa.row_headers = parse_tuples(bodies[kRowHeader]).headers;
        sa.cells = parse_tuples(bodies[kCell]).cells;
        sa.operation = bodies[kOperation];
        if (seen[kAnswer]) {
            sa.answer = bodies[kAnswer];
        } else {
            sa.answer = trim(text);
            sa.notes.push_back("format violation: no Answer line; raw text taken as answer");
        }
        std::string missing;
        for (int f = 0; f < kFieldCount; ++f)
            if (!seen[size_t(f)]) missing += (missing.empty() ? "" : ", ") + std::string(field_label(f));
        if (!missing.empty()) sa.notes.push_back("missing fields: " + missing);
    }
    sa.idn = contains_idn(sa.answer);
    return sa;
}

std::string_view route_name(RouteTaken route) {
    switch (route) {
        case RouteTaken::Single: return "SINGLE";
        case RouteTaken::Multi: return "MULTI";
        case RouteTaken::Simple: return "SIMPLE";
    }
    return "SINGLE";
}

// Shared per-question state: deadline tracking, gateway access with
// per-turn error tagging, transcript recording.
struct Orchestrator::Flow {
    const Orchestrator& self;
    Gateway& gateway;
    Transcript* transcript;
    std::chrono::steady_clock::time_point deadline;

    Flow(const Orchestrator& orch, Gateway& gw, Transcript* tr)
        : self(orch),
          gateway(gw),
          transcript(tr),
          deadline(std::chrono::steady_clock::now() + orch.options_.per_question_timeout) {}

    bool timed_out() const { return std::chrono::steady_clock::now() > deadline; }

    CompletionRequest make_request(std::string prompt) const {
        CompletionRequest request;
        request.prompt = std::move(prompt);
        request.model_name = self.options_.model_name;
        request.max_generated_tokens = self.options_.max_generated_tokens;
        request.temperature = self.options_.temperature;
        request.stop_sequences = self.options_.stop_sequences;
        return request;
    }

    CompletionResult complete(const FilledPrompt& prompt) {
        auto request = make_request(prompt.text);
        auto result = gateway.complete(request);
        if (transcript)
            transcript->entries.push_back({request_digest(request), request, result});
        return result;
    }
};

namespace {

std::string failure_tag(const GatewayError& error) {
    if (dynamic_cast<const ContextLengthExceeded*>(&error)) return "context_length";
    if (dynamic_cast<const RateLimited*>(&error)) return "rate_limited";
    if (dynamic_cast<const ReplayMiss*>(&error)) return "replay_miss";
    if (dynamic_cast<const NetworkError*>(&error)) return "network";
    if (dynamic_cast<const StorageError*>(&error)) return "storage";
    return "gateway";
}

Prediction failed_prediction(std::string qa_id, RouteTaken route, std::string tag,
                             std::string detail) {
    Prediction p;
    p.qa_id = std::move(qa_id);
    p.route_taken = route;
    p.failure = std::move(tag);
    p.failure_detail = std::move(detail);
    return p;
}

}  // namespace

Prediction Orchestrator::answer(const SourceTable& table, const std::string& question,
                                const std::string& qa_id, Gateway& gateway,
                                Transcript* transcript) const {
    switch (options_.mode) {
        case SchemeMode::SingleOnly:
            return answer_single_turn(table, question, qa_id, gateway, transcript);
        case SchemeMode::MultiOnly:
            return answer_multi_turn(table, question, qa_id, gateway, transcript);
        case SchemeMode::Simple:
            return answer_simple(table, question, qa_id, gateway, transcript);
        case SchemeMode::Auto:
            break;
    }
    ReconstructedTable rt;
    try {
        rt = reconstruct(table);
    } catch (const IntegrityError& e) {
        return failed_prediction(qa_id, RouteTaken::Single, "invalid_table", e.what());
    }
    auto st = serialize_table(rt);
    FilledPrompt filled;
    try {
        filled = engine_.fill(TemplateId::SingleTurn,
                              {{"TABLE_TITLE_HERE", st.title_text},
                               {"TABLE_COLUMN_HEADER_HERE", st.column_header_text},
                               {"TABLE_ROW_HEADER_HERE", st.row_header_text},
                               {"TABLE_NON_HEADER_HERE", st.non_header_text},
                               {"QUESTION_HERE", question}});
    } catch (const PromptError& e) {
        return failed_prediction(qa_id, RouteTaken::Single, "prompt", e.what());
    }
    if (PromptEngine::route(filled, options_.budget) == Route::Single)
        return answer_single_turn(table, question, qa_id, gateway, transcript);
    return answer_multi_turn(table, question, qa_id, gateway, transcript);
}

Prediction Orchestrator::answer_single_turn(const SourceTable& table, const std::string& question,
                                            const std::string& qa_id, Gateway& gateway,
                                            Transcript* transcript) const {
    Flow flow(*this, gateway, transcript);
    Prediction p;
    p.qa_id = qa_id;
    p.route_taken = RouteTaken::Single;
    try {
        auto rt = reconstruct(table);
        auto st = serialize_table(rt);
        auto filled = engine_.fill(TemplateId::SingleTurn,
                                   {{"TABLE_TITLE_HERE", st.title_text},
                                    {"TABLE_COLUMN_HEADER_HERE", st.column_header_text},
                                    {"TABLE_ROW_HEADER_HERE", st.row_header_text},
                                    {"TABLE_NON_HEADER_HERE", st.non_header_text},
                                    {"QUESTION_HERE", question}});
        if (flow.timed_out())
            return failed_prediction(qa_id, RouteTaken::Single, "timeout", "per-question budget");
        auto result = flow.complete(filled);
        p.structured = parse_structured_answer(result.text);
        return p;
    } catch (const ContextLengthExceeded& e) {
        // The endpoint is the final arbiter: an over-length single-turn
        // prompt falls back to the multi-turn scheme unless single was
        // forced explicitly.
        if (options_.mode == SchemeMode::SingleOnly)
            return failed_prediction(qa_id, RouteTaken::Single, "context_length", e.what());
        return answer_multi_turn(table, question, qa_id, gateway, transcript);
    } catch (const GatewayError& e) {
        return failed_prediction(qa_id, RouteTaken::Single, failure_tag(e), e.what());
    } catch (const IntegrityError& e) {
        return failed_prediction(qa_id, RouteTaken::Single, "invalid_table", e.what());
    } catch (const PromptError& e) {
        return failed_prediction(qa_id, RouteTaken::Single, "prompt", e.what());
    }
}

Prediction Orchestrator::answer_multi_turn(const SourceTable& table, const std::string& question,
                                           const std::string& qa_id, Gateway& gateway,
                                           Transcript* transcript) const {
    Flow flow(*this, gateway, transcript);
    Prediction p;
    p.qa_id = qa_id;
    p.route_taken = RouteTaken::Multi;
    int turn = 1;
    try {
        auto rt = reconstruct(table);
        auto st = serialize_table(rt);

        // Turn 1: keyword extraction.
        if (flow.timed_out())
            return failed_prediction(qa_id, RouteTaken::Multi, "timeout", "before turn 1");
        auto turn1 = engine_.fill(TemplateId::MultiTurn1, {{"QUESTION_HERE", question}});
        auto keywords = flow.complete(turn1).text;

        // Turn 2: header selection, keywords passed through verbatim.
        turn = 2;
        if (flow.timed_out())
            return failed_prediction(qa_id, RouteTaken::Multi, "timeout", "before turn 2");
        auto turn2 = engine_.fill(TemplateId::MultiTurn2,
                                  {{"QUESTION_HERE", question},
                                   {"ANSWER_OF_TURN_1", keywords},
                                   {"TABLE_TITLE_HERE", st.title_text},
                                   {"TABLE_COLUMN_HEADER_HERE", st.column_header_text},
                                   {"TABLE_ROW_HEADER_HERE", st.row_header_text}});
        auto selection_text = flow.complete(turn2).text;

        // Code assistant: deterministic retrieval, no gateway call.
        std::vector<std::string> notes;
        auto selection = parse_tuples(selection_text);
        std::vector<HeaderTuple> row_headers;
        std::vector<HeaderTuple> col_headers;
        for (const auto& h : selection.headers)
            (h.axis == Axis::Row ? row_headers : col_headers).push_back(h);
        for (const auto& reject : selection.rejects)
            notes.push_back("turn 2 reject: " + reject.fragment + " (" + reject.reason + ")");
        auto selected = select_cells(row_headers, col_headers, rt.data_tuples, &notes);
        std::string code_output;
        for (size_t i = 0; i < selected.size(); ++i) {
            if (i) code_output += ", ";
            code_output += serialize_tuple(selected[i]);
        }

        // Turn 3: structured answer over the selected tuples.
        turn = 3;
        if (flow.timed_out())
            return failed_prediction(qa_id, RouteTaken::Multi, "timeout", "before turn 3");
        auto turn3 = engine_.fill(TemplateId::MultiTurn3,
                                  {{"ANSWER_OF_TURN_2", selection_text},
                                   {"OUTPUT_OF_CODE", code_output},
                                   {"TABLE_COLUMN_HEADER_HERE", st.column_header_text},
                                   {"TABLE_ROW_HEADER_HERE", st.row_header_text}});
        auto result = flow.complete(turn3);
        p.structured = parse_structured_answer(result.text);
        p.structured->notes.insert(p.structured->notes.end(), notes.begin(), notes.end());
        return p;
    } catch (const GatewayError& e) {
        return failed_prediction(qa_id, RouteTaken::Multi,
                                 "turn" + std::to_string(turn) + ":" + failure_tag(e), e.what());
    } catch (const IntegrityError& e) {
        return failed_prediction(qa_id, RouteTaken::Multi, "invalid_table", e.what());
    } catch (const PromptError& e) {
        return failed_prediction(qa_id, RouteTaken::Multi, "prompt", e.what());
    }
}

Prediction Orchestrator::answer_simple(const SourceTable& table, const std::string& question,
                                       const std::string& qa_id, Gateway& gateway,
                                       Transcript* transcript) const {
    Flow flow(*this, gateway, transcript);
    Prediction p;
    p.qa_id = qa_id;
    p.route_taken = RouteTaken::Simple;
    try {
        std::string original = table.original_text;
        auto fill_simple = [&](const std::string& doc) {
            return engine_.fill(TemplateId::Simple,
                                {{"ORIGINAL_TABLE", doc}, {"QUESTION_HERE", question}});
        };
        auto filled = fill_simple(original);

        // Tail truncation to fit the budget.
        int target = options_.budget.context_limit - options_.budget.generation_reserve;
        if (filled.token_count > target) {
            size_t lo = 0;
            size_t hi = original.size();
            while (lo < hi) {
                size_t mid = (lo + hi + 1) / 2;
                if (fill_simple(original.substr(0, mid)).token_count <= target)
                    lo = mid;
                else
                    hi = mid - 1;
            }
            filled = fill_simple(original.substr(0, lo));
            p.truncated = true;
        }
        if (flow.timed_out())
            return failed_prediction(qa_id, RouteTaken::Simple, "timeout", "per-question budget");
        auto result = flow.complete(filled);
        p.structured = parse_structured_answer(result.text);
        if (p.truncated)
            p.structured->notes.push_back("input truncated from the tail to fit the budget");
        return p;
    } catch (const GatewayError& e) {
        return failed_prediction(qa_id, RouteTaken::Simple, failure_tag(e), e.what());
    } catch (const PromptError& e) {
        return failed_prediction(qa_id, RouteTaken::Simple, "prompt", e.what());
    }
}

namespace {

json tuples_to_json(const std::vector<HeaderTuple>& tuples) {
    json out = json::array();
    for (const auto& t : tuples) out.push_back(serialize_tuple(t));
    return out;
}

json tuples_to_json(const std::vector<DataTuple>& tuples) {
    json out = json::array();
    for (const auto& t : tuples) out.push_back(serialize_tuple(t));
    return out;
}

std::vector<HeaderTuple> header_tuples_from_json(const json& array) {
    std::vector<HeaderTuple> out;
    for (const auto& item : array) {
        auto parsed = parse_tuples(item.get<std::string>());
        out.insert(out.end(), parsed.headers.begin(), parsed.headers.end());
    }
    return out;
}

std::vector<DataTuple> data_tuples_from_json(const json& array) {
    std::vector<DataTuple> out;
    for (const auto& item : array) {
        auto parsed = parse_tuples(item.get<std::string>());
        out.insert(out.end(), parsed.cells.begin(), parsed.cells.end());
    }
    return out;
}

}  // namespace

std::string serialize_prediction(const Prediction& p) {
    json j{{"qa_id", p.qa_id}, {"route", std::string(route_name(p.route_taken))}};
    if (p.structured) {
        const auto& s = *p.structured;
        j["structured"] = json{{"column_headers", tuples_to_json(s.column_headers)},
                               {"row_headers", tuples_to_json(s.row_headers)},
                               {"cells", tuples_to_json(s.cells)},
                               {"operation", s.operation},
                               {"answer", s.answer},
                               {"idn", s.idn},
                               {"raw_text", s.raw_text},
                               {"notes", s.notes}};
    }
    j["transcript_ref"] = p.transcript_ref;
    if (p.failure) {
        j["failure"] = *p.failure;
        j["failure_detail"] = p.failure_detail;
    }
    if (p.truncated) j["truncated"] = true;
    return j.dump();
}

Prediction parse_prediction(const std::string& json_line) {
    json j = json::parse(json_line);
    Prediction p;
    p.qa_id = j.at("qa_id").get<std::string>();
    auto route = j.at("route").get<std::string>();
    p.route_taken = route == "MULTI"    ? RouteTaken::Multi
                    : route == "SIMPLE" ? RouteTaken::Simple
                                        : RouteTaken::Single;
    if (j.contains("structured")) {
        const auto& s = j.at("structured");
        StructuredAnswer sa;
        sa.column_headers = header_tuples_from_json(s.at("column_headers"));
        sa.row_headers = header_tuples_from_json(s.at("row_headers"));
        sa.cells = data_tuples_from_json(s.at("cells"));
        sa.operation = s.at("operation").get<std::string>();
        sa.answer = s.at("answer").get<std::string>();
        sa.idn = s.at("idn").get<bool>();
        sa.raw_text = s.at("raw_text").get<std::string>();
        sa.notes = s.at("notes").get<std::vector<std::string>>();
        p.structured = std::move(sa);
    }
    p.transcript_ref = j.value("transcript_ref", "");
    if (j.contains("failure")) {
        p.failure = j.at("failure").get<std::string>();
        p.failure_detail = j.value("failure_detail", "");
    }
    p.truncated = j.value("truncated", false);
    return p;
}

}  // namespace ctqa
