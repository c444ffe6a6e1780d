// Acceptance suite: one line per criterion, [PASS]/[FAIL]/[SKIP].
// Environment-dependent criteria (full dataset releases, exact vocabulary,
// live endpoint) report SKIP with the reason when their inputs are absent.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctqa/dataset.hpp"
#include "ctqa/errors.hpp"
#include "ctqa/evaluator.hpp"
#include "ctqa/gateway.hpp"
#include "ctqa/orchestrator.hpp"
#include "ctqa/prompts.hpp"
#include "ctqa/reconstructor.hpp"
#include "ctqa/retrieval.hpp"
#include "ctqa/sha256.hpp"
#include "ctqa/tokenizer.hpp"
#include "../support/table_fixtures.hpp"

#ifndef CTQA_SOURCE_DIR
#error "CTQA_SOURCE_DIR must point at the repository root"
#endif

namespace fs = std::filesystem;
using namespace ctqa;
using namespace ctqa::testing;

namespace {

const std::string kRoot = CTQA_SOURCE_DIR;
int g_failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail = "") {
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << number << ". " << name;
    if (!detail.empty()) std::cout << " -- " << detail;
    std::cout << "\n";
    if (!pass) ++g_failures;
}

void skip(int number, const std::string& name, const std::string& why) {
    std::cout << "[SKIP] " << number << ". " << name << " -- " << why << "\n";
}

std::string getenv_or_empty(const char* name) {
    const char* value = std::getenv(name);
    return value ? value : "";
}

// --- 1. reconstruction golden tuples ---------------------------------------

void criterion_1() {
    std::vector<std::string> produced;
    auto collect = [&produced](const SourceTable& table) {
        auto rt = reconstruct(table);
        for (const auto& t : rt.column_tuples) produced.push_back(serialize_tuple(t));
        for (const auto& t : rt.row_tuples) produced.push_back(serialize_tuple(t));
        for (const auto& t : rt.data_tuples) produced.push_back(serialize_tuple(t));
    };
    collect(load_canonical_file(kRoot + "/tests/fixtures/tables/fig2.json"));
    collect(load_canonical_file(kRoot + "/tests/fixtures/tables/soccer.json"));

    const std::vector<std::string> expected = {
        "(L, 0, 0, 3, \"Compensation cost:\")",
        "(T, 1, 0, 0, g)",
        "(L, 0, 6, 6, karlsruher sc)",
        "(C, 7, 0, 416)",
    };
    std::string missing;
    for (const auto& want : expected)
        if (std::find(produced.begin(), produced.end(), want) == produced.end())
            missing += (missing.empty() ? "" : ", ") + want;
    report(1, "reconstruction golden tuples byte-exact", missing.empty(),
           missing.empty() ? "4/4 reproduced" : "missing: " + missing);
}

// --- 2. retrieval oracle equivalence ----------------------------------------

void criterion_2() {
    std::mt19937 rng(60601);
    int cases = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        auto table = random_table(rng);
        auto rt = reconstruct(table);
        std::vector<HeaderTuple> rows;
        std::vector<HeaderTuple> cols;
        switch (trial % 4) {
            case 0:  // random subsets: empty, wrong-axis, out-of-range included
                rows = random_header_subset(rng, Axis::Row, table.grid.rows());
                cols = random_header_subset(rng, Axis::Column, table.grid.cols());
                break;
            case 1:  // empty row side
                cols = random_header_subset(rng, Axis::Column, table.grid.cols());
                break;
            case 2:  // full coverage on both axes
                rows.push_back({Axis::Row, 0, 0, table.grid.rows() - 1, "all"});
                cols.push_back({Axis::Column, 0, 0, table.grid.cols() - 1, "all"});
                break;
            case 3:  // random leaf headers
                for (const auto* leaf : header_leaves(table.row_tree))
                    if (rng() % 2)
                        rows.push_back({Axis::Row, leaf->level, leaf->span_start,
                                        leaf->span_end, leaf->value});
                for (const auto* leaf : header_leaves(table.column_tree))
                    if (rng() % 2)
                        cols.push_back({Axis::Column, leaf->level, leaf->span_start,
                                        leaf->span_end, leaf->value});
                break;
        }
        auto expected = brute_force_select(rows, cols, rt.data_tuples);
        auto actual = select_cells(rows, cols, rt.data_tuples);
        if (actual != expected) {
            report(2, "retrieval matches the brute-force oracle", false,
                   "diverged on case " + std::to_string(trial));
            return;
        }
        ++cases;
    }
    report(2, "retrieval matches the brute-force oracle", true,
           std::to_string(cases) + " randomized cases");
}

// --- 3. template fidelity ----------------------------------------------------

void criterion_3() {
    struct Pinned {
        TemplateId id;
        const char* sha256;
    };
    const Pinned pinned[] = {
        {TemplateId::SingleTurn,
         "5398e3263ac752fb3308ca25ed944e68cb81657bcf56fb45ef28416ef515de90"},
        {TemplateId::MultiTurn1,
         "6e62d701dac07a1b843d451eef069c7642a03b7f2223093eac58162c4629efaf"},
        {TemplateId::MultiTurn2,
         "aa9fec88ba50fd6625dbcf0820dd6f3c7377ee47d4767e1dfb473d9eba0163cb"},
        {TemplateId::MultiTurn3,
         "d13d9f49e9e9182dbf8ba810b2b47d13f745a8db831afa451965c2e86ae65aad"},
        {TemplateId::Simple,
         "badf9ecd41fa3effa24fd5fc99c594027e60076cf84a356c742107da0bbba65c"},
    };
    PromptEngine embedded;
    auto from_files = PromptEngine::from_directory(kRoot + "/core/assets/prompts");
    std::string problem;
    for (const auto& pin : pinned) {
        if (embedded.get(pin.id).body != from_files.get(pin.id).body)
            problem = std::string(template_name(pin.id)) + " embedded/file mismatch";
        else if (embedded.get(pin.id).sha256() != pin.sha256)
            problem = std::string(template_name(pin.id)) + " checksum drift";
        if (!problem.empty()) break;
    }

    if (problem.empty()) {
        std::vector<SourceTable> tables = {
            load_canonical_file(kRoot + "/tests/fixtures/tables/fig2.json"),
            load_canonical_file(kRoot + "/tests/fixtures/tables/soccer.json"),
            load_canonical_file(kRoot + "/tests/fixtures/tables/mini.json"),
        };
        for (const auto& table : tables) {
            auto st = serialize_table(reconstruct(table));
            std::vector<FilledPrompt> filled;
            filled.push_back(embedded.fill(TemplateId::SingleTurn,
                                           {{"TABLE_TITLE_HERE", st.title_text},
                                            {"TABLE_COLUMN_HEADER_HERE", st.column_header_text},
                                            {"TABLE_ROW_HEADER_HERE", st.row_header_text},
                                            {"TABLE_NON_HEADER_HERE", st.non_header_text},
                                            {"QUESTION_HERE", "what is the total?"}}));
            filled.push_back(embedded.fill(TemplateId::MultiTurn1,
                                           {{"QUESTION_HERE", "what is the total?"}}));
            filled.push_back(embedded.fill(TemplateId::MultiTurn2,
                                           {{"QUESTION_HERE", "what is the total?"},
                                            {"ANSWER_OF_TURN_1", "total"},
                                            {"TABLE_TITLE_HERE", st.title_text},
                                            {"TABLE_COLUMN_HEADER_HERE", st.column_header_text},
                                            {"TABLE_ROW_HEADER_HERE", st.row_header_text}}));
            filled.push_back(embedded.fill(TemplateId::MultiTurn3,
                                           {{"ANSWER_OF_TURN_2", "1. Column header:"},
                                            {"OUTPUT_OF_CODE", "(C, 0, 0, x)"},
                                            {"TABLE_COLUMN_HEADER_HERE", st.column_header_text},
                                            {"TABLE_ROW_HEADER_HERE", st.row_header_text}}));
            filled.push_back(embedded.fill(TemplateId::Simple,
                                           {{"ORIGINAL_TABLE", serialize_canonical(table)},
                                            {"QUESTION_HERE", "what is the total?"}}));
            for (const auto& f : filled)
                if (f.text.find("_HERE]") != std::string::npos ||
                    f.text.find("ANSWER_OF_TURN") != std::string::npos ||
                    f.text.find("OUTPUT_OF_CODE") != std::string::npos ||
                    f.text.find("[ORIGINAL_TABLE]") != std::string::npos)
                    problem = "unreplaced slot in a filled prompt";
        }
    }
    report(3, "template assets pinned and fills leave no slots", problem.empty(), problem);
}

// --- 4. routing ---------------------------------------------------------------

void criterion_4() {
    ApproxByteCounter counter;
    TokenBudget budget;  // 4097 / 512
    auto synthetic_prompt = [&counter](int tokens) {
        FilledPrompt p;
        p.text.assign(size_t(tokens) * 3, 'x');
        p.token_count = counter.count(p.text);
        return p;
    };
    struct Expectation {
        int tokens;
        Route route;
    };
    const Expectation table[] = {{1000, Route::Single},
                                 {3585, Route::Single},
                                 {3586, Route::Multi},
                                 {4000, Route::Multi}};
    std::string problem;
    for (const auto& expectation : table) {
        auto prompt = synthetic_prompt(expectation.tokens);
        if (prompt.token_count != expectation.tokens) {
            problem = "synthetic prompt count drifted";
            break;
        }
        if (PromptEngine::route(prompt, budget) != expectation.route) {
            problem = "wrong route at " + std::to_string(expectation.tokens) + " tokens";
            break;
        }
    }
    if (problem.empty()) {
        std::mt19937 rng(44);
        std::vector<int> counts;
        for (int i = 0; i < 1000; ++i) counts.push_back(int(rng() % 6000));
        std::sort(counts.begin(), counts.end());
        bool seen_multi = false;
        for (int tokens : counts) {
            FilledPrompt p;
            p.token_count = tokens;
            bool multi = PromptEngine::route(p, budget) == Route::Multi;
            if (multi) seen_multi = true;
            if (seen_multi && !multi) {
                problem = "routing is not monotone";
                break;
            }
        }
    }
    report(4, "routing boundaries and monotonicity", problem.empty(), problem);
}

// --- 5. token-counter calibration ----------------------------------------------

void criterion_5() {
    const std::string hitab_dir = getenv_or_empty("CTQA_HITAB_DIR");
    const std::string aitqa_dir = getenv_or_empty("CTQA_AITQA_DIR");
    if (hitab_dir.empty() && aitqa_dir.empty()) {
        skip(5, "token-counter calibration",
             "set CTQA_HITAB_DIR / CTQA_AITQA_DIR to the dataset releases to run");
        return;
    }
    auto counter = make_counter("");
    bool exact = !counter->approximate();
    auto mean_tokens = [&counter](const Dataset& dataset) {
        double total = 0;
        for (const auto& [id, table] : dataset.tables)
            total += counter->count(table.original_text);
        return dataset.tables.empty() ? 0.0 : total / double(dataset.tables.size());
    };
    bool pass = true;
    std::ostringstream detail;
    detail.setf(std::ios::fixed);
    detail.precision(1);
    if (!hitab_dir.empty()) {
        double mean = mean_tokens(load_hitab(hitab_dir));
        detail << "hitab mean " << mean << " vs 2521 +-10%";
        if (exact && std::abs(mean - 2521.0) > 252.1) pass = false;
    }
    if (!aitqa_dir.empty()) {
        double mean = mean_tokens(load_aitqa(aitqa_dir));
        detail << (hitab_dir.empty() ? "" : "; ") << "aitqa mean " << mean << " vs 115 +-10%";
        if (exact && std::abs(mean - 115.0) > 11.5) pass = false;
    }
    detail << " [" << counter->id()
           << (exact ? ", blocking" : ", fallback counter: reported, non-blocking") << "]";
    report(5, "token-counter calibration", exact ? pass : true, detail.str());
}

// --- 6. replay determinism -------------------------------------------------------

std::string run_replay_eval(const fs::path& fixture_dir) {
    std::ifstream config_in(fixture_dir / "config.json");
    auto config = nlohmann::json::parse(config_in);

    PromptEngine engine;
    OrchestratorOptions options;
    options.budget = TokenBudget{config.at("context_limit").get<int>(),
                                 config.at("generation_reserve").get<int>()};
    options.model_name = config.at("model_name").get<std::string>();
    options.max_generated_tokens = config.at("max_generated_tokens").get<int>();
    options.temperature = config.at("temperature").get<double>();
    Orchestrator orchestrator(engine, options);

    auto dataset = load_canonical_dataset(fixture_dir.string());
    auto gateway = ReplayGateway::load_directory(fixture_dir / "transcripts");
    std::vector<Prediction> predictions;
    std::string prediction_lines;
    for (const auto& pair : dataset.pairs) {
        predictions.push_back(
            orchestrator.answer(dataset.table_for(pair), pair.question, pair.qa_id, gateway));
        prediction_lines += serialize_prediction(predictions.back()) + "\n";
    }
    // Predictions and the report must both be byte-stable under replay; the
    // pinned file covers the report, the concatenation covers both.
    return report_to_json(evaluate(predictions, dataset)) + "\x1e" + prediction_lines;
}

void criterion_6() {
    fs::path fixture_dir = fs::path(kRoot) / "tests/fixtures/replay";
    std::ifstream pinned_in(fixture_dir / "pinned/report.json", std::ios::binary);
    std::ostringstream pinned_os;
    pinned_os << pinned_in.rdbuf();
    const std::string pinned = pinned_os.str();

    std::string first = run_replay_eval(fixture_dir);
    std::string second = run_replay_eval(fixture_dir);
    std::string third = run_replay_eval(fixture_dir);
    std::string first_report = first.substr(0, first.find('\x1e'));

    auto parsed = nlohmann::json::parse(first_report);
    bool accuracy_pinned =
        parsed.at("n_total").get<int>() == 24 && parsed.at("n_correct").get<int>() == 17 &&
        parsed.at("n_idn").get<int>() == 3 && parsed.at("n_failed").get<int>() == 0;
    bool stable = first == second && second == third;
    bool matches_pin = first_report == pinned;
    std::string detail = "3 runs byte-identical (predictions and report), accuracy 17/24 as pinned";
    if (!stable) detail = "reports differ across runs";
    if (!matches_pin) detail = "report differs from the pinned fixture";
    if (!accuracy_pinned) detail = "accuracy drifted from the pinned values";
    report(6, "replay determinism over the bundled fixture",
           stable && matches_pin && accuracy_pinned, detail);
}

// --- 7. scorer calibration -------------------------------------------------------

void criterion_7() {
    std::ifstream in(kRoot + "/tests/fixtures/calibration/scorer_calibration.jsonl");
    std::string line;
    int total = 0;
    int agree = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        bool rule = answer_matches(j.at("answer").get<std::string>(),
                                   j.at("golds").get<std::vector<std::string>>());
        total += 1;
        agree += rule == j.at("human").get<bool>();
    }
    bool pass = total == 50 && agree >= 45;
    std::ostringstream detail;
    detail << "agreement " << agree << "/" << total;
    report(7, "scorer agrees with hand labels at >= 90%", pass, detail.str());
}

// --- 8. live smoke ------------------------------------------------------------------

void criterion_8() {
    const std::string enabled = getenv_or_empty("CTQA_LIVE_SMOKE");
    const std::string endpoint = getenv_or_empty("CTQA_ENDPOINT");
    const std::string aitqa_dir = getenv_or_empty("CTQA_AITQA_DIR");
    if (enabled != "1" || endpoint.empty() || aitqa_dir.empty()) {
        skip(8, "live smoke (headline accuracies need a live endpoint; criteria 1-7 stand in)",
             "set CTQA_LIVE_SMOKE=1 with CTQA_ENDPOINT and CTQA_AITQA_DIR for a 20-pair run");
        return;
    }
    auto dataset = load_aitqa(aitqa_dir);
    if (dataset.pairs.size() > 20) dataset.pairs.resize(20);
    PromptEngine engine(make_counter(""));
    Orchestrator orchestrator(engine, OrchestratorOptions{});
    LiveGateway gateway(LiveGateway::config_from_env());
    std::vector<Prediction> predictions;
    int failures = 0;
    for (const auto& pair : dataset.pairs) {
        predictions.push_back(
            orchestrator.answer(dataset.table_for(pair), pair.question, pair.qa_id, gateway));
        failures += predictions.back().failed();
    }
    auto result = evaluate(predictions, dataset);
    std::ostringstream detail;
    detail.setf(std::ios::fixed);
    detail.precision(4);
    detail << "20-pair smoke accuracy " << result.overall_accuracy
           << " (reported, no threshold), " << failures << " pipeline failures";
    report(8, "live smoke", failures == 0, detail.str());
}

// --- 9. ingestion counts --------------------------------------------------------------

void criterion_9() {
    const std::string hitab_dir = getenv_or_empty("CTQA_HITAB_DIR");
    const std::string aitqa_dir = getenv_or_empty("CTQA_AITQA_DIR");
    if (hitab_dir.empty() && aitqa_dir.empty()) {
        skip(9, "full-release ingestion counts",
             "set CTQA_HITAB_DIR / CTQA_AITQA_DIR to the dataset releases to run");
        return;
    }
    bool pass = true;
    std::ostringstream detail;
    if (!hitab_dir.empty()) {
        auto dataset = load_hitab(hitab_dir);
        detail << "hitab " << dataset.tables.size() << " tables / " << dataset.pairs.size()
               << " pairs (want 3597 / 10672)";
        pass = pass && dataset.tables.size() == 3597 && dataset.pairs.size() == 10672;
    }
    if (!aitqa_dir.empty()) {
        auto dataset = load_aitqa(aitqa_dir);
        detail << (hitab_dir.empty() ? "" : "; ") << "aitqa " << dataset.tables.size()
               << " tables / " << dataset.pairs.size() << " pairs (want 116 / 515)";
        pass = pass && dataset.tables.size() == 116 && dataset.pairs.size() == 515;
    }
    report(9, "full-release ingestion counts", pass, detail.str());
}

}  // namespace

int main() {
    try {
        criterion_1();
        criterion_2();
        criterion_3();
        criterion_4();
        criterion_5();
        criterion_6();
        criterion_7();
        criterion_8();
        criterion_9();
    } catch (const std::exception& e) {
        std::cout << "[FAIL] acceptance suite aborted: " << e.what() << "\n";
        return 1;
    }
    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all criteria passed (skipped criteria need external inputs)\n";
    return 0;
}
