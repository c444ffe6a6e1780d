#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ctqa/dataset.hpp"
#include "ctqa/errors.hpp"
#include "ctqa/evaluator.hpp"
#include "ctqa/gateway.hpp"
#include "ctqa/orchestrator.hpp"
#include "ctqa/prompts.hpp"
#include "ctqa/reconstructor.hpp"

namespace fs = std::filesystem;
using namespace ctqa;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitBackend = 3;

std::atomic<bool> g_interrupted{false};
void handle_interrupt(int) { g_interrupted = true; }

struct CliConfig {
    std::string dataset_name = "canonical";  // canonical | hitab | aitqa
    std::string dataset_path;
    std::string backend = "mock";  // mock | replay | live
    std::string script_file;
    std::string transcript_dir;
    bool record = false;
    std::string model_name = "text-davinci-003";
    int context_limit = 4097;
    int generation_reserve = 512;
    int max_generated_tokens = 512;
    double temperature = 0.0;
    int concurrency = 4;
    std::string mode = "auto";  // auto | single | multi | simple
    std::string output_dir = "ctqa-out";
    uint64_t seed = 7;
    std::string vocab_file;
    int limit = 0;
    bool strict = false;
    int error_sample_n = 0;
    int timeout_ms = 120000;
    std::string config_file;
    bool judge = false;
};

// Precedence: flags > environment > config file > defaults. Only options
// the user did not pass on the command line are taken from the file, and
// the vocabulary path keeps its CTQA_TIKTOKEN_FILE environment override.
void apply_config_file(const CLI::App* cmd, CliConfig& cfg) {
    if (cfg.config_file.empty()) return;
    std::ifstream in(cfg.config_file, std::ios::binary);
    if (!in) throw SchemaError("cannot open config file " + cfg.config_file);
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw SchemaError("config file is not a JSON object: " + cfg.config_file);
    auto unset = [cmd](const char* flag) {
        const auto* option = cmd->get_option_no_throw(flag);
        return option != nullptr && option->count() == 0;
    };
    auto take = [&j](const char* key, auto& into) {
        if (j.contains(key)) into = j.at(key).get<std::decay_t<decltype(into)>>();
    };
    if (unset("--backend")) take("backend", cfg.backend);
    if (unset("--transcripts")) take("transcripts", cfg.transcript_dir);
    if (unset("--model")) take("model", cfg.model_name);
    if (unset("--context-limit")) take("context_limit", cfg.context_limit);
    if (unset("--reserve")) take("reserve", cfg.generation_reserve);
    if (unset("--max-tokens")) take("max_tokens", cfg.max_generated_tokens);
    if (unset("--temperature")) take("temperature", cfg.temperature);
    if (unset("--mode")) take("mode", cfg.mode);
    if (unset("--timeout-ms")) take("timeout_ms", cfg.timeout_ms);
    if (unset("--seed")) take("seed", cfg.seed);
    if (unset("--concurrency")) take("concurrency", cfg.concurrency);
    if (unset("--vocab") && !std::getenv("CTQA_TIKTOKEN_FILE")) take("vocab", cfg.vocab_file);
}

void add_backend_options(CLI::App* cmd, CliConfig& cfg) {
    cmd->add_option("--backend", cfg.backend, "Completion backend")
        ->check(CLI::IsMember({"mock", "replay", "live"}));
    cmd->add_option("--script", cfg.script_file,
                    "Scripted mock responses (jsonl: {\"text\": ...} or {\"error\": ...})");
    cmd->add_option("--transcripts", cfg.transcript_dir, "Transcript directory for replay");
    cmd->add_flag("--record", cfg.record, "Record transcripts under the output directory");
    cmd->add_option("--model", cfg.model_name, "Model name sent to the backend");
    cmd->add_option("--context-limit", cfg.context_limit, "Context window in tokens");
    cmd->add_option("--reserve", cfg.generation_reserve, "Tokens reserved for generation");
    cmd->add_option("--max-tokens", cfg.max_generated_tokens, "max_tokens per completion");
    cmd->add_option("--temperature", cfg.temperature, "Sampling temperature");
    cmd->add_option("--mode", cfg.mode, "Dialogue scheme")
        ->check(CLI::IsMember({"auto", "single", "multi", "simple"}));
    cmd->add_option("--vocab", cfg.vocab_file,
                    "tiktoken vocabulary file (else CTQA_TIKTOKEN_FILE, else byte fallback)");
    cmd->add_option("--timeout-ms", cfg.timeout_ms, "Per-question timeout");
    cmd->add_option("--seed", cfg.seed, "Seed for all randomness");
    cmd->add_option("--config", cfg.config_file,
                    "JSON config file (precedence: flags > env > file > defaults)");
}

SchemeMode parse_mode(const std::string& mode) {
    if (mode == "single") return SchemeMode::SingleOnly;
    if (mode == "multi") return SchemeMode::MultiOnly;
    if (mode == "simple") return SchemeMode::Simple;
    return SchemeMode::Auto;
}

std::unique_ptr<Gateway> make_gateway(const CliConfig& cfg,
                                      const std::shared_ptr<TokenCounter>& counter) {
    if (cfg.backend == "replay") {
        if (cfg.transcript_dir.empty())
            throw SchemaError("--backend replay requires --transcripts");
        return std::make_unique<ReplayGateway>(
            ReplayGateway::load_directory(cfg.transcript_dir));
    }
    if (cfg.backend == "live") {
        auto live = LiveGateway::config_from_env();
        if (live.url.empty())
            throw SchemaError("live backend requires the CTQA_ENDPOINT environment variable");
        live.concurrency_cap = cfg.concurrency;
        return std::make_unique<LiveGateway>(std::move(live));
    }
    if (!cfg.script_file.empty()) {
        auto mock = std::make_unique<MockGateway>();
        std::ifstream in(cfg.script_file, std::ios::binary);
        if (!in) throw SchemaError("cannot open script file " + cfg.script_file);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded()) throw SchemaError("malformed script line: " + line);
            if (j.contains("text")) {
                mock->script_text(j.at("text").get<std::string>());
            } else if (j.contains("error")) {
                std::string kind = j.at("error").get<std::string>();
                if (kind == "rate_limited")
                    mock->script_error(MockGateway::ErrorKind::RateLimited);
                else if (kind == "network")
                    mock->script_error(MockGateway::ErrorKind::Network);
                else if (kind == "context_length")
                    mock->script_error(MockGateway::ErrorKind::ContextLength);
                else if (kind == "storage")
                    mock->script_error(MockGateway::ErrorKind::Storage);
                else
                    throw SchemaError("unknown scripted error kind: " + kind);
            } else {
                throw SchemaError("script line needs \"text\" or \"error\": " + line);
            }
        }
        return mock;
    }
    return std::make_unique<EchoMockGateway>(cfg.context_limit, counter);
}

Orchestrator make_orchestrator(const PromptEngine& engine, const CliConfig& cfg) {
    OrchestratorOptions options;
    options.budget = TokenBudget{cfg.context_limit, cfg.generation_reserve};
    options.mode = parse_mode(cfg.mode);
    options.model_name = cfg.model_name;
    options.max_generated_tokens = cfg.max_generated_tokens;
    options.temperature = cfg.temperature;
    options.per_question_timeout = std::chrono::milliseconds(cfg.timeout_ms);
    return Orchestrator(engine, options);
}

Dataset load_dataset(const CliConfig& cfg) {
    if (cfg.dataset_path.empty()) throw SchemaError("--path is required");
    if (cfg.dataset_name == "hitab") return load_hitab(cfg.dataset_path);
    if (cfg.dataset_name == "aitqa") return load_aitqa(cfg.dataset_path);
    return load_canonical_dataset(cfg.dataset_path, cfg.dataset_name);
}

void print_structured(std::ostream& os, const Prediction& p) {
    os << "route: " << route_name(p.route_taken) << "\n";
    if (p.failure) {
        os << "failure: " << *p.failure << "\n";
        if (!p.failure_detail.empty()) os << "detail: " << p.failure_detail << "\n";
        return;
    }
    const auto& s = *p.structured;
    auto dump_tuples = [&os](const char* label, const auto& tuples) {
        os << label << ":";
        for (const auto& t : tuples) os << " " << serialize_tuple(t);
        os << "\n";
    };
    dump_tuples("column headers", s.column_headers);
    dump_tuples("row headers", s.row_headers);
    dump_tuples("cells", s.cells);
    os << "operation: " << s.operation << "\n";
    os << "answer: " << (s.idn ? "I don't know" : s.answer) << "\n";
    if (p.truncated) os << "note: input truncated to fit the budget\n";
    for (const auto& note : s.notes) os << "note: " << note << "\n";
}

// --- reconstruct -----------------------------------------------------------

int cmd_reconstruct(const std::string& input, const std::string& out_dir) {
    std::vector<fs::path> files;
    if (fs::is_directory(input)) {
        for (const auto& entry : fs::directory_iterator(input))
            if (entry.is_regular_file() && entry.path().extension() == ".json")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
    } else {
        files.push_back(input);
    }
    if (files.empty()) {
        std::cerr << "no table files under " << input << "\n";
        return kExitInput;
    }
    for (const auto& file : files) {
        auto table = load_canonical_file(file);
        auto st = serialize_table(reconstruct(table));
        std::ostringstream os;
        os << "title: " << st.title_text << "\n"
           << "column header: " << st.column_header_text << "\n"
           << "row header: " << st.row_header_text << "\n"
           << "non-header: " << st.non_header_text << "\n";
        if (out_dir.empty()) {
            std::cout << os.str();
        } else {
            fs::create_directories(out_dir);
            auto out_path = fs::path(out_dir) / (table.table_id + ".txt");
            std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
            out << os.str();
            std::cout << out_path.string() << "\n";
        }
    }
    return kExitOk;
}

// --- inspect ---------------------------------------------------------------

void print_tree(std::ostream& os, const std::vector<HeaderNode>& nodes, int indent) {
    for (const auto& node : nodes) {
        os << std::string(size_t(indent) * 2, ' ') << "- '" << node.value << "' level "
           << node.level << " span " << node.span_start << "-" << node.span_end << "\n";
        print_tree(os, node.children, indent + 1);
    }
}

int cmd_inspect(const std::string& input) {
    auto table = load_canonical_file(input);
    std::cout << "id: " << table.table_id << "\ntitle: " << table.title << "\n"
              << "grid: " << table.grid.rows() << " x " << table.grid.cols() << " ("
              << table.grid.merged_regions().size() << " merged regions)\n";
    std::cout << "column tree:\n";
    print_tree(std::cout, table.column_tree.roots, 1);
    std::cout << "row tree:\n";
    print_tree(std::cout, table.row_tree.roots, 1);
    auto st = serialize_table(reconstruct(table));
    std::cout << "column tuples: " << st.column_header_text << "\n"
              << "row tuples: " << st.row_header_text << "\n"
              << "non-header tuples: " << st.non_header_text << "\n";
    return kExitOk;
}

// --- ask -------------------------------------------------------------------

int cmd_ask(const CliConfig& cfg, const std::string& table_file, const std::string& question) {
    auto counter = make_counter(cfg.vocab_file);
    PromptEngine engine(counter);
    auto gateway = make_gateway(cfg, counter);
    auto orchestrator = make_orchestrator(engine, cfg);

    auto table = load_canonical_file(table_file);

    Transcript transcript;
    transcript.qa_id = "ask";
    auto prediction = orchestrator.answer(table, question, "ask", *gateway, &transcript);
    if (cfg.record) {
        auto path = write_transcript(fs::path(cfg.output_dir) / "transcripts", transcript);
        prediction.transcript_ref = path.string();
    }
    print_structured(std::cout, prediction);
    return prediction.failed() ? kExitBackend : kExitOk;
}

// --- eval ------------------------------------------------------------------

int cmd_eval(const CliConfig& cfg) {
    auto counter = make_counter(cfg.vocab_file);
    PromptEngine engine(counter);
    auto gateway = make_gateway(cfg, counter);
    auto orchestrator = make_orchestrator(engine, cfg);

    auto dataset = load_dataset(cfg);
    std::vector<QAPair> pairs = dataset.pairs;
    if (cfg.limit > 0 && int(pairs.size()) > cfg.limit) pairs.resize(size_t(cfg.limit));

    fs::create_directories(cfg.output_dir);
    fs::path predictions_path = fs::path(cfg.output_dir) / "predictions.jsonl";

    // Resume: pairs already predicted are skipped.
    std::map<std::string, Prediction> done;
    if (fs::exists(predictions_path)) {
        std::ifstream in(predictions_path, std::ios::binary);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto p = parse_prediction(line);
            done.emplace(p.qa_id, std::move(p));
        }
        if (!done.empty())
            std::cerr << "resuming: " << done.size() << " predictions already on disk\n";
    }

    std::vector<const QAPair*> todo;
    for (const auto& pair : pairs)
        if (!done.count(pair.qa_id)) todo.push_back(&pair);

    std::ofstream out(predictions_path, std::ios::binary | std::ios::app);
    if (!out) throw StorageError("cannot open " + predictions_path.string());

    std::mutex sink_mutex;
    std::atomic<size_t> next{0};
    auto worker = [&] {
        while (!g_interrupted) {
            size_t index = next.fetch_add(1);
            if (index >= todo.size()) return;
            const QAPair& pair = *todo[index];
            Prediction prediction;
            try {
                Transcript transcript;
                transcript.qa_id = pair.qa_id;
                prediction = orchestrator.answer(dataset.table_for(pair), pair.question,
                                                 pair.qa_id, *gateway, &transcript);
                if (cfg.record) {
                    write_transcript(fs::path(cfg.output_dir) / "transcripts", transcript);
                    prediction.transcript_ref = "transcripts/" + transcript_filename(pair.qa_id);
                } else if (cfg.backend == "replay") {
                    prediction.transcript_ref = transcript_filename(pair.qa_id);
                }
            } catch (const std::exception& e) {
                prediction.qa_id = pair.qa_id;
                prediction.failure = "internal";
                prediction.failure_detail = e.what();
            }
            std::lock_guard lock(sink_mutex);
            out << serialize_prediction(prediction) << "\n";
            out.flush();
            done.emplace(pair.qa_id, std::move(prediction));
        }
    };
    int n_workers = std::max(1, std::min(cfg.concurrency, int(todo.size())));
    std::vector<std::thread> threads;
    for (int i = 0; i < n_workers; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    if (g_interrupted) {
        std::cerr << "interrupted; " << done.size() << " predictions flushed, report skipped\n";
        return 130;
    }

    std::vector<Prediction> predictions;
    predictions.reserve(done.size());
    for (auto& [id, p] : done) predictions.push_back(p);

    Dataset scored = dataset;
    scored.pairs = pairs;
    auto report = evaluate(predictions, scored, cfg.strict);

    std::ofstream report_json(fs::path(cfg.output_dir) / "report.json",
                              std::ios::binary | std::ios::trunc);
    report_json << report_to_json(report);
    std::ofstream report_txt(fs::path(cfg.output_dir) / "report.txt",
                             std::ios::binary | std::ios::trunc);
    auto rendered = render_report(report);
    report_txt << rendered;
    std::cout << rendered;

    // Comparison-only judge pass; its verdicts never touch report.json.
    if (cfg.judge) {
        int judged = 0;
        int judged_correct = 0;
        int agree = 0;
        for (const auto& pair : pairs) {
            auto it = done.find(pair.qa_id);
            if (it == done.end() || it->second.failed() || !it->second.structured) continue;
            auto verdict = judge_answer(*gateway, pair.question, pair.gold_answers,
                                        it->second.structured->answer, cfg.model_name);
            if (!verdict) continue;
            ++judged;
            judged_correct += *verdict;
            agree += *verdict == is_correct(it->second, pair.gold_answers);
        }
        nlohmann::ordered_json j{{"judged", judged},
                                 {"judged_correct", judged_correct},
                                 {"agreement_with_default_scorer",
                                  judged ? double(agree) / judged : 0.0}};
        std::ofstream judge_out(fs::path(cfg.output_dir) / "judge_report.json",
                                std::ios::binary | std::ios::trunc);
        judge_out << j.dump(2) << "\n";
    }

    if (cfg.error_sample_n > 0) {
        auto sample = error_sample(report, predictions, scored, cfg.error_sample_n, cfg.seed);
        std::ofstream errors_out(fs::path(cfg.output_dir) / "errors_sample.jsonl",
                                 std::ios::binary | std::ios::trunc);
        for (const auto& s : sample) {
            nlohmann::ordered_json j{{"qa_id", s.qa_id},
                                     {"gold_answers", s.gold_answers},
                                     {"answer", s.answer},
                                     {"route", s.route}};
            errors_out << j.dump() << "\n";
        }
    }
    return kExitOk;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"Hierarchical-table question answering pipeline"};
    app.require_subcommand(1);

    CliConfig cfg;

    auto* reconstruct_cmd =
        app.add_subcommand("reconstruct", "Rewrite tables into position/hierarchy tuples");
    std::string reconstruct_input;
    std::string reconstruct_out;
    reconstruct_cmd->add_option("input", reconstruct_input, "Table file or directory")
        ->required();
    reconstruct_cmd->add_option("--out", reconstruct_out, "Write one output file per table");

    auto* inspect_cmd = app.add_subcommand("inspect", "Pretty-print a table's trees and tuples");
    std::string inspect_input;
    inspect_cmd->add_option("input", inspect_input, "Table file")->required();

    auto* ask_cmd = app.add_subcommand("ask", "Answer one question over one table");
    std::string ask_table;
    std::string ask_question;
    ask_cmd->add_option("--table", ask_table, "Canonical table file")->required();
    ask_cmd->add_option("--question", ask_question, "Question text")->required();
    ask_cmd->add_option("--out", cfg.output_dir, "Output directory (used when recording)");
    add_backend_options(ask_cmd, cfg);

    auto* eval_cmd = app.add_subcommand("eval", "Run and score a dataset");
    eval_cmd->add_option("--dataset", cfg.dataset_name, "Dataset adapter")
        ->check(CLI::IsMember({"canonical", "hitab", "aitqa"}));
    eval_cmd->add_option("--path", cfg.dataset_path, "Dataset directory")->required();
    eval_cmd->add_option("--out", cfg.output_dir, "Output directory");
    eval_cmd->add_option("--limit", cfg.limit, "Evaluate at most N pairs");
    eval_cmd->add_option("--concurrency", cfg.concurrency, "Worker pool size");
    eval_cmd->add_flag("--strict", cfg.strict, "Fail when a pair has no prediction");
    eval_cmd->add_option("--error-sample", cfg.error_sample_n,
                         "Write a stratified sample of N errors");
    eval_cmd->add_flag("--judge", cfg.judge,
                       "Also score with the backend as a judge (side report only)");
    add_backend_options(eval_cmd, cfg);

    auto* record_cmd =
        app.add_subcommand("record", "Run a dataset with recording on (live by default)");
    record_cmd->add_option("--dataset", cfg.dataset_name, "Dataset adapter")
        ->check(CLI::IsMember({"canonical", "hitab", "aitqa"}));
    record_cmd->add_option("--path", cfg.dataset_path, "Dataset directory")->required();
    record_cmd->add_option("--out", cfg.output_dir, "Output directory");
    record_cmd->add_option("--limit", cfg.limit, "Evaluate at most N pairs");
    record_cmd->add_option("--concurrency", cfg.concurrency, "Worker pool size");
    add_backend_options(record_cmd, cfg);

    CLI11_PARSE(app, argc, argv);

    try {
        if (reconstruct_cmd->parsed()) return cmd_reconstruct(reconstruct_input, reconstruct_out);
        if (inspect_cmd->parsed()) return cmd_inspect(inspect_input);
        if (ask_cmd->parsed()) {
            apply_config_file(ask_cmd, cfg);
            return cmd_ask(cfg, ask_table, ask_question);
        }
        if (eval_cmd->parsed()) {
            apply_config_file(eval_cmd, cfg);
            return cmd_eval(cfg);
        }
        if (record_cmd->parsed()) {
            cfg.record = true;
            if (!record_cmd->count("--backend")) cfg.backend = "live";
            apply_config_file(record_cmd, cfg);  // a file backend still overrides the default
            return cmd_eval(cfg);
        }
    } catch (const SchemaError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const IntegrityError& e) {
        std::cerr << "invalid table: " << e.what() << "\n";
        return kExitInput;
    } catch (const GatewayError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, handle_interrupt);
    return dispatch(argc, argv);
}
