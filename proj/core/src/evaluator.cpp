#include "ctqa/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ctqa/errors.hpp"

namespace ctqa {

using json = nlohmann::ordered_json;

namespace {

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

// Whitespace tokens with surrounding punctuation trimmed, so "2017,"
// matches the gold part "2017" under the containment rule.
std::vector<std::string> tokens_of(const std::string& text) {
    auto is_edge_punct = [](char c) {
        return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' ||
               c == '(' || c == ')' || c == '"' || c == '\'';
    };
    std::vector<std::string> tokens;
    std::istringstream in(text);
    std::string token;
    while (in >> token) {
        size_t b = 0;
        size_t e = token.size();
        while (b < e && is_edge_punct(token[b])) ++b;
        while (e > b && is_edge_punct(token[e - 1])) --e;
        if (e > b) tokens.push_back(token.substr(b, e - b));
    }
    return tokens;
}

bool numeric_close(double a, double b) {
    return std::abs(a - b) <= 1e-6 * std::max({1.0, std::abs(a), std::abs(b)});
}

bool contains_subrange(const std::vector<std::string>& haystack,
                       const std::vector<std::string>& needle) {
    if (needle.empty() || needle.size() > haystack.size()) return false;
    for (size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        bool all = true;
        for (size_t j = 0; j < needle.size() && all; ++j) all = haystack[i + j] == needle[j];
        if (all) return true;
    }
    return false;
}

bool part_matches(const NormalizedAnswer& answer, const std::vector<std::string>& answer_tokens,
                  const std::string& gold_raw) {
    auto gold = normalize_answer(gold_raw);
    if (gold.numeric && answer.numeric && numeric_close(*gold.numeric, *answer.numeric))
        return true;
    if (!gold.text.empty() && gold.text == answer.text) return true;
    return contains_subrange(answer_tokens, tokens_of(gold.text));
}

}  // namespace

NormalizedAnswer normalize_answer(std::string_view raw) {
    std::string s(raw);

    // Trim, strip one layer of surrounding quotes, lowercase.
    auto trim = [](std::string& text) {
        size_t b = 0, e = text.size();
        while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
        text = text.substr(b, e - b);
    };
    trim(s);
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                          (s.front() == '\'' && s.back() == '\'')))
        s = s.substr(1, s.size() - 2);
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });

    // Collapse whitespace runs to single spaces.
    std::string collapsed;
    bool in_space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = true;
            continue;
        }
        if (in_space && !collapsed.empty()) collapsed.push_back(' ');
        in_space = false;
        collapsed.push_back(c);
    }
    s = std::move(collapsed);

    // Thousands separators: a comma after a digit followed by a group of
    // exactly three digits.
    std::string no_sep;
    for (size_t i = 0; i < s.size(); ++i) {
        bool sep = s[i] == ',' && i > 0 && is_digit(s[i - 1]);
        for (size_t k = 1; sep && k <= 3; ++k) sep = i + k < s.size() && is_digit(s[i + k]);
        if (sep && i + 4 < s.size() && is_digit(s[i + 4])) sep = false;
        if (!sep) no_sep.push_back(s[i]);
    }
    s = std::move(no_sep);

    // Percent: strip the sign after a digit, remember it was there.
    NormalizedAnswer out;
    std::string no_pct;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i > 0 && is_digit(s[i - 1])) {
            out.percent = true;
            continue;
        }
        no_pct.push_back(s[i]);
    }
    s = std::move(no_pct);

    // Terminal punctuation.
    while (!s.empty() && (s.back() == '.' || s.back() == ',' || s.back() == ';' ||
                          s.back() == ':' || s.back() == '!' || s.back() == '?'))
        s.pop_back();
    trim(s);

    // "57.5 percent" == "57.5%": drop a "percent" word right after a
    // leading number.
    auto first_space = s.find(' ');
    std::string head = s.substr(0, first_space);
    if (first_space != std::string::npos) {
        auto rest = s.substr(first_space + 1);
        if (rest == "percent" || rest.rfind("percent ", 0) == 0) {
            char* end = nullptr;
            std::strtod(head.c_str(), &end);
            if (end && *end == '\0' && end != head.c_str()) {
                out.percent = true;
                s = head + rest.substr(std::min(rest.size(), size_t(7)));
                trim(s);
                head = s.substr(0, s.find(' '));
            }
        }
    }

    // Leading or sole numeric token.
    if (!head.empty()) {
        char* end = nullptr;
        double value = std::strtod(head.c_str(), &end);
        if (end && *end == '\0' && end != head.c_str()) out.numeric = value;
    }

    out.text = std::move(s);
    return out;
}

bool answer_matches(std::string_view answer, const std::vector<std::string>& gold_answers) {
    if (gold_answers.empty()) return false;
    auto normalized = normalize_answer(answer);
    auto answer_tokens = tokens_of(normalized.text);
    if (gold_answers.size() == 1)
        return part_matches(normalized, answer_tokens, gold_answers[0]);
    return std::all_of(gold_answers.begin(), gold_answers.end(), [&](const std::string& part) {
        return part_matches(normalized, answer_tokens, part);
    });
}

bool is_correct(const Prediction& prediction, const std::vector<std::string>& gold_answers) {
    if (prediction.failed() || !prediction.structured) return false;
    if (prediction.structured->idn) return false;
    return answer_matches(prediction.structured->answer, gold_answers);
}

namespace {

struct Tally {
    int total = 0;
    int correct = 0;

    double accuracy() const { return total == 0 ? 0.0 : double(correct) / total; }
};

}  // namespace

EvalReport evaluate(const std::vector<Prediction>& predictions, const Dataset& dataset,
                    bool strict) {
    std::map<std::string, const Prediction*> by_id;
    for (const auto& p : predictions) by_id[p.qa_id] = &p;

    EvalReport report;
    std::map<std::string, Tally> split_tally;
    std::map<std::string, Tally> subset_tally;
    std::map<std::string, Tally> route_tally;

    for (const auto& pair : dataset.pairs) {
        auto it = by_id.find(pair.qa_id);
        if (it == by_id.end()) {
            if (strict) throw MissingPairError(pair.qa_id);
            continue;
        }
        const Prediction& p = *it->second;
        bool correct = is_correct(p, pair.gold_answers);
        bool idn = p.structured && p.structured->idn;

        ++report.n_total;
        report.n_correct += correct;
        report.n_failed += p.failed();
        report.n_idn += idn;

        auto bump = [correct](Tally& tally) {
            ++tally.total;
            tally.correct += correct;
        };
        bump(split_tally[std::string(split_name(pair.split))]);
        for (const auto& tag : pair.subset_tags) bump(subset_tally[tag]);
        bump(route_tally[std::string(route_name(p.route_taken))]);

        report.per_pair.push_back({pair.qa_id, correct, p.route_taken, idn, p.failed()});
    }

    report.overall_accuracy =
        report.n_total == 0 ? 0.0 : double(report.n_correct) / report.n_total;
    report.idn_rate = report.n_total == 0 ? 0.0 : double(report.n_idn) / report.n_total;
    for (const auto& [key, tally] : split_tally) report.by_split[key] = tally.accuracy();
    for (const auto& [key, tally] : subset_tally) report.by_subset[key] = tally.accuracy();
    for (const auto& [key, tally] : route_tally) report.by_route[key] = tally.accuracy();
    return report;
}

std::vector<ErrorSample> error_sample(const EvalReport& report,
                                      const std::vector<Prediction>& predictions,
                                      const Dataset& dataset, int n, uint64_t seed) {
    std::map<std::string, const Prediction*> prediction_by_id;
    for (const auto& p : predictions) prediction_by_id[p.qa_id] = &p;
    std::map<std::string, const QAPair*> pair_by_id;
    for (const auto& pair : dataset.pairs) pair_by_id[pair.qa_id] = &pair;

    // Incorrect pairs grouped by route, in report order.
    std::map<std::string, std::vector<const PairOutcome*>> groups;
    int n_errors = 0;
    for (const auto& outcome : report.per_pair) {
        if (outcome.correct) continue;
        groups[std::string(route_name(outcome.route))].push_back(&outcome);
        ++n_errors;
    }
    if (n_errors == 0 || n <= 0) return {};
    n = std::min(n, n_errors);

    // Proportional allocation with largest remainders.
    struct Allocation {
        std::string route;
        size_t size;
        int share;
        double remainder;
    };
    std::vector<Allocation> allocations;
    int assigned = 0;
    for (const auto& [route, members] : groups) {
        double exact = double(n) * double(members.size()) / double(n_errors);
        int share = int(exact);
        allocations.push_back({route, members.size(), share, exact - share});
        assigned += share;
    }
    std::stable_sort(allocations.begin(), allocations.end(),
                     [](const Allocation& a, const Allocation& b) {
                         return a.remainder > b.remainder;
                     });
    for (auto& a : allocations) {
        if (assigned >= n) break;
        if (a.share < int(a.size)) {
            ++a.share;
            ++assigned;
        }
    }
    // Leftovers (groups capped at their size) spill deterministically.
    for (auto& a : allocations) {
        while (assigned < n && a.share < int(a.size)) {
            ++a.share;
            ++assigned;
        }
    }
    std::sort(allocations.begin(), allocations.end(),
              [](const Allocation& a, const Allocation& b) { return a.route < b.route; });

    std::mt19937_64 rng(seed);
    std::vector<ErrorSample> out;
    for (const auto& allocation : allocations) {
        auto members = groups[allocation.route];
        // Fisher-Yates; std::shuffle is implementation-defined.
        for (size_t i = members.size(); i > 1; --i) {
            size_t j = size_t(rng() % i);
            std::swap(members[i - 1], members[j]);
        }
        for (int i = 0; i < allocation.share; ++i) {
            const auto* outcome = members[size_t(i)];
            ErrorSample sample;
            sample.qa_id = outcome->qa_id;
            sample.route = std::string(route_name(outcome->route));
            if (auto it = pair_by_id.find(outcome->qa_id); it != pair_by_id.end())
                sample.gold_answers = it->second->gold_answers;
            if (auto it = prediction_by_id.find(outcome->qa_id); it != prediction_by_id.end())
                sample.answer = it->second->structured ? it->second->structured->answer : "";
            out.push_back(std::move(sample));
        }
    }
    return out;
}

std::string report_to_json(const EvalReport& report) {
    json j;
    j["n_total"] = report.n_total;
    j["n_correct"] = report.n_correct;
    j["n_failed"] = report.n_failed;
    j["n_idn"] = report.n_idn;
    j["overall_accuracy"] = report.overall_accuracy;
    j["idn_rate"] = report.idn_rate;
    j["by_split"] = report.by_split;
    j["by_subset"] = report.by_subset;
    j["by_route"] = report.by_route;
    json per_pair = json::array();
    for (const auto& outcome : report.per_pair)
        per_pair.push_back(json{{"qa_id", outcome.qa_id},
                                {"correct", outcome.correct},
                                {"route", std::string(route_name(outcome.route))},
                                {"idn", outcome.idn},
                                {"failed", outcome.failed}});
    j["per_pair"] = per_pair;
    return j.dump(2) + "\n";
}

std::optional<bool> judge_answer(Gateway& gateway, const std::string& question,
                                 const std::vector<std::string>& gold_answers,
                                 const std::string& answer, const std::string& model_name) {
    std::string golds;
    for (size_t i = 0; i < gold_answers.size(); ++i) {
        if (i) golds += "; ";
        golds += gold_answers[i];
    }
    CompletionRequest request;
    request.model_name = model_name;
    request.max_generated_tokens = 4;
    request.temperature = 0.0;
    request.prompt =
        "Decide whether a candidate answer to a question is equivalent to the reference "
        "answer. Reply with exactly yes or no.\nQuestion: " +
        question + "\nReference answer: " + golds + "\nCandidate answer: " + answer +
        "\nEquivalent (yes/no):";
    auto verdict = normalize_answer(gateway.complete(request).text).text;
    if (verdict.rfind("yes", 0) == 0) return true;
    if (verdict.rfind("no", 0) == 0) return false;
    return std::nullopt;
}

std::string render_report(const EvalReport& report) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "overall accuracy  %.4f  (%d/%d)\n",
                  report.overall_accuracy, report.n_correct, report.n_total);
    os << line;
    std::snprintf(line, sizeof line, "idn rate          %.4f  (%d)\n", report.idn_rate,
                  report.n_idn);
    os << line;
    std::snprintf(line, sizeof line, "failed            %d\n", report.n_failed);
    os << line;
    auto section = [&os](const char* title, const std::map<std::string, double>& entries) {
        if (entries.empty()) return;
        os << title << "\n";
        for (const auto& [key, accuracy] : entries) {
            char row[160];
            std::snprintf(row, sizeof row, "  %-28s %.4f\n", key.c_str(), accuracy);
            os << row;
        }
    };
    section("by split:", report.by_split);
    section("by route:", report.by_route);
    section("by subset:", report.by_subset);
    return os.str();
}

}  // namespace ctqa
