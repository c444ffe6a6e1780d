#include <doctest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "ctqa/errors.hpp"
#include "ctqa/evaluator.hpp"
#include "../support/table_fixtures.hpp"

#ifndef CTQA_SOURCE_DIR
#error "CTQA_SOURCE_DIR must point at the repository root"
#endif

using namespace ctqa;
using namespace ctqa::testing;

namespace {

Prediction make_prediction(const std::string& qa_id, const std::string& answer,
                           RouteTaken route = RouteTaken::Single, bool idn = false) {
    Prediction p;
    p.qa_id = qa_id;
    p.route_taken = route;
    StructuredAnswer sa;
    sa.answer = answer;
    sa.raw_text = answer;
    sa.idn = idn;
    p.structured = sa;
    return p;
}

Dataset make_dataset(int n_pairs) {
    Dataset dataset;
    dataset.name = "synthetic";
    auto table = make_single_cell_table();
    dataset.tables.emplace(table.table_id, table);
    for (int i = 0; i < n_pairs; ++i) {
        QAPair pair;
        pair.qa_id = "qa-" + std::to_string(i);
        pair.table_id = table.table_id;
        pair.question = "q";
        pair.gold_answers = {"42"};
        pair.split = i % 2 == 0 ? Split::Dev : Split::Test;
        if (i % 3 == 0) pair.subset_tags.insert("kpi-driven");
        dataset.pairs.push_back(std::move(pair));
    }
    return dataset;
}

}  // namespace

TEST_CASE("normalize_answer worked examples") {
    auto n = normalize_answer("9,280");
    REQUIRE(n.numeric.has_value());
    CHECK(*n.numeric == doctest::Approx(9280));
    CHECK(n.text == "9280");

    n = normalize_answer("Women.");
    CHECK(n.text == "women");
    CHECK_FALSE(n.numeric.has_value());

    n = normalize_answer("57.5%");
    REQUIRE(n.numeric.has_value());
    CHECK(*n.numeric == doctest::Approx(57.5));
    CHECK(n.percent);

    n = normalize_answer("\"quoted value\"");
    CHECK(n.text == "quoted value");

    n = normalize_answer("  spaced   out  ");
    CHECK(n.text == "spaced out");

    n = normalize_answer("57.5 percent");
    REQUIRE(n.numeric.has_value());
    CHECK(*n.numeric == doctest::Approx(57.5));
    CHECK(n.percent);
}

TEST_CASE("answer equivalence worked examples") {
    CHECK_FALSE(answer_matches("Women (57.5% vs 72.4%)", {"women living in an nh"}));
    CHECK(answer_matches("9280", {"9,280"}));
    CHECK(answer_matches("the total was 416 units", {"416"}));
    CHECK(answer_matches("57.5%", {"57.5"}));
    CHECK_FALSE(answer_matches("4160 units", {"416"}));
}

TEST_CASE("multi-part golds require every part, order-insensitive") {
    CHECK(answer_matches("2018 and 2017", {"2017", "2018"}));
    CHECK(answer_matches("2017, 2018", {"2018", "2017"}));
    CHECK_FALSE(answer_matches("2017", {"2017", "2018"}));
}

TEST_CASE("is_correct treats idn and failures as incorrect") {
    CHECK_FALSE(is_correct(make_prediction("a", "42", RouteTaken::Single, true), {"42"}));
    Prediction failed;
    failed.qa_id = "b";
    failed.failure = "network";
    CHECK_FALSE(is_correct(failed, {"42"}));
    CHECK(is_correct(make_prediction("c", "42"), {"42"}));
}

TEST_CASE("evaluate computes accuracy and breakdowns") {
    auto dataset = make_dataset(10);
    std::vector<Prediction> predictions;
    for (int i = 0; i < 10; ++i)
        predictions.push_back(
            make_prediction("qa-" + std::to_string(i), i < 5 ? "42" : "wrong",
                            i % 2 == 0 ? RouteTaken::Single : RouteTaken::Multi));
    auto report = evaluate(predictions, dataset);
    CHECK(report.n_total == 10);
    CHECK(report.overall_accuracy == doctest::Approx(0.5));
    CHECK(report.idn_rate == doctest::Approx(0.0));
    CHECK(report.by_split.count("dev") == 1);
    CHECK(report.by_split.count("test") == 1);
    CHECK(report.by_subset.count("kpi-driven") == 1);
    CHECK(report.by_route.size() == 2);
    CHECK(report.per_pair.size() == 10);
}

TEST_CASE("all-idn predictions score zero accuracy, full idn rate") {
    auto dataset = make_dataset(4);
    std::vector<Prediction> predictions;
    for (int i = 0; i < 4; ++i)
        predictions.push_back(make_prediction("qa-" + std::to_string(i), "I don't know",
                                              RouteTaken::Single, true));
    auto report = evaluate(predictions, dataset);
    CHECK(report.overall_accuracy == doctest::Approx(0.0));
    CHECK(report.idn_rate == doctest::Approx(1.0));
    CHECK(report.idn_rate + report.overall_accuracy <= 1.0);
}

TEST_CASE("strict mode raises on a missing prediction") {
    auto dataset = make_dataset(3);
    std::vector<Prediction> predictions = {make_prediction("qa-0", "42")};
    CHECK_THROWS_AS(evaluate(predictions, dataset, true), MissingPairError);
    auto report = evaluate(predictions, dataset, false);
    CHECK(report.n_total == 1);
}

TEST_CASE("evaluate is a pure fold over pair sets") {
    auto dataset = make_dataset(12);
    std::vector<Prediction> all;
    for (int i = 0; i < 12; ++i)
        all.push_back(make_prediction("qa-" + std::to_string(i), i % 3 ? "42" : "no"));

    Dataset first_half = dataset;
    first_half.pairs.assign(dataset.pairs.begin(), dataset.pairs.begin() + 6);
    Dataset second_half = dataset;
    second_half.pairs.assign(dataset.pairs.begin() + 6, dataset.pairs.end());

    auto whole = evaluate(all, dataset);
    auto left = evaluate(all, first_half);
    auto right = evaluate(all, second_half);
    CHECK(whole.n_total == left.n_total + right.n_total);
    CHECK(whole.n_correct == left.n_correct + right.n_correct);
    CHECK(whole.n_idn == left.n_idn + right.n_idn);
}

TEST_CASE("error_sample is seeded, capped and stratified") {
    auto dataset = make_dataset(40);
    std::vector<Prediction> predictions;
    for (int i = 0; i < 40; ++i) {
        // 10 correct; 20 single errors; 10 multi errors.
        bool correct = i < 10;
        auto route = i < 30 ? RouteTaken::Single : RouteTaken::Multi;
        predictions.push_back(
            make_prediction("qa-" + std::to_string(i), correct ? "42" : "wrong", route));
    }
    auto report = evaluate(predictions, dataset);
    REQUIRE(report.n_total - report.n_correct == 30);

    auto sample = error_sample(report, predictions, dataset, 15, 7);
    CHECK(sample.size() == 15);
    auto again = error_sample(report, predictions, dataset, 15, 7);
    REQUIRE(again.size() == sample.size());
    for (size_t i = 0; i < sample.size(); ++i) CHECK(sample[i].qa_id == again[i].qa_id);

    // Population: 2/3 single, 1/3 multi; 15 * 2/3 = 10 and 5.
    int singles = 0;
    for (const auto& s : sample) singles += s.route == "SINGLE";
    CHECK(std::abs(singles - 10) <= 1);

    auto all_errors = error_sample(report, predictions, dataset, 100, 7);
    CHECK(all_errors.size() == 30);

    auto different = error_sample(report, predictions, dataset, 15, 8);
    bool any_diff = different.size() != sample.size();
    for (size_t i = 0; !any_diff && i < sample.size(); ++i)
        any_diff = different[i].qa_id != sample[i].qa_id;
    CHECK(any_diff);

    for (const auto& s : sample) {
        CHECK_FALSE(s.gold_answers.empty());
        CHECK(s.answer == "wrong");
    }
}

TEST_CASE("scorer calibration set agreement is at least 90 percent") {
    std::ifstream in(std::string(CTQA_SOURCE_DIR) +
                     "/tests/fixtures/calibration/scorer_calibration.jsonl");
    REQUIRE(in.good());
    std::string line;
    int total = 0;
    int agree = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        std::vector<std::string> golds = j.at("golds").get<std::vector<std::string>>();
        bool rule = answer_matches(j.at("answer").get<std::string>(), golds);
        bool human = j.at("human").get<bool>();
        ++total;
        agree += rule == human;
    }
    REQUIRE(total == 50);
    INFO("agreement: ", agree, "/", total);
    CHECK(double(agree) / total >= 0.90);
}

TEST_CASE("report serialization is deterministic") {
    auto dataset = make_dataset(5);
    std::vector<Prediction> predictions;
    for (int i = 0; i < 5; ++i)
        predictions.push_back(make_prediction("qa-" + std::to_string(i), "42"));
    auto a = report_to_json(evaluate(predictions, dataset));
    auto b = report_to_json(evaluate(predictions, dataset));
    CHECK(a == b);
    auto text = render_report(evaluate(predictions, dataset));
    CHECK(text.find("overall accuracy") != std::string::npos);
}
