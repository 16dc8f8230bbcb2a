#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <doctest.h>

#include "dcqa/io_util.hpp"
#include "dcqa/metrics.hpp"
#include "helpers.hpp"

using namespace dcqa;

TEST_SUITE("metrics") {
    TEST_CASE("answer normalization: case, punctuation, articles, whitespace") {
        CHECK(normalize_answer("The  Cat!") == "cat");
        CHECK(normalize_answer("a an the x") == "x");
        CHECK(normalize_answer("Blue-Sky") == "bluesky");
        CHECK(normalize_answer("  spaced   out  ") == "spaced out");
        CHECK(normalize_answer("AN Apple a day") == "apple day");
        CHECK(normalize_answer("") == "");
        CHECK(normalize_answer("the a an") == "");
        CHECK(normalize_answer("Athens") == "athens");  // article only as a whole word
        CHECK(normalize_answer("May 5, 1821") == "may 5 1821");
    }

    TEST_CASE("f1/em base cases") {
        // both empty: unanswerable question, correct abstention
        CHECK(f1_em("", {}) == std::pair<double, int>{1.0, 1});
        // prediction without gold, gold without prediction
        CHECK(f1_em("something", {}) == std::pair<double, int>{0.0, 0});
        CHECK(f1_em("", {"gold"}) == std::pair<double, int>{0.0, 0});
        // exact match after normalization
        CHECK(f1_em("The Cat!", {"cat"}) == std::pair<double, int>{1.0, 1});
        // a prediction that normalizes to nothing vs a real gold
        CHECK(f1_em("the", {"cat"}) == std::pair<double, int>{0.0, 0});
    }

    TEST_CASE("f1 counts token overlap as a multiset") {
        // "x b" vs "b c": one shared token, precision 1/2, recall 1/2
        auto [f1, em] = f1_em("x b", {"b c"});
        CHECK(f1 == doctest::Approx(0.5));
        CHECK(em == 0);

        // repeated tokens only match as many times as they occur
        auto [f1r, emr] = f1_em("b b", {"b c"});
        CHECK(f1r == doctest::Approx(0.5));  // overlap 1, P=1/2, R=1/2
        CHECK(emr == 0);

        auto [f1d, emd] = f1_em("b b", {"b b b"});
        // overlap 2, P = 2/2, R = 2/3 -> F1 = 0.8
        CHECK(f1d == doctest::Approx(0.8));
        CHECK(emd == 0);
    }

    TEST_CASE("multiple golds: the best one scores") {
        auto [f1, em] = f1_em("in Paris", {"Paris", "in Paris"});
        CHECK(f1 == doctest::Approx(1.0));
        CHECK(em == 1);
        auto [f1b, emb] = f1_em("paris", {"London town", "Paris"});
        CHECK(f1b == doctest::Approx(1.0));
        CHECK(emb == 1);
        // partial against both, best partial wins
        auto [f1c, emc] = f1_em("green paris", {"Paris", "green London"});
        CHECK(f1c == doctest::Approx(2.0 / 3.0));  // vs "Paris": overlap 1, P=1/2, R=1 -> 2/3
        CHECK(emc == 0);
    }

    TEST_CASE("question type binning") {
        CHECK(question_type_bin("What color is the sky") == "what");
        CHECK(question_type_bin("In which year did it end") == "which");
        CHECK(question_type_bin("Tell me WHO signed it") == "who");
        CHECK(question_type_bin("when was it") == "when");
        CHECK(question_type_bin("Explain why it rains") == "why");
        CHECK(question_type_bin("Where is it") == "where");
        CHECK(question_type_bin("How many birds") == "how");
        CHECK(question_type_bin("Does it rain often") == "other");
        CHECK(question_type_bin("") == "other");
        // first interrogative anywhere in the question wins
        CHECK(question_type_bin("The reason why, or what") == "why");
    }

    TEST_CASE("evaluate reproduces the hand-computed fixture report") {
        const auto ds = load_squad(testutil::fixture_path("metrics10.json"));
        const auto preds_json =
            nlohmann::json::parse(read_file(testutil::fixture_path("metrics10_preds.json")));
        std::map<std::string, std::string> preds;
        for (auto it = preds_json.begin(); it != preds_json.end(); ++it) {
            preds[it.key()] = it.value().get<std::string>();
        }
        const auto report = evaluate(preds, ds);

        const double tol = 1e-9;
        CHECK(report.n_has == 6);
        CHECK(report.n_no == 4);
        CHECK(report.f1 == doctest::Approx(200.0 / 3.0).epsilon(tol));
        CHECK(report.em == doctest::Approx(60.0).epsilon(tol));
        CHECK(report.has_ans_f1 == doctest::Approx(1100.0 / 18.0).epsilon(tol));
        CHECK(report.has_ans_em == doctest::Approx(50.0).epsilon(tol));
        CHECK(report.no_ans_f1 == doctest::Approx(75.0).epsilon(tol));
        CHECK(report.no_ans_em == doctest::Approx(75.0).epsilon(tol));

        // overall must equal the count-weighted mean of the two splits
        const double weighted_f1 =
            (report.has_ans_f1 * report.n_has + report.no_ans_f1 * report.n_no) /
            (report.n_has + report.n_no);
        const double weighted_em =
            (report.has_ans_em * report.n_has + report.no_ans_em * report.n_no) /
            (report.n_has + report.n_no);
        CHECK(report.f1 == doctest::Approx(weighted_f1).epsilon(tol));
        CHECK(report.em == doctest::Approx(weighted_em).epsilon(tol));

        // question-type error table (wrong = EM failure)
        const std::map<std::string, std::pair<int64_t, int64_t>> want = {
            {"what", {0, 3}}, {"which", {1, 1}}, {"how", {1, 1}},  {"where", {0, 1}},
            {"who", {1, 1}},  {"when", {0, 1}},  {"why", {1, 1}},  {"other", {0, 1}},
        };
        REQUIRE(report.per_type.size() == want.size());
        for (const auto& [type, counts] : want) {
            REQUIRE(report.per_type.count(type) == 1);
            CHECK(report.per_type.at(type).wrong == counts.first);
            CHECK(report.per_type.at(type).total == counts.second);
        }

        // JSON serialization carries every field
        const auto j = report.to_json();
        CHECK(j["f1"].get<double>() == doctest::Approx(report.f1).epsilon(tol));
        CHECK(j["n_has_ans"].get<int64_t>() == 6);
        CHECK(j["per_type"]["which"]["wrong"].get<int64_t>() == 1);
    }

    TEST_CASE("evaluate demands exactly one prediction per question") {
        const auto ds = load_squad(testutil::fixture_path("minimal.json"));
        std::map<std::string, std::string> preds{{"m1", "the sea"}, {"m2", ""}};
        CHECK_NOTHROW(evaluate(preds, ds));

        std::map<std::string, std::string> missing{{"m1", "the sea"}};
        CHECK_THROWS_AS(evaluate(missing, ds), ValidationError);

        std::map<std::string, std::string> extra = preds;
        extra["m3"] = "phantom";
        CHECK_THROWS_AS(evaluate(extra, ds), ValidationError);

        CHECK_THROWS_AS(evaluate({}, SquadDataset{}), ValidationError);
    }

    TEST_CASE("perfect and inverted predictions bound the fixture scores") {
        const auto ds = load_squad(testutil::fixture_path("minimal.json"));
        std::map<std::string, std::string> perfect{{"m1", "the sea"}, {"m2", ""}};
        const auto top = evaluate(perfect, ds);
        CHECK(top.f1 == doctest::Approx(100.0));
        CHECK(top.em == doctest::Approx(100.0));

        std::map<std::string, std::string> inverted{{"m1", ""}, {"m2", "mountains"}};
        const auto bottom = evaluate(inverted, ds);
        CHECK(bottom.f1 == doctest::Approx(0.0));
        CHECK(bottom.em == doctest::Approx(0.0));
    }

    TEST_CASE("ensemble: any no-answer vote vetoes") {
        ModelPredictions a{{{"q", "alpha"}}, {{"q", 0.9}}};
        ModelPredictions b{{{"q", ""}}, {{"q", 0.2}}};
        const auto out = ensemble({a, b});
        CHECK(out.at("q") == "");
        // veto applies no matter the abstainer's probability or position
        const auto out2 = ensemble({b, a});
        CHECK(out2.at("q") == "");
    }

    TEST_CASE("ensemble: otherwise the most confident answer wins") {
        ModelPredictions a{{{"q", "alpha"}, {"r", "left"}}, {{"q", 0.4}, {"r", 0.9}}};
        ModelPredictions b{{{"q", "beta"}, {"r", "right"}}, {{"q", 0.8}, {"r", 0.1}}};
        const auto out = ensemble({a, b});
        CHECK(out.at("q") == "beta");
        CHECK(out.at("r") == "left");
    }

    TEST_CASE("ensemble: probability ties break to the lowest model index") {
        ModelPredictions a{{{"q", "first"}}, {{"q", 0.5}}};
        ModelPredictions b{{{"q", "second"}}, {{"q", 0.5}}};
        ModelPredictions c{{{"q", "third"}}, {{"q", 0.5}}};
        CHECK(ensemble({a, b, c}).at("q") == "first");
        CHECK(ensemble({b, a, c}).at("q") == "second");
    }

    TEST_CASE("ensemble of identical members is that member") {
        ModelPredictions a{{{"q", "alpha"}, {"r", ""}}, {{"q", 0.7}, {"r", 0.6}}};
        const auto out = ensemble({a, a, a});
        CHECK(out == a.answers);
    }

    TEST_CASE("ensemble validates coverage and arity") {
        ModelPredictions a{{{"q", "alpha"}}, {{"q", 0.9}}};
        CHECK_THROWS_AS(ensemble({a}), ValidationError);    // fewer than two members
        CHECK_THROWS_AS(ensemble({}), ValidationError);

        ModelPredictions gap{{{"x", "beta"}}, {{"x", 0.2}}};  // different id set
        CHECK_THROWS_AS(ensemble({a, gap}), ValidationError);

        ModelPredictions no_prob{{{"q", "beta"}}, {}};  // answer without probability
        CHECK_THROWS_AS(ensemble({a, no_prob}), ValidationError);
    }
}
