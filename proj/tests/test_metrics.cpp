#include "doctest.h"

#include <cmath>
#include <limits>

#include "cpwtnet/metrics.hpp"
#include "metric_oracle.hpp"
#include "support.hpp"

using namespace cpwtnet;
using namespace cpwtnet::metrics;

TEST_CASE("confusion examples") {
    const std::vector<std::size_t> actual{0, 0, 1, 1}, predicted{0, 1, 1, 1};
    const auto cm = confusion(actual, predicted, 2);
    CHECK(cm.at(0, 0) == 1);
    CHECK(cm.at(0, 1) == 1);
    CHECK(cm.at(1, 0) == 0);
    CHECK(cm.at(1, 1) == 2);

    const auto perfect = confusion(actual, actual, 3);
    CHECK(perfect.at(0, 0) == 2);
    CHECK(perfect.at(1, 1) == 2);
    CHECK(perfect.total() == 4);

    const std::vector<std::size_t> none;
    const auto empty = confusion(none, none, 3);
    CHECK(empty.total() == 0);
    CHECK_THROWS_AS(report(empty), DataError);

    const std::vector<std::size_t> shorter{0};
    CHECK_THROWS_AS(confusion(actual, shorter, 2), DataError);
    const std::vector<std::size_t> out_of_range{0, 0, 1, 5};
    CHECK_THROWS_AS(confusion(actual, out_of_range, 2), DataError);
}

TEST_CASE("worked binary case") {
    const auto s = binary_scores({8, 1, 9, 2});
    CHECK(s.sensitivity == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(s.specificity == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(s.precision == doctest::Approx(8.0 / 9.0).epsilon(1e-15));
    CHECK(s.jaccard == doctest::Approx(8.0 / 11.0).epsilon(1e-15));
    CHECK(s.dice == doctest::Approx(16.0 / 19.0).epsilon(1e-15));
    CHECK(s.f1 == doctest::Approx(16.0 / 19.0).epsilon(1e-15));
    CHECK(s.accuracy == doctest::Approx(0.85).epsilon(1e-15));
    CHECK(s.error_rate == doctest::Approx(0.15).epsilon(1e-14));
    CHECK(std::abs(s.mcc - 70.0 / std::sqrt(9900.0)) < 1e-12);
    CHECK(std::abs(s.mcc - 0.70353) < 1e-5);
    CHECK(s.observed_agreement == doctest::Approx(0.85).epsilon(1e-15));
    CHECK(s.chance_agreement == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::abs(s.kappa - 0.7) < 1e-12);
}

TEST_CASE("perfect and inverted classifiers") {
    const std::vector<std::size_t> y{0, 1, 0, 1, 1, 0};
    std::vector<std::size_t> flipped;
    for (auto v : y) flipped.push_back(1 - v);
    const auto perfect = report(confusion(y, y, 2));
    for (const auto& c : perfect.per_class) {
        CHECK(c.scores.accuracy == 1.0);
        CHECK(c.scores.error_rate == 0.0);
        CHECK(c.scores.kappa == 1.0);
        CHECK(c.scores.mcc == 1.0);
    }
    CHECK(perfect.overall_accuracy == 1.0);
    const auto inverted = report(confusion(y, flipped, 2));
    for (const auto& c : inverted.per_class) {
        CHECK(c.scores.accuracy == 0.0);
        CHECK(c.scores.kappa == doctest::Approx(-1.0).epsilon(1e-15));
    }
}

TEST_CASE("zero-denominator conventions") {
    const auto s = binary_scores({0, 0, 5, 0});
    CHECK(s.sensitivity == 0.0);
    CHECK(s.precision == 0.0);
    CHECK(s.f1 == 0.0);
    CHECK(s.dice == 0.0);
    CHECK(s.jaccard == 0.0);
    CHECK(s.mcc == 0.0);
    CHECK(s.chance_agreement == 1.0);
    CHECK(s.kappa == 0.0);
    CHECK(s.accuracy == 1.0);
}

TEST_CASE("random matrices agree with the per-formula oracle") {
    std::mt19937_64 gen(14);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + gen() % 12;
        ConfusionMatrix cm(n);
        for (auto& c : cm.counts) c = gen() % 40;
        cm.at(0, 0) += 1;
        const auto rep = report(cm);
        for (std::size_t k = 0; k < n; ++k) {
            const auto& b = rep.per_class[k].counts;
            const auto o = testing::oracle_scores(b.tp, b.fp, b.tn, b.fn);
            const auto& s = rep.per_class[k].scores;
            CHECK(testing::close_relative(s.sensitivity, o.sensitivity));
            CHECK(testing::close_relative(s.specificity, o.specificity));
            CHECK(testing::close_relative(s.precision, o.precision));
            CHECK(testing::close_relative(s.recall, o.recall));
            CHECK(testing::close_relative(s.jaccard, o.jaccard));
            CHECK(testing::close_relative(s.dice, o.dice));
            CHECK(testing::close_relative(s.f1, o.f1));
            CHECK(testing::close_relative(s.mcc, o.mcc));
            CHECK(testing::close_relative(s.accuracy, o.accuracy));
            CHECK(testing::close_relative(s.error_rate, o.error_rate));
            CHECK(testing::close_relative(s.kappa, o.kappa));
            CHECK(s.sensitivity == s.recall);
            CHECK(s.error_rate == 1.0 - s.accuracy);
            CHECK(s.observed_agreement == s.accuracy);
            CHECK(s.f1 == s.dice);
            CHECK(s.mcc >= -1.0);
            CHECK(s.mcc <= 1.0);
            CHECK(s.kappa >= -1.0);
            CHECK(s.kappa <= 1.0);
        }
        double trace = 0.0;
        for (std::size_t k = 0; k < n; ++k) trace += static_cast<double>(cm.at(k, k));
        CHECK(rep.overall_accuracy == doctest::Approx(trace / static_cast<double>(cm.total())));
    }
}

TEST_CASE("one-vs-rest counts") {
    ConfusionMatrix cm(3);
    cm.counts = {5, 1, 0, 2, 7, 1, 0, 3, 4};
    const auto b = one_vs_rest(cm, 1);
    CHECK(b.tp == 7);
    CHECK(b.fn == 3);
    CHECK(b.fp == 4);
    CHECK(b.tn == 9);
}

TEST_CASE("ROC examples") {
    const std::vector<std::uint8_t> y{1, 1, 0, 0};
    const std::vector<double> separating{0.9, 0.8, 0.2, 0.1};
    CHECK(roc(separating, y).auc == 1.0);
    const std::vector<double> same{0.5, 0.5, 0.5, 0.5};
    const auto flat = roc(same, y);
    CHECK(flat.auc == 0.5);
    CHECK(flat.points.size() == 2);
    const std::vector<double> reversed{0.1, 0.2, 0.8, 0.9};
    CHECK(roc(reversed, y).auc == 0.0);
    const std::vector<std::uint8_t> one_class{1, 1, 1, 1};
    CHECK_THROWS_AS(roc(separating, one_class), DataError);
}

TEST_CASE("ROC matches the pairwise ranking statistic") {
    std::mt19937_64 gen(10);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + gen() % 40;
        std::vector<double> scores(n);
        std::vector<std::uint8_t> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = static_cast<double>(gen() % 8) / 8.0;
            y[i] = static_cast<std::uint8_t>(gen() % 2);
        }
        y[0] = 1;
        y[1] = 0;
        double wins = 0.0, pairs = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (y[i] == 1 && y[j] == 0) {
                    pairs += 1.0;
                    wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
                }
            }
        }
        const auto curve = roc(scores, y);
        CHECK(curve.auc == doctest::Approx(wins / pairs).epsilon(1e-12));
        for (std::size_t k = 1; k < curve.points.size(); ++k) {
            CHECK(curve.points[k].fpr >= curve.points[k - 1].fpr);
            CHECK(curve.points[k].tpr >= curve.points[k - 1].tpr);
        }
        CHECK(curve.points.front().fpr == 0.0);
        CHECK(curve.points.back().tpr == 1.0);
    }
}

TEST_CASE("MSE and PSNR") {
    const Frame a(4, 4, 10.0);
    const auto same = mse_psnr(a, a);
    CHECK(same.mse == 0.0);
    CHECK(same.saturated());
    CHECK(std::isinf(same.psnr));

    const auto one = mse_psnr(a, Frame(4, 4, 11.0));
    CHECK(one.mse == 1.0);
    CHECK(one.psnr == doctest::Approx(48.1308).epsilon(1e-6));
    CHECK(one.psnr == doctest::Approx(10.0 * std::log10(65025.0)).epsilon(1e-15));

    CHECK(mse_psnr(Frame(1, 1, 0.0), Frame(1, 1, 2.0)).mse == 4.0);
    CHECK_THROWS_AS(mse_psnr(a, Frame(3, 4, 0.0)), DataError);
}

TEST_CASE("report serialisation") {
    ConfusionMatrix cm(2);
    cm.counts = {8, 2, 1, 9};
    const auto rep = report(cm);
    const auto doc = to_json(rep, {"neg", "pos"});
    CHECK(doc.at("per_class").size() == 2);
    CHECK(doc.at("per_class")[1].at("class") == "pos");
    CHECK(doc.at("macro").contains("kappa"));
    const std::string csv = to_csv(rep, {"neg", "pos"});
    CHECK(csv.find("class,") == 0);
    CHECK(csv.find("macro") != std::string::npos);
    CHECK(confusion_csv(cm) == "actual\\predicted,0,1\n0,8,2\n1,1,9\n");
    const std::vector<double> s{0.9, 0.1};
    const std::vector<std::uint8_t> y{1, 0};
    CHECK(roc_csv(roc(s, y)).find("threshold,fpr,tpr\ninf,0,0\n") == 0);
    CHECK(format_double(0.1) == "0.10000000000000001");
}
