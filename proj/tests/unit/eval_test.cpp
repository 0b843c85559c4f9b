#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "deepmal/eval/metrics.hpp"
#include "deepmal/util/error.hpp"
#include "deepmal/util/random.hpp"
#include "support/frames.hpp"
#include "support/table_fixture.hpp"

using namespace deepmal;
using namespace deepmal::eval;

namespace {

double concordance(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
    double c = 0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!y[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j]) continue;
            ++pairs;
            c += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    }
    return c / static_cast<double>(pairs);
}

ConfusionMatrix matrix(std::size_t k, std::vector<std::size_t> counts) { return ConfusionMatrix{k, std::move(counts)}; }

}  // namespace

TEST(Roc, PerfectRankingPassesThroughTopLeft) {
    const std::vector<double> s{0.9, 0.8, 0.4, 0.2};
    const std::vector<std::uint8_t> y{1, 1, 0, 0};
    const auto roc = roc_curve(s, y);
    EXPECT_EQ(roc.front().fpr, 0.0);
    EXPECT_EQ(roc.front().tpr, 0.0);
    EXPECT_TRUE(std::isinf(roc.front().threshold));
    bool corner = false;
    for (const auto& p : roc) corner |= p.fpr == 0.0 && p.tpr == 1.0;
    EXPECT_TRUE(corner);
    EXPECT_DOUBLE_EQ(auc(roc), 1.0);
    EXPECT_EQ(roc.back().fpr, 1.0);
    EXPECT_EQ(roc.back().tpr, 1.0);
}

TEST(Roc, ThreeOfFourPairsConcordant) {
    const std::vector<double> s{0.9, 0.4, 0.8, 0.2};
    const std::vector<std::uint8_t> y{1, 1, 0, 0};
    EXPECT_DOUBLE_EQ(auc(roc_curve(s, y)), 0.75);
}

TEST(Roc, EqualScoresGiveHalf) {
    const std::vector<double> s(6, 0.3);
    const std::vector<std::uint8_t> y{1, 0, 1, 0, 0, 1};
    const auto roc = roc_curve(s, y);
    EXPECT_EQ(roc.size(), 2u);
    EXPECT_DOUBLE_EQ(auc(roc), 0.5);
}

TEST(Roc, SingleClassIsAnError) {
    const std::vector<double> s{0.1, 0.2};
    const std::vector<std::uint8_t> y{1, 1};
    EXPECT_THROW(roc_curve(s, y), EvaluationError);
}

TEST(Roc, AucEqualsConcordanceOnRandomInstances) {
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(199);
        std::vector<double> s(n);
        std::vector<std::uint8_t> y(n);
        const bool coarse = trial % 2 == 0;  // many ties
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = i < 2 ? static_cast<std::uint8_t>(i) : rng.bernoulli(0.4);
            s[i] = coarse ? static_cast<double>(rng.below(5)) / 4.0 : rng.uniform() + 0.3 * y[i];
        }
        const double a = auc(roc_curve(s, y));
        EXPECT_NEAR(a, concordance(s, y), 1e-9) << "trial " << trial;
        // strictly monotone transform leaves the curve's area unchanged
        std::vector<double> t(n);
        for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3 * s[i]) - 7;
        EXPECT_NEAR(auc(roc_curve(t, y)), a, 1e-12);
    }
}

TEST(Confusion, DiagonalMeansPerfectMetrics) {
    const std::vector<std::uint8_t> truth{0, 1, 2, 2, 1, 0};
    const auto cm = confusion_matrix(truth, truth, 3);
    EXPECT_DOUBLE_EQ(overall_accuracy(cm), 1.0);
    for (const auto& m : per_class_metrics(cm, {"a", "b", "c"})) {
        EXPECT_DOUBLE_EQ(m.precision, 1.0);
        EXPECT_DOUBLE_EQ(m.recall, 1.0);
        EXPECT_DOUBLE_EQ(m.f1, 1.0);
        EXPECT_DOUBLE_EQ(m.accuracy, 1.0);
    }
}

TEST(Confusion, OneErrorIsOneOffDiagonalCount) {
    const std::vector<std::uint8_t> truth{0, 1, 1, 0};
    const std::vector<std::uint8_t> pred{0, 0, 1, 0};
    const auto cm = confusion_matrix(pred, truth, 2);
    EXPECT_EQ(cm.at(1, 0), 1u);
    EXPECT_EQ(cm.at(0, 1), 0u);
    EXPECT_EQ(cm.total(), 4u);
    EXPECT_DOUBLE_EQ(overall_accuracy(cm), 0.75);
}

TEST(Confusion, HandBuiltTwoClassMetrics) {
    const auto m = per_class_metrics(matrix(2, {8, 2, 1, 9}), {"neg", "pos"});
    EXPECT_DOUBLE_EQ(m[0].precision, 8.0 / 9.0);
    EXPECT_DOUBLE_EQ(m[0].recall, 0.8);
    EXPECT_DOUBLE_EQ(m[0].f1, 2 * (8.0 / 9.0 * 0.8) / (8.0 / 9.0 + 0.8));
    EXPECT_DOUBLE_EQ(m[0].accuracy, m[0].recall);
    EXPECT_EQ(m[1].support, 10u);
}

TEST(Confusion, ZeroDenominatorsAreFlagged) {
    const auto m = per_class_metrics(matrix(2, {5, 0, 5, 0}), {"neg", "pos"});
    EXPECT_TRUE(m[1].precision_undefined);
    EXPECT_EQ(m[1].precision, 0.0);
    EXPECT_FALSE(m[1].recall_undefined);
    EXPECT_EQ(m[1].recall, 0.0);
    const auto empty = per_class_metrics(matrix(2, {3, 0, 0, 0}), {"neg", "pos"});
    EXPECT_TRUE(empty[1].recall_undefined);
}

TEST(Confusion, PercentagesRoundHalfUpToTenths) {
    const auto cm = matrix(3, {1, 1, 1, 1, 15, 0, 3, 13, 0});
    const auto pct = cm.percentages();
    EXPECT_DOUBLE_EQ(pct[0], 33.3);
    EXPECT_DOUBLE_EQ(pct[3], 6.3);   // 6.25
    EXPECT_DOUBLE_EQ(pct[4], 93.8);  // 93.75
    EXPECT_DOUBLE_EQ(pct[6], 18.8);  // 18.75
    EXPECT_DOUBLE_EQ(pct[7], 81.3);  // 81.25
}

TEST(Confusion, RandomPredictionsOnBalancedDataAreNearUniform) {
    Rng rng(5);
    std::vector<std::uint8_t> truth, pred;
    for (std::size_t i = 0; i < 40000; ++i) {
        truth.push_back(static_cast<std::uint8_t>(i % 4));
        pred.push_back(static_cast<std::uint8_t>(rng.below(4)));
    }
    const auto pct = confusion_matrix(pred, truth, 4).percentages();
    for (double p : pct) EXPECT_NEAR(p, 25.0, 1.5);
}

TEST(Metrics, F1IsHarmonicMeanOnRandomMatrices) {
    Rng rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 2 + rng.below(4);
        std::vector<std::size_t> counts(k * k);
        for (auto& c : counts) c = rng.below(50);
        for (const auto& m : per_class_metrics(matrix(k, counts), std::vector<std::string>(k, "c"))) {
            if (m.precision + m.recall == 0) continue;
            EXPECT_NEAR(m.f1, 2 * m.precision * m.recall / (m.precision + m.recall), 1e-6);
        }
    }
}

TEST(Metrics, ReferenceRowsAreReproduced) {
    const auto& rows = deepmal::testing::reference_rows();
    std::vector<std::string> names;
    for (const auto& r : rows) names.push_back(r.name);
    const auto metrics = per_class_metrics(matrix(4, deepmal::testing::reference_confusion()), names);
    for (std::size_t c = 0; c < 4; ++c) {
        EXPECT_NEAR(metrics[c].accuracy, rows[c].accuracy, 1e-3) << rows[c].name;
        EXPECT_NEAR(metrics[c].precision, rows[c].precision, 1e-3) << rows[c].name;
        EXPECT_NEAR(metrics[c].recall, rows[c].recall, 1e-3) << rows[c].name;
        EXPECT_NEAR(metrics[c].f1, rows[c].f1, 1e-3) << rows[c].name;
        // the listed F1 agrees with the listed precision and recall
        EXPECT_NEAR(2 * rows[c].precision * rows[c].recall / (rows[c].precision + rows[c].recall), rows[c].f1, 1e-3);
        EXPECT_EQ(rows[c].accuracy, rows[c].recall);
    }
}

TEST(Report, BinaryScoresEndToEnd) {
    const std::vector<double> s{0.9, 0.2, 0.7, 0.6, 0.1, 0.4};
    const std::vector<std::uint8_t> y{1, 0, 1, 0, 0, 1};
    const auto r = evaluate_scores(s, 1, y, {"Normal", "Malware"}, "toy");
    EXPECT_EQ(r.samples, 6u);
    EXPECT_NEAR(r.accuracy, 4.0 / 6.0, 1e-12);
    EXPECT_NEAR(r.auc, concordance(s, y), 1e-12);
    EXPECT_EQ(r.confusion.at(0, 1), 1u);
    EXPECT_EQ(r.confusion.at(1, 0), 1u);

    deepmal::testing::TempDir dir("report");
    r.save_json(dir / "r.json");
    r.save_roc_csv(dir / "roc.csv");
    r.save_confusion_csv(dir / "cm.csv");
    const auto j = nlohmann::json::parse(std::ifstream(dir / "r.json"));
    EXPECT_EQ(j.at("model"), "toy");
    std::ifstream roc(dir / "roc.csv");
    std::string header, first;
    std::getline(roc, header);
    std::getline(roc, first);
    EXPECT_EQ(header, "fpr,tpr,threshold");
    EXPECT_EQ(first, "0,0,inf");
}

TEST(Report, MulticlassUsesArgmaxAndOneVsRestAuc) {
    const std::vector<double> s{0.7, 0.2, 0.1, 0.1, 0.8, 0.1, 0.2, 0.2, 0.6, 0.5, 0.4, 0.1};
    const std::vector<std::uint8_t> y{0, 1, 2, 1};
    const auto r = evaluate_scores(s, 3, y, {"Normal", "A", "B"}, "toy3");
    EXPECT_NEAR(r.accuracy, 0.75, 1e-12);
    ASSERT_EQ(r.class_auc.size(), 3u);
    EXPECT_EQ(positive_scores(s, 3)[0], 1.0 - 0.7);
}
