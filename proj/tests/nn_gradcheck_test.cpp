#include <gtest/gtest.h>

#include <map>

#include "support/gradient_suite.hpp"

namespace {

using deepmal::testing::GradientCase;

const std::map<std::string, std::vector<GradientCase>>& results() {
    static const auto all = [] {
        std::map<std::string, std::vector<GradientCase>> by_name;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            for (auto& c : deepmal::testing::run_gradient_suite(seed)) by_name[c.name].push_back(c);
        }
        return by_name;
    }();
    return all;
}

class GradientCheck : public ::testing::TestWithParam<std::string> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
    const auto it = results().find(GetParam());
    ASSERT_NE(it, results().end());
    ASSERT_EQ(it->second.size(), 20u);
    for (std::size_t seed = 0; seed < it->second.size(); ++seed) {
        const auto& c = it->second[seed];
        EXPECT_GT(c.checked, 0u);
        EXPECT_EQ(c.failures, 0u) << "seed " << seed << ": " << c.first_failure << " (worst "
                                  << c.worst << ")";
    }
}

INSTANTIATE_TEST_SUITE_P(AllLayers, GradientCheck,
                         ::testing::Values("conv1d", "maxpool1d", "lstm_sequences", "lstm_last",
                                           "dense", "batchnorm", "batchnorm_infer",
                                           "spatial_batchnorm", "dropout", "relu", "sigmoid",
                                           "softmax", "flatten", "binary_crossentropy",
                                           "categorical_crossentropy", "network"));

}  // namespace
