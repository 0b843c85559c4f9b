#pragma once

#include <memory>

#include "deepmal/baselines/shallow.hpp"
#include "deepmal/nn/network.hpp"
#include "deepmal/util/random.hpp"

namespace deepmal::baselines::detail {

nlohmann::json params_to_json(const ShallowParams& p);
ShallowParams params_from_json(const nlohmann::json& j);

/// Blob helpers for the shared checkpoint container.
nn::Blob make_blob(const std::string& name, nn::Blob::DType dtype, std::vector<std::uint64_t> shape,
                   std::vector<double> values);
std::vector<double> blob_values(const nn::Container& in, const std::string& name, std::size_t count);

struct Tree {
    std::vector<std::int32_t> feature;  // -1 marks a leaf
    std::vector<float> threshold;
    std::vector<std::int32_t> left;
    std::vector<std::int32_t> right;
    std::vector<double> dist;  // nodes x classes, class fractions
    std::size_t classes = 0;
    std::size_t depth = 0;

    std::size_t nodes() const { return feature.size(); }
    std::size_t leaf_of(std::span<const float> x) const;
    std::span<const double> leaf_dist(std::span<const float> x) const {
        return {dist.data() + leaf_of(x) * classes, classes};
    }
    std::size_t vote(std::span<const float> x) const;

    void store(nn::Container& out, const std::string& prefix) const;
    static Tree restore(const nn::Container& in, const std::string& prefix, std::size_t classes);
};

/// Grows a Gini CART over `rows` (repeats allowed). `max_features` < d
/// samples that many candidate features per node from `rng`.
Tree grow_tree(const FeatureMatrix& x, std::span<const std::uint8_t> y, std::vector<std::size_t> rows,
               std::size_t classes, std::size_t max_depth, std::size_t min_leaf,
               std::size_t max_features, Rng& rng);

/// Per-feature mean and scale (std, or 1 for constant columns).
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(const FeatureMatrix& x);
    FeatureMatrix apply(const FeatureMatrix& x) const;
    void store(nn::Container& out) const;
    static Standardizer restore(const nn::Container& in, std::size_t features);
};

class CartModel final : public ShallowModel {
public:
    explicit CartModel(ShallowParams p) : params_(std::move(p)) {}
    ShallowKind kind() const override { return ShallowKind::CART; }
    const Tree& tree() const { return tree_; }

protected:
    void fit_impl(const FeatureMatrix& x, std::span<const std::uint8_t> labels) override;
    ScoreMatrix scores_impl(const FeatureMatrix& x) const override;
    void store_impl(nn::Container& out) const override;
    void restore_impl(const nn::Container& in) override;

private:
    ShallowParams params_;
    Tree tree_;
};

class ForestModel final : public ShallowModel {
public:
    explicit ForestModel(ShallowParams p) : params_(std::move(p)) {}
    ShallowKind kind() const override { return ShallowKind::RandomForest; }
    const std::vector<Tree>& trees() const { return trees_; }

protected:
    void fit_impl(const FeatureMatrix& x, std::span<const std::uint8_t> labels) override;
    ScoreMatrix scores_impl(const FeatureMatrix& x) const override;
    void store_impl(nn::Container& out) const override;
    void restore_impl(const nn::Container& in) override;

private:
    ShallowParams params_;
    std::vector<Tree> trees_;
};

class NaiveBayesModel final : public ShallowModel {
public:
    explicit NaiveBayesModel(ShallowParams p) : params_(std::move(p)) {}
    ShallowKind kind() const override { return ShallowKind::GaussianNB; }

protected:
    void fit_impl(const FeatureMatrix& x, std::span<const std::uint8_t> labels) override;
    ScoreMatrix scores_impl(const FeatureMatrix& x) const override;
    void store_impl(nn::Container& out) const override;
    void restore_impl(const nn::Container& in) override;

private:
    ShallowParams params_;
    std::vector<double> log_prior_;  // classes
    std::vector<double> mean_;       // classes x features
    std::vector<double> var_;        // classes x features
};

class KnnModel final : public ShallowModel {
public:
    explicit KnnModel(ShallowParams p) : params_(std::move(p)) {}
    ShallowKind kind() const override { return ShallowKind::KNN; }

protected:
    void fit_impl(const FeatureMatrix& x, std::span<const std::uint8_t> labels) override;
    ScoreMatrix scores_impl(const FeatureMatrix& x) const override;
    void store_impl(nn::Container& out) const override;
    void restore_impl(const nn::Container& in) override;

private:
    ShallowParams params_;
    FeatureMatrix train_;
    std::vector<std::uint8_t> labels_;
};

class SvmModel final : public ShallowModel {
public:
    explicit SvmModel(ShallowParams p) : params_(std::move(p)) {}
    ShallowKind kind() const override { return ShallowKind::LinearSVM; }

protected:
    void fit_impl(const FeatureMatrix& x, std::span<const std::uint8_t> labels) override;
    ScoreMatrix scores_impl(const FeatureMatrix& x) const override;
    void store_impl(nn::Container& out) const override;
    void restore_impl(const nn::Container& in) override;

private:
    std::size_t machines() const { return classes_ == 2 ? 1 : classes_; }

    ShallowParams params_;
    Standardizer standardizer_;
    std::vector<double> weights_;  // machines x features
    std::vector<double> bias_;     // machines
};

class MlpModel final : public ShallowModel {
public:
    explicit MlpModel(ShallowParams p) : params_(std::move(p)) {}
    ShallowKind kind() const override { return ShallowKind::MLP; }

protected:
    void fit_impl(const FeatureMatrix& x, std::span<const std::uint8_t> labels) override;
    ScoreMatrix scores_impl(const FeatureMatrix& x) const override;
    void store_impl(nn::Container& out) const override;
    void restore_impl(const nn::Container& in) override;

private:
    nn::ModelConfig config() const;

    ShallowParams params_;
    Standardizer standardizer_;
    std::unique_ptr<nn::Network> net_;
};

}  // namespace deepmal::baselines::detail
