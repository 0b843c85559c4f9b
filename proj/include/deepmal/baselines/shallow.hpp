#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "deepmal/nn/checkpoint.hpp"
#include "deepmal/repr/dataset.hpp"

namespace deepmal::baselines {

/// Dense row-major sample matrix.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> values;

    FeatureMatrix() = default;
    FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0f) {}

    std::span<const float> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
    std::span<float> row(std::size_t i) { return {values.data() + i * cols, cols}; }
    float at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

/// Per-class scores, row-major (rows, classes).
struct ScoreMatrix {
    std::size_t rows = 0;
    std::size_t classes = 0;
    std::vector<double> values;

    double at(std::size_t i, std::size_t c) const { return values[i * classes + c]; }
};

/// Row-major flattening of every sample; (N, m, n) becomes (N, m*n).
FeatureMatrix flatten_for_shallow(const repr::Dataset& dataset);

/// Argmax per row, lowest class index on ties.
std::vector<std::uint8_t> predict_classes(const ScoreMatrix& scores);

enum class ShallowKind { CART, RandomForest, GaussianNB, KNN, LinearSVM, MLP };

/// Short names: cart, rf, nb, knn, svm, mlp.
std::string to_string(ShallowKind kind);
ShallowKind shallow_kind_from_string(const std::string& name);
const std::vector<ShallowKind>& all_shallow_kinds();

struct ShallowParams {
    // CART and random forest
    std::size_t max_depth = 20;
    std::size_t min_leaf = 5;
    std::size_t trees = 100;
    bool bootstrap = true;
    std::size_t max_features = 0;  // 0: sqrt(d) for forests, d for a single tree
    // naive Bayes
    double variance_floor = 1e-9;
    // k-NN
    std::size_t k = 5;
    // linear SVM
    double svm_lambda = 1e-4;
    std::size_t svm_epochs = 20;
    // MLP
    std::vector<std::size_t> mlp_hidden{100, 100};
    std::size_t mlp_epochs = 200;  // constant learning rate 1e-3
    std::size_t mlp_batch = 128;

    std::uint64_t seed = 1;
    unsigned threads = 1;

    void validate() const;
};

class ShallowModel {
public:
    virtual ~ShallowModel() = default;

    virtual ShallowKind kind() const = 0;
    std::size_t num_classes() const { return classes_; }
    std::size_t num_features() const { return features_; }
    /// Accuracy on the training data, recorded by fit.
    double training_accuracy() const { return train_accuracy_; }

    /// Throws DatasetError unless N >= 2 and at least two classes occur.
    /// `num_classes` of 0 means one more than the largest label.
    void fit(const FeatureMatrix& x, std::span<const std::uint8_t> labels, std::size_t num_classes = 0);
    /// Vote fraction, posterior, neighbor fraction, margin or probability,
    /// depending on the kind.
    ScoreMatrix predict_scores(const FeatureMatrix& x) const;

    /// Serializes into a checkpoint container; the header gains
    /// "kind": "shallow" and the model kind.
    void store(nn::Container& out) const;
    static std::unique_ptr<ShallowModel> restore(const nn::Container& in);

protected:
    virtual void fit_impl(const FeatureMatrix& x, std::span<const std::uint8_t> labels) = 0;
    virtual ScoreMatrix scores_impl(const FeatureMatrix& x) const = 0;
    virtual void store_impl(nn::Container& out) const = 0;
    virtual void restore_impl(const nn::Container& in) = 0;

    std::size_t classes_ = 0;
    std::size_t features_ = 0;
    double train_accuracy_ = 0.0;
};

std::unique_ptr<ShallowModel> make_shallow(ShallowKind kind, const ShallowParams& params = {});

/// Maximum tree depth reached by a fitted CART or forest (0 otherwise).
std::size_t fitted_depth(const ShallowModel& model);

struct GridSearchResult {
    std::size_t best_index = 0;
    std::vector<double> validation_accuracy;
};

/// Fits every candidate on the training data and scores it on validation
/// data; the first candidate with the highest accuracy wins.
GridSearchResult grid_search(ShallowKind kind, const std::vector<ShallowParams>& candidates,
                             const FeatureMatrix& train_x, std::span<const std::uint8_t> train_y,
                             const FeatureMatrix& val_x, std::span<const std::uint8_t> val_y);

}  // namespace deepmal::baselines
