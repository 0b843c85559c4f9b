#include <algorithm>
#include <cmath>

#include "deepmal/util/error.hpp"
#include "models.hpp"

namespace deepmal::baselines {

using detail::CartModel;
using detail::ForestModel;
using detail::KnnModel;
using detail::MlpModel;
using detail::NaiveBayesModel;
using detail::SvmModel;

FeatureMatrix flatten_for_shallow(const repr::Dataset& dataset) {
    const auto& t = dataset.inputs;
    if (t.rank() < 2) throw DatasetError("dataset has no sample axis");
    FeatureMatrix out(t.dim(0), t.row_size());
    std::copy(t.values().begin(), t.values().end(), out.values.begin());
    return out;
}

std::vector<std::uint8_t> predict_classes(const ScoreMatrix& scores) {
    std::vector<std::uint8_t> out(scores.rows);
    for (std::size_t i = 0; i < scores.rows; ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < scores.classes; ++c) {
            if (scores.at(i, c) > scores.at(i, best)) best = c;
        }
        out[i] = static_cast<std::uint8_t>(best);
    }
    return out;
}

std::string to_string(ShallowKind kind) {
    switch (kind) {
        case ShallowKind::CART: return "cart";
        case ShallowKind::RandomForest: return "rf";
        case ShallowKind::GaussianNB: return "nb";
        case ShallowKind::KNN: return "knn";
        case ShallowKind::LinearSVM: return "svm";
        case ShallowKind::MLP: return "mlp";
    }
    return "unknown";
}

ShallowKind shallow_kind_from_string(const std::string& name) {
    for (auto k : all_shallow_kinds()) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("unknown baseline '" + name + "' (expected cart, rf, nb, knn, svm or mlp)");
}

const std::vector<ShallowKind>& all_shallow_kinds() {
    static const std::vector<ShallowKind> kinds{ShallowKind::CART, ShallowKind::RandomForest,
                                                ShallowKind::GaussianNB, ShallowKind::KNN,
                                                ShallowKind::LinearSVM, ShallowKind::MLP};
    return kinds;
}

void ShallowParams::validate() const {
    if (max_depth == 0) throw ConfigError("max depth must be at least 1");
    if (min_leaf == 0) throw ConfigError("min leaf size must be at least 1");
    if (trees == 0) throw ConfigError("a forest needs at least one tree");
    if (k == 0) throw ConfigError("k must be at least 1");
    if (!(variance_floor > 0)) throw ConfigError("variance floor must be positive");
    if (!(svm_lambda > 0)) throw ConfigError("SVM regularization must be positive");
    if (svm_epochs == 0 || mlp_epochs == 0) throw ConfigError("epoch counts must be positive");
    if (mlp_batch == 0) throw ConfigError("MLP batch size must be positive");
    for (auto w : mlp_hidden) {
        if (w == 0) throw ConfigError("MLP hidden widths must be positive");
    }
}

void ShallowModel::fit(const FeatureMatrix& x, std::span<const std::uint8_t> labels, std::size_t num_classes) {
    if (x.rows != labels.size()) throw DatasetError("feature rows and labels disagree");
    if (x.rows < 2) throw DatasetError("shallow models need at least two samples");
    if (x.cols == 0) throw DatasetError("shallow models need at least one feature");
    const std::size_t top = *std::max_element(labels.begin(), labels.end());
    classes_ = num_classes == 0 ? top + 1 : num_classes;
    if (top >= classes_) throw DatasetError("label outside the declared classes");
    std::vector<bool> seen(classes_, false);
    std::size_t distinct = 0;
    for (auto y : labels) {
        if (!seen[y]) ++distinct;
        seen[y] = true;
    }
    if (distinct < 2) throw DatasetError("shallow models need at least two classes in the training data");
    for (float v : x.values) {
        if (!std::isfinite(v)) throw DatasetError("non-finite feature value");
    }
    features_ = x.cols;
    fit_impl(x, labels);
    const auto pred = predict_classes(scores_impl(x));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
    train_accuracy_ = static_cast<double>(correct) / static_cast<double>(pred.size());
}

ScoreMatrix ShallowModel::predict_scores(const FeatureMatrix& x) const {
    if (classes_ == 0) throw EvaluationError("model has not been fitted");
    if (x.cols != features_) {
        throw ShapeError("model expects " + std::to_string(features_) + " features, got " +
                         std::to_string(x.cols));
    }
    return scores_impl(x);
}

void ShallowModel::store(nn::Container& out) const {
    out.header["kind"] = "shallow";
    out.header["model"] = to_string(kind());
    out.header["classes"] = classes_;
    out.header["features"] = features_;
    out.header["train_accuracy"] = train_accuracy_;
    store_impl(out);
}

std::unique_ptr<ShallowModel> ShallowModel::restore(const nn::Container& in) {
    if (in.header.value("kind", std::string()) != "shallow") {
        throw FormatError("checkpoint does not hold a shallow model");
    }
    const auto kind = shallow_kind_from_string(in.header.at("model").get<std::string>());
    auto params = detail::params_from_json(in.header.at("params"));
    auto model = make_shallow(kind, params);
    model->classes_ = in.header.at("classes").get<std::size_t>();
    model->features_ = in.header.at("features").get<std::size_t>();
    model->train_accuracy_ = in.header.at("train_accuracy").get<double>();
    model->restore_impl(in);
    return model;
}

std::unique_ptr<ShallowModel> make_shallow(ShallowKind kind, const ShallowParams& params) {
    params.validate();
    switch (kind) {
        case ShallowKind::CART: return std::make_unique<CartModel>(params);
        case ShallowKind::RandomForest: return std::make_unique<ForestModel>(params);
        case ShallowKind::GaussianNB: return std::make_unique<NaiveBayesModel>(params);
        case ShallowKind::KNN: return std::make_unique<KnnModel>(params);
        case ShallowKind::LinearSVM: return std::make_unique<SvmModel>(params);
        case ShallowKind::MLP: return std::make_unique<MlpModel>(params);
    }
    throw ConfigError("unknown baseline kind");
}

std::size_t fitted_depth(const ShallowModel& model) {
    if (const auto* cart = dynamic_cast<const CartModel*>(&model)) return cart->tree().depth;
    if (const auto* forest = dynamic_cast<const ForestModel*>(&model)) {
        std::size_t d = 0;
        for (const auto& t : forest->trees()) d = std::max(d, t.depth);
        return d;
    }
    return 0;
}

GridSearchResult grid_search(ShallowKind kind, const std::vector<ShallowParams>& candidates,
                             const FeatureMatrix& train_x, std::span<const std::uint8_t> train_y,
                             const FeatureMatrix& val_x, std::span<const std::uint8_t> val_y) {
    if (candidates.empty()) throw ConfigError("grid search needs at least one candidate");
    GridSearchResult result;
    double best = -1.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        auto model = make_shallow(kind, candidates[i]);
        model->fit(train_x, train_y);
        const auto pred = predict_classes(model->predict_scores(val_x));
        std::size_t correct = 0;
        for (std::size_t r = 0; r < pred.size(); ++r) correct += pred[r] == val_y[r];
        const double acc = val_y.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(val_y.size());
        result.validation_accuracy.push_back(acc);
        if (acc > best) {
            best = acc;
            result.best_index = i;
        }
    }
    return result;
}

namespace detail {

nlohmann::json params_to_json(const ShallowParams& p) {
    return {{"max_depth", p.max_depth},     {"min_leaf", p.min_leaf},
            {"trees", p.trees},             {"bootstrap", p.bootstrap},
            {"max_features", p.max_features}, {"variance_floor", p.variance_floor},
            {"k", p.k},                     {"svm_lambda", p.svm_lambda},
            {"svm_epochs", p.svm_epochs},   {"mlp_hidden", p.mlp_hidden},
            {"mlp_epochs", p.mlp_epochs},   {"mlp_batch", p.mlp_batch},
            {"seed", p.seed}};
}

ShallowParams params_from_json(const nlohmann::json& j) {
    ShallowParams p;
    p.max_depth = j.at("max_depth").get<std::size_t>();
    p.min_leaf = j.at("min_leaf").get<std::size_t>();
    p.trees = j.at("trees").get<std::size_t>();
    p.bootstrap = j.at("bootstrap").get<bool>();
    p.max_features = j.at("max_features").get<std::size_t>();
    p.variance_floor = j.at("variance_floor").get<double>();
    p.k = j.at("k").get<std::size_t>();
    p.svm_lambda = j.at("svm_lambda").get<double>();
    p.svm_epochs = j.at("svm_epochs").get<std::size_t>();
    p.mlp_hidden = j.at("mlp_hidden").get<std::vector<std::size_t>>();
    p.mlp_epochs = j.at("mlp_epochs").get<std::size_t>();
    p.mlp_batch = j.at("mlp_batch").get<std::size_t>();
    p.seed = j.at("seed").get<std::uint64_t>();
    return p;
}

nn::Blob make_blob(const std::string& name, nn::Blob::DType dtype, std::vector<std::uint64_t> shape,
                   std::vector<double> values) {
    nn::Blob b;
    b.name = name;
    b.dtype = dtype;
    b.shape = std::move(shape);
    b.values = std::move(values);
    return b;
}

std::vector<double> blob_values(const nn::Container& in, const std::string& name, std::size_t count) {
    const auto& b = in.blob(name);
    if (b.values.size() != count) {
        throw FormatError("checkpoint tensor '" + name + "' has " + std::to_string(b.values.size()) +
                          " values, expected " + std::to_string(count));
    }
    return b.values;
}

Standardizer Standardizer::fit(const FeatureMatrix& x) {
    Standardizer s;
    s.mean.assign(x.cols, 0.0);
    s.scale.assign(x.cols, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = 0; j < x.cols; ++j) s.mean[j] += x.at(i, j);
    }
    for (auto& m : s.mean) m /= static_cast<double>(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = 0; j < x.cols; ++j) {
            const double d = x.at(i, j) - s.mean[j];
            s.scale[j] += d * d;
        }
    }
    for (auto& v : s.scale) {
        v = std::sqrt(v / static_cast<double>(x.rows));
        if (v < 1e-12) v = 1.0;
    }
    return s;
}

FeatureMatrix Standardizer::apply(const FeatureMatrix& x) const {
    FeatureMatrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = 0; j < x.cols; ++j) {
            out.values[i * x.cols + j] = static_cast<float>((x.at(i, j) - mean[j]) / scale[j]);
        }
    }
    return out;
}

void Standardizer::store(nn::Container& out) const {
    out.blobs.push_back(make_blob("standardize.mean", nn::Blob::DType::F64, {mean.size()}, mean));
    out.blobs.push_back(make_blob("standardize.scale", nn::Blob::DType::F64, {scale.size()}, scale));
}

Standardizer Standardizer::restore(const nn::Container& in, std::size_t features) {
    Standardizer s;
    s.mean = blob_values(in, "standardize.mean", features);
    s.scale = blob_values(in, "standardize.scale", features);
    return s;
}

}  // namespace detail
}  // namespace deepmal::baselines
