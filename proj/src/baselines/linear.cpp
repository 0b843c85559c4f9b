#include <algorithm>
#include <cmath>
#include <numeric>

#include "deepmal/nn/trainer.hpp"
#include "deepmal/util/error.hpp"
#include "deepmal/util/parallel.hpp"
#include "deepmal/util/seed.hpp"
#include "models.hpp"

namespace deepmal::baselines::detail {

// --- Gaussian naive Bayes ---------------------------------------------------

void NaiveBayesModel::fit_impl(const FeatureMatrix& x, std::span<const std::uint8_t> labels) {
    const std::size_t d = x.cols;
    std::vector<double> count(classes_, 0.0);
    mean_.assign(classes_ * d, 0.0);
    var_.assign(classes_ * d, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto c = labels[i];
        count[c] += 1.0;
        for (std::size_t j = 0; j < d; ++j) mean_[c * d + j] += x.at(i, j);
    }
    for (std::size_t c = 0; c < classes_; ++c) {
        for (std::size_t j = 0; j < d; ++j) mean_[c * d + j] /= std::max(count[c], 1.0);
    }
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto c = labels[i];
        for (std::size_t j = 0; j < d; ++j) {
            const double r = x.at(i, j) - mean_[c * d + j];
            var_[c * d + j] += r * r;
        }
    }
    log_prior_.assign(classes_, 0.0);
    for (std::size_t c = 0; c < classes_; ++c) {
        for (std::size_t j = 0; j < d; ++j) {
            var_[c * d + j] = var_[c * d + j] / std::max(count[c], 1.0) + params_.variance_floor;
        }
        log_prior_[c] = count[c] > 0 ? std::log(count[c] / static_cast<double>(x.rows))
                                     : -std::numeric_limits<double>::infinity();
    }
}

ScoreMatrix NaiveBayesModel::scores_impl(const FeatureMatrix& x) const {
    const std::size_t d = features_;
    ScoreMatrix s{x.rows, classes_, std::vector<double>(x.rows * classes_)};
    std::vector<double> log_norm(classes_, 0.0);
    for (std::size_t c = 0; c < classes_; ++c) {
        for (std::size_t j = 0; j < d; ++j) log_norm[c] += std::log(2 * M_PI * var_[c * d + j]);
        log_norm[c] *= -0.5;
    }
    parallel_chunks(x.rows, params_.threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> lp(classes_);
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t c = 0; c < classes_; ++c) {
                double q = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double r = x.at(i, j) - mean_[c * d + j];
                    q += r * r / var_[c * d + j];
                }
                lp[c] = log_prior_[c] + log_norm[c] - 0.5 * q;
            }
            const double top = *std::max_element(lp.begin(), lp.end());
            double z = 0.0;
            for (double v : lp) z += std::exp(v - top);
            for (std::size_t c = 0; c < classes_; ++c) s.values[i * classes_ + c] = std::exp(lp[c] - top) / z;
        }
    });
    return s;
}

void NaiveBayesModel::store_impl(nn::Container& out) const {
    out.header["params"] = params_to_json(params_);
    out.blobs.push_back(make_blob("nb.log_prior", nn::Blob::DType::F64, {classes_}, log_prior_));
    out.blobs.push_back(make_blob("nb.mean", nn::Blob::DType::F64, {classes_, features_}, mean_));
    out.blobs.push_back(make_blob("nb.var", nn::Blob::DType::F64, {classes_, features_}, var_));
}

void NaiveBayesModel::restore_impl(const nn::Container& in) {
    log_prior_ = blob_values(in, "nb.log_prior", classes_);
    mean_ = blob_values(in, "nb.mean", classes_ * features_);
    var_ = blob_values(in, "nb.var", classes_ * features_);
}

// --- k nearest neighbors ------------------------------------------------------

void KnnModel::fit_impl(const FeatureMatrix& x, std::span<const std::uint8_t> labels) {
    train_ = x;
    labels_.assign(labels.begin(), labels.end());
}

ScoreMatrix KnnModel::scores_impl(const FeatureMatrix& x) const {
    const std::size_t k = std::min(params_.k, train_.rows);
    ScoreMatrix s{x.rows, classes_, std::vector<double>(x.rows * classes_, 0.0)};
    parallel_chunks(x.rows, params_.threads, [&](std::size_t begin, std::size_t end) {
        std::vector<std::pair<double, std::size_t>> dist(train_.rows);
        for (std::size_t i = begin; i < end; ++i) {
            const auto q = x.row(i);
            for (std::size_t t = 0; t < train_.rows; ++t) {
                const auto r = train_.row(t);
                double acc = 0.0;
                for (std::size_t j = 0; j < q.size(); ++j) {
                    const double diff = static_cast<double>(q[j]) - r[j];
                    acc += diff * diff;
                }
                dist[t] = {acc, t};
            }
            // Pairs order by distance, then by training index.
            std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
            for (std::size_t n = 0; n < k; ++n) {
                s.values[i * classes_ + labels_[dist[n].second]] += 1.0 / static_cast<double>(k);
            }
        }
    });
    return s;
}

void KnnModel::store_impl(nn::Container& out) const {
    out.header["params"] = params_to_json(params_);
    out.blobs.push_back(make_blob("knn.x", nn::Blob::DType::F32, {train_.rows, train_.cols},
                                  std::vector<double>(train_.values.begin(), train_.values.end())));
    out.blobs.push_back(make_blob("knn.y", nn::Blob::DType::I64, {labels_.size()},
                                  std::vector<double>(labels_.begin(), labels_.end())));
}

void KnnModel::restore_impl(const nn::Container& in) {
    const auto& y = in.blob("knn.y");
    const std::size_t rows = y.values.size();
    const auto xs = blob_values(in, "knn.x", rows * features_);
    train_ = FeatureMatrix(rows, features_);
    std::copy(xs.begin(), xs.end(), train_.values.begin());
    labels_.clear();
    for (double v : y.values) {
        if (v < 0 || v >= static_cast<double>(classes_)) throw FormatError("corrupt k-NN labels");
        labels_.push_back(static_cast<std::uint8_t>(v));
    }
}

// --- linear SVM ---------------------------------------------------------------

void SvmModel::fit_impl(const FeatureMatrix& raw, std::span<const std::uint8_t> labels) {
    standardizer_ = Standardizer::fit(raw);
    const FeatureMatrix x = standardizer_.apply(raw);
    const std::size_t d = x.cols, machines_n = machines();
    weights_.assign(machines_n * d, 0.0);
    bias_.assign(machines_n, 0.0);
    const double lambda = params_.svm_lambda;
    // Step size 1 / (lambda * (t + t0)) starts at 1.
    const double t0 = 1.0 / lambda;

    parallel_chunks(machines_n, params_.threads, [&](std::size_t begin, std::size_t end) {
        std::vector<std::size_t> local(x.rows);
        for (std::size_t m = begin; m < end; ++m) {
            const std::size_t positive = classes_ == 2 ? 1 : m;
            double* w = weights_.data() + m * d;
            double b = 0.0;
            // w is kept as scale * v so the shrink step is O(1).
            std::vector<double> v(d, 0.0);
            double scale = 1.0;
            std::size_t t = 0;
            for (std::size_t epoch = 0; epoch < params_.svm_epochs; ++epoch) {
                std::iota(local.begin(), local.end(), 0);
                Rng rng(derive_seed(params_.seed, "svm", epoch));
                rng.shuffle(std::span<std::size_t>(local));
                for (auto i : local) {
                    const double eta = 1.0 / (lambda * (static_cast<double>(t++) + t0));
                    const double y = labels[i] == positive ? 1.0 : -1.0;
                    const auto row = x.row(i);
                    double margin = b;
                    for (std::size_t j = 0; j < d; ++j) margin += scale * v[j] * row[j];
                    scale *= 1.0 - eta * lambda;
                    if (y * margin < 1.0) {
                        const double step = eta * y / scale;
                        for (std::size_t j = 0; j < d; ++j) v[j] += step * row[j];
                        b += eta * y;
                    }
                    if (scale < 1e-9) {
                        for (auto& vj : v) vj *= scale;
                        scale = 1.0;
                    }
                }
            }
            for (std::size_t j = 0; j < d; ++j) w[j] = scale * v[j];
            bias_[m] = b;
        }
    });
}

ScoreMatrix SvmModel::scores_impl(const FeatureMatrix& raw) const {
    const FeatureMatrix x = standardizer_.apply(raw);
    const std::size_t d = features_;
    ScoreMatrix s{x.rows, classes_, std::vector<double>(x.rows * classes_, 0.0)};
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto row = x.row(i);
        for (std::size_t m = 0; m < machines(); ++m) {
            double margin = bias_[m];
            for (std::size_t j = 0; j < d; ++j) margin += weights_[m * d + j] * row[j];
            if (classes_ == 2) {
                s.values[i * 2] = -margin;
                s.values[i * 2 + 1] = margin;
            } else {
                s.values[i * classes_ + m] = margin;
            }
        }
    }
    return s;
}

void SvmModel::store_impl(nn::Container& out) const {
    out.header["params"] = params_to_json(params_);
    standardizer_.store(out);
    out.blobs.push_back(make_blob("svm.weights", nn::Blob::DType::F64, {machines(), features_}, weights_));
    out.blobs.push_back(make_blob("svm.bias", nn::Blob::DType::F64, {machines()}, bias_));
}

void SvmModel::restore_impl(const nn::Container& in) {
    standardizer_ = Standardizer::restore(in, features_);
    weights_ = blob_values(in, "svm.weights", machines() * features_);
    bias_ = blob_values(in, "svm.bias", machines());
}

// --- multilayer perceptron ----------------------------------------------------

nn::ModelConfig MlpModel::config() const {
    nn::ModelConfig c;
    c.name = "mlp";
    c.input_shape = {features_};
    for (auto w : params_.mlp_hidden) {
        c.layers.push_back(nn::LayerSpec::dense(w));
        c.layers.push_back(nn::LayerSpec::relu());
    }
    c.layers.push_back(nn::LayerSpec::dense(classes_, nn::Init::GlorotUniform));
    c.layers.push_back(nn::LayerSpec::softmax());
    c.loss = nn::LossKind::CategoricalCrossEntropy;
    return c;
}

namespace {

nn::Tensor to_tensor(const FeatureMatrix& x) {
    return nn::Tensor({x.rows, x.cols}, std::vector<nn::Real>(x.values.begin(), x.values.end()));
}

}  // namespace

void MlpModel::fit_impl(const FeatureMatrix& raw, std::span<const std::uint8_t> labels) {
    standardizer_ = Standardizer::fit(raw);
    const nn::Tensor x = to_tensor(standardizer_.apply(raw));
    net_ = std::make_unique<nn::Network>(config(), derive_seed(params_.seed, "mlp"));
    nn::TrainConfig tc;
    tc.epochs = params_.mlp_epochs;
    tc.batch_size = params_.mlp_batch;
    tc.seed = derive_seed(params_.seed, "mlp-train");
    tc.adam.decay = 1.0;
    nn::train(*net_, x, labels, nullptr, {}, tc);
}

ScoreMatrix MlpModel::scores_impl(const FeatureMatrix& raw) const {
    const nn::Tensor probs = net_->predict(to_tensor(standardizer_.apply(raw)));
    return {raw.rows, classes_, std::vector<double>(probs.values().begin(), probs.values().end())};
}

void MlpModel::store_impl(nn::Container& out) const {
    out.header["params"] = params_to_json(params_);
    standardizer_.store(out);
    nn::Container inner;
    nn::store_network(*net_, inner);
    out.header["network"] = inner.header;
    for (auto& b : inner.blobs) {
        b.name = "mlp." + b.name;
        out.blobs.push_back(std::move(b));
    }
}

void MlpModel::restore_impl(const nn::Container& in) {
    standardizer_ = Standardizer::restore(in, features_);
    nn::Container inner;
    inner.header = in.header.at("network");
    for (const auto& b : in.blobs) {
        if (b.name.rfind("mlp.", 0) == 0) {
            inner.blobs.push_back(b);
            inner.blobs.back().name = b.name.substr(4);
        }
    }
    net_ = std::make_unique<nn::Network>(nn::restore_network(inner));
}

}  // namespace deepmal::baselines::detail
