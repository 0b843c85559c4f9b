#include <algorithm>
#include <cmath>
#include <numeric>

#include "deepmal/util/error.hpp"
#include "deepmal/util/parallel.hpp"
#include "deepmal/util/seed.hpp"
#include "models.hpp"

namespace deepmal::baselines::detail {
namespace {

struct Split {
    bool found = false;
    std::int32_t feature = -1;
    float threshold = 0.0f;
    double score = 0.0;  // sum_c L_c^2 / n_L + sum_c R_c^2 / n_R, larger is purer
};

struct Pending {
    std::int32_t node;
    std::vector<std::size_t> rows;
    std::size_t depth;
};

Split best_split(const FeatureMatrix& x, std::span<const std::uint8_t> y, const std::vector<std::size_t>& rows,
                 std::size_t classes, std::size_t min_leaf, const std::vector<std::size_t>& features) {
    Split best;
    const std::size_t n = rows.size();
    std::vector<std::pair<float, std::uint8_t>> col(n);
    std::vector<double> left(classes), right(classes), total(classes, 0.0);
    for (auto r : rows) total[y[r]] += 1.0;

    for (auto f : features) {
        for (std::size_t i = 0; i < n; ++i) col[i] = {x.at(rows[i], f), y[rows[i]]};
        std::sort(col.begin(), col.end());
        if (col.front().first == col.back().first) continue;
        std::fill(left.begin(), left.end(), 0.0);
        right = total;
        double left_sq = 0.0, right_sq = 0.0;
        for (double t : total) right_sq += t * t;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const auto c = col[i].second;
            left_sq += 2 * left[c] + 1;
            right_sq -= 2 * right[c] - 1;
            left[c] += 1;
            right[c] -= 1;
            const std::size_t nl = i + 1, nr = n - nl;
            if (nl < min_leaf) continue;
            if (nr < min_leaf) break;
            if (col[i].first == col[i + 1].first) continue;
            const double score = left_sq / static_cast<double>(nl) + right_sq / static_cast<double>(nr);
            if (!best.found || score > best.score + 1e-12) {
                best.found = true;
                best.score = score;
                best.feature = static_cast<std::int32_t>(f);
                const float a = col[i].first, b = col[i + 1].first;
                float mid = a + (b - a) * 0.5f;
                if (!(mid < b)) mid = a;
                best.threshold = mid;
            }
        }
    }
    return best;
}

}  // namespace

std::size_t Tree::leaf_of(std::span<const float> x) const {
    std::size_t node = 0;
    while (feature[node] >= 0) {
        node = static_cast<std::size_t>(x[static_cast<std::size_t>(feature[node])] <= threshold[node] ? left[node]
                                                                                                       : right[node]);
    }
    return node;
}

std::size_t Tree::vote(std::span<const float> x) const {
    const auto d = leaf_dist(x);
    return static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
}

void Tree::store(nn::Container& out, const std::string& prefix) const {
    const std::uint64_t n = nodes();
    std::vector<double> f(feature.begin(), feature.end()), t(threshold.begin(), threshold.end()),
        l(left.begin(), left.end()), r(right.begin(), right.end());
    out.blobs.push_back(make_blob(prefix + "feature", nn::Blob::DType::I64, {n}, std::move(f)));
    out.blobs.push_back(make_blob(prefix + "threshold", nn::Blob::DType::F32, {n}, std::move(t)));
    out.blobs.push_back(make_blob(prefix + "left", nn::Blob::DType::I64, {n}, std::move(l)));
    out.blobs.push_back(make_blob(prefix + "right", nn::Blob::DType::I64, {n}, std::move(r)));
    out.blobs.push_back(make_blob(prefix + "dist", nn::Blob::DType::F64, {n, classes}, dist));
    out.blobs.push_back(make_blob(prefix + "depth", nn::Blob::DType::I64, {1}, {static_cast<double>(depth)}));
}

Tree Tree::restore(const nn::Container& in, const std::string& prefix, std::size_t classes) {
    Tree t;
    t.classes = classes;
    const auto n = in.blob(prefix + "feature").values.size();
    for (double v : blob_values(in, prefix + "feature", n)) t.feature.push_back(static_cast<std::int32_t>(v));
    for (double v : blob_values(in, prefix + "threshold", n)) t.threshold.push_back(static_cast<float>(v));
    for (double v : blob_values(in, prefix + "left", n)) t.left.push_back(static_cast<std::int32_t>(v));
    for (double v : blob_values(in, prefix + "right", n)) t.right.push_back(static_cast<std::int32_t>(v));
    t.dist = blob_values(in, prefix + "dist", n * classes);
    t.depth = static_cast<std::size_t>(blob_values(in, prefix + "depth", 1)[0]);
    for (std::size_t i = 0; i < n; ++i) {
        if (t.feature[i] >= 0 &&
            (t.left[i] <= static_cast<std::int32_t>(i) || t.right[i] <= static_cast<std::int32_t>(i) ||
             static_cast<std::size_t>(t.left[i]) >= n || static_cast<std::size_t>(t.right[i]) >= n)) {
            throw FormatError("corrupt tree in checkpoint");
        }
    }
    return t;
}

Tree grow_tree(const FeatureMatrix& x, std::span<const std::uint8_t> y, std::vector<std::size_t> rows,
               std::size_t classes, std::size_t max_depth, std::size_t min_leaf, std::size_t max_features,
               Rng& rng) {
    Tree tree;
    tree.classes = classes;
    auto add_node = [&](const std::vector<std::size_t>& members) {
        tree.feature.push_back(-1);
        tree.threshold.push_back(0.0f);
        tree.left.push_back(-1);
        tree.right.push_back(-1);
        const std::size_t base = tree.dist.size();
        tree.dist.resize(base + classes, 0.0);
        for (auto r : members) tree.dist[base + y[r]] += 1.0;
        for (std::size_t c = 0; c < classes; ++c) tree.dist[base + c] /= static_cast<double>(members.size());
        return static_cast<std::int32_t>(tree.feature.size() - 1);
    };

    std::vector<std::size_t> all_features(x.cols);
    std::iota(all_features.begin(), all_features.end(), 0);
    const std::size_t per_node = max_features == 0 ? x.cols : std::min(max_features, x.cols);

    std::vector<Pending> stack;
    stack.push_back({add_node(rows), std::move(rows), 0});
    while (!stack.empty()) {
        Pending job = std::move(stack.back());
        stack.pop_back();
        tree.depth = std::max(tree.depth, job.depth);
        const auto node = static_cast<std::size_t>(job.node);
        const bool pure = std::any_of(tree.dist.begin() + static_cast<std::ptrdiff_t>(node * classes),
                                      tree.dist.begin() + static_cast<std::ptrdiff_t>((node + 1) * classes),
                                      [](double p) { return p == 1.0; });
        if (pure || job.depth >= max_depth || job.rows.size() < 2 * min_leaf) continue;

        std::vector<std::size_t> candidates = all_features;
        if (per_node < x.cols) {
            for (std::size_t i = 0; i < per_node; ++i) {
                const auto j = i + static_cast<std::size_t>(rng.below(candidates.size() - i));
                std::swap(candidates[i], candidates[j]);
            }
            candidates.resize(per_node);
            std::sort(candidates.begin(), candidates.end());
        }
        const Split split = best_split(x, y, job.rows, classes, min_leaf, candidates);
        if (!split.found) continue;

        std::vector<std::size_t> lrows, rrows;
        for (auto r : job.rows) {
            (x.at(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? lrows : rrows).push_back(r);
        }
        tree.feature[node] = split.feature;
        tree.threshold[node] = split.threshold;
        const auto l = add_node(lrows);
        const auto r = add_node(rrows);
        tree.left[node] = l;
        tree.right[node] = r;
        // Right child is pushed first so the left subtree is grown first.
        stack.push_back({r, std::move(rrows), job.depth + 1});
        stack.push_back({l, std::move(lrows), job.depth + 1});
    }
    return tree;
}

void CartModel::fit_impl(const FeatureMatrix& x, std::span<const std::uint8_t> labels) {
    std::vector<std::size_t> rows(x.rows);
    std::iota(rows.begin(), rows.end(), 0);
    Rng rng(derive_seed(params_.seed, "cart"));
    tree_ = grow_tree(x, labels, std::move(rows), classes_, params_.max_depth, params_.min_leaf,
                      params_.max_features, rng);
}

ScoreMatrix CartModel::scores_impl(const FeatureMatrix& x) const {
    ScoreMatrix s{x.rows, classes_, std::vector<double>(x.rows * classes_)};
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto d = tree_.leaf_dist(x.row(i));
        std::copy(d.begin(), d.end(), s.values.begin() + static_cast<std::ptrdiff_t>(i * classes_));
    }
    return s;
}

void CartModel::store_impl(nn::Container& out) const {
    out.header["params"] = params_to_json(params_);
    tree_.store(out, "tree.");
}

void CartModel::restore_impl(const nn::Container& in) { tree_ = Tree::restore(in, "tree.", classes_); }

void ForestModel::fit_impl(const FeatureMatrix& x, std::span<const std::uint8_t> labels) {
    const std::size_t per_node = params_.max_features == 0
                                     ? std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(x.cols))))
                                     : params_.max_features;
    trees_.assign(params_.trees, Tree{});
    parallel_chunks(params_.trees, params_.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t) {
            Rng rng(derive_seed(params_.seed, "tree", t));
            std::vector<std::size_t> rows(x.rows);
            if (params_.bootstrap) {
                for (auto& r : rows) r = static_cast<std::size_t>(rng.below(x.rows));
            } else {
                std::iota(rows.begin(), rows.end(), 0);
            }
            trees_[t] = grow_tree(x, labels, std::move(rows), classes_, params_.max_depth, params_.min_leaf,
                                  per_node, rng);
        }
    });
}

ScoreMatrix ForestModel::scores_impl(const FeatureMatrix& x) const {
    ScoreMatrix s{x.rows, classes_, std::vector<double>(x.rows * classes_, 0.0)};
    const double w = 1.0 / static_cast<double>(trees_.size());
    parallel_chunks(x.rows, params_.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            for (const auto& t : trees_) s.values[i * classes_ + t.vote(x.row(i))] += w;
        }
    });
    return s;
}

void ForestModel::store_impl(nn::Container& out) const {
    out.header["params"] = params_to_json(params_);
    out.header["trees"] = trees_.size();
    for (std::size_t t = 0; t < trees_.size(); ++t) trees_[t].store(out, "tree" + std::to_string(t) + ".");
}

void ForestModel::restore_impl(const nn::Container& in) {
    const auto count = in.header.at("trees").get<std::size_t>();
    trees_.clear();
    for (std::size_t t = 0; t < count; ++t) {
        trees_.push_back(Tree::restore(in, "tree" + std::to_string(t) + ".", classes_));
    }
}

}  // namespace deepmal::baselines::detail
