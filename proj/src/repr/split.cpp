#include <algorithm>
#include <cmath>
#include <numeric>

#include "deepmal/repr/dataset.hpp"
#include "deepmal/util/error.hpp"
#include "deepmal/util/random.hpp"
#include "deepmal/util/seed.hpp"

namespace deepmal::repr {
namespace {

// Distributes `total` over classes proportionally to `weights` so that each
// class gets floor or ceil of its exact share. Remainders go to the largest
// fractional parts, lowest class first on ties; `cap` bounds each class.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<std::size_t>& weights,
                                   const std::vector<std::size_t>& cap) {
    const double sum = static_cast<double>(std::accumulate(weights.begin(), weights.end(), std::size_t{0}));
    std::vector<std::size_t> out(weights.size(), 0);
    std::vector<std::pair<double, std::size_t>> rema;
    std::size_t used = 0;
    for (std::size_t c = 0; c < weights.size(); ++c) {
        const double exact = static_cast<double>(total) * static_cast<double>(weights[c]) / sum;
        out[c] = std::min(cap[c], static_cast<std::size_t>(std::floor(exact)));
        used += out[c];
        rema.emplace_back(exact - std::floor(exact), c);
    }
    std::stable_sort(rema.begin(), rema.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t pass = 0; used < total && pass < 2; ++pass) {
        for (const auto& [frac, c] : rema) {
            if (used == total) break;
            if (out[c] < cap[c]) {
                ++out[c];
                ++used;
            }
        }
    }
    return out;
}

}  // namespace

void SplitSpec::validate() const {
    const double parts[] = {train, validation, test};
    for (double p : parts) {
        if (!(p > 0.0) || !(p < 1.0)) throw ConfigError("split fractions must lie in (0, 1)");
    }
    if (std::abs(train + validation + test - 1.0) > 1e-6) {
        throw ConfigError("split fractions must sum to 1");
    }
}

SplitIndices split_indices(std::span<const std::uint8_t> labels, std::size_t num_classes,
                           const SplitSpec& spec) {
    spec.validate();
    const std::size_t n = labels.size();
    if (n == 0) throw DatasetError("cannot split an empty dataset");
    const auto n_val = static_cast<std::size_t>(std::llround(spec.validation * static_cast<double>(n)));
    const auto n_test = static_cast<std::size_t>(std::llround(spec.test * static_cast<double>(n)));
    if (n_val == 0 || n_test == 0 || n_val + n_test >= n) {
        throw DatasetError("split of " + std::to_string(n) + " samples leaves an empty subset");
    }

    std::vector<std::vector<std::size_t>> by_class(num_classes);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= num_classes) throw DatasetError("label outside the declared classes");
        by_class[labels[i]].push_back(i);
    }
    std::vector<std::size_t> counts(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) counts[c] = by_class[c].size();

    const auto val_quota = apportion(n_val, counts, counts);
    std::vector<std::size_t> left(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) left[c] = counts[c] - val_quota[c];
    const auto test_quota = apportion(n_test, counts, left);

    SplitIndices out;
    for (std::size_t c = 0; c < num_classes; ++c) {
        auto& idx = by_class[c];
        Rng rng(derive_seed(spec.seed, "split", c));
        rng.shuffle(std::span<std::size_t>(idx));
        const auto v = val_quota[c], t = test_quota[c];
        out.validation.insert(out.validation.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(v));
        out.test.insert(out.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(v),
                        idx.begin() + static_cast<std::ptrdiff_t>(v + t));
        out.train.insert(out.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(v + t), idx.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.validation.begin(), out.validation.end());
    std::sort(out.test.begin(), out.test.end());
    if (out.train.empty() || out.validation.empty() || out.test.empty()) {
        throw DatasetError("split leaves an empty subset");
    }
    return out;
}

DatasetSplit split_dataset(const Dataset& dataset, const SplitSpec& spec) {
    const auto idx = split_indices(dataset.labels, dataset.num_classes(), spec);
    return {dataset.subset(idx.train), dataset.subset(idx.validation), dataset.subset(idx.test)};
}

}  // namespace deepmal::repr
