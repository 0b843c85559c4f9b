#include "deepmal/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "deepmal/util/error.hpp"

namespace deepmal::eval {
namespace {

double ratio(std::size_t num, std::size_t den, bool& undefined) {
    undefined = den == 0;
    return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IngestError("cannot write " + path.string());
    return out;
}

}  // namespace

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) throw EvaluationError("scores and labels differ in length");
    std::size_t positives = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw EvaluationError("non-finite score");
        positives += labels[i] != 0;
    }
    const std::size_t negatives = labels.size() - positives;
    if (positives == 0 || negatives == 0) throw EvaluationError("ROC needs both positive and negative samples");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

    std::vector<RocPoint> roc{{0.0, 0.0, std::numeric_limits<double>::infinity()}};
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            (labels[order[i]] != 0 ? tp : fp) += 1;
            ++i;
        }
        roc.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                       static_cast<double>(tp) / static_cast<double>(positives), s});
    }
    return roc;
}

double auc(std::span<const RocPoint> roc) {
    double area = 0.0;
    for (std::size_t i = 1; i < roc.size(); ++i) {
        area += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) * 0.5;
    }
    return area;
}

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::row_total(std::size_t truth) const {
    std::size_t n = 0;
    for (std::size_t j = 0; j < classes; ++j) n += at(truth, j);
    return n;
}

std::vector<double> ConfusionMatrix::percentages() const {
    std::vector<double> out(counts.size(), 0.0);
    for (std::size_t i = 0; i < classes; ++i) {
        const std::size_t row = row_total(i);
        if (row == 0) continue;
        for (std::size_t j = 0; j < classes; ++j) {
            // Tenths of a percent, rounded half-up in integer arithmetic.
            const std::size_t tenths = (2000 * at(i, j) + row) / (2 * row);
            out[i * classes + j] = static_cast<double>(tenths) / 10.0;
        }
    }
    return out;
}

ConfusionMatrix confusion_matrix(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth,
                                 std::size_t classes) {
    if (predicted.size() != truth.size()) throw EvaluationError("predictions and labels differ in length");
    if (classes == 0) throw EvaluationError("confusion matrix needs at least one class");
    ConfusionMatrix m{classes, std::vector<std::size_t>(classes * classes, 0)};
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= classes || predicted[i] >= classes) throw EvaluationError("class index out of range");
        ++m.counts[truth[i] * classes + predicted[i]];
    }
    return m;
}

double overall_accuracy(const ConfusionMatrix& c) {
    const std::size_t total = c.total();
    if (total == 0) return 0.0;
    std::size_t trace = 0;
    for (std::size_t i = 0; i < c.classes; ++i) trace += c.at(i, i);
    return static_cast<double>(trace) / static_cast<double>(total);
}

std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& c, const std::vector<std::string>& names) {
    std::vector<ClassMetrics> out;
    for (std::size_t k = 0; k < c.classes; ++k) {
        ClassMetrics m;
        m.name = k < names.size() ? names[k] : std::to_string(k);
        const std::size_t tp = c.at(k, k);
        std::size_t predicted = 0;
        for (std::size_t i = 0; i < c.classes; ++i) predicted += c.at(i, k);
        m.support = c.row_total(k);
        m.precision = ratio(tp, predicted, m.precision_undefined);
        m.recall = ratio(tp, m.support, m.recall_undefined);
        m.accuracy = m.recall;
        const double s = m.precision + m.recall;
        m.f1_undefined = s == 0.0;
        m.f1 = m.f1_undefined ? 0.0 : 2.0 * m.precision * m.recall / s;
        out.push_back(m);
    }
    return out;
}

std::vector<double> positive_scores(std::span<const double> scores, std::size_t cols) {
    if (cols == 0 || scores.size() % cols != 0) throw EvaluationError("score matrix has a ragged shape");
    const std::size_t rows = scores.size() / cols;
    std::vector<double> out(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        if (cols == 1) out[i] = scores[i];
        else if (cols == 2) out[i] = scores[i * 2 + 1];
        else out[i] = 1.0 - scores[i * cols];
    }
    return out;
}

EvalReport evaluate_scores(std::span<const double> scores, std::size_t cols, std::span<const std::uint8_t> labels,
                           const std::vector<std::string>& class_names, const std::string& model) {
    if (cols == 0 || scores.size() != labels.size() * cols) throw EvaluationError("scores do not match labels");
    if (labels.empty()) throw EvaluationError("nothing to evaluate");
    const std::size_t classes = std::max<std::size_t>(class_names.size(), cols == 1 ? 2 : cols);
    const std::size_t rows = labels.size();

    std::vector<std::uint8_t> predicted(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        if (cols == 1) {
            predicted[i] = scores[i] >= 0.5 ? 1 : 0;
            continue;
        }
        std::size_t best = 0;
        for (std::size_t c = 1; c < cols; ++c) {
            if (scores[i * cols + c] > scores[i * cols + best]) best = c;
        }
        predicted[i] = static_cast<std::uint8_t>(best);
    }

    EvalReport r;
    r.model = model;
    r.class_names = class_names;
    r.samples = rows;
    r.confusion = confusion_matrix(predicted, labels, classes);
    r.accuracy = overall_accuracy(r.confusion);
    r.per_class = per_class_metrics(r.confusion, class_names);

    std::vector<std::uint8_t> positive(rows);
    for (std::size_t i = 0; i < rows; ++i) positive[i] = labels[i] != 0;
    const auto pos = positive_scores(scores, cols);
    const bool both = std::count(positive.begin(), positive.end(), 1) > 0 &&
                      std::count(positive.begin(), positive.end(), 0) > 0;
    if (both) {
        r.roc = roc_curve(pos, positive);
        r.auc = auc(r.roc);
    }
    if (cols > 2) {
        for (std::size_t c = 0; c < cols; ++c) {
            std::vector<double> s(rows);
            std::vector<std::uint8_t> y(rows);
            for (std::size_t i = 0; i < rows; ++i) {
                s[i] = scores[i * cols + c];
                y[i] = labels[i] == c;
            }
            const auto ones = std::count(y.begin(), y.end(), 1);
            r.class_auc.push_back(ones > 0 && ones < static_cast<std::ptrdiff_t>(rows) ? auc(roc_curve(s, y)) : 0.0);
        }
    }
    return r;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["model"] = model;
    j["classes"] = class_names;
    j["samples"] = samples;
    j["accuracy"] = accuracy;
    j["auc"] = auc;
    if (!class_auc.empty()) j["class_auc"] = class_auc;
    j["confusion"]["counts"] = nlohmann::json::array();
    j["confusion"]["percent"] = nlohmann::json::array();
    const auto pct = confusion.percentages();
    for (std::size_t i = 0; i < confusion.classes; ++i) {
        std::vector<std::size_t> row(confusion.counts.begin() + static_cast<std::ptrdiff_t>(i * confusion.classes),
                                     confusion.counts.begin() + static_cast<std::ptrdiff_t>((i + 1) * confusion.classes));
        std::vector<double> prow(pct.begin() + static_cast<std::ptrdiff_t>(i * confusion.classes),
                                 pct.begin() + static_cast<std::ptrdiff_t>((i + 1) * confusion.classes));
        j["confusion"]["counts"].push_back(row);
        j["confusion"]["percent"].push_back(prow);
    }
    j["per_class"] = nlohmann::json::array();
    for (const auto& m : per_class) {
        nlohmann::json c{{"class", m.name},         {"support", m.support}, {"accuracy", m.accuracy},
                         {"precision", m.precision}, {"recall", m.recall},   {"f1", m.f1}};
        if (m.precision_undefined || m.recall_undefined || m.f1_undefined) {
            c["undefined"] = {{"precision", m.precision_undefined},
                              {"recall", m.recall_undefined},
                              {"f1", m.f1_undefined}};
        }
        j["per_class"].push_back(c);
    }
    j["roc_points"] = roc.size();
    return j;
}

void EvalReport::save_json(const std::filesystem::path& path) const {
    auto out = open_out(path);
    out << to_json().dump(2) << '\n';
}

void EvalReport::save_roc_csv(const std::filesystem::path& path) const {
    auto out = open_out(path);
    out << "fpr,tpr,threshold\n";
    for (const auto& p : roc) out << number(p.fpr) << ',' << number(p.tpr) << ',' << number(p.threshold) << '\n';
}

void EvalReport::save_confusion_csv(const std::filesystem::path& path) const {
    auto out = open_out(path);
    out << "true\\predicted";
    for (std::size_t j = 0; j < confusion.classes; ++j) {
        out << ',' << (j < class_names.size() ? class_names[j] : std::to_string(j));
    }
    for (std::size_t j = 0; j < confusion.classes; ++j) {
        out << ',' << (j < class_names.size() ? class_names[j] : std::to_string(j)) << "_pct";
    }
    out << '\n';
    const auto pct = confusion.percentages();
    for (std::size_t i = 0; i < confusion.classes; ++i) {
        out << (i < class_names.size() ? class_names[i] : std::to_string(i));
        for (std::size_t j = 0; j < confusion.classes; ++j) out << ',' << confusion.at(i, j);
        char buf[16];
        for (std::size_t j = 0; j < confusion.classes; ++j) {
            std::snprintf(buf, sizeof buf, ",%.1f", pct[i * confusion.classes + j]);
            out << buf;
        }
        out << '\n';
    }
}

}  // namespace deepmal::eval
