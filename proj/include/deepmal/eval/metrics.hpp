#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace deepmal::eval {

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;  // samples scoring >= threshold are flagged
};

/// Exact ROC: one point per distinct score, swept from the highest, plus
/// the (0, 0) start. Labels are 1 for positives and 0 otherwise. Throws
/// EvaluationError when either class is absent.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Trapezoidal area under a ROC curve.
double auc(std::span<const RocPoint> roc);

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    std::size_t classes = 0;
    std::vector<std::size_t> counts;

    std::size_t at(std::size_t truth, std::size_t predicted) const { return counts[truth * classes + predicted]; }
    std::size_t total() const;
    std::size_t row_total(std::size_t truth) const;
    /// Row-normalized percentages, rounded half-up to 0.1.
    std::vector<double> percentages() const;
};

ConfusionMatrix confusion_matrix(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth,
                                 std::size_t classes);

/// trace / total; 0 for an empty matrix.
double overall_accuracy(const ConfusionMatrix& confusion);

/// One-vs-all metrics of a class. `accuracy` is the class recall. A zero
/// denominator yields 0 and sets the matching flag.
struct ClassMetrics {
    std::string name;
    std::size_t support = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
};

std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& confusion,
                                            const std::vector<std::string>& class_names);

struct EvalReport {
    std::string model;
    std::vector<std::string> class_names;
    std::size_t samples = 0;
    double accuracy = 0.0;
    /// For multi-class reports the ROC is class 0 against the rest, scored
    /// by 1 - p(class 0).
    std::vector<RocPoint> roc;
    double auc = 0.0;
    std::vector<double> class_auc;  // one-vs-rest, multi-class only
    ConfusionMatrix confusion;
    std::vector<ClassMetrics> per_class;

    nlohmann::json to_json() const;
    void save_json(const std::filesystem::path& path) const;
    /// fpr,tpr,threshold per line.
    void save_roc_csv(const std::filesystem::path& path) const;
    /// Counts and percentages, one true class per row.
    void save_confusion_csv(const std::filesystem::path& path) const;
};

/// Builds a report from per-sample scores laid out (rows, cols). One column
/// holds the positive-class probability; two or more columns hold per-class
/// scores and are decided by argmax (lowest index on ties).
EvalReport evaluate_scores(std::span<const double> scores, std::size_t cols, std::span<const std::uint8_t> labels,
                           const std::vector<std::string>& class_names, const std::string& model);

/// Positive-class score used for the report's ROC.
std::vector<double> positive_scores(std::span<const double> scores, std::size_t cols);

}  // namespace deepmal::eval
