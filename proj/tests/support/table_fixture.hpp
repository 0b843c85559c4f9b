#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace deepmal::testing {

/// Reference one-vs-all rows for a four-class botnet detector: accuracy,
/// precision, recall and F1 per class, three decimals.
struct ReferenceRow {
    std::string name;
    double accuracy, precision, recall, f1;
};

inline const std::vector<ReferenceRow>& reference_rows() {
    static const std::vector<ReferenceRow> rows{{"Normal", 0.878, 0.621, 0.878, 0.727},
                                                {"Neris", 0.635, 0.814, 0.635, 0.714},
                                                {"Rbot", 0.999, 1.000, 0.999, 1.000},
                                                {"Virut", 0.547, 0.679, 0.547, 0.606}};
    return rows;
}

/// A 40,000-per-class confusion matrix whose diagonal and column sums
/// reproduce the rows above after rounding.
inline std::vector<std::size_t> reference_confusion() {
    return {35120, 4880, 0,     0,      //
            4245,  25400, 0,    10355,  //
            40,    0,     39960, 0,     //
            17175, 935,   10,    21880};
}

}  // namespace deepmal::testing
