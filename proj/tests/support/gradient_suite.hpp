#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace deepmal::testing {

/// Outcome of one finite-difference check, run against the 64-bit engine.
struct GradientCase {
    std::string name;
    std::size_t checked = 0;
    std::size_t failures = 0;
    double worst = 0.0;
    std::string first_failure;

    bool ok() const { return failures == 0 && checked > 0; }
};

/// Every layer kind, both losses and one composite network, on small shapes
/// drawn from `seed`.
std::vector<GradientCase> run_gradient_suite(std::uint64_t seed);

/// Largest absolute gap between the engine's Conv1D/Dense forward passes and
/// plain nested loops, over `trials` random shapes (64-bit engine).
struct OracleGap {
    double conv = 0.0;
    double dense = 0.0;
};

OracleGap run_forward_oracles(std::uint64_t seed, std::size_t trials);

}  // namespace deepmal::testing
