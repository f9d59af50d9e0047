#pragma once

#include <cstddef>
#include <optional>
#include <span>

namespace rxrl {

struct MeanSe {
    std::size_t n = 0;
    double mean = 0.0;
    double se = 0.0;  // sample sd / sqrt(n); 0 when n < 2
};

MeanSe mean_se(std::span<const double> xs);

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    double df = 0.0;  // Welch-Satterthwaite degrees of freedom; 0 for z tests
};

// Two-sided Welch t test; nothing when either sample has fewer than two values
// or both variances are zero.
std::optional<TestResult> welch_t_test(std::span<const double> a, std::span<const double> b);

// Two-sided pooled two-proportion z test.
std::optional<TestResult> two_proportion_z_test(std::size_t hits_a, std::size_t n_a,
                                                std::size_t hits_b, std::size_t n_b);

// Nothing when either side has zero variance or fewer than two pairs.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

}  // namespace rxrl
