#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace narrative {

double mean(std::span<const double> xs);
double sample_variance(std::span<const double> xs);  // n - 1 denominator
double median(std::vector<double> xs);                // 0 for an empty input

// Standardised mean difference with the pooled (n - 1) standard deviation.
// Throws DataError("degenerate") when a group has fewer than two values or
// the pooled variance is zero.
double cohens_d(std::span<const double> a, std::span<const double> b);

// cohens_d, except that zero pooled variance yields 0 for equal means and a
// signed infinity otherwise.
double effect_size(std::span<const double> a, std::span<const double> b);

inline constexpr std::size_t kExactUTestLimit = 400;  // n_a * n_b at or below: exact null distribution

struct UTestResult {
  double u = 0.0;  // U for the first sample: rank sum of a minus n_a (n_a + 1) / 2
  double p_value = 1.0;
  bool exact = false;
};

// Midranks for ties. Exact permutation distribution of the rank sum when
// n_a * n_b <= kExactUTestLimit; otherwise the normal approximation with
// tie-corrected variance and continuity correction. One-sided tests the
// alternative that a tends to exceed b.
UTestResult mann_whitney_u(std::span<const double> a, std::span<const double> b, bool two_sided = true);

// Midranks (1-based) of the pooled sample.
std::vector<double> midranks(std::span<const double> pooled);

}  // namespace narrative
