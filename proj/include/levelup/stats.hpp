#pragma once

#include <optional>
#include <span>
#include <vector>

namespace levelup {

double mean(std::span<const double> values);

// Sample standard deviation (n-1 denominator); 0 for fewer than 2 values.
double sample_stddev(std::span<const double> values);

// Standard error of the mean: stddev / sqrt(n).
double standard_error(std::span<const double> values);

// Ranks with ties assigned the average of the positions they occupy.
std::vector<double> average_ranks(std::span<const double> values);

// Spearman rank correlation. nullopt when sizes differ, fewer than 2 points,
// or either side has zero rank variance (constant series).
std::optional<double> spearman(std::span<const double> x,
                               std::span<const double> y);

}  // namespace levelup
