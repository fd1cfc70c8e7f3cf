#pragma once

#include <span>
#include <string>

namespace cutwalk {

// Partial-sum diagnostics over dyadic blocks (Cauchy condensation). Finite
// data cannot decide convergence, so these only ever advise.
struct TrendOptions {
    int min_doublings = 4;
    // Block sums decaying like j^-a with a <= div_power read as divergent.
    double div_power = 1.1;
    // a >= conv_power plus a small estimated tail read as convergent.
    double conv_power = 1.5;
    double tail_fraction = 0.5;
};

enum class Trend { Diverging, Converging, Inconclusive };

struct TrendReport {
    Trend trend = Trend::Inconclusive;
    double fitted_power = 0.0;
    double tail_estimate = 0.0;
    double partial_sum = 0.0;
    int blocks = 0;
    std::string note;
};

// block_sums[j] is the sum of the series over n in [2^j, 2^{j+1}).
TrendReport dyadic_trend(std::span<const double> block_sums, const TrendOptions& opts = {});

const char* to_string(Trend t);

}  // namespace cutwalk
