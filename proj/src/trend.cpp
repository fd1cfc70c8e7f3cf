#include "cutwalk/trend.hpp"

#include <cmath>
#include <numeric>
#include <vector>

namespace cutwalk {

const char* to_string(Trend t) {
    switch (t) {
        case Trend::Diverging: return "diverging";
        case Trend::Converging: return "converging";
        case Trend::Inconclusive: return "inconclusive";
    }
    return "?";
}

TrendReport dyadic_trend(std::span<const double> block_sums, const TrendOptions& opts) {
    TrendReport rep;
    rep.blocks = static_cast<int>(block_sums.size());
    rep.partial_sum = std::accumulate(block_sums.begin(), block_sums.end(), 0.0);

    // Block 0 is skipped in the fit: log j is undefined there.
    const int window = opts.min_doublings + 1;
    if (rep.blocks - 1 < window) {
        rep.note = "insufficient doublings";
        return rep;
    }
    const int first = rep.blocks - window;

    bool all_zero = true;
    for (int j = first; j < rep.blocks; ++j) all_zero = all_zero && block_sums[j] == 0.0;
    if (all_zero) {
        rep.trend = Trend::Converging;
        rep.fitted_power = INFINITY;
        rep.note = "trailing blocks vanish";
        return rep;
    }

    // Least squares of log b_j against log j.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int j = first; j < rep.blocks; ++j) {
        if (!(block_sums[j] > 0.0)) {
            rep.note = "nonpositive block sum inside fit window";
            return rep;
        }
        const double x = std::log(static_cast<double>(j));
        const double y = std::log(block_sums[j]);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    const double n = window;
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    rep.fitted_power = -slope;

    const double last_j = rep.blocks - 1;
    const double last_b = block_sums[rep.blocks - 1];
    if (rep.fitted_power <= opts.div_power) {
        rep.trend = Trend::Diverging;
        rep.tail_estimate = INFINITY;
        rep.note = "block sums decay no faster than j^-div_power";
        return rep;
    }
    rep.tail_estimate = last_b * last_j / (rep.fitted_power - 1.0);
    if (rep.fitted_power >= opts.conv_power &&
        rep.tail_estimate <= opts.tail_fraction * rep.partial_sum) {
        rep.trend = Trend::Converging;
        rep.note = "power-law tail bound met";
    } else {
        rep.note = "fitted power between thresholds or tail too heavy";
    }
    return rep;
}

}  // namespace cutwalk
