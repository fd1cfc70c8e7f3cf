#pragma once

#include <algorithm>
#include <cstdint>

namespace cutwalk {

using Level = std::int64_t;

// Interval [lo, hi] enclosing a value of D.
struct Bracket {
    double lo = 0.0;
    double hi = 0.0;
    double width_target = 0.0;
    bool converged = false;
    // The upper seed was an assumed growth bound, not a proven one.
    bool heuristic = false;
    Level horizon = 0;

    double mid() const noexcept { return 0.5 * (lo + hi); }
    double width() const noexcept { return hi - lo; }
    bool contains(double x) const noexcept { return lo <= x && x <= hi; }
    bool meets(double target) const noexcept {
        return width() <= target * std::max(1.0, lo);
    }
};

// Narrowest bracket consistent with both inputs.
inline Bracket intersect(const Bracket& a, const Bracket& b) {
    Bracket out = a.width() <= b.width() ? a : b;
    out.lo = std::max(a.lo, b.lo);
    out.hi = std::min(a.hi, b.hi);
    if (out.lo > out.hi) {
        // Only rounding can get here; collapse onto the overlap midpoint.
        const double m = 0.5 * (out.lo + out.hi);
        out.lo = out.hi = m;
    }
    out.converged = a.converged || b.converged;
    out.heuristic = a.heuristic && b.heuristic;
    return out;
}

}  // namespace cutwalk
