#pragma once

#include "cutwalk/dvals.hpp"
#include "cutwalk/env.hpp"

namespace cutwalk {

/// A law value at the D-bracket midpoint, with the range it spans as D moves
/// over its bracket.
struct LawValue {
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double uncertainty() const noexcept { return hi - lo; }
};

struct LawOptions {
    double width_target = 1e-10;
    // A bracket wider than this (relative) is an error rather than an uncertainty.
    double max_relative_width = 1e-6;
};

enum class SiteLawKind { LocalTime, Upcross };

/// Geometric law on L = 1, 2, ...: P(L) = q (1 - q)^{L-1}.
struct SiteLaw {
    Level site = 0;
    double success = 1.0;
    SiteLawKind kind = SiteLawKind::LocalTime;
    double pmf(long long l) const;
};

/// Bias at site R with the reflecting convention p_0 = 1/2.
double site_bias(const ChainEnv& env, Level r);

/// Local time xi(R) ~ geometric((1 + 2 p_R) / (2 D(R))).
SiteLaw local_time_law(const ChainEnv& env, Level r, const LawOptions& opts = {});
/// Upcrossings xi(R, up) ~ geometric(1 / D(R)).
SiteLaw upcross_law(const ChainEnv& env, Level r, const LawOptions& opts = {});

LawValue local_time_pmf(const ChainEnv& env, Level r, long long l, const LawOptions& opts = {});
LawValue upcross_pmf(const ChainEnv& env, Level r, long long l, const LawOptions& opts = {});

/// P(k in C) = 1 / D(k)
LawValue cutpoint_prob(const ChainEnv& env, Level k, const LawOptions& opts = {});
/// P(k in C^S) = (1 + 2 p_k) / (2 D(k))
LawValue strong_cutpoint_prob(const ChainEnv& env, Level k, const LawOptions& opts = {});
/// P(j in C, k in C) = 1 / (D(j, k+1) D(k)), j < k
LawValue joint_cutpoint_prob(const ChainEnv& env, Level j, Level k, const LawOptions& opts = {});
/// P(j in C^S, k in C^S) = (1/2 + p_j)(1/2 + p_k) / (D(j, k) D(k)), j < k
LawValue joint_strong_prob(const ChainEnv& env, Level j, Level k, const LawOptions& opts = {});

/// 2 (1 + eps) d log r
double envelope_value(double d, double r, double eps);
/// Upper-class envelope of the local time at R: 2 (1 + eps) D(R) log R.
LawValue local_time_envelope(const ChainEnv& env, Level r, double eps, const LawOptions& opts = {});

}  // namespace cutwalk
