#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cutwalk/env.hpp"
#include "cutwalk/trend.hpp"

namespace cutwalk {

enum class Outcome { Recurrent, FiniteCutpoints, InfiniteStrongCutpoints, Inconclusive };
const char* to_string(Outcome o);

struct RationaleEntry {
    std::string rule;
    std::string detail;
};

struct Verdict {
    Outcome outcome = Outcome::Inconclusive;
    // D(n) <= delta n log n eventually, for some delta > 0.
    bool technical_condition_met = false;
    double delta_used = 1.0;
    std::vector<RationaleEntry> rationale;
};

struct ClassifyOptions {
    double delta = 1.0;
    // Level up to which D is computed for the empirical checks.
    Level check_level = 100000;
    double width_target = 1e-3;
    TrendOptions trend;
    // Family to compare against under pointwise domination of the biases.
    std::optional<BiasFamily> comparison;
    bool numeric_checks = true;
};

/// sum_{n=2}^{N} 1 / (D(n) log n), bracket midpoints.
double criterion_partial_sum(const ChainEnv& env, Level n, double width_target = 1e-6);
/// sum_{n=2}^{N} 1 / D(floor(n log n)).
double equiconv_transform_partial(const ChainEnv& env, Level n, double width_target = 1e-6);

/// Both partial sums at every N in `ns` (ascending) from a single D sweep.
struct PartialSums {
    std::vector<double> criterion;
    std::vector<double> transform;
};
PartialSums partial_sums_at(const ChainEnv& env, std::span<const Level> ns,
                            double width_target = 1e-6);

enum class GrowthKind { Bounded, Linear, IteratedLogs, LogLogPower, Infinite };

/// Growth of D(i) for an analytic family.
struct GrowthClass {
    GrowthKind kind = GrowthKind::Bounded;
    // D(i) ~ constant * shape(i); 0 when only two-sided bounds are known.
    double constant = 0.0;
    int log_depth = 0;  // IteratedLogs: number of log factors
    double beta = 0.0;  // LogLogPower exponent
    std::string description;

    /// shape(i): 1, i, i log i ... log_{depth} i, or i (log log i)^beta.
    double shape(double i) const;
    bool criterion_sum_converges() const;
    /// limsup D(n) / (n log n) < infinity
    bool growth_bound_holds() const;
};

GrowthClass asymptotic_d(const BiasFamily& family);

/// Finitely many cutpoints, infinitely many strong cutpoints, recurrence, or
/// inconclusive, with the rules that fired.
Verdict classify(const BiasFamily& family, const ClassifyOptions& opts = {});

/// int_x^inf S(t)/t dt / (S(x) (log log x)^beta) with
/// S(y) = exp(-int_3^y du / (u (log log u)^beta)), by adaptive quadrature in
/// log t. Tends to 1 as x grows. s_scale multiplies S throughout.
double polfeldt_check(double beta, double x, double tol = 1e-8, double s_scale = 1.0);

}  // namespace cutwalk
