#pragma once

#include <vector>

#include "cutwalk/bracket.hpp"
#include "cutwalk/env.hpp"
#include "cutwalk/errors.hpp"

namespace cutwalk {

// Tag for an infinitely distant target level.
struct Infinity {};
inline constexpr Infinity infinity{};

struct ProfileOptions {
    double width_target = 1e-10;
    // Largest truncation level N the backward recursion may use.
    Level horizon_cap = Level{1} << 27;
    // Upper seed kappa * N log N when no certified tail bound is available.
    double kappa = 10.0;
    // Ignore certified tail bounds and use the [1, kappa N log N] seeds.
    bool force_heuristic_seeds = false;
    // Allow brackets for recurrent chains (the upper end is then heuristic).
    bool allow_recurrent = false;
    // Relative step of the tail quadrature used for loglog families.
    double loglog_step = 1e-5;
};

/// Bounds on D(N) from the law of the walk beyond N.
struct TailSeeds {
    double lo = 1.0;
    double hi = 1.0;
    bool certified = false;
    bool infinite = false;
};

/// Seeds for the backward recursion at truncation level N. Constant and
/// table tails are exact; harmonic, lambda and loglog tails come from
/// midpoint and trapezoid comparisons of sum_i log U_i with 4 * int p(x) dx,
/// which need p convex past the analytic tail start. Families with
/// no analytic tail at N fall back to [1, kappa N log N] (not certified).
TailSeeds tail_seeds(const BiasFamily& family, Level n, const ProfileOptions& opts = {});

/// Bracket on J(v0) = int_{v0}^inf exp(-int_{v0}^v ds / (log s)^beta) dv from
/// trapezoid (over) and midpoint (under) sums of convex integrands.
struct IntervalValue {
    double lo = 0.0;
    double hi = 0.0;
};
IntervalValue loglog_tail_integral(double beta, double v0, double step = 1e-4);

/// D(m, n): 0 if n = m, 1 if n = m + 1, else 1 + sum_{j=1}^{n-m-1} prod_{i=1}^{j} U_{m+i}.
/// Terms are formed in log space and summed smallest first.
double d_between(const ChainEnv& env, Level m, Level n);

/// Brackets on D(0), ..., D(max_level) from one backward sweep
/// D(n) = 1 + U_{n+1} D(n+1) started from both tail seeds; the truncation
/// level doubles until every bracket meets width_target (or the cap is hit,
/// in which case converged = false).
std::vector<Bracket> d_profile(const ChainEnv& env, Level max_level, const ProfileOptions& opts = {});

/// Bracket on D(m) = lim_n D(m, n). Cached in env.
Bracket d_limit(const ChainEnv& env, Level m, double width_target, ProfileOptions opts = {});

/// D(m) (1 - prod_{i=m}^{n-1} (1 - 1/D(i))), evaluated with bracket midpoints.
/// Throws ConvergenceError if a needed bracket is unconverged.
double d_between_via_product(const ChainEnv& env, Level m, Level n, double width_target = 1e-6);

/// Probability that the walk started at b hits a before c: 1 - D(a,b)/D(a,c).
double hitting_prob(const ChainEnv& env, Level a, Level b, Level c);
/// Probability that the walk started at b ever hits a: 1 - D(a,b)/D(a).
double hitting_prob(const ChainEnv& env, Level a, Level b, Infinity,
                    double width_target = 1e-12);

/// Inverts p_n = (1/2) (D(n) - D(n-1) + 1) / (D(n) + D(n-1) - 1).
double recover_p_from_d(double d_prev, double d_cur);

class HorizonError : public ConvergenceError {
public:
    HorizonError(const std::string& what, Level best, double achieved)
        : ConvergenceError(what), best_horizon(best), achieved_eps(achieved) {}
    Level best_horizon;
    double achieved_eps;
};

/// Smallest H with prod_{i=R_max}^{H-1} (1 - 1/D(i)) <= eps, the probability
/// of ever returning to R_max once H is reached. Uses upper bracket ends and
/// accepts a product within a relative 1e-6 of eps.
Level horizon_for_epsilon(const ChainEnv& env, Level max_monitored, double eps,
                          Level cap = Level{1} << 26);

}  // namespace cutwalk
