#include "cutwalk/dvals.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cfloat>
#include <cmath>
#include <string>

#include "cutwalk/format.hpp"

namespace cutwalk {

namespace {

// Compensated (Neumaier) accumulator.
struct Accumulator {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        const double t = sum + x;
        carry += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + carry; }
};

bool analytic_recurrent(const BiasFamily& f) {
    return f.is_analytic() && transience_verdict(f).outcome == Transience::Recurrent;
}

// sum_{i>N} (16/3) p_i^3 / (1 - 4 p_i^2), using i p_i <= N p_N past the tail start.
double cubic_correction(double p_n, double n) {
    const double a = n * p_n;
    return (16.0 / 3.0) / (1.0 - 4.0 * p_n * p_n) * a * a * a / (2.0 * n * n);
}

// T(a) = int_a^inf exp(-4 int_a^y p) dy for harmonic and lambda tails.
double lambda_tail_integral(int k, double b, double a) {
    double prod = a;
    double iterated = a;
    for (int j = 1; j < k; ++j) {
        iterated = std::log(iterated);
        prod *= iterated;
    }
    return prod / (b - 1.0);
}

TailSeeds heuristic_seeds(Level n, double kappa) {
    const double x = static_cast<double>(std::max<Level>(n, 3));
    return {1.0, std::max(1.0, kappa * x * std::log(x)), false, false};
}

TailSeeds constant_tail(double p) {
    if (!(p > 0.0)) return {1.0, INFINITY, true, true};
    const double d = 1.0 / (1.0 - odds_ratio(p));
    return {d, d, true, false};
}

}  // namespace

IntervalValue loglog_tail_integral(double beta, double v0, double step) {
    if (!(v0 > 1.0)) throw DomainError("loglog tail integral needs v0 > 1");
    if (!(step > 0.0)) throw DomainError("loglog tail integral needs a positive step");
    // Millions of steps: sums run in extended precision so the rounding pad
    // stays far below the quadrature gap. Pointwise values stay in double,
    // each off by a few ulps, which the final pad absorbs.
    auto g = [beta](long double s) -> long double {
        return std::pow(std::log(static_cast<double>(s)), -beta);
    };
    auto expm = [](long double x) -> long double { return std::exp(-static_cast<double>(x)); };

    long double t = v0;
    long double g_t = g(t);
    long double big_g_lo = 0.0L;  // midpoint sums: below G
    long double big_g_hi = 0.0L;  // trapezoid sums: above G
    long double upper = 0.0L;
    long double lower = 0.0L;
    long steps = 0;
    for (;;) {
        const long double h = step / g_t;
        const long double g_m = g(t + 0.5L * h);
        const long double g_1 = g(t + h);

        const long double g_hi_mid = big_g_hi + 0.25L * h * (g_t + g_m);
        const long double g_lo_next = big_g_lo + h * g_m;
        const long double g_hi_next = big_g_hi + 0.5L * h * (g_t + g_1);

        upper += 0.5L * h * (expm(big_g_lo) + expm(g_lo_next));
        lower += h * expm(g_hi_mid);

        t += h;
        g_t = g_1;
        big_g_lo = g_lo_next;
        big_g_hi = g_hi_next;
        ++steps;

        // Past T the integrand is at most exp(-G(T)) exp(-(t - T) g(T) / 2^beta)
        // up to t = T^2, which bounds the remainder.
        const long double remainder = expm(big_g_lo) * std::pow(2.0, beta) / g_t;
        if (remainder <= 1e-15L * lower) {
            upper += remainder;
            break;
        }
    }
    const long double pad = 16.0L * LDBL_EPSILON * static_cast<long double>(steps) + 64.0L * DBL_EPSILON;
    return {static_cast<double>(lower * (1.0L - pad)) * (1.0 - DBL_EPSILON),
            static_cast<double>(upper * (1.0L + pad)) * (1.0 + DBL_EPSILON)};
}

TailSeeds tail_seeds(const BiasFamily& family, Level n, const ProfileOptions& opts) {
    if (opts.force_heuristic_seeds) return heuristic_seeds(n, opts.kappa);
    const auto head_len = static_cast<Level>(family.head().size());

    switch (family.kind()) {
        case FamilyKind::Constant:
            if (n >= head_len) return constant_tail(family.p_at(head_len + 1));
            break;
        case FamilyKind::Table: {
            const auto last = std::max(head_len, static_cast<Level>(family.entries().size()));
            if (n >= last && family.tail_rule()) {
                return *family.tail_rule() == TailRule::Zero ? constant_tail(0.0)
                                                             : constant_tail(family.p_at(last + 1));
            }
            break;
        }
        case FamilyKind::Harmonic:
        case FamilyKind::Lambda:
        case FamilyKind::LogLogBeta: {
            const Level start = family.analytic_tail_start();
            if (start == 0 || n < start) break;
            if (analytic_recurrent(family)) return {1.0, INFINITY, true, true};
            // With p convex and decreasing past the tail start, and
            // h(y) = exp(-4 int_{N+1/2}^y p), the midpoint and trapezoid rules give
            //   e^{-C} (T - 1/2) <= D(N) - 1 <= e^{4 delta} (T - h(N+1)/2),
            // T = T(N + 1/2), delta = (p(N+1/2) - p(N+1))/2, h(N+1) >= e^{-2 p(N+1/2)}.
            const double x = static_cast<double>(n);
            const double a = x + 0.5;
            const double p_half = family.formula(a);
            const double delta = 0.5 * (p_half - family.formula(x + 1.0));
            const double c = cubic_correction(family.formula(x), x);
            double t_lo = 0.0;
            double t_hi = 0.0;
            if (family.kind() == FamilyKind::LogLogBeta) {
                const auto j = loglog_tail_integral(family.beta_param(), std::log(a), opts.loglog_step);
                t_lo = a * j.lo;
                t_hi = a * j.hi;
            } else {
                const int k = family.kind() == FamilyKind::Harmonic ? 1 : family.k_param();
                t_lo = t_hi = lambda_tail_integral(k, family.b_param(), a);
            }
            const double lo = 1.0 + std::exp(-c) * (t_lo - 0.5);
            const double hi = 1.0 + std::exp(4.0 * delta) * (t_hi - 0.5 * std::exp(-2.0 * p_half));
            // Rounding in T and the exponentials is far below these pads.
            return {lo * (1.0 - 64.0 * DBL_EPSILON), hi * (1.0 + 64.0 * DBL_EPSILON), true, false};
        }
    }
    return heuristic_seeds(n, opts.kappa);
}

double d_between(const ChainEnv& env, Level m, Level n) {
    if (m < 0 || n < m) {
        throw DomainError("d_between requires 0 <= m <= n, got m=" + std::to_string(m) +
                          " n=" + std::to_string(n));
    }
    if (n == m) return 0.0;
    if (n == m + 1) return 1.0;

    const Level terms = n - m - 1;
    Accumulator log_prod;
    Accumulator total;
    constexpr Level kStoreLimit = Level{1} << 24;
    if (terms <= kStoreLimit) {
        std::vector<double> values(static_cast<std::size_t>(terms));
        for (Level j = 1; j <= terms; ++j) {
            log_prod.add(env.log_u_at(m + j));
            values[static_cast<std::size_t>(j - 1)] = std::exp(log_prod.value());
        }
        // U_i <= 1, so the terms shrink with j; add the smallest first.
        for (auto it = values.rbegin(); it != values.rend(); ++it) total.add(*it);
    } else {
        for (Level j = 1; j <= terms; ++j) {
            log_prod.add(env.log_u_at(m + j));
            total.add(std::exp(log_prod.value()));
        }
    }
    return 1.0 + total.value();
}

std::vector<Bracket> d_profile(const ChainEnv& env, Level max_level, const ProfileOptions& opts) {
    if (max_level < 0) throw DomainError("d_profile requires max_level >= 0");
    if (!(opts.width_target > 0.0)) throw DomainError("width_target must be positive");
    const auto& family = env.family();

    ProfileOptions seed_opts = opts;
    if (analytic_recurrent(family)) {
        if (!opts.allow_recurrent) {
            throw RecurrentError("family " + family.grammar() + " is recurrent; D is infinite");
        }
        seed_opts.force_heuristic_seeds = true;
    }

    Level horizon = std::max<Level>({2 * max_level, max_level + 64, family.analytic_tail_start()});
    horizon = std::min(std::max(horizon, max_level + 1), std::max(opts.horizon_cap, max_level + 1));

    std::vector<Bracket> out(static_cast<std::size_t>(max_level + 1));
    for (;;) {
        TailSeeds seeds = tail_seeds(family, horizon, seed_opts);
        if (seeds.infinite) {
            if (!opts.allow_recurrent) {
                throw RecurrentError("family " + family.grammar() +
                                     " has a recurrent tail; D is infinite");
            }
            seeds = heuristic_seeds(horizon, opts.kappa);
        }

        // Extended precision keeps the accumulated rounding bound, which grows
        // like eps * N relative to D, well below the seed gap.
        long double lo = seeds.lo;
        long double hi = seeds.hi;
        long double err = 4.0L * LDBL_EPSILON * hi;
        bool converged = true;
        for (Level n = horizon - 1; n >= 0; --n) {
            const long double u = env.u_at(n + 1);
            lo = 1.0L + u * lo;
            hi = 1.0L + u * hi;
            err = u * err + 4.0L * LDBL_EPSILON * hi;
            if (n <= max_level) {
                Bracket& b = out[static_cast<std::size_t>(n)];
                b.lo = std::max(1.0, static_cast<double>(lo - err) * (1.0 - DBL_EPSILON));
                b.hi = static_cast<double>(hi + err) * (1.0 + DBL_EPSILON);
                b.width_target = opts.width_target;
                b.heuristic = !seeds.certified;
                b.horizon = horizon;
                b.converged = b.meets(opts.width_target);
                converged = converged && b.converged;
            }
        }
        if (converged || horizon >= opts.horizon_cap) break;
        horizon = std::min(horizon * 2, opts.horizon_cap);
    }
    return out;
}

Bracket d_limit(const ChainEnv& env, Level m, double width_target, ProfileOptions opts) {
    if (m < 0) throw DomainError("d_limit requires m >= 0");
    if (auto cached = env.cached_bracket(m); cached && cached->meets(width_target) &&
                                             cached->converged) {
        return *cached;
    }
    opts.width_target = width_target;
    // One profile serves every level up to the next power of two, so nearby
    // levels are answered from the cache.
    const Level top = std::max<Level>(std::bit_ceil(static_cast<std::uint64_t>(m + 1)), 64) - 1;
    const auto profile = d_profile(env, top, opts);
    for (Level n = 0; n <= top; ++n) {
        if (n != m) env.remember_bracket(n, profile[static_cast<std::size_t>(n)]);
    }
    Bracket merged = env.remember_bracket(m, profile[static_cast<std::size_t>(m)]);
    merged.width_target = width_target;
    merged.converged = merged.meets(width_target);
    return merged;
}

double d_between_via_product(const ChainEnv& env, Level m, Level n, double width_target) {
    if (m < 0 || n <= m) throw DomainError("d_between_via_product requires 0 <= m < n");
    ProfileOptions opts;
    opts.width_target = width_target;
    const auto d = d_profile(env, n - 1, opts);
    Accumulator log_survive;
    for (Level i = m; i < n; ++i) {
        const auto& b = d[static_cast<std::size_t>(i)];
        if (!b.converged) {
            throw ConvergenceError("D(" + std::to_string(i) + ") bracket unconverged at width " +
                                   format_double(b.width()));
        }
        log_survive.add(std::log1p(-1.0 / b.mid()));
    }
    return d[static_cast<std::size_t>(m)].mid() * -std::expm1(log_survive.value());
}

double hitting_prob(const ChainEnv& env, Level a, Level b, Level c) {
    if (a < 0 || b < a || c < b) {
        throw DomainError("hitting_prob requires 0 <= a <= b <= c, got (" + std::to_string(a) +
                          ", " + std::to_string(b) + ", " + std::to_string(c) + ")");
    }
    if (b == a) return 1.0;
    if (b == c) return 0.0;
    return 1.0 - d_between(env, a, b) / d_between(env, a, c);
}

double hitting_prob(const ChainEnv& env, Level a, Level b, Infinity, double width_target) {
    if (a < 0 || b < a) {
        throw DomainError("hitting_prob requires 0 <= a <= b, got (" + std::to_string(a) + ", " +
                          std::to_string(b) + ", inf)");
    }
    if (b == a) return 1.0;
    const Bracket d = d_limit(env, a, width_target);
    return 1.0 - d_between(env, a, b) / d.mid();
}

double recover_p_from_d(double d_prev, double d_cur) {
    const double denom = d_cur + d_prev - 1.0;
    if (!std::isfinite(d_prev) || !std::isfinite(d_cur) || !(denom > 0.0)) {
        throw DomainError("recover_p_from_d: (" + format_double(d_prev) + ", " +
                          format_double(d_cur) + ") is not a D pair of any chain");
    }
    const double p = 0.5 * (d_cur - d_prev + 1.0) / denom;
    if (p < 0.0 || p >= 0.5) {
        throw DomainError("recover_p_from_d: pair (" + format_double(d_prev) + ", " +
                          format_double(d_cur) + ") gives p = " + format_double(p) +
                          " outside [0, 1/2)");
    }
    return p;
}

Level horizon_for_epsilon(const ChainEnv& env, Level max_monitored, double eps, Level cap) {
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("eps must lie in (0, 1)");
    if (max_monitored < 0) throw DomainError("max_monitored must be >= 0");

    ProfileOptions opts;
    opts.width_target = 1e-9;
    Level top = std::max<Level>(2 * max_monitored, max_monitored + 64);
    double product = 1.0;
    Level reached = max_monitored;
    for (;;) {
        top = std::min(top, cap);
        const auto d = d_profile(env, top - 1, opts);
        product = 1.0;
        for (Level h = max_monitored + 1; h <= top; ++h) {
            product *= 1.0 - 1.0 / d[static_cast<std::size_t>(h - 1)].hi;
            reached = h;
            // Relative slack absorbs bracket width, so an exact 2^-k target is met on time.
            if (product <= eps * (1.0 + 1e-6)) return h;
        }
        if (top >= cap) break;
        top *= 2;
    }
    throw HorizonError("no horizon up to " + std::to_string(cap) + " achieves eps " +
                           format_double(eps) + " (best " + format_double(product) + ")",
                       reached, product);
}

}  // namespace cutwalk
