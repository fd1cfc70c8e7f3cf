#include "cutwalk/classify.hpp"

#include <algorithm>
#include <cmath>

#include "cutwalk/dvals.hpp"
#include "cutwalk/errors.hpp"
#include "cutwalk/format.hpp"
#include "cutwalk/quadrature.hpp"

namespace cutwalk {

const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::Recurrent: return "RECURRENT";
        case Outcome::FiniteCutpoints: return "FINITE_CUTPOINTS";
        case Outcome::InfiniteStrongCutpoints: return "INFINITE_STRONG_CUTPOINTS";
        case Outcome::Inconclusive: return "INCONCLUSIVE";
    }
    return "?";
}

namespace {

Level floor_n_log_n(Level n) {
    const double x = static_cast<double>(n);
    return static_cast<Level>(std::floor(x * std::log(x)));
}

std::vector<Bracket> converged_profile(const ChainEnv& env, Level top, double width_target) {
    ProfileOptions opts;
    opts.width_target = width_target;
    auto d = d_profile(env, top, opts);
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!d[i].converged) {
            throw ConvergenceError("D(" + std::to_string(i) + ") bracket unconverged (width " +
                                   format_double(d[i].width()) + ")");
        }
    }
    return d;
}

// Sum of 1/(D(n) log n) over each complete dyadic block [2^j, 2^{j+1}) <= top.
std::vector<double> criterion_blocks(const std::vector<Bracket>& d, Level top) {
    std::vector<double> blocks;
    for (Level lo = 1; 2 * lo - 1 <= top; lo *= 2) {
        double s = 0.0;
        for (Level n = std::max<Level>(lo, 2); n <= 2 * lo - 1; ++n) {
            s += 1.0 / (d[static_cast<std::size_t>(n)].mid() * std::log(static_cast<double>(n)));
        }
        blocks.push_back(s);
    }
    return blocks;
}

struct GrowthCheck {
    bool holds = true;
    Level n0 = 0;
    Level top = 0;
    double worst_ratio = 0.0;
};

// D(n) <= delta n log n on [max(3, sqrt(top)), top], using upper bracket ends.
GrowthCheck empirical_growth_check(const std::vector<Bracket>& d, Level top, double delta) {
    GrowthCheck c;
    c.top = top;
    c.n0 = std::max<Level>(3, static_cast<Level>(std::sqrt(static_cast<double>(top))));
    for (Level n = c.n0; n <= top; ++n) {
        const double x = static_cast<double>(n);
        const double ratio = d[static_cast<std::size_t>(n)].hi / (x * std::log(x));
        c.worst_ratio = std::max(c.worst_ratio, ratio);
        if (ratio > delta) c.holds = false;
    }
    return c;
}

std::string describe(const GrowthCheck& c, double delta) {
    return std::string(c.holds ? "holds" : "fails") + " on [" + std::to_string(c.n0) + ", " +
           std::to_string(c.top) + "] with delta " + format_double(delta) +
           "; max D(n)/(n log n) = " + format_double(c.worst_ratio);
}

}  // namespace

PartialSums partial_sums_at(const ChainEnv& env, std::span<const Level> ns, double width_target) {
    PartialSums out;
    if (ns.empty()) return out;
    if (!std::is_sorted(ns.begin(), ns.end()) || ns.front() < 2) {
        throw DomainError("partial sums need ascending N >= 2");
    }
    const Level top_n = ns.back();
    const auto d = converged_profile(env, std::max(top_n, floor_n_log_n(top_n)), width_target);
    double criterion = 0.0;
    double transform = 0.0;
    std::size_t next = 0;
    for (Level n = 2; n <= top_n; ++n) {
        const double x = static_cast<double>(n);
        criterion += 1.0 / (d[static_cast<std::size_t>(n)].mid() * std::log(x));
        transform += 1.0 / d[static_cast<std::size_t>(floor_n_log_n(n))].mid();
        while (next < ns.size() && ns[next] == n) {
            out.criterion.push_back(criterion);
            out.transform.push_back(transform);
            ++next;
        }
    }
    return out;
}

double criterion_partial_sum(const ChainEnv& env, Level n, double width_target) {
    if (n < 2) throw DomainError("criterion_partial_sum requires N >= 2");
    const Level ns[] = {n};
    return partial_sums_at(env, ns, width_target).criterion.front();
}

double equiconv_transform_partial(const ChainEnv& env, Level n, double width_target) {
    if (n < 2) throw DomainError("equiconv_transform_partial requires N >= 2");
    const Level ns[] = {n};
    return partial_sums_at(env, ns, width_target).transform.front();
}

// ---------------------------------------------------------------------------
// growth classes

double GrowthClass::shape(double i) const {
    switch (kind) {
        case GrowthKind::Bounded: return 1.0;
        case GrowthKind::Linear: return i;
        case GrowthKind::IteratedLogs: {
            double prod = i;
            double iterated = i;
            for (int j = 0; j < log_depth; ++j) {
                iterated = std::log(iterated);
                prod *= iterated;
            }
            return prod;
        }
        case GrowthKind::LogLogPower: return i * std::pow(std::log(std::log(i)), beta);
        case GrowthKind::Infinite: return INFINITY;
    }
    return NAN;
}

bool GrowthClass::criterion_sum_converges() const {
    switch (kind) {
        case GrowthKind::Bounded:
        case GrowthKind::Linear: return false;
        case GrowthKind::IteratedLogs: return log_depth >= 1;
        case GrowthKind::LogLogPower: return beta > 1.0;
        case GrowthKind::Infinite: return false;
    }
    return false;
}

bool GrowthClass::growth_bound_holds() const {
    switch (kind) {
        case GrowthKind::Bounded:
        case GrowthKind::Linear:
        case GrowthKind::LogLogPower: return true;
        case GrowthKind::IteratedLogs: return log_depth <= 1;
        case GrowthKind::Infinite: return false;
    }
    return false;
}

GrowthClass asymptotic_d(const BiasFamily& family) {
    GrowthClass g;
    if (!family.is_analytic()) throw DomainError("asymptotic_d: table families are unsupported");
    if (transience_verdict(family).outcome == Transience::Recurrent) {
        g.kind = GrowthKind::Infinite;
        g.description = "D = infinity (recurrent)";
        return g;
    }
    switch (family.kind()) {
        case FamilyKind::Constant: {
            const double p = family.p_at(family.analytic_tail_start());
            g.kind = GrowthKind::Bounded;
            g.constant = 1.0 / (1.0 - odds_ratio(p));
            g.description = "D = 1/(1-U) = " + format_double(g.constant);
            return g;
        }
        case FamilyKind::Harmonic:
            g.kind = GrowthKind::Linear;
            g.constant = 1.0 / (family.b_param() - 1.0);
            g.description = "D(i) ~ i/(B-1)";
            return g;
        case FamilyKind::Lambda: {
            const int k = family.k_param();
            g.constant = 1.0 / (family.b_param() - 1.0);
            if (k == 1) {
                g.kind = GrowthKind::Linear;
                g.description = "D(i) ~ i/(B-1)";
                return g;
            }
            g.kind = GrowthKind::IteratedLogs;
            g.log_depth = k - 1;
            g.description = "D(i) ~ i";
            for (int j = 1; j < k; ++j) {
                g.description += j == 1 ? " log i" : " log_" + std::to_string(j) + " i";
            }
            g.description += " /(B-1)";
            return g;
        }
        case FamilyKind::LogLogBeta:
            g.kind = GrowthKind::LogLogPower;
            g.beta = family.beta_param();
            g.description = "c1 k (log log k)^beta <= D(k) <= c2 k (log log k)^beta";
            return g;
        case FamilyKind::Table: break;
    }
    throw DomainError("asymptotic_d: unsupported family");
}

// ---------------------------------------------------------------------------
// classification

namespace {

Verdict classify_analytic(const BiasFamily& family, const ClassifyOptions& opts) {
    Verdict v;
    v.delta_used = opts.delta;
    const auto growth = asymptotic_d(family);
    v.rationale.push_back({"growth_class", growth.description});
    if (!family.head().empty()) {
        v.rationale.push_back({"finite_changes_ignored",
                               std::to_string(family.head().size()) +
                                   " leading biases overridden; asymptotics unchanged"});
    }
    v.technical_condition_met = growth.growth_bound_holds();
    v.rationale.push_back({"technical_condition_analytic",
                           v.technical_condition_met
                               ? "limsup D(n)/(n log n) < infinity"
                               : "D(n)/(n log n) -> infinity"});

    if (growth.criterion_sum_converges()) {
        v.outcome = Outcome::FiniteCutpoints;
        v.rationale.push_back({"criterion_convergent", "sum 1/(D(n) log n) < infinity"});
    } else if (v.technical_condition_met) {
        v.outcome = Outcome::InfiniteStrongCutpoints;
        v.rationale.push_back({"criterion_divergent",
                               "sum 1/(D(n) log n) = infinity and D(n) <= delta n log n"});
    } else {
        v.outcome = Outcome::Inconclusive;
        v.rationale.push_back({"criterion_divergent_without_growth_bound",
                               "divergent sum but growth bound fails"});
    }

    if (opts.numeric_checks) {
        const Level top = opts.check_level;
        const auto d = converged_profile(ChainEnv(family), top, opts.width_target);
        const auto check = empirical_growth_check(d, top, opts.delta);
        v.rationale.push_back({"technical_condition_empirical", describe(check, opts.delta)});
        const auto trend = dyadic_trend(criterion_blocks(d, top), opts.trend);
        v.rationale.push_back(
            {"numeric_trend_advisory",
             std::string(to_string(trend.trend)) + " (fitted power " +
                 format_double(trend.fitted_power) + ", partial sum " +
                 format_double(trend.partial_sum) + ")"});
    }
    return v;
}

Verdict classify_table(const BiasFamily& family, const TransienceVerdict& tv,
                       const ClassifyOptions& opts) {
    Verdict v;
    v.delta_used = opts.delta;
    if (tv.outcome == Transience::Unknown) {
        v.rationale.push_back({"table_transience_unknown", tv.detail});
        return v;
    }
    const auto top = static_cast<Level>(std::max(family.entries().size(), family.head().size()));
    std::vector<Bracket> d;
    try {
        d = converged_profile(ChainEnv(family), top, opts.width_target);
    } catch (const RecurrentError& e) {
        v.rationale.push_back({"table_tail_recurrent", e.what()});
        return v;
    }
    const auto trend = dyadic_trend(criterion_blocks(d, top), opts.trend);
    v.rationale.push_back({"table_criterion_trend",
                           std::string(to_string(trend.trend)) + " (" + trend.note +
                               ", fitted power " + format_double(trend.fitted_power) + ")"});
    const auto check = empirical_growth_check(d, top, opts.delta);
    v.technical_condition_met = check.holds;
    v.rationale.push_back({"technical_condition_empirical", describe(check, opts.delta)});
    if (trend.trend == Trend::Converging) {
        v.outcome = Outcome::FiniteCutpoints;
    } else if (trend.trend == Trend::Diverging && check.holds) {
        v.outcome = Outcome::InfiniteStrongCutpoints;
    }
    return v;
}

}  // namespace

Verdict classify(const BiasFamily& family, const ClassifyOptions& opts) {
    Verdict v;
    v.delta_used = opts.delta;
    const auto tv = transience_verdict(family, opts.trend);
    if (tv.outcome == Transience::Recurrent) {
        v.outcome = Outcome::Recurrent;
        v.rationale.push_back({tv.rule, tv.detail});
        return v;
    }
    if (family.is_analytic()) {
        v = classify_analytic(family, opts);
        v.rationale.insert(v.rationale.begin(), {tv.rule, tv.detail});
    } else {
        v = classify_table(family, tv, opts);
        v.rationale.insert(v.rationale.begin(), {tv.rule, tv.detail});
    }

    if (!opts.comparison) return v;

    // Domination: a slower walk has larger D, a quicker walk smaller D.
    ClassifyOptions sub = opts;
    sub.comparison.reset();
    sub.numeric_checks = false;
    const Verdict other = classify(*opts.comparison, sub);
    const Level upto = family.is_analytic() ? opts.check_level
                                            : static_cast<Level>(family.entries().size());
    const std::string cmp = opts.comparison->grammar();
    std::optional<Outcome> implied;
    if (other.outcome == Outcome::FiniteCutpoints && is_slower(family, *opts.comparison, upto)) {
        implied = Outcome::FiniteCutpoints;
        v.rationale.push_back({"domination_slower",
                               "p_i <= p*_i of " + cmp + " for i <= " + std::to_string(upto) +
                                   ", which has finitely many cutpoints"});
    } else if (other.outcome == Outcome::InfiniteStrongCutpoints &&
               is_slower(*opts.comparison, family, upto)) {
        implied = Outcome::InfiniteStrongCutpoints;
        v.rationale.push_back({"domination_quicker",
                               "p_i >= p*_i of " + cmp + " for i <= " + std::to_string(upto) +
                                   ", which has infinitely many strong cutpoints"});
    } else {
        v.rationale.push_back({"domination_not_applicable",
                               cmp + " is " + to_string(other.outcome) +
                                   " and the pointwise order does not transfer it"});
    }
    if (implied) {
        if (v.outcome == Outcome::Inconclusive) {
            v.outcome = *implied;
            if (*implied == Outcome::InfiniteStrongCutpoints) v.technical_condition_met = true;
        } else if (v.outcome != *implied) {
            v.rationale.push_back({"domination_conflict",
                                   std::string("own verdict ") + to_string(v.outcome) +
                                       " kept over domination verdict " + to_string(*implied)});
        }
    }
    return v;
}

// ---------------------------------------------------------------------------
// slowly varying tail check

double polfeldt_check(double beta, double x, double tol, double s_scale) {
    if (!(beta > 1.0)) throw DomainError("polfeldt_check requires beta > 1");
    if (!(x > 0.0) || !(std::log(std::log(x)) > 1.0)) {
        throw DomainError("polfeldt_check requires log log x > 1");
    }
    if (!(tol > 0.0)) throw DomainError("polfeldt_check requires tol > 0");

    // With t = e^v and u = e^s, S(t)/S(x) = exp(-int_{log x}^{v} ds / (log s)^beta).
    auto g = [beta](double s) { return std::pow(std::log(s), -beta); };
    auto inner = [&](double a, double b) {
        const auto r = integrate(g, a, b, 0.0, 1e-14, 200);
        if (!r.converged && r.abs_error > 1e-13 * std::abs(r.value)) {
            throw ConvergenceError("polfeldt_check: inner quadrature stalled at error " +
                                   format_double(r.abs_error));
        }
        return r.value;
    };

    const double v0 = std::log(x);
    double a = v0;
    double g_at_a = 0.0;  // G(a) = int_{v0}^{a} g
    double total = 0.0;
    double total_error = 0.0;
    for (int panel = 0; panel < 100000; ++panel) {
        const double width = 4.0 / g(a);
        const double b = a + width;
        auto f = [&](double v) { return s_scale * std::exp(-(g_at_a + inner(a, v))); };
        const auto r = integrate(f, a, b, 0.0, 0.1 * tol, 400);
        if (!r.converged) {
            throw ConvergenceError("polfeldt_check: outer quadrature reached error " +
                                   format_double(r.abs_error) + " on panel " +
                                   std::to_string(panel));
        }
        total += r.value;
        total_error += r.abs_error;
        g_at_a += inner(a, b);
        a = b;
        // Remainder beyond a is at most exp(-G(a)) 2^beta / g(a).
        const double remainder = s_scale * std::exp(-g_at_a) * std::pow(2.0, beta) / g(a);
        if (remainder <= 0.1 * tol * total) break;
    }
    if (total_error > tol * total) {
        throw ConvergenceError("polfeldt_check: accumulated error " + format_double(total_error) +
                               " exceeds tolerance");
    }
    return total / (s_scale * std::pow(std::log(v0), beta));
}

}  // namespace cutwalk
