#include "cutwalk/laws.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cutwalk/errors.hpp"
#include "cutwalk/format.hpp"

namespace cutwalk {

namespace {

Bracket checked_d(const ChainEnv& env, Level r, const LawOptions& opts) {
    const Bracket d = d_limit(env, r, opts.width_target);
    if (!d.converged && d.width() > opts.max_relative_width * d.lo) {
        throw ConvergenceError("D(" + std::to_string(r) + ") bracket [" + format_double(d.lo) +
                               ", " + format_double(d.hi) + "] is too wide");
    }
    return d;
}

// f is monotone in D on the bracket.
template <class F>
LawValue monotone_in_d(const Bracket& d, F f) {
    const double a = f(d.lo);
    const double b = f(d.hi);
    return {f(d.mid()), std::min(a, b), std::max(a, b)};
}

double geometric_pmf(double q, long long l) {
    if (l == 1) return q;
    return q * std::pow(1.0 - q, static_cast<double>(l - 1));
}

// Range of q (1-q)^{L-1} over q in [q_lo, q_hi]; the pmf peaks at q = 1/L.
LawValue pmf_over(double q_mid, double q_lo, double q_hi, long long l) {
    double lo = std::min(geometric_pmf(q_lo, l), geometric_pmf(q_hi, l));
    double hi = std::max(geometric_pmf(q_lo, l), geometric_pmf(q_hi, l));
    const double peak = 1.0 / static_cast<double>(l);
    if (q_lo < peak && peak < q_hi) hi = std::max(hi, geometric_pmf(peak, l));
    return {geometric_pmf(q_mid, l), lo, hi};
}

void check_site(Level r) {
    if (r < 0) throw DomainError("site must be >= 0, got " + std::to_string(r));
}

void check_count(long long l) {
    if (l < 1) throw DomainError("L must be >= 1, got " + std::to_string(l));
}

void check_pair(Level j, Level k) {
    if (j < 1 || k <= j) {
        throw DomainError("pair laws need 1 <= j < k, got (" + std::to_string(j) + ", " +
                          std::to_string(k) + ")");
    }
}

}  // namespace

double SiteLaw::pmf(long long l) const {
    check_count(l);
    return geometric_pmf(success, l);
}

double site_bias(const ChainEnv& env, Level r) {
    check_site(r);
    return r == 0 ? 0.5 : env.p_at(r);
}

SiteLaw local_time_law(const ChainEnv& env, Level r, const LawOptions& opts) {
    const Bracket d = checked_d(env, r, opts);
    return {r, (1.0 + 2.0 * site_bias(env, r)) / (2.0 * d.mid()), SiteLawKind::LocalTime};
}

SiteLaw upcross_law(const ChainEnv& env, Level r, const LawOptions& opts) {
    check_site(r);
    const Bracket d = checked_d(env, r, opts);
    return {r, 1.0 / d.mid(), SiteLawKind::Upcross};
}

LawValue local_time_pmf(const ChainEnv& env, Level r, long long l, const LawOptions& opts) {
    check_count(l);
    const Bracket d = checked_d(env, r, opts);
    const double up = 1.0 + 2.0 * site_bias(env, r);
    return pmf_over(up / (2.0 * d.mid()), up / (2.0 * d.hi), up / (2.0 * d.lo), l);
}

LawValue upcross_pmf(const ChainEnv& env, Level r, long long l, const LawOptions& opts) {
    check_site(r);
    check_count(l);
    const Bracket d = checked_d(env, r, opts);
    return pmf_over(1.0 / d.mid(), 1.0 / d.hi, 1.0 / d.lo, l);
}

LawValue cutpoint_prob(const ChainEnv& env, Level k, const LawOptions& opts) {
    if (k < 1) throw DomainError("cutpoint_prob requires k >= 1");
    return monotone_in_d(checked_d(env, k, opts), [](double d) { return 1.0 / d; });
}

LawValue strong_cutpoint_prob(const ChainEnv& env, Level k, const LawOptions& opts) {
    if (k < 1) throw DomainError("strong_cutpoint_prob requires k >= 1");
    const double up = 1.0 + 2.0 * env.p_at(k);
    return monotone_in_d(checked_d(env, k, opts), [up](double d) { return up / (2.0 * d); });
}

LawValue joint_cutpoint_prob(const ChainEnv& env, Level j, Level k, const LawOptions& opts) {
    check_pair(j, k);
    const double djk = d_between(env, j, k + 1);
    return monotone_in_d(checked_d(env, k, opts), [djk](double d) { return 1.0 / (djk * d); });
}

LawValue joint_strong_prob(const ChainEnv& env, Level j, Level k, const LawOptions& opts) {
    check_pair(j, k);
    const double djk = d_between(env, j, k);
    const double up = (0.5 + env.p_at(j)) * (0.5 + env.p_at(k));
    return monotone_in_d(checked_d(env, k, opts),
                         [djk, up](double d) { return up / (djk * d); });
}

double envelope_value(double d, double r, double eps) {
    return 2.0 * (1.0 + eps) * d * std::log(r);
}

LawValue local_time_envelope(const ChainEnv& env, Level r, double eps, const LawOptions& opts) {
    if (r < 2) throw DomainError("local_time_envelope requires R >= 2");
    if (!(eps >= 0.0)) throw DomainError("local_time_envelope requires eps >= 0");
    const double rr = static_cast<double>(r);
    return monotone_in_d(checked_d(env, r, opts),
                         [rr, eps](double d) { return envelope_value(d, rr, eps); });
}

}  // namespace cutwalk
