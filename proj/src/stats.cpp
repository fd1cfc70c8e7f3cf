#include "cutwalk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "cutwalk/errors.hpp"
#include "cutwalk/format.hpp"
#include "cutwalk/laws.hpp"

namespace cutwalk {

std::pair<double, double> wilson_interval(std::int64_t successes, std::int64_t n, double z) {
    if (n < 1) throw DomainError("wilson_interval requires n >= 1");
    if (successes < 0 || successes > n) throw DomainError("wilson_interval requires 0 <= k <= n");
    if (!(z > 0.0)) throw DomainError("wilson_interval requires z > 0");
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(successes) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double center = (p + z2 / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    // Clamp so the interval always holds p despite rounding at the ends.
    return {std::min(p, std::max(0.0, center - half)), std::max(p, std::min(1.0, center + half))};
}

GofReport chi_square_geometric(const std::map<std::int64_t, std::int64_t>& observed, double q,
                               double min_expected) {
    if (!(q > 0.0 && q <= 1.0)) throw DomainError("chi_square_geometric requires q in (0, 1]");
    std::int64_t total = 0;
    for (const auto& [l, n] : observed) {
        if (n < 0) throw DomainError("negative count");
        if (l < 1 && n > 0) throw DomainError("observation L = " + std::to_string(l) + " < 1");
        total += n;
    }
    if (total < 50) throw DomainError("chi_square_geometric needs at least 50 observations");
    const double nn = static_cast<double>(total);

    GofReport rep;
    if (q == 1.0) {
        const auto it = observed.find(1);
        const std::int64_t at_one = it == observed.end() ? 0 : it->second;
        rep.buckets = 1;
        rep.min_expected = nn;
        rep.degenerate = true;
        rep.statistic = at_one == total ? 0.0 : INFINITY;
        rep.note = at_one == total ? "single bucket" : "mass at L > 1 is impossible under q = 1";
        return rep;
    }

    // Expected count of cell L is nn q (1-q)^{L-1}; of the tail L >= c it is nn (1-q)^{c-1}.
    const double log_miss = std::log1p(-q);
    auto cell = [&](std::int64_t l) { return nn * q * std::exp(static_cast<double>(l - 1) * log_miss); };
    auto tail = [&](std::int64_t c) { return nn * std::exp(static_cast<double>(c - 1) * log_miss); };
    std::int64_t cut = 1;
    while (cell(cut) >= min_expected && tail(cut + 1) >= min_expected) ++cut;

    rep.buckets = static_cast<int>(cut);
    if (cut == 1) {
        rep.degenerate = true;
        rep.min_expected = nn;
        rep.note = "all mass in one bucket after merging";
        return rep;
    }
    double stat = 0.0;
    double min_e = INFINITY;
    std::int64_t in_cells = 0;
    for (std::int64_t l = 1; l < cut; ++l) {
        const auto it = observed.find(l);
        const double o = it == observed.end() ? 0.0 : static_cast<double>(it->second);
        in_cells += static_cast<std::int64_t>(o);
        const double e = cell(l);
        stat += (o - e) * (o - e) / e;
        min_e = std::min(min_e, e);
    }
    const double o_tail = static_cast<double>(total - in_cells);
    const double e_tail = tail(cut);
    stat += (o_tail - e_tail) * (o_tail - e_tail) / e_tail;
    min_e = std::min(min_e, e_tail);

    rep.statistic = stat;
    rep.df = rep.buckets - 1;
    rep.min_expected = min_e;
    rep.p_value = boost::math::gamma_q(0.5 * rep.df, 0.5 * stat);
    return rep;
}

double binomial_z(std::int64_t successes, std::int64_t n, double exact) {
    if (n < 1) throw NoDataError("no data");
    const double freq = static_cast<double>(successes) / static_cast<double>(n);
    const double se = std::sqrt(exact * (1.0 - exact) / static_cast<double>(n));
    if (se == 0.0) return freq == exact ? 0.0 : std::copysign(INFINITY, freq - exact);
    return (freq - exact) / se;
}

CensusComparison compare_census_to_exact(const Census& c, const ChainEnv& env) {
    if (c.empty()) throw NoDataError("no data");
    CensusComparison out;
    const auto n = c.succeeded;
    const double nn = static_cast<double>(n);
    for (Level r = 1; r <= c.monitored_max - c.guard; ++r) {
        const auto& s = c.site(r);
        SiteComparison row;
        row.site = r;
        row.n = n;
        row.freq_cut = static_cast<double>(s.cut) / nn;
        row.freq_strong = static_cast<double>(s.strong) / nn;
        row.freq_weak = static_cast<double>(s.weak) / nn;
        row.exact_cut = cutpoint_prob(env, r).value;
        row.exact_strong = strong_cutpoint_prob(env, r).value;
        row.z_cut = binomial_z(s.cut, n, row.exact_cut);
        row.z_strong = binomial_z(s.strong, n, row.exact_strong);
        out.sites.push_back(row);
    }
    for (const auto& p : c.pairs) {
        PairComparison row;
        row.j = p.j;
        row.k = p.k;
        row.n = n;
        row.freq_cut = static_cast<double>(p.both_cut) / nn;
        row.exact_cut = joint_cutpoint_prob(env, p.j, p.k).value;
        row.z_cut = binomial_z(p.both_cut, n, row.exact_cut);
        row.freq_strong = static_cast<double>(p.both_strong) / nn;
        row.exact_strong = joint_strong_prob(env, p.j, p.k).value;
        row.z_strong = binomial_z(p.both_strong, n, row.exact_strong);
        out.pairs.push_back(row);
    }
    return out;
}

std::string summary_csv(const CensusComparison& cmp) {
    std::ostringstream out;
    out << "site,n,freq_cut,freq_strong,freq_weak,exact_cut,exact_strong,z_cut,z_strong\n";
    for (const auto& r : cmp.sites) {
        out << r.site << ',' << r.n << ',' << format_double(r.freq_cut) << ','
            << format_double(r.freq_strong) << ',' << format_double(r.freq_weak) << ','
            << format_double(r.exact_cut) << ',' << format_double(r.exact_strong) << ','
            << format_double(r.z_cut) << ',' << format_double(r.z_strong) << '\n';
    }
    return out.str();
}

namespace {

// P(K > x) for the Kolmogorov distribution.
double kolmogorov_survival(double x) {
    if (x <= 0.0) return 1.0;
    if (x < 1.0) {
        // Small-x form converges faster here.
        const double t = M_PI * M_PI / (8.0 * x * x);
        double cdf = 0.0;
        for (int k = 1; k <= 50; k += 2) cdf += std::exp(-static_cast<double>(k * k) * t);
        return 1.0 - std::sqrt(2.0 * M_PI) / x * cdf;
    }
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        s += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-18) break;
    }
    return std::clamp(s, 0.0, 1.0);
}

}  // namespace

KsResult ks_uniform(std::span<const double> samples) {
    if (samples.empty()) throw NoDataError("no data");
    std::vector<double> x(samples.begin(), samples.end());
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double u = std::clamp(x[i], 0.0, 1.0);
        d = std::max({d, static_cast<double>(i + 1) / n - u, u - static_cast<double>(i) / n});
    }
    const double rn = std::sqrt(n);
    return {d, std::clamp(kolmogorov_survival((rn + 0.12 + 0.11 / rn) * d), 0.0, 1.0)};
}

}  // namespace cutwalk
