#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cutwalk/dvals.hpp"

using namespace cutwalk;

namespace {

// Gambler's ruin from 1 with constant up-probability a: P(hit 0 before n).
double ruin(double rho, int n) {
    return (rho - std::pow(rho, n)) / (1.0 - std::pow(rho, n));
}

// Direct summation in long double, truncated where the terms vanish.
long double d_direct(const ChainEnv& env, Level m, Level n) {
    long double sum = 1.0L;
    long double prod = 1.0L;
    for (Level i = m + 1; i < n; ++i) {
        prod *= static_cast<long double>(env.u_at(i));
        sum += prod;
    }
    return n == m ? 0.0L : sum;
}

}  // namespace

TEST_CASE("D between levels: definitions and closed forms") {
    const ChainEnv cp6(BiasFamily::constant(1.0 / 6.0));
    CHECK(d_between(cp6, 4, 4) == 0.0);
    CHECK(d_between(cp6, 4, 5) == 1.0);
    CHECK(d_between(cp6, 4, 6) == doctest::Approx(1.5));
    // 1 + 1/2 + ... + 2^-(k-1) = 2 - 2^-(k-1)
    for (int k = 1; k < 40; ++k) {
        CHECK(d_between(cp6, 10, 10 + k) == doctest::Approx(2.0 - std::ldexp(1.0, 1 - k)).epsilon(1e-15));
    }
    CHECK_THROWS_AS(d_between(cp6, 5, 4), DomainError);
}

TEST_CASE("D between levels agrees with long double summation") {
    for (const auto* g : {"harmonic:B=2", "lambda:K=2,B=2", "loglog:beta=1"}) {
        const ChainEnv env(parse_family(g));
        for (Level m : {0, 3, 50}) {
            for (Level len : {2, 17, 500, 3000}) {
                const long double ref = d_direct(env, m, m + len);
                CHECK(d_between(env, m, m + len) ==
                      doctest::Approx(static_cast<double>(ref)).epsilon(1e-13));
            }
        }
    }
}

TEST_CASE("D limits of the constant families") {
    const ChainEnv cp6(BiasFamily::constant(1.0 / 6.0));
    const ChainEnv cp3(BiasFamily::constant(0.3));
    for (Level m : {0, 1, 7, 1000}) {
        const auto a = d_limit(cp6, m, 1e-12);
        CHECK(a.contains(2.0));
        CHECK(a.width() <= 1e-12);
        CHECK_FALSE(a.heuristic);
        const auto b = d_limit(cp3, m, 1e-12);
        CHECK(b.contains(4.0 / 3.0));
        CHECK(b.width() <= 1e-12);
    }
}

TEST_CASE("harmonic B=2 has D(i) = i + 1") {
    const ChainEnv hb2(BiasFamily::harmonic(2.0));
    const auto d = d_profile(hb2, 2000);
    CHECK(d[0].contains(1.0 + 2.0 / 99.0));
    for (Level i = 1; i <= 2000; i += 37) {
        CHECK(d[static_cast<std::size_t>(i)].contains(static_cast<double>(i + 1)));
        CHECK(d[static_cast<std::size_t>(i)].converged);
    }
    const auto far = d_limit(hb2, 100000, 1e-10);
    CHECK(far.contains(100001.0));
}

TEST_CASE("profile brackets satisfy the backward recursion") {
    for (const auto* g : {"const:p=0.1666667", "harmonic:B=3", "lambda:K=2,B=2", "lambda:K=3,B=2",
                          "loglog:beta=0.5", "loglog:beta=2"}) {
        const ChainEnv env(parse_family(g));
        const auto d = d_profile(env, 3000);
        for (Level n = 1; n <= 3000; ++n) {
            const double dn = d[static_cast<std::size_t>(n)].mid();
            const double dp = d[static_cast<std::size_t>(n - 1)].mid();
            CHECK(std::abs(env.u_at(n) * dn - (dp - 1.0)) <= 1e-9 * dn);
            CHECK(d[static_cast<std::size_t>(n)].converged);
            CHECK(d[static_cast<std::size_t>(n)].lo <= d[static_cast<std::size_t>(n)].hi);
        }
    }
}

TEST_CASE("tail seeds enclose the limit") {
    for (const auto* g : {"harmonic:B=1.5", "lambda:K=2,B=2", "lambda:K=3,B=3", "loglog:beta=1",
                          "loglog:beta=2"}) {
        const ChainEnv env(parse_family(g));
        const Level n = 4096;
        const auto seeds = tail_seeds(env.family(), n);
        CHECK(seeds.certified);
        const auto d = d_limit(env, n, 1e-9);
        CHECK(seeds.lo <= d.hi);
        CHECK(d.lo <= seeds.hi);
    }
    // Second-order gap: quadrupling N shrinks it about sixteenfold.
    const auto family = BiasFamily::lambda(2, 2.0);
    const auto s1 = tail_seeds(family, 4096);
    const auto s4 = tail_seeds(family, 16384);
    const double g1 = (s1.hi - s1.lo) / s1.hi;
    const double g4 = (s4.hi - s4.lo) / s4.hi;
    CHECK(g1 < 1e-7);
    CHECK(g4 < g1 / 10.0);
    // Heuristic seeds are flagged.
    ProfileOptions opts;
    opts.force_heuristic_seeds = true;
    CHECK_FALSE(tail_seeds(BiasFamily::harmonic(2.0), 100, opts).certified);
}

TEST_CASE("analytic biases are convex and decreasing past the tail start") {
    // The certified tail seeds rely on this.
    for (const auto* g : {"harmonic:B=1.01", "harmonic:B=3", "lambda:K=2,B=1.01", "lambda:K=2,B=5",
                          "lambda:K=3,B=2", "lambda:K=4,B=2", "loglog:beta=0.25", "loglog:beta=1",
                          "loglog:beta=2", "loglog:beta=4"}) {
        const auto f = parse_family(g);
        const double start = static_cast<double>(f.analytic_tail_start());
        for (double x = start; x < 1e15; x *= 1.37) {
            for (double h : {0.25, 1.0, 0.1 * x}) {
                if (x - h < start) continue;
                INFO(g << " at x = " << x << ", h = " << h);
                CHECK(f.formula(x + h) < f.formula(x));
                CHECK(f.formula(x - h) + f.formula(x + h) - 2.0 * f.formula(x) >= -1e-15 * f.formula(x));
            }
        }
    }
}

TEST_CASE("loglog tail integral brackets") {
    const auto a = loglog_tail_integral(2.0, std::log(1e4), 1e-3);
    const auto b = loglog_tail_integral(2.0, std::log(1e4), 1e-5);
    CHECK(a.lo <= a.hi);
    CHECK(a.lo <= b.hi);
    CHECK(b.lo <= a.hi);
    CHECK(b.hi - b.lo <= a.hi - a.lo);
    // Reference value of the scaled integral from a 30-digit mpmath evaluation.
    const double scale = std::pow(std::log(std::log(1e4)), 2.0);
    CHECK(b.lo / scale <= 1.519350033444894 + 1e-9);
    CHECK(b.hi / scale >= 1.519350033444894 - 1e-9);
}

TEST_CASE("product form of D between levels") {
    for (const auto* g : {"const:p=0.1666667", "harmonic:B=2", "lambda:K=2,B=2", "loglog:beta=1"}) {
        const ChainEnv env(parse_family(g));
        for (Level m : {0, 5, 200}) {
            for (Level len : {1, 2, 10, 700, 2000}) {
                const double a = d_between(env, m, m + len);
                const double b = d_between_via_product(env, m, m + len);
                CHECK(std::abs(a - b) <= 1e-12 * a);
            }
        }
    }
}

TEST_CASE("hitting probabilities") {
    const ChainEnv cp6(BiasFamily::constant(1.0 / 6.0));
    CHECK(hitting_prob(cp6, 0, 1, 3) == doctest::Approx(3.0 / 7.0).epsilon(1e-15));
    for (int n = 3; n <= 50; ++n) {
        CHECK(std::abs(hitting_prob(cp6, 0, 1, n) - ruin(0.5, n)) <= 1e-12);
    }
    CHECK(hitting_prob(cp6, 2, 2, 9) == 1.0);
    CHECK(hitting_prob(cp6, 2, 9, 9) == 0.0);
    CHECK_THROWS_AS(hitting_prob(cp6, 2, 10, 9), DomainError);
    // From b the walk returns to a with probability 1 - D(a,b)/D(a) = 2^-(b-a).
    CHECK(hitting_prob(cp6, 3, 8, infinity) == doctest::Approx(1.0 / 32.0).epsilon(1e-10));
    // Monotone in the start point.
    const ChainEnv l2(BiasFamily::lambda(2, 2.0));
    double prev = 1.0;
    for (Level b = 1; b < 60; ++b) {
        const double h = hitting_prob(l2, 0, b, 60);
        CHECK(h <= prev);
        prev = h;
    }
}

TEST_CASE("bias recovery from consecutive D values") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> unif(0.0, 0.49);
    for (int t = 0; t < 200; ++t) {
        const double p = unif(gen);
        const double d = 1.0 + 50.0 * unif(gen);
        // D(n-1) = 1 + U_n D(n)
        const double prev = 1.0 + odds_ratio(p) * d;
        CHECK(std::abs(recover_p_from_d(prev, d) - p) <= 1e-12);
    }
    const ChainEnv hb2(BiasFamily::harmonic(2.0));
    const auto prof = d_profile(hb2, 100);
    for (Level n = 1; n <= 100; ++n) {
        CHECK(recover_p_from_d(prof[static_cast<std::size_t>(n - 1)].mid(),
                               prof[static_cast<std::size_t>(n)].mid()) ==
              doctest::Approx(hb2.p_at(n)).epsilon(1e-10));
    }
    CHECK_THROWS_AS(recover_p_from_d(3.0, 1.5), DomainError);
}

TEST_CASE("censoring horizon") {
    const ChainEnv cp6(BiasFamily::constant(1.0 / 6.0));
    const ChainEnv cp3(BiasFamily::constant(0.3));
    CHECK(horizon_for_epsilon(cp6, 20, std::ldexp(1.0, -10)) == 30);
    // (1 - 3/4)^(H - 10) <= 1e-3 first at H - 10 = 5.
    CHECK(horizon_for_epsilon(cp3, 10, 1e-3) == 15);
    const ChainEnv hb2(BiasFamily::harmonic(2.0));
    // prod_{i=R}^{H-1} i/(i+1) = R/H for HB2.
    CHECK(horizon_for_epsilon(hb2, 10, 0.01) == 1000);
    CHECK_THROWS_AS(horizon_for_epsilon(hb2, 10, 1e-6, 1000), HorizonError);
    try {
        horizon_for_epsilon(hb2, 10, 1e-6, 1000);
    } catch (const HorizonError& e) {
        CHECK(e.best_horizon == 1000);
        CHECK(e.achieved_eps == doctest::Approx(0.01).epsilon(1e-6));
    }
}

TEST_CASE("recurrent families are refused") {
    const ChainEnv rec(BiasFamily::lambda(2, 0.5));
    CHECK_THROWS_AS(d_profile(rec, 10), RecurrentError);
    CHECK_THROWS_AS(d_limit(rec, 10, 1e-6), RecurrentError);
}

TEST_CASE("monotone in the bias") {
    const ChainEnv cp6(BiasFamily::constant(1.0 / 6.0));
    const ChainEnv cp3(BiasFamily::constant(0.3));
    const auto a = d_profile(cp6, 1000);
    const auto b = d_profile(cp3, 1000);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].lo >= b[i].hi);
}
