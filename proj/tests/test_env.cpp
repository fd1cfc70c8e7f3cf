#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "cutwalk/env.hpp"
#include "cutwalk/errors.hpp"

using namespace cutwalk;

namespace {
const std::string kData = CUTWALK_TEST_DATA;

std::string error_of(const std::string& grammar) {
    try {
        parse_family(grammar);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}
}  // namespace

TEST_CASE("grammar parses and prints back") {
    CHECK(parse_family("const:p=0.25").grammar() == "const:p=0.25");
    CHECK(parse_family("harmonic:B=2").grammar() == "harmonic:B=2");
    CHECK(parse_family("lambda:K=2,B=2").grammar() == "lambda:K=2,B=2");
    CHECK(parse_family(" lambda: K = 3 , B = 1.5 ").grammar() == "lambda:K=3,B=1.5");
    CHECK(parse_family("loglog:beta=1.5").grammar() == "loglog:beta=1.5");
    const auto t = parse_family("table:" + kData + "/small.csv");
    CHECK(t.kind() == FamilyKind::Table);
    CHECK(t.grammar() == "table:" + kData + "/small.csv");
}

TEST_CASE("grammar errors name the offending token") {
    CHECK(error_of("bogus:x=1").find("bogus") != std::string::npos);
    CHECK(error_of("const:p=abc").find("abc") != std::string::npos);
    CHECK(error_of("harmonic:C=2").find("C") != std::string::npos);
    CHECK(error_of("lambda:K=2.5,B=2").find("2.5") != std::string::npos);
    CHECK(error_of("lambda:K=2").find("B") != std::string::npos);
    CHECK(error_of("const").find("const") != std::string::npos);
    CHECK(error_of("const:p=0.1,p=0.2").find("duplicate") != std::string::npos);
    CHECK_THROWS_AS(parse_family("lambda:K=5,B=2"), ConfigError);
    CHECK_THROWS_AS(parse_family("const:p=-0.1"), ConfigError);
}

TEST_CASE("bias values and clamping") {
    const auto hb2 = BiasFamily::harmonic(2.0);
    CHECK(hb2.p_at(1) == doctest::Approx(0.49));
    CHECK(hb2.p_at(2) == doctest::Approx(0.25));
    CHECK(hb2.p_at(4) == doctest::Approx(0.125));
    CHECK(BiasFamily::constant(0.7).p_at(10) == doctest::Approx(0.49));
    CHECK(BiasFamily::constant(1.0 / 6.0).p_at(1000) == doctest::Approx(1.0 / 6.0));
    CHECK_THROWS_AS(hb2.p_at(0), DomainError);

    // Lambda with K = 2 at i = 10: (1/10 + B/(10 log 10)) / 4
    const auto l2 = BiasFamily::lambda(2, 2.0);
    CHECK(l2.p_at(10) == doctest::Approx((0.1 + 2.0 / (10.0 * std::log(10.0))) / 4.0));
    const auto ll = BiasFamily::loglog(2.0);
    const double x = 100.0;
    CHECK(ll.p_at(100) ==
          doctest::Approx(0.25 * (1.0 / x + 1.0 / (x * std::pow(std::log(std::log(x)), 2.0)))));
}

TEST_CASE("start indices of the iterated-log families") {
    CHECK(BiasFamily::harmonic(2.0).start_index() == 1);
    CHECK(BiasFamily::lambda(1, 2.0).start_index() == 1);
    CHECK(BiasFamily::lambda(2, 2.0).start_index() == 3);
    CHECK(BiasFamily::lambda(3, 2.0).start_index() == 16);
    CHECK(BiasFamily::lambda(4, 2.0).start_index() == 3814280);
    CHECK(BiasFamily::loglog(2.0).start_index() == 16);
    // Below the start index the family is flat.
    const auto l3 = BiasFamily::lambda(3, 2.0);
    CHECK(l3.p_at(2) == l3.p_at(16));
}

TEST_CASE("finite head overrides") {
    const auto f = BiasFamily::constant(0.1).with_head({0.3, 0.2});
    CHECK(f.p_at(1) == doctest::Approx(0.3));
    CHECK(f.p_at(2) == doctest::Approx(0.2));
    CHECK(f.p_at(3) == doctest::Approx(0.1));
    CHECK(f.head().size() == 2);
}

TEST_CASE("odds ratio properties") {
    for (double p = 0.0; p < 0.5; p += 0.01) {
        const double u = odds_ratio(p);
        CHECK(u > 0.0);
        CHECK(u <= 1.0);
        CHECK(std::log(u) == doctest::Approx(log_odds_ratio(p)).epsilon(1e-12));
    }
    CHECK(odds_ratio(1.0 / 6.0) == doctest::Approx(0.5));
    CHECK(odds_ratio(1.0 / 3.0) == doctest::Approx(0.2));
    // Small p: log U = -4p + O(p^3), which naive log loses.
    CHECK(log_odds_ratio(1e-12) == doctest::Approx(-4e-12).epsilon(1e-9));
}

TEST_CASE("log prefix products match direct sums") {
    const ChainEnv env(BiasFamily::lambda(2, 2.0));
    double direct = 0.0;
    for (Level i = 1; i <= 5000; ++i) {
        direct += log_odds_ratio(env.p_at(i));
        if (i % 997 == 0 || i == 5000) {
            CHECK(env.log_prefix_product(i) == doctest::Approx(direct).epsilon(1e-12));
        }
    }
    // HB2 telescopes: U_2 ... U_k = 2 / (k (k + 1)).
    const ChainEnv hb2(BiasFamily::harmonic(2.0));
    const double lu1 = log_odds_ratio(0.49);
    for (Level k : {2, 10, 1000, 100000}) {
        const double kk = static_cast<double>(k);
        CHECK(hb2.log_prefix_product(k) - lu1 ==
              doctest::Approx(std::log(2.0 / (kk * (kk + 1.0)))).epsilon(1e-12));
    }
}

TEST_CASE("table files") {
    const auto t = read_table(kData + "/small.csv");
    CHECK(t.entries().size() == 3);
    CHECK(t.p_at(2) == doctest::Approx(0.2));
    CHECK(t.tail_rule() == TailRule::RepeatLast);
    CHECK(t.p_at(50) == doctest::Approx(0.125));
    const auto z = read_table(kData + "/flat.csv");
    CHECK(z.tail_rule() == TailRule::Zero);
    CHECK(z.p_at(5000) == 0.0);
    CHECK_THROWS_AS(read_table(kData + "/gap.csv"), ConfigError);
    CHECK_THROWS_AS(read_table(kData + "/missing.csv"), ConfigError);
    const auto strict = BiasFamily::table({0.1, 0.2}, std::nullopt);
    CHECK_THROWS_AS(strict.p_at(3), ConfigError);
}

TEST_CASE("transience verdicts") {
    CHECK(transience_verdict(BiasFamily::constant(1.0 / 6.0)).outcome == Transience::Transient);
    CHECK(transience_verdict(BiasFamily::constant(0.0)).outcome == Transience::Recurrent);
    CHECK(transience_verdict(BiasFamily::harmonic(2.0)).outcome == Transience::Transient);
    CHECK(transience_verdict(BiasFamily::harmonic(1.0)).outcome == Transience::Recurrent);
    for (int k = 1; k <= 4; ++k) {
        CHECK(transience_verdict(BiasFamily::lambda(k, 1.0)).outcome == Transience::Recurrent);
        CHECK(transience_verdict(BiasFamily::lambda(k, 0.5)).outcome == Transience::Recurrent);
        CHECK(transience_verdict(BiasFamily::lambda(k, 2.0)).outcome == Transience::Transient);
    }
    CHECK(transience_verdict(BiasFamily::loglog(0.5)).outcome == Transience::Transient);
    CHECK(transience_verdict(read_table(kData + "/flat.csv")).outcome == Transience::Recurrent);
    CHECK(transience_verdict(read_table(kData + "/harmonic2.csv")).outcome ==
          Transience::Transient);
    CHECK(transience_verdict(read_table(kData + "/borderline.csv")).outcome ==
          Transience::Unknown);
}

TEST_CASE("slower and quicker") {
    const auto cp6 = BiasFamily::constant(1.0 / 6.0);
    const auto cp3 = BiasFamily::constant(0.3);
    CHECK(is_slower(cp6, cp3, 1000));
    CHECK_FALSE(is_slower(cp3, cp6, 1000));
    CHECK(is_slower(BiasFamily::harmonic(2.0), BiasFamily::harmonic(3.0), 1000));
}
