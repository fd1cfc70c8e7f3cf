// Acceptance checks: one PASS/FAIL line per criterion.
//
// usage: acceptance <cutwalk-cli> <work-dir> [--known-failure N ...]
//
// The exit status is nonzero if any criterion fails that is not listed as a
// known failure. Known failures still print FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cutwalk/classify.hpp"
#include "cutwalk/dvals.hpp"
#include "cutwalk/format.hpp"
#include "cutwalk/laws.hpp"
#include "cutwalk/simulate.hpp"
#include "cutwalk/stats.hpp"

namespace fs = std::filesystem;
using namespace cutwalk;

namespace {

struct Result {
    bool pass = false;
    std::string detail;
};

std::string cli_path;
fs::path work;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int shell(const std::string& cmd) {
    const int rc = std::system((cmd + " 2>/dev/null").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string fmt(double v) { return format_double(v); }

const BiasFamily cp6 = BiasFamily::constant(1.0 / 6.0);
const BiasFamily cp3 = BiasFamily::constant(0.3);

std::string criterion6_command(int workers, const fs::path& out) {
    return cli_path +
           " simulate --family const:p=0.1666667 --levels 20 --eps 0.0009765625 "
           "--replicas 100000 --seed 42 --pairs 10:20 --workers " +
           std::to_string(workers) + " --out " + out.string();
}

// ---------------------------------------------------------------------------

Result closed_forms() {
    const ChainEnv a(cp6);
    const ChainEnv b(cp3);
    bool ok = true;
    double worst = 0.0;
    for (Level m : {0, 1, 2, 10, 100, 1000}) {
        const auto da = d_limit(a, m, 1e-12);
        const auto db = d_limit(b, m, 1e-12);
        ok = ok && da.contains(2.0) && db.contains(4.0 / 3.0) && da.width() <= 1e-12 &&
             db.width() <= 1e-12;
        worst = std::max({worst, da.width(), db.width()});
    }
    const double c6 = cutpoint_prob(a, 20).value;
    const double s6 = strong_cutpoint_prob(a, 20).value;
    const double c3 = cutpoint_prob(b, 20).value;
    const double s3 = strong_cutpoint_prob(b, 20).value;
    ok = ok && std::abs(c6 - 0.5) <= 1e-12 && std::abs(s6 - 1.0 / 3.0) <= 1e-12 &&
         std::abs(c3 - 0.75) <= 1e-12 && std::abs(s3 - 0.6) <= 1e-12;
    return {ok, "widest bracket " + fmt(worst) + "; cut " + fmt(c6) + ", " + fmt(c3) +
                    "; strong " + fmt(s6) + ", " + fmt(s3)};
}

Result identities() {
    const std::vector<std::string> named{"const:p=0.1666667", "const:p=0.3", "harmonic:B=2",
                                         "lambda:K=2,B=2", "loglog:beta=2", "loglog:beta=1",
                                         "loglog:beta=0.5", "loglog:beta=1.5"};
    double worst_rec = 0.0;
    double worst_prod = 0.0;
    double worst_p = 0.0;
    for (const auto& g : named) {
        const ChainEnv env(parse_family(g));
        const auto d = d_profile(env, 10000);
        for (Level n = 1; n <= 10000; ++n) {
            const double dn = d[static_cast<std::size_t>(n)].mid();
            const double dp = d[static_cast<std::size_t>(n - 1)].mid();
            worst_rec = std::max(worst_rec, std::abs(env.u_at(n) * dn - (dp - 1.0)) / dn);
            const double rebuilt = 1.0 + env.u_at(n) * dn;
            worst_p = std::max(worst_p, std::abs(recover_p_from_d(rebuilt, dn) - env.p_at(n)));
        }
        for (Level m : {0, 1, 17, 500, 4000}) {
            for (Level len : {1, 2, 3, 50, 999, 2000}) {
                const double x = d_between(env, m, m + len);
                const double y = d_between_via_product(env, m, m + len);
                worst_prod = std::max(worst_prod, std::abs(x - y) / x);
            }
        }
    }
    const bool ok = worst_rec <= 1e-9 && worst_prod <= 1e-12 && worst_p <= 1e-12;
    return {ok, "recursion " + fmt(worst_rec) + ", product form " + fmt(worst_prod) +
                    ", bias recovery " + fmt(worst_p)};
}

Result gamblers_ruin() {
    const ChainEnv env(cp6);
    double worst = 0.0;
    for (int n = 3; n <= 50; ++n) {
        const double rho = 0.5;
        const double ref = (rho - std::pow(rho, n)) / (1.0 - std::pow(rho, n));
        worst = std::max(worst, std::abs(hitting_prob(env, 0, 1, n) - ref));
    }
    const double p013 = hitting_prob(env, 0, 1, 3);
    const bool ok = worst <= 1e-12 && std::abs(p013 - 3.0 / 7.0) <= 1e-15;
    return {ok, "max error " + fmt(worst) + "; p(0,1,3) = " + fmt(p013)};
}

Result asymptotes() {
    const ChainEnv hb2(BiasFamily::harmonic(2.0));
    const auto d = d_limit(hb2, 100000, 1e-10);
    const bool hb_ok = d.lo / 1e5 >= 0.9 && d.hi / 1e5 <= 1.1;

    auto band = [](const ChainEnv& env, auto shape) {
        const auto a = d_limit(env, 10000, 1e-8);
        const auto b = d_limit(env, 100000, 1e-8);
        const double lo = std::min(a.lo / shape(1e4), b.lo / shape(1e5));
        const double hi = std::max(a.hi / shape(1e4), b.hi / shape(1e5));
        return std::pair{lo, hi};
    };
    const ChainEnv l2(BiasFamily::lambda(2, 2.0));
    const auto [l2lo, l2hi] = band(l2, [](double k) { return k * std::log(k); });
    const ChainEnv ll(BiasFamily::loglog(2.0));
    const auto [lllo, llhi] =
        band(ll, [](double k) { return k * std::pow(std::log(std::log(k)), 2.0); });
    const bool ok = hb_ok && l2hi <= 2.0 * l2lo && llhi <= 2.0 * lllo;
    return {ok, "HB2 D(1e5)/1e5 in [" + fmt(d.lo / 1e5) + ", " + fmt(d.hi / 1e5) +
                    "]; L2B2 ratio in [" + fmt(l2lo) + ", " + fmt(l2hi) +
                    "]; loglog beta=2 ratio in [" + fmt(lllo) + ", " + fmt(llhi) + "]"};
}

Result classifier_table() {
    const std::vector<std::pair<std::string, const char*>> table{
        {"harmonic:B=1.5", "INFINITE_STRONG_CUTPOINTS"},
        {"harmonic:B=2", "INFINITE_STRONG_CUTPOINTS"},
        {"harmonic:B=3", "INFINITE_STRONG_CUTPOINTS"},
        {"lambda:K=2,B=2", "FINITE_CUTPOINTS"},
        {"loglog:beta=0.5", "INFINITE_STRONG_CUTPOINTS"},
        {"loglog:beta=1", "INFINITE_STRONG_CUTPOINTS"},
        {"loglog:beta=1.5", "FINITE_CUTPOINTS"},
        {"lambda:K=1,B=1", "RECURRENT"},
        {"lambda:K=2,B=1", "RECURRENT"},
        {"lambda:K=3,B=1", "RECURRENT"},
        {"lambda:K=4,B=1", "RECURRENT"},
        {"const:p=0.1666667", "INFINITE_STRONG_CUTPOINTS"},
    };
    int right = 0;
    std::string wrong;
    for (const auto& [g, want] : table) {
        const auto got = to_string(classify(parse_family(g)).outcome);
        if (std::string(got) == want) {
            ++right;
        } else {
            wrong += " " + g + "->" + got;
        }
    }
    return {right == static_cast<int>(table.size()),
            std::to_string(right) + "/" + std::to_string(table.size()) + " match" + wrong};
}

Result monte_carlo() {
    const auto out = work / "c6_w4.jsonl";
    if (const int rc = shell(criterion6_command(4, out)); rc != 0) {
        return {false, "simulate exited " + std::to_string(rc)};
    }
    const auto c = census_from_jsonl(slurp(out));
    const ChainEnv env(cp6);
    const auto cmp = compare_census_to_exact(c, env);
    const auto& s20 = cmp.sites[19];
    const auto g_lt = chi_square_geometric(c.site(20).local_time_hist, 1.0 / 3.0);
    const auto g_up = chi_square_geometric(c.site(20).upcross_hist, 0.5);
    const auto& pair = cmp.pairs.at(0);
    const bool ok = c.horizon == 30 && std::abs(s20.z_cut) <= 4.0 && std::abs(s20.z_strong) <= 4.0 &&
                    g_lt.p_value && *g_lt.p_value > 1e-3 && g_up.p_value && *g_up.p_value > 1e-3 &&
                    std::abs(pair.exact_cut - 0.2501221) <= 1e-7 && std::abs(pair.z_cut) <= 4.0;
    return {ok, "H = " + std::to_string(c.horizon) + "; z_cut " + fmt(s20.z_cut) + ", z_strong " +
                    fmt(s20.z_strong) + "; GOF p " + fmt(g_lt.p_value.value_or(-1)) + ", " +
                    fmt(g_up.p_value.value_or(-1)) + "; pair freq " + fmt(pair.freq_cut) +
                    " z " + fmt(pair.z_cut)};
}

Result censoring() {
    const ChainEnv env(cp6);
    WalkConfig cfg;
    cfg.monitored_max = 20;
    cfg.eps_censor = 0.0009765625;
    cfg.replicas = 100000;
    cfg.master_seed = 42;
    const auto near = prepare_walk(env, cfg);
    cfg.eps_censor /= 10.0;
    const auto far = prepare_walk(env, cfg);
    std::int64_t flips = 0;
    for (std::int64_t id = 0; id < cfg.replicas; ++id) {
        const auto a = run_replica(near, id);
        const auto b = run_replica(far, id);
        for (std::size_t r = 1; r <= 20; ++r) flips += a.is_cutpoint[r] != b.is_cutpoint[r];
    }
    const double frac = static_cast<double>(flips) / (20.0 * static_cast<double>(cfg.replicas));
    return {frac <= 0.005, "H " + std::to_string(near.horizon) + " -> " +
                               std::to_string(far.horizon) + ", flipped fraction " + fmt(frac)};
}

Result determinism() {
    const auto one = work / "c6_w1.jsonl";
    const auto eight = work / "c6_w8.jsonl";
    if (shell(criterion6_command(1, one)) != 0 || shell(criterion6_command(8, eight)) != 0) {
        return {false, "simulate failed"};
    }
    const bool same = slurp(one) == slurp(eight);
    const auto h1 = nlohmann::json::parse(slurp(one.string() + ".manifest.json"))["payload_hash"];
    const auto h8 = nlohmann::json::parse(slurp(eight.string() + ".manifest.json"))["payload_hash"];
    return {same && h1 == h8, std::string(same ? "identical" : "different") + " payloads, hash " +
                                  h1.get<std::string>() + " / " + h8.get<std::string>()};
}

Result monotonicity() {
    const ChainEnv a(cp6);
    const ChainEnv b(cp3);
    const auto da = d_profile(a, 1000);
    const auto db = d_profile(b, 1000);
    double margin = INFINITY;
    for (std::size_t i = 0; i < da.size(); ++i) margin = std::min(margin, da[i].lo - db[i].hi);
    return {is_slower(cp6, cp3, 1000) && margin >= 0.0,
            "min over levels of D_cp6.lo - D_cp3.hi = " + fmt(margin)};
}

Result polfeldt() {
    const double r = polfeldt_check(2.0, 1e8, 1e-8);
    return {r >= 0.8 && r <= 1.2, "ratio at x = 1e8 is " + fmt(r) + ", band [0.8, 1.2]"};
}

Result equiconvergence() {
    // Band recorded from runs over N = 2^2 .. 2^16.
    const double c = 0.5;
    const double big_c = 2.0;
    const ChainEnv env(BiasFamily::harmonic(2.0));
    std::vector<Level> ns;
    for (int k = 2; k <= 16; ++k) ns.push_back(Level{1} << k);
    const auto ps = partial_sums_at(env, ns);
    double lo = INFINITY;
    double hi = 0.0;
    for (std::size_t i = 1; i < ns.size(); ++i) {
        const double r = (ps.criterion[i] - ps.criterion[i - 1]) /
                         (ps.transform[i] - ps.transform[i - 1]);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    const int doublings = static_cast<int>(ns.size()) - 1;
    return {doublings >= 4 && lo >= c && hi <= big_c,
            std::to_string(doublings) + " doublings, increment ratio in [" + fmt(lo) + ", " +
                fmt(hi) + "] within [" + fmt(c) + ", " + fmt(big_c) + "]"};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::fprintf(stderr, "usage: %s <cutwalk-cli> <work-dir> [--known-failure N ...]\n", argv[0]);
        return 2;
    }
    cli_path = argv[1];
    work = argv[2];
    fs::create_directories(work);
    std::set<int> known;
    for (int i = 3; i + 1 < argc; i += 2) {
        if (std::string(argv[i]) == "--known-failure") known.insert(std::atoi(argv[i + 1]));
    }

    struct Criterion {
        std::string name;
        std::function<Result()> run;
        double time_limit;  // seconds
    };
    const std::vector<Criterion> criteria{
        {"closed forms of the constant families", closed_forms, 1.0},
        {"identity suite", identities, INFINITY},
        {"gambler's ruin", gamblers_ruin, INFINITY},
        {"asymptotic growth of D", asymptotes, 120.0},
        {"classifier table", classifier_table, INFINITY},
        {"Monte Carlo against exact laws", monte_carlo, 60.0},
        {"censoring soundness", censoring, INFINITY},
        {"determinism across workers", determinism, INFINITY},
        {"monotonicity in the bias", monotonicity, INFINITY},
        {"slowly varying tail ratio", polfeldt, 60.0},
        {"equiconvergence band", equiconvergence, INFINITY},
    };
    int passed = 0;
    int unexpected = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        const auto t0 = std::chrono::steady_clock::now();
        Result o;
        try {
            o = criteria[i].run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > criteria[i].time_limit) {
            o.pass = false;
            o.detail += "; over the " + fmt(criteria[i].time_limit) + "s limit";
        }
        passed += o.pass;
        if (!o.pass && !known.count(id)) ++unexpected;
        std::printf("criterion %2d %s: %s (%s) [%.2fs]%s\n", id, o.pass ? "PASS" : "FAIL",
                    criteria[i].name.c_str(), o.detail.c_str(), secs,
                    !o.pass && known.count(id) ? " known failure" : "");
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", passed, criteria.size());
    return unexpected == 0 ? 0 : 1;
}
